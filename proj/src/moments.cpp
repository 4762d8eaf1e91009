#include "htde/moments.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "htde/errors.hpp"

namespace htde {

namespace {

void check_bases(const DimensionTree& tree, const BasisSet& bases) {
  const std::size_t count = static_cast<std::size_t>(tree.node_count());
  if (bases.cluster_side.size() != count || bases.complement_side.size() != count)
    throw std::invalid_argument("estimate_moments: basis set does not cover the tree");
}

struct MomentShapes {
  // finalization scale per target (normalizers / N applied once at the end)
  std::vector<double> a_scale;
  std::vector<double> b_scale;
};

MomentSet allocate_moments(const DimensionTree& tree, const BasisSet& bases,
                           MomentShapes& shapes, bool with_sums) {
  MomentSet m;
  const Index count = tree.node_count();
  m.A.resize(static_cast<std::size_t>(count));
  m.B.resize(static_cast<std::size_t>(count));
  shapes.a_scale.assign(static_cast<std::size_t>(count), 1.0);
  shapes.b_scale.assign(static_cast<std::size_t>(count), 1.0);
  for (Index slot = 0; slot < count; ++slot) {
    const NodeId node = tree.node_at_slot(slot);
    const SketchBasis& tb = bases.complement_side[static_cast<std::size_t>(slot)];
    if (!tree.is_root(node)) {
      const SketchBasis& sb = bases.cluster_side[static_cast<std::size_t>(slot)];
      m.A[static_cast<std::size_t>(slot)] = Matrix::Zero(sb.width(), tb.width());
      shapes.a_scale[static_cast<std::size_t>(slot)] = sb.normalizer() * tb.normalizer();
    }
    if (!tree.is_leaf(node)) {
      const auto [left, right] = tree.children(node);
      const SketchBasis& sl = bases.cluster_side[static_cast<std::size_t>(tree.node_slot(left))];
      const SketchBasis& sr = bases.cluster_side[static_cast<std::size_t>(tree.node_slot(right))];
      m.B[static_cast<std::size_t>(slot)] = Tensor3(sl.width(), sr.width(), tb.width());
      shapes.b_scale[static_cast<std::size_t>(slot)] =
          sl.normalizer() * sr.normalizer() * tb.normalizer();
    }
  }
  if (with_sums) {
    m.A_sums = m.A;
    m.B_sums = m.B;
  }
  return m;
}

}  // namespace

MomentSet estimate_moments(const DimensionTree& tree, const SampleSet& samples,
                           const BasisSet& bases, const EstimateOptions& options) {
  check_bases(tree, bases);
  if (samples.dimension() != tree.dimension() || samples.alphabet() != tree.alphabet())
    throw std::invalid_argument("estimate_moments: samples do not match the tree");
  if (samples.size() < 1)
    throw std::invalid_argument("estimate_moments: need at least one sample");
  const Index chunk = std::max<Index>(1, options.chunk);
  const Index count = tree.node_count();

  MomentShapes shapes;
  MomentSet m = allocate_moments(tree, bases, shapes, /*with_sums=*/true);

  // Per-chunk raw (unnormalized) evaluations, slot-indexed.
  std::vector<Matrix> cluster_eval(static_cast<std::size_t>(count));
  std::vector<Matrix> complement_eval(static_cast<std::size_t>(count));
  for (Index slot = 0; slot < count; ++slot) {
    const NodeId node = tree.node_at_slot(slot);
    complement_eval[static_cast<std::size_t>(slot)] =
        Matrix::Zero(bases.complement_side[static_cast<std::size_t>(slot)].width(), chunk);
    if (!tree.is_root(node))
      cluster_eval[static_cast<std::size_t>(slot)] =
          Matrix::Zero(bases.cluster_side[static_cast<std::size_t>(slot)].width(), chunk);
  }

  // Accumulation targets: one per stored A and one per stored B. Each target
  // touches only its own output, so the phase can run on any number of
  // threads without changing the result.
  struct Target {
    bool is_b;
    Index slot;
    Index left_slot = -1, right_slot = -1;
  };
  std::vector<Target> targets;
  for (Index slot = 0; slot < count; ++slot) {
    const NodeId node = tree.node_at_slot(slot);
    if (!tree.is_root(node)) targets.push_back({false, slot});
    if (!tree.is_leaf(node)) {
      const auto [left, right] = tree.children(node);
      targets.push_back({true, slot, tree.node_slot(left), tree.node_slot(right)});
    }
  }

  for (Index begin = 0; begin < samples.size(); begin += chunk) {
    const Index batch = std::min(chunk, samples.size() - begin);

    parallel_for_index(static_cast<std::size_t>(count), options.threads, [&](std::size_t s) {
      const Index slot = static_cast<Index>(s);
      const NodeId node = tree.node_at_slot(slot);
      Matrix& te = complement_eval[s];
      for (Index j = 0; j < batch; ++j)
        bases.complement_side[s].eval_raw(samples.config(begin + j), te.col(j));
      if (!tree.is_root(node)) {
        Matrix& se = cluster_eval[s];
        for (Index j = 0; j < batch; ++j)
          bases.cluster_side[s].eval_raw(samples.config(begin + j), se.col(j));
      }
#ifndef NDEBUG
      // Orthonormal sketches keep every per-sample contribution bounded:
      // ||s t^T||_2 = ||s|| ||t|| <= 1 after normalization.
      for (Index j = 0; j < batch; ++j) {
        const double tn = te.col(j).norm() * bases.complement_side[s].normalizer();
        assert(tn <= 1.0 + 1e-9);
        if (!tree.is_root(node)) {
          const double sn =
              cluster_eval[s].col(j).norm() * bases.cluster_side[s].normalizer();
          assert(sn <= 1.0 + 1e-9);
        }
      }
#endif
    });

    parallel_for_index(targets.size(), options.threads, [&](std::size_t ti) {
      const Target& target = targets[ti];
      const std::size_t s = static_cast<std::size_t>(target.slot);
      const auto te = complement_eval[s].leftCols(batch);
      if (!target.is_b) {
        m.A_sums[s].noalias() += cluster_eval[s].leftCols(batch) * te.transpose();
      } else {
        const auto le = cluster_eval[static_cast<std::size_t>(target.left_slot)].leftCols(batch);
        const auto re = cluster_eval[static_cast<std::size_t>(target.right_slot)].leftCols(batch);
        Tensor3& b = m.B_sums[s];
        Matrix scaled(re.rows(), batch);
        for (Index g = 0; g < b.dim3(); ++g) {
          scaled = re.array().rowwise() * te.row(g).array();
          b.slice_ref(g).noalias() += le * scaled.transpose();
        }
      }
    });
  }

  // Finalize: normalizers and the 1/N average, applied once.
  m.sample_count = samples.size();
  const double inv_n = 1.0 / double(samples.size());
  for (Index slot = 0; slot < count; ++slot) {
    const std::size_t s = static_cast<std::size_t>(slot);
    if (m.A[s].size() > 0) m.A[s] = m.A_sums[s] * (shapes.a_scale[s] * inv_n);
    if (m.B[s].size() > 0)
      m.B[s] = Tensor3::from_matrix(m.B_sums[s].to_matrix() * (shapes.b_scale[s] * inv_n),
                                    m.B_sums[s].dim1(), m.B_sums[s].dim2());
  }
  return m;
}

namespace {

/// Unfolding p(cluster; complement) of a dense tensor: rows enumerate the
/// cluster configurations, columns the complement ones, first site slowest on
/// both sides. Clusters are contiguous, so this is a stride permutation.
Matrix unfold(const Vector& density, Index n, Index d, Index first, Index last) {
  const Index mid_sites = last - first + 1;
  Index rows = 1, pre = 1, post = 1;
  for (Index i = 0; i < mid_sites; ++i) rows *= n;
  for (Index i = 1; i < first; ++i) pre *= n;
  for (Index i = last + 1; i <= d; ++i) post *= n;
  Matrix out(rows, pre * post);
  for (Index a = 0; a < pre; ++a)
    for (Index mid = 0; mid < rows; ++mid)
      for (Index z = 0; z < post; ++z)
        out(mid, a * post + z) = density((a * rows + mid) * post + z);
  return out;
}

}  // namespace

MomentSet moments_from_density(const DimensionTree& tree, const Vector& density,
                               const BasisSet& bases, Index entry_cap) {
  check_bases(tree, bases);
  const Index d = tree.dimension();
  const Index n = tree.alphabet();
  double total = 1.0;
  for (Index i = 0; i < d; ++i) {
    total *= double(n);
    if (total > double(entry_cap))
      throw CapacityError("moments_from_density: n^d exceeds the entry budget of " +
                          std::to_string(entry_cap) + " entries");
  }
  if (density.size() != static_cast<Index>(total))
    throw std::invalid_argument("moments_from_density: density has wrong length");

  MomentShapes shapes;
  MomentSet m = allocate_moments(tree, bases, shapes, /*with_sums=*/false);

  // Full sketch matrices and sketched unfoldings per node.
  const Index count = tree.node_count();
  std::vector<Matrix> smat(static_cast<std::size_t>(count));
  std::vector<Matrix> sketched(static_cast<std::size_t>(count));  // p(I;J) * T
  for (Index slot = 0; slot < count; ++slot) {
    const NodeId node = tree.node_at_slot(slot);
    const auto [first, last] = tree.cluster_bounds(node);
    const Matrix tmat = basis_matrix(bases.complement_side[static_cast<std::size_t>(slot)], entry_cap);
    sketched[static_cast<std::size_t>(slot)] = unfold(density, n, d, first, last) * tmat;
    if (!tree.is_root(node))
      smat[static_cast<std::size_t>(slot)] =
          basis_matrix(bases.cluster_side[static_cast<std::size_t>(slot)], entry_cap);
  }

  for (Index slot = 0; slot < count; ++slot) {
    const std::size_t s = static_cast<std::size_t>(slot);
    const NodeId node = tree.node_at_slot(slot);
    if (!tree.is_root(node)) m.A[s] = smat[s].transpose() * sketched[s];
    if (!tree.is_leaf(node)) {
      const auto [left, right] = tree.children(node);
      const std::size_t ls = static_cast<std::size_t>(tree.node_slot(left));
      const std::size_t rs = static_cast<std::size_t>(tree.node_slot(right));
      const Index rows_left = smat[ls].rows();
      const Index rows_right = smat[rs].rows();
      Tensor3 p3 = Tensor3::from_matrix(sketched[s], rows_left, rows_right);
      Tensor3& b = m.B[s];
      for (Index g = 0; g < b.dim3(); ++g)
        b.slice_ref(g).noalias() = smat[ls].transpose() * p3.slice(g) * smat[rs];
    }
  }
  return m;
}

MomentSet merge_moments(const DimensionTree& tree, const BasisSet& bases,
                        const MomentSet& a, const MomentSet& b) {
  if (a.sample_count == 0 || b.sample_count == 0)
    throw std::invalid_argument("merge_moments: both sets must be sample-based");
  if (a.A.size() != b.A.size())
    throw std::invalid_argument("merge_moments: incompatible moment sets");
  MomentShapes shapes;
  MomentSet out = allocate_moments(tree, bases, shapes, /*with_sums=*/true);
  out.sample_count = a.sample_count + b.sample_count;
  const double inv_n = 1.0 / double(out.sample_count);
  for (std::size_t s = 0; s < out.A.size(); ++s) {
    if (out.A[s].size() > 0) {
      out.A_sums[s] = a.A_sums[s] + b.A_sums[s];
      out.A[s] = out.A_sums[s] * (shapes.a_scale[s] * inv_n);
    }
    if (out.B[s].size() > 0) {
      out.B_sums[s] = Tensor3::from_matrix(a.B_sums[s].to_matrix() + b.B_sums[s].to_matrix(),
                                           a.B_sums[s].dim1(), a.B_sums[s].dim2());
      out.B[s] = Tensor3::from_matrix(out.B_sums[s].to_matrix() * (shapes.b_scale[s] * inv_n),
                                      out.B_sums[s].dim1(), out.B_sums[s].dim2());
    }
  }
  return out;
}

}  // namespace htde
