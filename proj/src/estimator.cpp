#include "htde/estimator.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace htde {

std::optional<Index> RankSchedule::requested(const DimensionTree& tree, NodeId node) const {
  const auto it = per_node.find(tree.node_slot(node));
  if (it != per_node.end()) return it->second;
  if (per_level.empty()) return std::nullopt;
  if (static_cast<int>(per_level.size()) < tree.levels())
    throw std::invalid_argument("RankSchedule: need one rank per level 1.." +
                                std::to_string(tree.levels()));
  if (node.level == 0) return 1;
  return per_level[static_cast<std::size_t>(node.level - 1)];
}

void CoreSolveReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CoreSolveReport: cannot open " + path.string());
  out << "level,k,retained_rank,sigma_ratio,residual,rank_clamped,near_singular\n";
  char buf[64];
  for (const NodeSolveInfo& info : nodes) {
    out << info.node.level << ',' << info.node.index << ',' << info.retained_rank << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", info.sigma_ratio);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", info.residual);
    out << buf << ',' << (info.rank_clamped ? 1 : 0) << ',' << (info.near_singular ? 1 : 0)
        << '\n';
  }
}

namespace {

struct TrimmedFactor {
  SvdResult svd;          // of the untrimmed moment matrix
  Index rank = 0;         // retained rank
  double sigma_ratio = 0.0;
  bool clamped = false;
  bool near_singular = false;

  Matrix v() const { return svd.V.leftCols(rank); }

  /// Pseudo-inverse of the rank-trimmed matrix; singular values below
  /// rel_tol * sigma_1 inside the retained block are dropped as well.
  Matrix pinv_trimmed(double rel_tol) const {
    Index keep = 0;
    const double cutoff = svd.S.size() > 0 ? rel_tol * svd.S(0) : 0.0;
    while (keep < rank && svd.S(keep) > cutoff && svd.S(keep) > 0.0) ++keep;
    if (keep == 0) return Matrix::Zero(svd.V.rows(), svd.U.rows());
    return svd.V.leftCols(keep) * svd.S.head(keep).cwiseInverse().asDiagonal() *
           svd.U.leftCols(keep).transpose();
  }

  Matrix trimmed() const {
    return svd.U.leftCols(rank) * svd.S.head(rank).asDiagonal() *
           svd.V.leftCols(rank).transpose();
  }
};

TrimmedFactor trim_factor(const Matrix& a, std::optional<Index> requested, double tau,
                          double warn_tol) {
  TrimmedFactor f;
  f.svd = svd(a);
  const Index full = f.svd.S.size();
  if (requested) {
    f.clamped = *requested > full;
    f.rank = std::min(*requested, full);
  } else {
    const double cutoff = full > 0 ? tau * f.svd.S(0) : 0.0;
    Index r = 0;
    while (r < full && f.svd.S(r) >= cutoff && f.svd.S(r) > 0.0) ++r;
    f.rank = std::max<Index>(1, r);
  }
  f.rank = std::max<Index>(1, f.rank);
  if (full > 0 && f.svd.S(0) > 0.0)
    f.sigma_ratio = f.svd.S(f.rank - 1) / f.svd.S(0);
  f.near_singular = f.sigma_ratio < warn_tol;
  return f;
}

}  // namespace

CoreSolve solve_core(const Matrix& a_left, const Matrix& a_right, const Tensor3& b,
                     Index rank, double rel_tol) {
  if (a_left.rows() != b.dim1())
    throw std::invalid_argument("solve_core: a_left rows do not match b.dim1");
  if (a_right.rows() != b.dim2())
    throw std::invalid_argument("solve_core: a_right rows do not match b.dim2");
  TrimmedFactor left = trim_factor(a_left, rank, 0.0, rel_tol);
  TrimmedFactor right = trim_factor(a_right, rank, 0.0, rel_tol);
  const Matrix pl = left.pinv_trimmed(rel_tol);
  const Matrix pr = right.pinv_trimmed(rel_tol);
  CoreSolve out{sandwich(pl, b, pr), std::move(left.svd), std::move(right.svd)};
  return out;
}

Tensor3 regauge(const Tensor3& g, const Matrix& v_left, const Matrix& v_right,
                const Matrix& v_self) {
  if (v_left.rows() != g.dim1())
    throw std::invalid_argument("regauge: v_left rows do not match g.dim1");
  if (v_right.rows() != g.dim2())
    throw std::invalid_argument("regauge: v_right rows do not match g.dim2");
  if (v_self.rows() != g.dim3())
    throw std::invalid_argument("regauge: v_self rows do not match g.dim3");
  return contract_third_mode(sandwich(v_left.transpose(), g, v_right.transpose()), v_self);
}

Matrix regauge_leaf(const Matrix& leaf_marginal, const Matrix& v_self) {
  if (leaf_marginal.cols() != v_self.rows())
    throw std::invalid_argument("regauge_leaf: shape mismatch");
  return leaf_marginal * v_self;
}

FitResult fit(const DimensionTree& tree, const MomentSet& moments,
              const RankSchedule& ranks, const FitOptions& options) {
  const Index count = tree.node_count();
  if (static_cast<Index>(moments.A.size()) != count ||
      static_cast<Index>(moments.B.size()) != count)
    throw std::invalid_argument("fit: moment set does not cover the tree");

  // Phase 1: per-node SVD of the moment matrix and retained subspace. The
  // root edge is rank 1 with an identity gauge, never trimmed.
  std::vector<TrimmedFactor> factors(static_cast<std::size_t>(count));
  std::vector<NodeSolveInfo> info(static_cast<std::size_t>(count));
  parallel_for_index(static_cast<std::size_t>(count), options.threads, [&](std::size_t slot) {
    const NodeId node = tree.node_at_slot(static_cast<Index>(slot));
    info[slot].node = node;
    if (tree.is_root(node)) {
      info[slot].retained_rank = 1;
      info[slot].sigma_ratio = 1.0;
      return;
    }
    const Matrix& a = moments.A[slot];
    if (a.size() == 0)
      throw std::invalid_argument("fit: missing moment matrix at " + to_string(node));
    factors[slot] = trim_factor(a, ranks.requested(tree, node), ranks.auto_tau,
                                options.near_singular_warn);
    info[slot].retained_rank = factors[slot].rank;
    info[slot].sigma_ratio = factors[slot].sigma_ratio;
    info[slot].rank_clamped = factors[slot].clamped;
    info[slot].near_singular = factors[slot].near_singular;
  });

  HierarchicalTensorNetwork net{tree, {}, {}};
  net.leaf_cores.resize(static_cast<std::size_t>(tree.nodes_at_level(tree.levels())));
  net.internal_cores.resize(static_cast<std::size_t>(count));

  // Phase 2: independent core solves.
  parallel_for_index(static_cast<std::size_t>(count), options.threads, [&](std::size_t slot) {
    const NodeId node = tree.node_at_slot(static_cast<Index>(slot));
    if (tree.is_leaf(node)) {
      net.leaf_cores[static_cast<std::size_t>(node.index - 1)] =
          regauge_leaf(moments.leaf_marginal(static_cast<Index>(slot)), factors[slot].v());
      return;
    }
    const auto [left, right] = tree.children(node);
    const std::size_t ls = static_cast<std::size_t>(tree.node_slot(left));
    const std::size_t rs = static_cast<std::size_t>(tree.node_slot(right));
    const Tensor3& b = moments.B[slot];
    const Matrix pl = factors[ls].pinv_trimmed(options.pinv_tol);
    const Matrix pr = factors[rs].pinv_trimmed(options.pinv_tol);
    const Tensor3 g = sandwich(pl, b, pr);

    const Matrix v_self =
        tree.is_root(node) ? Matrix::Identity(1, 1) : factors[slot].v();
    net.internal_cores[slot] = regauge(g, factors[ls].v(), factors[rs].v(), v_self);

    const double b_norm = b.frobenius_norm();
    if (b_norm > 0.0) {
      const Tensor3 reconstructed = sandwich(factors[ls].trimmed(), g, factors[rs].trimmed());
      info[slot].residual =
          (reconstructed.to_matrix() - b.to_matrix()).norm() / b_norm;
    } else {
      info[slot].residual = 0.0;
    }
  });

  return {std::move(net), CoreSolveReport{std::move(info)}};
}

}  // namespace htde
