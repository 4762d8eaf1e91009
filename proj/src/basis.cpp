#include "htde/basis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "htde/errors.hpp"

namespace htde {

Matrix orthonormal_site_factors(Index n) {
  // Gram-Schmidt on 1, x, x^2, ... over {0, .., n-1} with uniform probability
  // weight: (1/n) sum_x f_i(x) f_j(x) = delta_ij.
  Matrix v(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index x = 0; x < n; ++x) v(x, j) = std::pow(double(x), double(j));
  Matrix q(n, n);
  for (Index j = 0; j < n; ++j) {
    Vector col = v.col(j);
    for (Index i = 0; i < j; ++i) col -= (q.col(i).dot(v.col(j)) / double(n)) * q.col(i);
    const double norm = std::sqrt(col.squaredNorm() / double(n));
    if (norm <= 0.0)
      throw std::runtime_error("orthonormal_site_factors: degenerate moment matrix");
    q.col(j) = col / norm;
  }
  return q;
}

SketchBasis::SketchBasis(NodeId node, SketchSide side, Index alphabet,
                         std::vector<Index> host_sites,
                         std::vector<BasisFunction> functions)
    : node_(node),
      side_(side),
      alphabet_(alphabet),
      host_sites_(std::move(host_sites)),
      functions_(std::move(functions)),
      width_(static_cast<Index>(functions_.size())),
      one_hot_(false),
      factor_values_(orthonormal_site_factors(alphabet)) {
  normalizer_ = std::pow(double(alphabet_), -0.5 * double(host_sites_.size()));
}

SketchBasis SketchBasis::one_hot(NodeId node, Index alphabet,
                                 std::vector<Index> host_sites) {
  SketchBasis b;
  b.node_ = node;
  b.side_ = SketchSide::cluster;
  b.alphabet_ = alphabet;
  b.host_sites_ = std::move(host_sites);
  b.one_hot_ = true;
  b.normalizer_ = 1.0;
  Index w = 1;
  for (std::size_t i = 0; i < b.host_sites_.size(); ++i) w *= alphabet;
  b.width_ = w;
  return b;
}

void SketchBasis::eval_raw(std::span<const std::uint8_t> config,
                           Eigen::Ref<Vector> out) const {
  if (one_hot_) {
    out.setZero();
    Index idx = 0;
    for (Index s : host_sites_) idx = idx * alphabet_ + config[static_cast<std::size_t>(s - 1)];
    out(idx) = 1.0;
    return;
  }
  for (Index j = 0; j < width_; ++j) {
    const BasisFunction& f = functions_[static_cast<std::size_t>(j)];
    double v = 1.0;
    for (std::size_t i = 0; i < f.sites.size(); ++i)
      v *= factor_values_(config[static_cast<std::size_t>(f.sites[i] - 1)], f.factors[i]);
    out(j) = v;
  }
}

void SketchBasis::eval(std::span<const std::uint8_t> config,
                       Eigen::Ref<Vector> out) const {
  eval_raw(config, out);
  if (!one_hot_) out *= normalizer_;
}

void SketchBasis::eval_host(std::span<const std::uint8_t> host_config,
                            Eigen::Ref<Vector> out) const {
  if (host_config.size() != host_sites_.size())
    throw std::invalid_argument("SketchBasis::eval_host: slice does not cover the host sites");
  if (one_hot_) {
    out.setZero();
    Index idx = 0;
    for (std::size_t i = 0; i < host_config.size(); ++i) idx = idx * alphabet_ + host_config[i];
    out(idx) = 1.0;
    return;
  }
  // map host position by site
  for (Index j = 0; j < width_; ++j) {
    const BasisFunction& f = functions_[static_cast<std::size_t>(j)];
    double v = 1.0;
    for (std::size_t i = 0; i < f.sites.size(); ++i) {
      const auto pos = std::lower_bound(host_sites_.begin(), host_sites_.end(), f.sites[i]) -
                       host_sites_.begin();
      v *= factor_values_(host_config[static_cast<std::size_t>(pos)], f.factors[i]);
    }
    out(j) = v * normalizer_;
  }
}

namespace {

std::vector<Index> eligible_sites(const DimensionTree& tree, NodeId node, SketchSide side,
                                  const SketchOptions& opt) {
  const auto [first, last] = tree.cluster_bounds(node);
  const std::vector<Index> host =
      side == SketchSide::cluster ? tree.cluster(node) : tree.complement(node);
  const int radius =
      side == SketchSide::cluster ? opt.cluster_radius : opt.locality_radius;
  if (side == SketchSide::cluster && radius <= 0) return host;  // unrestricted
  if (host.empty()) return host;

  if (!opt.adjacency.empty()) {
    // Graph distance: BFS out of the cluster (complement side) or out of the
    // complement into the cluster (cluster side).
    const Index d = tree.dimension();
    if (static_cast<Index>(opt.adjacency.size()) != d)
      throw std::invalid_argument("SketchOptions: adjacency must list all sites");
    std::vector<int> dist(static_cast<std::size_t>(d) + 1, -1);
    std::deque<Index> queue;
    const bool seed_in_cluster = side == SketchSide::complement;
    for (Index s = 1; s <= d; ++s) {
      const bool in_cluster = s >= first && s <= last;
      if (in_cluster == seed_in_cluster) {
        dist[static_cast<std::size_t>(s)] = 0;
        queue.push_back(s);
      }
    }
    while (!queue.empty()) {
      const Index s = queue.front();
      queue.pop_front();
      if (dist[static_cast<std::size_t>(s)] >= radius) continue;
      for (Index nb : opt.adjacency[static_cast<std::size_t>(s - 1)]) {
        if (dist[static_cast<std::size_t>(nb)] < 0) {
          dist[static_cast<std::size_t>(nb)] = dist[static_cast<std::size_t>(s)] + 1;
          queue.push_back(nb);
        }
      }
    }
    std::vector<Index> out;
    for (Index s : host) {
      const int ds = dist[static_cast<std::size_t>(s)];
      if (ds > 0 && ds <= radius) out.push_back(s);
    }
    return out;
  }

  // Index-window distance to the cluster range [first, last].
  std::vector<Index> out;
  for (Index s : host) {
    Index ds;
    if (side == SketchSide::complement)
      ds = s < first ? first - s : s - last;
    else
      ds = std::min(s - first, last - s) + 1;  // depth measured from the cluster ends
    if (ds <= radius) out.push_back(s);
  }
  return out;
}

}  // namespace

SketchBasis build_cluster_basis(const DimensionTree& tree, NodeId node, SketchSide side,
                                const SketchOptions& opt) {
  if (opt.t < 1) throw std::invalid_argument("SketchOptions: t must be >= 1");
  if (opt.locality_radius < 0 || opt.cluster_radius < 0)
    throw std::invalid_argument("SketchOptions: radii must be >= 0");
  const Index n = tree.alphabet();
  std::vector<Index> host =
      side == SketchSide::cluster ? tree.cluster(node) : tree.complement(node);
  const std::vector<Index> eligible = eligible_sites(tree, node, side, opt);

  // Width check up front: sum over subset sizes of C(|eligible|, s) (n-1)^s.
  const Index m = static_cast<Index>(eligible.size());
  const int tmax = static_cast<int>(std::min<Index>(opt.t, m));
  double width = 1.0;
  double binom = 1.0;
  for (int s = 1; s <= tmax; ++s) {
    binom = binom * double(m - s + 1) / double(s);
    width += binom * std::pow(double(n - 1), s);
  }
  if (width > double(opt.width_cap))
    throw ConfigError("sketch width " + std::to_string(static_cast<long long>(width)) +
                      " at node " + to_string(node) + " exceeds the cap " +
                      std::to_string(opt.width_cap) +
                      "; reduce t or the locality radius");

  std::vector<BasisFunction> functions;
  functions.reserve(static_cast<std::size_t>(width));
  functions.push_back({});  // constant
  std::vector<Index> subset;
  std::vector<int> combo;

  // All factor-index assignments for the current subset, lexicographic.
  auto emit_combos = [&](auto&& self, std::size_t pos) -> void {
    if (pos == subset.size()) {
      functions.push_back({subset, combo});
      return;
    }
    for (int f = 1; f < n; ++f) {
      combo.push_back(f);
      self(self, pos + 1);
      combo.pop_back();
    }
  };
  // Subsets of a given size in lexicographic order over eligible sites.
  auto emit_subsets = [&](auto&& self, std::size_t start, int remaining) -> void {
    if (remaining == 0) {
      emit_combos(emit_combos, 0);
      return;
    }
    for (std::size_t i = start; i + static_cast<std::size_t>(remaining) <= eligible.size(); ++i) {
      subset.push_back(eligible[i]);
      self(self, i + 1, remaining - 1);
      subset.pop_back();
    }
  };
  for (int s = 1; s <= tmax; ++s) emit_subsets(emit_subsets, 0, s);

  return SketchBasis(node, side, n, std::move(host), std::move(functions));
}

BasisSet build_bases(const DimensionTree& tree, const SketchOptions& opt) {
  BasisSet set;
  set.cluster_side.reserve(static_cast<std::size_t>(tree.node_count()));
  set.complement_side.reserve(static_cast<std::size_t>(tree.node_count()));
  for (Index slot = 0; slot < tree.node_count(); ++slot) {
    const NodeId node = tree.node_at_slot(slot);
    set.complement_side.push_back(
        build_cluster_basis(tree, node, SketchSide::complement, opt));
    if (tree.is_leaf(node)) {
      if (tree.leaf_sites() > opt.one_hot_max_sites)
        throw ConfigError("leaf clusters of " + std::to_string(tree.leaf_sites()) +
                          " sites exceed the one-hot limit of " +
                          std::to_string(opt.one_hot_max_sites));
      set.cluster_side.push_back(
          SketchBasis::one_hot(node, tree.alphabet(), tree.cluster(node)));
    } else if (tree.is_root(node)) {
      // Root cluster side is never sketched; keep a width-1 placeholder so
      // the vector stays slot-indexed.
      set.cluster_side.push_back(SketchBasis(node, SketchSide::cluster, tree.alphabet(),
                                             tree.cluster(node), {BasisFunction{}}));
    } else {
      set.cluster_side.push_back(build_cluster_basis(tree, node, SketchSide::cluster, opt));
    }
  }
  return set;
}

Matrix basis_matrix(const SketchBasis& basis, Index entry_cap) {
  const Index n = basis.alphabet();
  const Index m = static_cast<Index>(basis.host_sites().size());
  double rows = 1.0;
  for (Index i = 0; i < m; ++i) rows *= double(n);
  if (rows * double(basis.width()) > double(entry_cap))
    throw CapacityError("basis_matrix: host domain of " + std::to_string(m) +
                        " sites exceeds the entry budget");
  const Index num_rows = static_cast<Index>(rows);
  Matrix out(num_rows, basis.width());
  std::vector<std::uint8_t> host_config(static_cast<std::size_t>(m), 0);
  Vector row(basis.width());
  for (Index r = 0; r < num_rows; ++r) {
    Index rem = r;
    for (Index i = m - 1; i >= 0; --i) {  // first host site slowest
      host_config[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rem % n);
      rem /= n;
    }
    basis.eval_host(host_config, row);
    out.row(r) = row.transpose();
  }
  return out;
}

}  // namespace htde
