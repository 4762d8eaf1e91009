#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "htde/tensor.hpp"
#include "htde/tree.hpp"

namespace htde {

enum class SketchSide { cluster, complement };

/// One product function: non-constant single-site factors attached to a small
/// set of sites. An empty support is the constant function.
struct BasisFunction {
  std::vector<Index> sites;  // ascending, 1-based
  std::vector<int> factors;  // parallel to sites, values in [1, alphabet-1]
};

struct SketchOptions {
  int t = 4;                  // max number of non-constant factors per function
  int locality_radius = 4;    // complement side: eligible distance from the cluster
  int cluster_radius = 0;     // cluster side: 0 keeps every cluster site eligible
  Index width_cap = 20000;
  Index one_hot_max_sites = 4;
  // Optional 1-based site adjacency. When non-empty, eligibility uses graph
  // distance instead of the index window; useful for periodic lattices whose
  // couplings wrap around the serialized site order.
  std::vector<std::vector<Index>> adjacency;
};

/// Orthonormal sketch over one side of a tree node. The implied matrix over
/// the full host domain (all configurations of the host sites, first site
/// slowest) has orthonormal columns. Two kinds exist: product bases made of
/// single-site factors, and the one-hot basis used at leaf clusters.
class SketchBasis {
 public:
  SketchBasis(NodeId node, SketchSide side, Index alphabet,
              std::vector<Index> host_sites, std::vector<BasisFunction> functions);

  static SketchBasis one_hot(NodeId node, Index alphabet, std::vector<Index> host_sites);

  NodeId node() const { return node_; }
  SketchSide side() const { return side_; }
  Index alphabet() const { return alphabet_; }
  Index width() const { return width_; }
  bool is_one_hot() const { return one_hot_; }
  double normalizer() const { return normalizer_; }
  const std::vector<Index>& host_sites() const { return host_sites_; }
  const std::vector<BasisFunction>& functions() const { return functions_; }

  /// v(j) = j-th function evaluated at the configuration (normalized so the
  /// full host-domain column has unit norm). `config` spans all d sites,
  /// values in [0, alphabet).
  void eval(std::span<const std::uint8_t> config, Eigen::Ref<Vector> out) const;

  /// Unnormalized evaluation; integer-valued for alphabet 2 and for one-hot
  /// bases, which keeps streamed accumulation exact.
  void eval_raw(std::span<const std::uint8_t> config, Eigen::Ref<Vector> out) const;

  /// Same as eval() but on a host-ordered slice (host_sites()[i] -> slice[i]).
  void eval_host(std::span<const std::uint8_t> host_config, Eigen::Ref<Vector> out) const;

 private:
  SketchBasis() = default;

  NodeId node_;
  SketchSide side_ = SketchSide::cluster;
  Index alphabet_ = 2;
  std::vector<Index> host_sites_;
  std::vector<BasisFunction> functions_;
  Index width_ = 0;
  bool one_hot_ = false;
  double normalizer_ = 1.0;
  Matrix factor_values_;  // alphabet x alphabet, column 0 constant
};

/// Single-site factor table: columns are orthonormal w.r.t. the uniform
/// probability measure on [0, n), column 0 is the constant 1. For n = 2 this
/// is exactly {1, x} on x in {-1, +1}.
Matrix orthonormal_site_factors(Index alphabet);

/// Builds the sketch over the requested side of a node: all products of
/// 0..t non-constant factors over the eligible sites, enumerated by size then
/// lexicographically. Eligibility: every cluster site (side = cluster, unless
/// cluster_radius > 0 restricts to sites near the cluster ends) or complement
/// sites within locality_radius of the cluster (side = complement).
SketchBasis build_cluster_basis(const DimensionTree& tree, NodeId node, SketchSide side,
                                const SketchOptions& options);

/// Sketches for a whole tree: complement side for every node (width 1 at the
/// root) and cluster side for every non-root node, with leaves one-hot.
struct BasisSet {
  std::vector<SketchBasis> cluster_side;     // slot-indexed; root slot unused
  std::vector<SketchBasis> complement_side;  // slot-indexed
};

BasisSet build_bases(const DimensionTree& tree, const SketchOptions& options);

/// Full sketch matrix by host-domain enumeration (rows: host configurations,
/// first host site slowest). Capacity-limited; intended for small hosts.
Matrix basis_matrix(const SketchBasis& basis, Index entry_cap = Index(1) << 26);

}  // namespace htde
