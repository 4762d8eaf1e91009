#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "htde/moments.hpp"
#include "htde/network.hpp"
#include "htde/parallel.hpp"
#include "htde/tensor.hpp"
#include "htde/tree.hpp"

namespace htde {

/// Retained rank per tree level (level l = rank of the edges between level-l
/// nodes and their parents), or a relative singular-value threshold when no
/// explicit schedule is given. The root edge rank is pinned to 1.
struct RankSchedule {
  std::vector<Index> per_level;          // entry (l-1) = rank for level l; empty = auto
  double auto_tau = 1e-10;               // keep sigma_i >= tau * sigma_1
  std::map<Index, Index> per_node;       // optional override, keyed by node slot

  static RankSchedule auto_rank(double tau = 1e-10) {
    RankSchedule s;
    s.auto_tau = tau;
    return s;
  }
  static RankSchedule levels(std::vector<Index> ranks) {
    RankSchedule s;
    s.per_level = std::move(ranks);
    return s;
  }
  static RankSchedule uniform(Index r, int num_levels) {
    return levels(std::vector<Index>(static_cast<std::size_t>(num_levels), r));
  }

  /// Explicit rank request for a node, or nullopt for threshold-based choice.
  std::optional<Index> requested(const DimensionTree& tree, NodeId node) const;
};

struct NodeSolveInfo {
  NodeId node;
  Index retained_rank = 0;
  double sigma_ratio = 0.0;  // sigma_r / sigma_1 of the node's moment matrix
  bool rank_clamped = false;
  bool near_singular = false;
  double residual = -1.0;  // internal nodes: ||P(A_l) G P(A_r)^T - B||_F / ||B||_F
};

struct CoreSolveReport {
  std::vector<NodeSolveInfo> nodes;
  void write_csv(const std::filesystem::path& path) const;
};

struct CoreSolve {
  Tensor3 g;
  SvdResult svd_left;
  SvdResult svd_right;
};

/// Solves P_r(a_left) G(:,:,c) P_r(a_right)^T = b(:,:,c) for every slice via
/// rank-trimmed pseudo-inverses, returning G and the SVDs whose leading right
/// factors span the retained column spaces.
CoreSolve solve_core(const Matrix& a_left, const Matrix& a_right, const Tensor3& b,
                     Index rank, double rel_tol = 1e-12);

/// out(:,:,c) = sum_g v_left^T g(:,:,g) v_right * v_self(g, c).
Tensor3 regauge(const Tensor3& g, const Matrix& v_left, const Matrix& v_right,
                const Matrix& v_self);

/// Leaf version: leaf_marginal * v_self.
Matrix regauge_leaf(const Matrix& leaf_marginal, const Matrix& v_self);

struct FitOptions {
  double pinv_tol = 1e-12;
  double near_singular_warn = 1e-12;
  unsigned threads = default_threads();
};

struct FitResult {
  HierarchicalTensorNetwork net;
  CoreSolveReport report;
};

/// Full estimation pass: per node, trim the moment matrix to the scheduled
/// rank, solve the reduced core equation, and rotate the result onto the
/// retained singular subspaces. Node solves are independent and run on a task
/// pool; the outcome is deterministic for any thread count.
FitResult fit(const DimensionTree& tree, const MomentSet& moments,
              const RankSchedule& ranks, const FitOptions& options = {});

}  // namespace htde
