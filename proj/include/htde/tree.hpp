#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "htde/tensor.hpp"

namespace htde {

/// Address of a tree node: level in [0, L], index k in [1, 2^level].
/// Level 0 is the root, level L holds the leaves. Site indices are 1-based
/// throughout the project.
struct NodeId {
  int level = 0;
  Index index = 1;

  friend bool operator==(const NodeId& a, const NodeId& b) {
    return a.level == b.level && a.index == b.index;
  }
};

inline std::string to_string(NodeId n) {
  return "(level " + std::to_string(n.level) + ", k " + std::to_string(n.index) + ")";
}

/// Binary hierarchy over sites [1, d]. Every node at level l owns a
/// contiguous cluster of d / 2^l sites; a parent cluster is the concatenation
/// of its left then right child clusters. Leaves hold `leaf_sites` sites, so
/// d = leaf_sites * 2^L. Immutable after construction.
class DimensionTree {
 public:
  DimensionTree(Index d, Index alphabet, Index leaf_sites = 1)
      : d_(d), n_(alphabet), leaf_sites_(leaf_sites) {
    if (d < 2 || (d & (d - 1)) != 0)
      throw std::invalid_argument("DimensionTree: d must be a power of two >= 2, got " +
                                  std::to_string(d));
    if (alphabet < 2)
      throw std::invalid_argument("DimensionTree: alphabet size must be >= 2");
    if (leaf_sites < 1 || (leaf_sites & (leaf_sites - 1)) != 0 || leaf_sites >= d)
      throw std::invalid_argument("DimensionTree: leaf_sites must be a power of two in [1, d/2]");
    levels_ = 0;
    for (Index c = d / leaf_sites; c > 1; c >>= 1) ++levels_;
  }

  Index dimension() const { return d_; }
  Index alphabet() const { return n_; }
  Index leaf_sites() const { return leaf_sites_; }
  int levels() const { return levels_; }  // L

  Index nodes_at_level(int level) const { return Index(1) << level; }
  Index node_count() const { return (Index(1) << (levels_ + 1)) - 1; }
  Index cluster_size(int level) const { return d_ >> level; }

  bool is_root(NodeId n) const { return n.level == 0; }
  bool is_leaf(NodeId n) const { return n.level == levels_; }

  /// Heap layout: slot(l, k) = 2^l - 1 + (k - 1).
  Index node_slot(NodeId n) const {
    validate(n);
    return (Index(1) << n.level) - 1 + (n.index - 1);
  }

  NodeId node_at_slot(Index slot) const {
    if (slot < 0 || slot >= node_count())
      throw std::out_of_range("DimensionTree: slot out of range");
    int level = 0;
    while ((Index(2) << level) - 1 <= slot) ++level;
    return NodeId{level, slot - ((Index(1) << level) - 1) + 1};
  }

  void validate(NodeId n) const {
    if (n.level < 0 || n.level > levels_ || n.index < 1 ||
        n.index > nodes_at_level(n.level))
      throw std::out_of_range("DimensionTree: invalid node " + to_string(n) +
                              " for L = " + std::to_string(levels_));
  }

  /// First and last site of the cluster, 1-based inclusive.
  std::pair<Index, Index> cluster_bounds(NodeId n) const {
    validate(n);
    const Index w = cluster_size(n.level);
    return {(n.index - 1) * w + 1, n.index * w};
  }

  std::vector<Index> cluster(NodeId n) const {
    auto [first, last] = cluster_bounds(n);
    std::vector<Index> sites;
    sites.reserve(last - first + 1);
    for (Index s = first; s <= last; ++s) sites.push_back(s);
    return sites;
  }

  std::vector<Index> complement(NodeId n) const {
    auto [first, last] = cluster_bounds(n);
    std::vector<Index> sites;
    sites.reserve(d_ - (last - first + 1));
    for (Index s = 1; s < first; ++s) sites.push_back(s);
    for (Index s = last + 1; s <= d_; ++s) sites.push_back(s);
    return sites;
  }

  std::pair<NodeId, NodeId> children(NodeId n) const {
    validate(n);
    if (is_leaf(n))
      throw std::out_of_range("DimensionTree: leaf node " + to_string(n) +
                              " has no children");
    return {NodeId{n.level + 1, 2 * n.index - 1}, NodeId{n.level + 1, 2 * n.index}};
  }

  NodeId parent(NodeId n) const {
    validate(n);
    if (is_root(n))
      throw std::out_of_range("DimensionTree: root has no parent");
    return NodeId{n.level - 1, (n.index + 1) / 2};
  }

 private:
  Index d_;
  Index n_;
  Index leaf_sites_;
  int levels_ = 0;
};

}  // namespace htde
