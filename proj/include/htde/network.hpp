#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "htde/tensor.hpp"
#include "htde/tree.hpp"

namespace htde {

/// Tree-structured factorization of a d-way tensor.
///
/// Leaf k holds a matrix of shape n^(leaf sites) x rank(leaf); an internal
/// node holds a 3-way core of shape rank(left child) x rank(right child) x
/// rank(node); the root rank is 1. Evaluation contracts bottom-up: leaf rows
/// selected by the configuration, then v_parent(c) = v_left^T core(:,:,c)
/// v_right, ending in a scalar. Immutable in normal use; all queries are
/// const and thread-safe.
struct HierarchicalTensorNetwork {
  DimensionTree tree;
  std::vector<Matrix> leaf_cores;       // ordered k = 1..2^L
  std::vector<Tensor3> internal_cores;  // slot-indexed; leaf slots unused

  /// Rank of the edge between a node and its parent (root: 1).
  Index edge_rank(NodeId node) const;

  /// Throws when shapes disagree along any edge.
  void validate() const;
};

double evaluate(const HierarchicalTensorNetwork& net, std::span<const std::uint8_t> config);

/// Full dense tensor, entries ordered with site 1 slowest.
Vector materialize(const HierarchicalTensorNetwork& net, Index entry_cap = Index(1) << 26);

/// <A, B> = sum_x A(x) B(x), by merging leaf Gram matrices up the tree in
/// O(d r^4); equals the dense inner product whenever both are materializable.
double inner(const HierarchicalTensorNetwork& a, const HierarchicalTensorNetwork& b);

double norm(const HierarchicalTensorNetwork& net);

/// ||net - reference||_F / ||reference||_F against a dense tensor.
double relative_error(const HierarchicalTensorNetwork& net, const Vector& reference,
                      Index entry_cap = Index(1) << 26);

double total_mass(const HierarchicalTensorNetwork& net);

struct NormalizeResult {
  HierarchicalTensorNetwork net;
  double mass = 0.0;
};

/// Scales the root core so the network sums to 1; fails when the total mass
/// is not positive (estimates can carry signed regions).
NormalizeResult normalize(const HierarchicalTensorNetwork& net);

/// Monte-Carlo estimate of ||A - B||_F / ||B||_F by uniform configuration
/// sampling; usable when the domain is too large to materialize.
double mc_relative_error(const HierarchicalTensorNetwork& a,
                         const HierarchicalTensorNetwork& b, Index num_samples,
                         std::uint64_t seed);

/// Versioned binary container: 8-byte magic "HTNETBIN", u32 version, u32
/// header length, JSON header (tree shape, per-core dims, metadata), then the
/// cores as raw little-endian float64 in slot order, each core stored as its
/// unfolding matrix column by column. Byte layout documented in the README.
void save_network(const HierarchicalTensorNetwork& net, const std::filesystem::path& path,
                  const std::string& meta_json = "{}");
HierarchicalTensorNetwork load_network(const std::filesystem::path& path,
                                       std::string* meta_json = nullptr);

/// Dense tensor export: u32 header length + JSON {"d", "n", "order"} + raw
/// little-endian float64 values (site 1 slowest).
void write_dense_tensor(const std::filesystem::path& path, const Vector& values, Index d,
                        Index n);
Vector read_dense_tensor(const std::filesystem::path& path, Index* d = nullptr,
                         Index* n = nullptr);

}  // namespace htde
