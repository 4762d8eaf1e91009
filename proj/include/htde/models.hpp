#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htde/samples.hpp"
#include "htde/tensor.hpp"

namespace htde {

enum class Topology { chain_next_nearest, grid_periodic };
enum class Coupling { ferro, antiferro };

/// Ising-type Gibbs density p(x) = exp(-beta * E(x)) / Z on {-1,+1}^d.
///
/// Chains couple |i-j| = 1 with weight -/+ 1/2 and |i-j| = 2 with -/+ 1/6
/// (sign by coupling); periodic grids couple nearest neighbors with -/+ 1,
/// each site contributing its right and down edge (with wraparound). Each
/// unordered chain pair is counted once. Grids are serialized row-major into
/// 1-based site order.
struct IsingSpec {
  Topology topology = Topology::chain_next_nearest;
  std::vector<Index> shape;  // {d} for chains, {rows, cols} for grids
  Coupling coupling = Coupling::ferro;
  double beta = 0.5;

  Index sites() const;
  std::string name() const;  // e.g. "chain-nn-ferro"
};

struct GibbsOptions {
  Index burn_in = 10000;  // full sweeps before recording
  Index thin = 10;        // full sweeps between recorded configurations
  Index chains = 4;       // independent chains, concatenated by chain index
};

class IsingModel {
 public:
  struct Edge {
    Index a, b;  // 1-based sites
    double w;
  };

  explicit IsingModel(IsingSpec spec);

  const IsingSpec& spec() const { return spec_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// 1-based neighbor lists of the coupling graph.
  std::vector<std::vector<Index>> adjacency() const;

  /// E(x) = sum over coupled pairs of J_ab x_a x_b, spins in {-1, +1}.
  double energy(std::span<const int> spins) const;

  /// Same on the sample encoding (0 -> -1, 1 -> +1).
  double energy_encoded(std::span<const std::uint8_t> values) const;

  /// Exhaustive Gibbs density over the 2^d configurations (site 1 slowest).
  Vector dense_density(Index entry_cap = Index(1) << 26) const;

  /// Inverse-CDF sampling from the enumerated density; bit-reproducible per
  /// seed.
  SampleSet sample_exact(Index count, std::uint64_t seed,
                         Index entry_cap = Index(1) << 26) const;

  /// Single-site heat-bath chains; one configuration kept per `thin` sweeps
  /// after burn-in. Chains use seeds derived from (seed, chain index) and are
  /// concatenated deterministically.
  SampleSet sample_gibbs(Index count, std::uint64_t seed,
                         const GibbsOptions& options = {}) const;

 private:
  IsingSpec spec_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<Index, double>>> incident_;  // per site (0-based)
};

}  // namespace htde
