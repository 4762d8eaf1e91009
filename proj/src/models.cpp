#include "htde/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "htde/errors.hpp"
#include "htde/parallel.hpp"

namespace htde {

Index IsingSpec::sites() const {
  if (shape.empty()) throw ConfigError("IsingSpec: shape is empty");
  Index total = 1;
  for (Index s : shape) {
    if (s < 1) throw ConfigError("IsingSpec: shape entries must be positive");
    total *= s;
  }
  return total;
}

std::string IsingSpec::name() const {
  std::string base = topology == Topology::chain_next_nearest ? "chain-nn" : "grid-periodic";
  return base + (coupling == Coupling::ferro ? "-ferro" : "-antiferro");
}

IsingModel::IsingModel(IsingSpec spec) : spec_(std::move(spec)) {
  const double sign = spec_.coupling == Coupling::ferro ? -1.0 : 1.0;
  if (spec_.topology == Topology::chain_next_nearest) {
    if (spec_.shape.size() != 1)
      throw ConfigError("IsingSpec: chains take shape {d}");
    const Index d = spec_.shape[0];
    for (Index i = 1; i + 1 <= d; ++i) edges_.push_back({i, i + 1, sign * 0.5});
    for (Index i = 1; i + 2 <= d; ++i) edges_.push_back({i, i + 2, sign / 6.0});
  } else {
    if (spec_.shape.size() != 2)
      throw ConfigError("IsingSpec: grids take shape {rows, cols}");
    const Index rows = spec_.shape[0], cols = spec_.shape[1];
    auto site = [cols](Index r, Index c) { return (r - 1) * cols + c; };
    // Each site contributes its right and down edge, wrapping around.
    for (Index r = 1; r <= rows; ++r)
      for (Index c = 1; c <= cols; ++c) {
        edges_.push_back({site(r, c), site(r % rows + 1, c), sign});
        edges_.push_back({site(r, c), site(r, c % cols + 1), sign});
      }
  }
  incident_.resize(static_cast<std::size_t>(spec_.sites()));
  for (const Edge& e : edges_) {
    incident_[static_cast<std::size_t>(e.a - 1)].push_back({e.b, e.w});
    incident_[static_cast<std::size_t>(e.b - 1)].push_back({e.a, e.w});
  }
}

std::vector<std::vector<Index>> IsingModel::adjacency() const {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(spec_.sites()));
  for (std::size_t i = 0; i < incident_.size(); ++i) {
    for (const auto& [nb, w] : incident_[i]) adj[i].push_back(nb);
    std::sort(adj[i].begin(), adj[i].end());
    adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
  }
  return adj;
}

double IsingModel::energy(std::span<const int> spins) const {
  if (spins.size() != static_cast<std::size_t>(spec_.sites()))
    throw std::invalid_argument("IsingModel::energy: configuration length mismatch");
  double e = 0.0;
  for (const Edge& edge : edges_)
    e += edge.w * spins[static_cast<std::size_t>(edge.a - 1)] *
         spins[static_cast<std::size_t>(edge.b - 1)];
  return e;
}

double IsingModel::energy_encoded(std::span<const std::uint8_t> values) const {
  double e = 0.0;
  for (const Edge& edge : edges_) {
    const int sa = values[static_cast<std::size_t>(edge.a - 1)] ? 1 : -1;
    const int sb = values[static_cast<std::size_t>(edge.b - 1)] ? 1 : -1;
    e += edge.w * sa * sb;
  }
  return e;
}

Vector IsingModel::dense_density(Index entry_cap) const {
  const Index d = spec_.sites();
  if (d >= 63 || (Index(1) << d) > entry_cap)
    throw CapacityError("dense_density: 2^" + std::to_string(d) +
                        " states exceed the entry budget");
  const Index total = Index(1) << d;
  Vector density(total);
  std::vector<std::uint8_t> config(static_cast<std::size_t>(d));
  for (Index idx = 0; idx < total; ++idx) {
    for (Index j = 0; j < d; ++j)
      config[static_cast<std::size_t>(j)] =
          static_cast<std::uint8_t>((idx >> (d - 1 - j)) & 1);
    density(idx) = -spec_.beta * energy_encoded(config);
  }
  // exponentiate around the max for stability, then normalize
  const double shift = density.maxCoeff();
  density = (density.array() - shift).exp();
  density /= density.sum();
  return density;
}

SampleSet IsingModel::sample_exact(Index count, std::uint64_t seed, Index entry_cap) const {
  const Vector density = dense_density(entry_cap);
  const Index d = spec_.sites();
  Vector cdf(density.size());
  double run = 0.0;
  for (Index i = 0; i < density.size(); ++i) {
    run += density(i);
    cdf(i) = run;
  }
  SampleSet out(d, 2, spec_.name(), spec_.beta, seed);
  out.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::uint8_t> config(static_cast<std::size_t>(d));
  for (Index i = 0; i < count; ++i) {
    const double u = unif(rng);
    const double* begin = cdf.data();
    const Index idx = std::min<Index>(
        density.size() - 1,
        std::lower_bound(begin, begin + cdf.size(), u) - begin);
    for (Index j = 0; j < d; ++j)
      config[static_cast<std::size_t>(j)] =
          static_cast<std::uint8_t>((idx >> (d - 1 - j)) & 1);
    out.append(config);
  }
  return out;
}

SampleSet IsingModel::sample_gibbs(Index count, std::uint64_t seed,
                                   const GibbsOptions& options) const {
  if (options.burn_in < 1 || options.thin < 1 || options.chains < 1)
    throw ConfigError("sample_gibbs: burn_in, thin and chains must be >= 1");
  const Index d = spec_.sites();
  const Index chains = std::min(options.chains, count > 0 ? count : Index(1));

  std::vector<SampleSet> partial(static_cast<std::size_t>(chains),
                                 SampleSet(d, 2, spec_.name(), spec_.beta, seed));
  parallel_for_index(static_cast<std::size_t>(chains), default_threads(), [&](std::size_t c) {
    const Index quota = count / chains + (static_cast<Index>(c) < count % chains ? 1 : 0);
    std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(c)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::uint8_t> state(static_cast<std::size_t>(d));
    for (auto& v : state) v = unif(rng) < 0.5 ? 0 : 1;
    auto sweep = [&] {
      for (Index i = 0; i < d; ++i) {
        double field = 0.0;  // h_i = sum_j J_ij x_j
        for (const auto& [nb, w] : incident_[static_cast<std::size_t>(i)])
          field += w * (state[static_cast<std::size_t>(nb - 1)] ? 1.0 : -1.0);
        // heat bath: P(x_i = +1) = 1 / (1 + exp(2 beta h_i))
        const double p_up = 1.0 / (1.0 + std::exp(2.0 * spec_.beta * field));
        state[static_cast<std::size_t>(i)] = unif(rng) < p_up ? 1 : 0;
      }
    };
    for (Index s = 0; s < options.burn_in; ++s) sweep();
    SampleSet& mine = partial[c];
    mine.reserve(quota);
    for (Index kept = 0; kept < quota; ++kept) {
      for (Index s = 0; s < options.thin; ++s) sweep();
      mine.append(state);
    }
  });

  SampleSet out = std::move(partial[0]);
  for (std::size_t c = 1; c < partial.size(); ++c) out = concat(out, partial[c]);
  return out;
}

}  // namespace htde
