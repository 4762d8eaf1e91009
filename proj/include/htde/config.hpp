#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "htde/basis.hpp"
#include "htde/estimator.hpp"
#include "htde/models.hpp"

namespace htde {

/// Estimator knobs shared by the CLI and the experiment drivers.
struct EstimatorConfig {
  int t = 4;
  int locality_radius = 4;
  int cluster_radius = 0;
  std::string eligibility = "window";  // "window" or "graph"
  Index width_cap = 20000;
  Index leaf_sites = 2;
  double pinv_tol = 1e-12;
  RankSchedule ranks = RankSchedule::auto_rank();
  std::string ranks_label() const;
};

struct SamplerConfig {
  std::string kind = "exact";  // "exact" or "gibbs"
  Index burn_in = 10000;
  Index thin = 10;
  Index chains = 4;
};

struct ExperimentConfig {
  std::vector<Index> sample_counts;
  std::vector<std::uint64_t> seeds;
  std::vector<double> betas;      // benchmark: overrides model.beta per run
  std::vector<Index> top_ranks;   // rank sweep: level-1 rank grid
  bool compute_eps_approx = true;
};

struct RunConfig {
  int schema_version = 1;
  IsingSpec model;
  EstimatorConfig estimator;
  SamplerConfig sampler;
  ExperimentConfig experiment;
  std::string output_dir = "out";

  /// Canonical JSON (sorted keys) of the full configuration.
  std::string canonical_json() const;
  /// FNV-1a 64 hash of canonical_json(), as 16 hex digits.
  std::string hash() const;
};

/// Loads a config file and applies `--set key=value` overrides, where `key`
/// is a dotted path (e.g. model.beta). Values parse as JSON when possible,
/// else as strings. Throws ConfigError on any malformed input.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

RunConfig parse_config_json(const std::string& text,
                            const std::vector<std::string>& overrides = {});

/// Builders used by every pipeline: the tree, the sketch options (with the
/// model adjacency when eligibility is "graph"), and the full basis set.
DimensionTree make_tree(const RunConfig& config);
SketchOptions make_sketch_options(const RunConfig& config, const IsingModel& model);

}  // namespace htde
