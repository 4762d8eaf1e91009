#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "htde/config.hpp"

namespace htde {

struct BenchmarkRow {
  std::string config_hash;
  std::string model;
  double beta = 0.0;
  Index d = 0;
  Index sample_count = 0;
  std::uint64_t seed = 0;
  std::string ranks;
  double eps_p = 0.0;
  double eps_approx = 0.0;
  double wall_ms = 0.0;  // moment estimation + core solves
};

struct RankSweepRow {
  std::string config_hash;
  Index top_rank = 0;
  Index sample_count = 0;
  std::uint64_t seed = 0;
  double eps_p = 0.0;
  double eps_approx = 0.0;
};

/// One run per (beta, N, seed): sample, estimate, fit, exact relative error
/// against the enumerated ground truth, plus the exact-density pathway for
/// the approximation error. Runs execute on a task pool; rows come back
/// sorted by (beta, N, seed) so output is deterministic.
std::vector<BenchmarkRow> run_benchmark(const RunConfig& config,
                                        unsigned threads = default_threads());

/// Grid over (top-level rank) x (N, seed) at fixed lower-level ranks. Moments
/// are estimated once per (N, seed) and re-fitted per rank.
std::vector<RankSweepRow> run_rank_sweep(const RunConfig& config,
                                         unsigned threads = default_threads());

void write_benchmark_csv(const std::filesystem::path& path,
                         const std::vector<BenchmarkRow>& rows);
void write_rank_sweep_csv(const std::filesystem::path& path,
                          const std::vector<RankSweepRow>& rows);

/// Draws a sample set for one run; the effective seed mixes the run seed with
/// beta and N so runs are independent but reproducible.
SampleSet draw_samples(const RunConfig& config, const IsingModel& model, Index count,
                       std::uint64_t seed);

/// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

}  // namespace htde
