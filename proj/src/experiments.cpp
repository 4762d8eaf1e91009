#include "htde/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <tuple>

#include "htde/errors.hpp"

namespace htde {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, double beta, Index count) {
  // splitmix-style mixing of (seed, beta bits, N)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull;
  std::uint64_t b;
  static_assert(sizeof(b) == sizeof(beta));
  std::memcpy(&b, &beta, sizeof(b));
  z ^= b + 0x9e3779b97f4a7c15ull + (z << 6) + (z >> 2);
  z ^= static_cast<std::uint64_t>(count) + 0x9e3779b97f4a7c15ull + (z << 6) + (z >> 2);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double format_safe(double v) { return std::isfinite(v) ? v : -1.0; }

void write_row(std::ofstream& out, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const std::string& f : fields) {
    if (!first) out << ',';
    out << f;
    first = false;
  }
  out << '\n';
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SampleSet draw_samples(const RunConfig& config, const IsingModel& model, Index count,
                       std::uint64_t seed) {
  const std::uint64_t mixed = mix_seed(seed, model.spec().beta, count);
  if (config.sampler.kind == "gibbs") {
    GibbsOptions opt;
    opt.burn_in = config.sampler.burn_in;
    opt.thin = config.sampler.thin;
    opt.chains = config.sampler.chains;
    return model.sample_gibbs(count, mixed, opt);
  }
  return model.sample_exact(count, mixed);
}

std::vector<BenchmarkRow> run_benchmark(const RunConfig& config, unsigned threads) {
  if (config.experiment.sample_counts.empty() || config.experiment.seeds.empty())
    throw ConfigError("benchmark: experiment.sample_counts and experiment.seeds are required");
  std::vector<double> betas = config.experiment.betas;
  if (betas.empty()) betas.push_back(config.model.beta);

  struct Run {
    double beta;
    Index count;
    std::uint64_t seed;
  };
  std::vector<Run> runs;
  for (double beta : betas)
    for (Index count : config.experiment.sample_counts)
      for (std::uint64_t seed : config.experiment.seeds) runs.push_back({beta, count, seed});

  const std::string hash = config.hash();
  const DimensionTree tree = make_tree(config);

  // Per-beta shared state: model, bases, ground truth, eps_approx.
  struct BetaContext {
    IsingSpec spec;
    double eps_approx = -1.0;
    Vector density;
    std::shared_ptr<IsingModel> model;
    std::shared_ptr<BasisSet> bases;
  };
  std::vector<BetaContext> contexts(betas.size());
  parallel_for_index(betas.size(), threads, [&](std::size_t bi) {
    BetaContext& ctx = contexts[bi];
    ctx.spec = config.model;
    ctx.spec.beta = betas[bi];
    ctx.model = std::make_shared<IsingModel>(ctx.spec);
    ctx.bases = std::make_shared<BasisSet>(
        build_bases(tree, make_sketch_options(config, *ctx.model)));
    ctx.density = ctx.model->dense_density();
    if (config.experiment.compute_eps_approx) {
      const MomentSet exact = moments_from_density(tree, ctx.density, *ctx.bases);
      FitOptions fit_opt;
      fit_opt.pinv_tol = config.estimator.pinv_tol;
      fit_opt.threads = 1;
      const FitResult fitted = fit(tree, exact, config.estimator.ranks, fit_opt);
      ctx.eps_approx = relative_error(fitted.net, ctx.density);
    }
  });

  std::vector<BenchmarkRow> rows(runs.size());
  parallel_for_index(runs.size(), threads, [&](std::size_t ri) {
    const Run& run = runs[ri];
    std::size_t bi = 0;
    while (betas[bi] != run.beta) ++bi;
    const BetaContext& ctx = contexts[bi];

    const SampleSet samples = draw_samples(config, *ctx.model, run.count, run.seed);
    EstimateOptions est_opt;
    est_opt.threads = 1;  // runs already fill the pool
    const auto t0 = std::chrono::steady_clock::now();
    const MomentSet moments = estimate_moments(tree, samples, *ctx.bases, est_opt);
    FitOptions fit_opt;
    fit_opt.pinv_tol = config.estimator.pinv_tol;
    fit_opt.threads = 1;
    const FitResult fitted = fit(tree, moments, config.estimator.ranks, fit_opt);
    const auto t1 = std::chrono::steady_clock::now();

    BenchmarkRow row;
    row.config_hash = hash;
    row.model = ctx.spec.name();
    row.beta = run.beta;
    row.d = tree.dimension();
    row.sample_count = run.count;
    row.seed = run.seed;
    row.ranks = config.estimator.ranks_label();
    row.eps_p = relative_error(fitted.net, ctx.density);
    row.eps_approx = ctx.eps_approx;
    row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rows[ri] = std::move(row);
  });

  std::sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    return std::tie(a.beta, a.sample_count, a.seed) <
           std::tie(b.beta, b.sample_count, b.seed);
  });
  return rows;
}

std::vector<RankSweepRow> run_rank_sweep(const RunConfig& config, unsigned threads) {
  if (config.experiment.sample_counts.empty() || config.experiment.seeds.empty() ||
      config.experiment.top_ranks.empty())
    throw ConfigError(
        "rank-sweep: experiment.sample_counts, experiment.seeds and experiment.top_ranks "
        "are required");
  if (config.estimator.ranks.per_level.empty())
    throw ConfigError("rank-sweep: an explicit per-level rank schedule is required");

  const std::string hash = config.hash();
  const DimensionTree tree = make_tree(config);
  const IsingModel model(config.model);
  const BasisSet bases = build_bases(tree, make_sketch_options(config, model));
  const Vector density = model.dense_density();

  auto schedule_with_top = [&](Index top_rank) {
    RankSchedule s = config.estimator.ranks;
    s.per_level[0] = top_rank;
    return s;
  };
  FitOptions fit_opt;
  fit_opt.pinv_tol = config.estimator.pinv_tol;
  fit_opt.threads = 1;

  // eps_approx per rank from the exact-density pathway.
  std::vector<double> eps_approx(config.experiment.top_ranks.size(), -1.0);
  const MomentSet exact = moments_from_density(tree, density, bases);
  parallel_for_index(config.experiment.top_ranks.size(), threads, [&](std::size_t ti) {
    const FitResult fitted =
        fit(tree, exact, schedule_with_top(config.experiment.top_ranks[ti]), fit_opt);
    eps_approx[ti] = relative_error(fitted.net, density);
  });

  struct Estimate {
    Index count;
    std::uint64_t seed;
  };
  std::vector<Estimate> estimates;
  for (Index count : config.experiment.sample_counts)
    for (std::uint64_t seed : config.experiment.seeds) estimates.push_back({count, seed});

  std::vector<std::vector<RankSweepRow>> partial(estimates.size());
  parallel_for_index(estimates.size(), threads, [&](std::size_t ei) {
    const Estimate& e = estimates[ei];
    const SampleSet samples = draw_samples(config, model, e.count, e.seed);
    EstimateOptions est_opt;
    est_opt.threads = 1;
    const MomentSet moments = estimate_moments(tree, samples, bases, est_opt);
    for (std::size_t ti = 0; ti < config.experiment.top_ranks.size(); ++ti) {
      const Index top_rank = config.experiment.top_ranks[ti];
      const FitResult fitted = fit(tree, moments, schedule_with_top(top_rank), fit_opt);
      RankSweepRow row;
      row.config_hash = hash;
      row.top_rank = top_rank;
      row.sample_count = e.count;
      row.seed = e.seed;
      row.eps_p = relative_error(fitted.net, density);
      row.eps_approx = eps_approx[ti];
      partial[ei].push_back(row);
    }
  });

  std::vector<RankSweepRow> rows;
  for (auto& part : partial) rows.insert(rows.end(), part.begin(), part.end());
  std::sort(rows.begin(), rows.end(), [](const RankSweepRow& a, const RankSweepRow& b) {
    return std::tie(a.top_rank, a.sample_count, a.seed) <
           std::tie(b.top_rank, b.sample_count, b.seed);
  });
  return rows;
}

void write_benchmark_csv(const std::filesystem::path& path,
                         const std::vector<BenchmarkRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("benchmark: cannot open " + path.string());
  out << "config_hash,model,beta,d,N,seed,ranks,eps_p,eps_approx,wall_ms\n";
  for (const BenchmarkRow& r : rows)
    write_row(out, {r.config_hash, r.model, fmt(r.beta), std::to_string(r.d),
                    std::to_string(r.sample_count), std::to_string(r.seed), r.ranks,
                    fmt(format_safe(r.eps_p)), fmt(format_safe(r.eps_approx)),
                    fmt(r.wall_ms)});
}

void write_rank_sweep_csv(const std::filesystem::path& path,
                          const std::vector<RankSweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("rank-sweep: cannot open " + path.string());
  out << "config_hash,top_rank,N,seed,eps_p,eps_approx\n";
  for (const RankSweepRow& r : rows)
    write_row(out, {r.config_hash, std::to_string(r.top_rank),
                    std::to_string(r.sample_count), std::to_string(r.seed),
                    fmt(format_safe(r.eps_p)), fmt(format_safe(r.eps_approx))});
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("least_squares_slope: need matching series of length >= 2");
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("least_squares_slope: degenerate abscissa");
  return (n * sxy - sx * sy) / denom;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace htde
