#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "htde/config.hpp"
#include "htde/errors.hpp"
#include "htde/experiments.hpp"
#include "htde/models.hpp"
#include "htde/network.hpp"

namespace {

namespace fs = std::filesystem;
using namespace htde;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  unsigned threads = default_threads();
  std::optional<std::uint64_t> seed;
};

RunConfig load(const CommonArgs& args) {
  RunConfig config = load_config(args.config_path, args.overrides);
  if (args.seed) config.experiment.seeds = {*args.seed};
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file (JSON)")
      ->required();
  cmd->add_option("--set", args.overrides,
                  "override a config field, e.g. --set model.beta=0.8");
  cmd->add_option("--threads", args.threads, "task pool size");
  cmd->add_option("--seed", args.seed, "replace the config seed list by one seed");
}

std::string sample_file_name(const RunConfig& config, Index count, std::uint64_t seed) {
  return config.model.name() + "_beta" + std::to_string(config.model.beta) + "_N" +
         std::to_string(count) + "_seed" + std::to_string(seed) + ".csv";
}

int cmd_sample(const CommonArgs& args) {
  const RunConfig config = load(args);
  if (config.experiment.sample_counts.empty() || config.experiment.seeds.empty())
    throw ConfigError("sample: experiment.sample_counts and experiment.seeds are required");
  const IsingModel model(config.model);
  fs::create_directories(config.output_dir);
  for (Index count : config.experiment.sample_counts)
    for (std::uint64_t seed : config.experiment.seeds) {
      const SampleSet samples = draw_samples(config, model, count, seed);
      const fs::path path = fs::path(config.output_dir) / sample_file_name(config, count, seed);
      samples.write_csv(path);
      std::cout << path.string() << "\n";
    }
  return 0;
}

int cmd_estimate(const CommonArgs& args, const std::string& samples_path,
                 const std::string& out_path, const std::string& report_path) {
  const RunConfig config = load(args);
  const SampleSet samples = SampleSet::read_csv(samples_path);
  if (samples.dimension() != config.model.sites() || samples.alphabet() != 2)
    throw ConfigError("estimate: sample file does not match the configured model (d = " +
                      std::to_string(samples.dimension()) + ", expected " +
                      std::to_string(config.model.sites()) + ")");
  const IsingModel model(config.model);
  const DimensionTree tree = make_tree(config);
  const BasisSet bases = build_bases(tree, make_sketch_options(config, model));
  EstimateOptions est_opt;
  est_opt.threads = args.threads;
  const MomentSet moments = estimate_moments(tree, samples, bases, est_opt);
  FitOptions fit_opt;
  fit_opt.pinv_tol = config.estimator.pinv_tol;
  fit_opt.threads = args.threads;
  const FitResult result = fit(tree, moments, config.estimator.ranks, fit_opt);

  nlohmann::json meta;
  meta["config_hash"] = config.hash();
  meta["model"] = config.model.name();
  meta["beta"] = config.model.beta;
  meta["N"] = samples.size();
  meta["seed"] = samples.seed();
  meta["ranks"] = config.estimator.ranks_label();
  save_network(result.net, out_path, meta.dump());
  std::cout << out_path << "\n";
  if (!report_path.empty()) {
    result.report.write_csv(report_path);
    std::cout << report_path << "\n";
  }
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& network_path, bool report_mass,
                 bool do_normalize, bool error_vs_model, const std::string& dense_out,
                 const std::string& at_path) {
  HierarchicalTensorNetwork net = load_network(network_path);
  if (do_normalize) {
    const NormalizeResult result = normalize(net);
    net = result.net;
    std::printf("mass %.17g\n", result.mass);
  } else if (report_mass) {
    std::printf("mass %.17g\n", total_mass(net));
  }
  if (error_vs_model) {
    const RunConfig config = load(args);
    const IsingModel model(config.model);
    std::printf("eps_p %.17g\n", relative_error(net, model.dense_density()));
  }
  if (!dense_out.empty()) {
    write_dense_tensor(dense_out, materialize(net), net.tree.dimension(),
                       net.tree.alphabet());
    std::cout << dense_out << "\n";
  }
  if (!at_path.empty()) {
    const SampleSet configs = SampleSet::read_csv(at_path);
    if (configs.dimension() != net.tree.dimension())
      throw ConfigError("evaluate: --at configurations have the wrong dimension");
    for (Index i = 0; i < configs.size(); ++i)
      std::printf("%.17g\n", evaluate(net, configs.config(i)));
  }
  return 0;
}

int cmd_benchmark(const CommonArgs& args, const std::string& out_path) {
  const RunConfig config = load(args);
  const auto rows = run_benchmark(config, args.threads);
  write_benchmark_csv(out_path, rows);
  std::cout << out_path << "\n";
  return 0;
}

int cmd_rank_sweep(const CommonArgs& args, const std::string& out_path) {
  const RunConfig config = load(args);
  const auto rows = run_rank_sweep(config, args.threads);
  write_rank_sweep_csv(out_path, rows);
  std::cout << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical tensor-network density estimation"};
  app.require_subcommand(1);

  CommonArgs sample_args;
  CLI::App* sample = app.add_subcommand("sample", "draw sample sets and write them as CSV");
  add_common(sample, sample_args);

  CommonArgs estimate_args;
  std::string samples_path, network_out = "network.htn", report_out;
  CLI::App* estimate = app.add_subcommand("estimate", "fit a network from a sample file");
  add_common(estimate, estimate_args);
  estimate->add_option("--samples", samples_path, "sample CSV file")->required();
  estimate->add_option("--out", network_out, "output network container");
  estimate->add_option("--report", report_out, "per-node solve report CSV");

  CommonArgs evaluate_args;
  std::string network_path, dense_out, at_path;
  bool mass = false, do_normalize = false, error_vs_model = false;
  CLI::App* evaluate = app.add_subcommand("evaluate", "query a fitted network");
  evaluate->add_option("--network", network_path, "network container")->required();
  evaluate->add_option("--config", evaluate_args.config_path,
                       "run configuration (for --error-vs-model)");
  evaluate->add_option("--set", evaluate_args.overrides, "config override");
  evaluate->add_flag("--mass", mass, "print the total mass");
  evaluate->add_flag("--normalize", do_normalize, "normalize before other queries");
  evaluate->add_flag("--error-vs-model", error_vs_model,
                     "relative error against the configured model density");
  evaluate->add_option("--dense-out", dense_out, "export the dense tensor");
  evaluate->add_option("--at", at_path, "evaluate at configurations from a sample CSV");

  CommonArgs benchmark_args;
  std::string benchmark_out = "benchmark.csv";
  CLI::App* benchmark =
      app.add_subcommand("benchmark", "error-vs-N study with exact ground truth");
  add_common(benchmark, benchmark_args);
  benchmark->add_option("--out", benchmark_out, "output CSV");

  CommonArgs sweep_args;
  std::string sweep_out = "rank_sweep.csv";
  CLI::App* sweep = app.add_subcommand("rank-sweep", "error against top-level rank and N");
  add_common(sweep, sweep_args);
  sweep->add_option("--out", sweep_out, "output CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) return cmd_sample(sample_args);
    if (estimate->parsed())
      return cmd_estimate(estimate_args, samples_path, network_out, report_out);
    if (evaluate->parsed())
      return cmd_evaluate(evaluate_args, network_path, mass, do_normalize, error_vs_model,
                          dense_out, at_path);
    if (benchmark->parsed()) return cmd_benchmark(benchmark_args, benchmark_out);
    if (sweep->parsed()) return cmd_rank_sweep(sweep_args, sweep_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
