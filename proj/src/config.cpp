#include "htde/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "htde/errors.hpp"

namespace htde {

using nlohmann::json;

std::string EstimatorConfig::ranks_label() const {
  if (!ranks.per_level.empty()) {
    std::string label;
    for (std::size_t i = 0; i < ranks.per_level.size(); ++i) {
      if (i) label += '|';
      label += std::to_string(ranks.per_level[i]);
    }
    return label;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "auto:%g", ranks.auto_tau);
  return buf;
}

namespace {

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["model"]["topology"] =
      c.model.topology == Topology::chain_next_nearest ? "chain-nn" : "grid-periodic";
  j["model"]["shape"] = c.model.shape;
  j["model"]["coupling"] = c.model.coupling == Coupling::ferro ? "ferro" : "antiferro";
  j["model"]["beta"] = c.model.beta;
  j["estimator"]["t"] = c.estimator.t;
  j["estimator"]["locality_radius"] = c.estimator.locality_radius;
  j["estimator"]["cluster_radius"] = c.estimator.cluster_radius;
  j["estimator"]["eligibility"] = c.estimator.eligibility;
  j["estimator"]["width_cap"] = c.estimator.width_cap;
  j["estimator"]["leaf_sites"] = c.estimator.leaf_sites;
  j["estimator"]["pinv_tol"] = c.estimator.pinv_tol;
  if (!c.estimator.ranks.per_level.empty()) {
    j["estimator"]["ranks"]["mode"] = "levels";
    j["estimator"]["ranks"]["levels"] = c.estimator.ranks.per_level;
  } else {
    j["estimator"]["ranks"]["mode"] = "auto";
    j["estimator"]["ranks"]["tau"] = c.estimator.ranks.auto_tau;
  }
  j["sampler"]["kind"] = c.sampler.kind;
  j["sampler"]["burn_in"] = c.sampler.burn_in;
  j["sampler"]["thin"] = c.sampler.thin;
  j["sampler"]["chains"] = c.sampler.chains;
  j["experiment"]["sample_counts"] = c.experiment.sample_counts;
  j["experiment"]["seeds"] = c.experiment.seeds;
  j["experiment"]["betas"] = c.experiment.betas;
  j["experiment"]["top_ranks"] = c.experiment.top_ranks;
  j["experiment"]["compute_eps_approx"] = c.experiment.compute_eps_approx;
  j["output"] = c.output_dir;
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != 1)
      throw ConfigError("config: unsupported schema_version " +
                        std::to_string(c.schema_version));
    const json& model = j.at("model");
    const std::string topology = model.at("topology").get<std::string>();
    if (topology == "chain-nn")
      c.model.topology = Topology::chain_next_nearest;
    else if (topology == "grid-periodic")
      c.model.topology = Topology::grid_periodic;
    else
      throw ConfigError("config: unknown topology '" + topology + "'");
    c.model.shape = model.at("shape").get<std::vector<Index>>();
    const std::string coupling = model.at("coupling").get<std::string>();
    if (coupling == "ferro")
      c.model.coupling = Coupling::ferro;
    else if (coupling == "antiferro")
      c.model.coupling = Coupling::antiferro;
    else
      throw ConfigError("config: unknown coupling '" + coupling + "'");
    c.model.beta = model.at("beta").get<double>();
    if (!(c.model.beta >= 0)) throw ConfigError("config: beta must be >= 0");

    if (j.contains("estimator")) {
      const json& e = j.at("estimator");
      if (e.contains("t")) c.estimator.t = e.at("t").get<int>();
      if (e.contains("locality_radius"))
        c.estimator.locality_radius = e.at("locality_radius").get<int>();
      if (e.contains("cluster_radius"))
        c.estimator.cluster_radius = e.at("cluster_radius").get<int>();
      if (e.contains("eligibility")) {
        c.estimator.eligibility = e.at("eligibility").get<std::string>();
        if (c.estimator.eligibility != "window" && c.estimator.eligibility != "graph")
          throw ConfigError("config: eligibility must be 'window' or 'graph'");
      }
      if (e.contains("width_cap")) c.estimator.width_cap = e.at("width_cap").get<Index>();
      if (e.contains("leaf_sites")) c.estimator.leaf_sites = e.at("leaf_sites").get<Index>();
      if (e.contains("pinv_tol")) c.estimator.pinv_tol = e.at("pinv_tol").get<double>();
      if (e.contains("ranks")) {
        const json& r = e.at("ranks");
        const std::string mode = r.at("mode").get<std::string>();
        if (mode == "levels")
          c.estimator.ranks = RankSchedule::levels(r.at("levels").get<std::vector<Index>>());
        else if (mode == "uniform")
          c.estimator.ranks = RankSchedule::uniform(r.at("r").get<Index>(),
                                                    r.at("num_levels").get<int>());
        else if (mode == "auto")
          c.estimator.ranks =
              RankSchedule::auto_rank(r.contains("tau") ? r.at("tau").get<double>() : 1e-10);
        else
          throw ConfigError("config: unknown rank mode '" + mode + "'");
      }
    }
    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      if (s.contains("kind")) {
        c.sampler.kind = s.at("kind").get<std::string>();
        if (c.sampler.kind != "exact" && c.sampler.kind != "gibbs")
          throw ConfigError("config: sampler kind must be 'exact' or 'gibbs'");
      }
      if (s.contains("burn_in")) c.sampler.burn_in = s.at("burn_in").get<Index>();
      if (s.contains("thin")) c.sampler.thin = s.at("thin").get<Index>();
      if (s.contains("chains")) c.sampler.chains = s.at("chains").get<Index>();
    }
    if (j.contains("experiment")) {
      const json& x = j.at("experiment");
      if (x.contains("sample_counts"))
        c.experiment.sample_counts = x.at("sample_counts").get<std::vector<Index>>();
      if (x.contains("seeds"))
        c.experiment.seeds = x.at("seeds").get<std::vector<std::uint64_t>>();
      if (x.contains("betas")) c.experiment.betas = x.at("betas").get<std::vector<double>>();
      if (x.contains("top_ranks"))
        c.experiment.top_ranks = x.at("top_ranks").get<std::vector<Index>>();
      if (x.contains("compute_eps_approx"))
        c.experiment.compute_eps_approx = x.at("compute_eps_approx").get<bool>();
    }
    if (j.contains("output")) c.output_dir = j.at("output").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + spec + "' is not of the form key=value");
  std::string path = "/" + spec.substr(0, eq);
  for (auto& ch : path)
    if (ch == '.') ch = '/';
  const std::string value = spec.substr(eq + 1);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // plain string
  }
  try {
    j[json::json_pointer(path)] = parsed;
  } catch (const json::exception& e) {
    throw ConfigError("override '" + spec + "': " + e.what());
  }
}

}  // namespace

std::string RunConfig::canonical_json() const { return to_json(*this).dump(); }

std::string RunConfig::hash() const {
  const std::string text = canonical_json();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config_json(const std::string& text,
                            const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  for (const std::string& o : overrides) apply_override(j, o);
  return from_json(j);
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_json(buffer.str(), overrides);
}

DimensionTree make_tree(const RunConfig& config) {
  return DimensionTree(config.model.sites(), 2, config.estimator.leaf_sites);
}

SketchOptions make_sketch_options(const RunConfig& config, const IsingModel& model) {
  SketchOptions opt;
  opt.t = config.estimator.t;
  opt.locality_radius = config.estimator.locality_radius;
  opt.cluster_radius = config.estimator.cluster_radius;
  opt.width_cap = config.estimator.width_cap;
  if (config.estimator.eligibility == "graph") opt.adjacency = model.adjacency();
  return opt;
}

}  // namespace htde
