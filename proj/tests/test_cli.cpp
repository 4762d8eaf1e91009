#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "htde/network.hpp"
#include "htde/samples.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBinary = HTDE_CLI_BINARY;
const fs::path kConfigs = HTDE_CONFIG_DIR;

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path out_file = fs::temp_directory_path() / "htde_cli_out.txt";
  const std::string command = kBinary + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "htde_cli_scratch";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("sample writes reproducible CSV files") {
  const fs::path dir = scratch_dir() / "samples";
  fs::remove_all(dir);
  const std::string base = "sample --config " + (kConfigs / "chain8_quick.json").string() +
                           " --set output=" + dir.string();
  const RunResult first = run(base);
  REQUIRE(first.exit_code == 0);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
  CHECK(files.size() == 4);  // 2 sample counts x 2 seeds

  const auto set = htde::SampleSet::read_csv(files.front());
  CHECK(set.dimension() == 8);
  CHECK((set.size() == 200 || set.size() == 400));

  const std::string before = slurp(files.front());
  const RunResult second = run(base);
  REQUIRE(second.exit_code == 0);
  CHECK(slurp(files.front()) == before);
}

TEST_CASE("estimate produces a loadable network and a report") {
  const fs::path dir = scratch_dir();
  const fs::path samples_dir = dir / "est_samples";
  fs::remove_all(samples_dir);
  const std::string config = (kConfigs / "chain8_quick.json").string();
  REQUIRE(run("sample --config " + config + " --set output=" + samples_dir.string() +
              " --set experiment.sample_counts=[400] --set experiment.seeds=[1]")
              .exit_code == 0);
  fs::path sample_file;
  for (const auto& entry : fs::directory_iterator(samples_dir)) sample_file = entry.path();

  const fs::path net_path = dir / "net.htn";
  const fs::path report_path = dir / "report.csv";
  const RunResult est = run("estimate --config " + config + " --samples " +
                            sample_file.string() + " --out " + net_path.string() +
                            " --report " + report_path.string());
  REQUIRE(est.exit_code == 0);
  const auto net = htde::load_network(net_path);
  CHECK(net.tree.dimension() == 8);
  const std::string report = slurp(report_path);
  CHECK(report.find("level,k,retained_rank") == 0);

  const RunResult eva = run("evaluate --network " + net_path.string() + " --config " +
                            config + " --mass --error-vs-model");
  REQUIRE(eva.exit_code == 0);
  CHECK(eva.output.find("mass ") != std::string::npos);
  CHECK(eva.output.find("eps_p ") != std::string::npos);
}

TEST_CASE("estimate rejects samples that do not match the model") {
  const fs::path dir = scratch_dir();
  const fs::path samples_dir = dir / "bad_samples";
  fs::remove_all(samples_dir);
  const std::string config = (kConfigs / "chain8_quick.json").string();
  REQUIRE(run("sample --config " + config + " --set output=" + samples_dir.string() +
              " --set experiment.sample_counts=[100] --set experiment.seeds=[1]")
              .exit_code == 0);
  fs::path sample_file;
  for (const auto& entry : fs::directory_iterator(samples_dir)) sample_file = entry.path();
  const RunResult bad = run("estimate --config " + config +
                            " --set model.shape=[16] --samples " + sample_file.string());
  CHECK(bad.exit_code == 2);
}

TEST_CASE("benchmark output is deterministic byte for byte") {
  const fs::path dir = scratch_dir();
  const std::string config = (kConfigs / "chain8_quick.json").string();
  const fs::path csv_a = dir / "bench_a.csv";
  const fs::path csv_b = dir / "bench_b.csv";
  REQUIRE(run("benchmark --config " + config + " --out " + csv_a.string()).exit_code == 0);
  REQUIRE(run("benchmark --config " + config + " --threads 2 --out " + csv_b.string())
              .exit_code == 0);
  // everything except the trailing wall_ms column must match exactly
  auto strip_timing = [](const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      out += line.substr(0, line.rfind(','));
      out += '\n';
    }
    return out;
  };
  const std::string a = slurp(csv_a);
  CHECK(strip_timing(a) == strip_timing(slurp(csv_b)));
  CHECK(a.find("config_hash,model,beta,d,N,seed,ranks,eps_p,eps_approx,wall_ms") == 0);
  // one row per (beta, N, seed) plus the header
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 1 * 2 * 2);
}

TEST_CASE("benchmark reports capacity errors for oversized models") {
  const std::string config = (kConfigs / "chain8_quick.json").string();
  const RunResult result = run("benchmark --config " + config +
                               " --set model.shape=[64] --set estimator.cluster_radius=2"
                               " --set estimator.ranks.levels=[2,2,2,2,2]");
  CHECK(result.exit_code == 3);
}

TEST_CASE("rank-sweep emits the documented grid") {
  const fs::path dir = scratch_dir();
  const std::string config = (kConfigs / "chain8_quick.json").string();
  const fs::path csv = dir / "sweep.csv";
  const RunResult result =
      run("rank-sweep --config " + config + " --out " + csv.string() +
          " --set experiment.top_ranks=[1,2] --set experiment.sample_counts=[300]");
  REQUIRE(result.exit_code == 0);
  const std::string text = slurp(csv);
  CHECK(text.find("config_hash,top_rank,N,seed,eps_p,eps_approx") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 1 * 2);
}

TEST_CASE("missing config files are a config error") {
  CHECK(run("benchmark --config /nonexistent.json").exit_code == 2);
}
