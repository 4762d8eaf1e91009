// Acceptance suite: every case prints one PASS/FAIL line with the measured
// numbers, then asserts. Heavy cases parallelize internally; run the whole
// binary or pick cases with --test-case=<pattern>.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "htde/config.hpp"
#include "htde/experiments.hpp"
#include "htde/models.hpp"
#include "htde/moments.hpp"
#include "htde/network.hpp"
#include "test_helpers.hpp"

using namespace htde;

namespace {

void report(int id, const char* name, bool pass, const std::string& details) {
  std::printf("[criterion %d] %s: %s (%s)\n", id, name, pass ? "PASS" : "FAIL",
              details.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

RunConfig chain16_config() {
  RunConfig c;
  c.model.topology = Topology::chain_next_nearest;
  c.model.shape = {16};
  c.model.coupling = Coupling::ferro;
  c.model.beta = 0.6;
  c.estimator.t = 4;
  c.estimator.locality_radius = 4;
  c.estimator.leaf_sites = 2;
  c.estimator.ranks = RankSchedule::levels({4, 4, 4});
  c.sampler.kind = "exact";
  c.experiment.sample_counts = {4000, 8000, 16000, 32000, 64000};
  c.experiment.seeds = {1, 2, 3, 4, 5};
  c.experiment.compute_eps_approx = false;
  return c;
}

RunConfig grid4x4_config() {
  RunConfig c;
  c.model.topology = Topology::grid_periodic;
  c.model.shape = {4, 4};
  c.model.coupling = Coupling::ferro;
  c.model.beta = 0.6;
  c.estimator.t = 4;
  c.estimator.locality_radius = 1;
  c.estimator.eligibility = "graph";
  c.estimator.leaf_sites = 2;
  c.estimator.ranks = RankSchedule::levels({6, 8, 4});
  c.sampler.kind = "exact";
  c.experiment.sample_counts = {4000, 8000, 16000, 32000, 64000};
  c.experiment.seeds = {1, 2, 3, 4, 5};
  c.experiment.compute_eps_approx = false;
  return c;
}

double slope_of(const std::vector<BenchmarkRow>& rows, double beta) {
  std::vector<double> log_n, log_eps;
  for (const BenchmarkRow& r : rows)
    if (r.beta == beta) {
      log_n.push_back(std::log(double(r.sample_count)));
      log_eps.push_back(std::log(r.eps_p));
    }
  return least_squares_slope(log_n, log_eps);
}

std::vector<double> eps_at(const std::vector<BenchmarkRow>& rows, double beta, Index count) {
  std::vector<double> out;
  for (const BenchmarkRow& r : rows)
    if (r.beta == beta && r.sample_count == count) out.push_back(r.eps_p);
  return out;
}

SketchOptions acceptance_sketch(int t, int radius = 16) {
  SketchOptions opt;
  opt.t = t;
  opt.locality_radius = radius;
  return opt;
}

struct SyntheticCase {
  Vector density;
  std::vector<Index> level_ranks;  // measured on the density, per level
  bool captured = true;            // sketched moments have the full unfolding rank
};

SyntheticCase make_synthetic(const DimensionTree& tree, const BasisSet& bases,
                             std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(1, 3);
  std::vector<Index> net_ranks;
  for (int level = 1; level <= tree.levels(); ++level) {
    Index cap = level == tree.levels() ? 2 : 3;
    net_ranks.push_back(std::min<Index>(cap, pick(rng)));
  }
  const auto net = testing::random_network(tree, net_ranks, rng);
  SyntheticCase out;
  out.density = testing::squared_density(net);
  const MomentSet moments = moments_from_density(tree, out.density, bases);
  for (int level = 1; level <= tree.levels(); ++level) {
    Index worst = 0;
    for (Index k = 1; k <= tree.nodes_at_level(level); ++k) {
      const NodeId node{level, k};
      const Index truth = testing::unfolding_rank(tree, out.density, node);
      const Matrix& a = moments.A[static_cast<std::size_t>(tree.node_slot(node))];
      const auto f = svd(a);
      Index sketched = 0;
      while (sketched < f.S.size() && f.S(sketched) > 1e-8 * f.S(0)) ++sketched;
      if (sketched != truth) out.captured = false;
      worst = std::max(worst, truth);
    }
    out.level_ranks.push_back(worst);
  }
  return out;
}

}  // namespace

TEST_CASE("exact representation round trip") {
  DimensionTree tree(8, 2, 1);
  const BasisSet bases = build_bases(tree, acceptance_sketch(4));
  std::mt19937_64 rng(424242);
  int checked = 0;
  double worst = 0.0;
  while (checked < 20) {
    const SyntheticCase sc = make_synthetic(tree, bases, rng);
    REQUIRE(sc.captured);  // sketches must reproduce the unfolding ranks
    const MomentSet moments = moments_from_density(tree, sc.density, bases);
    const FitResult fitted = fit(tree, moments, RankSchedule::auto_rank(1e-8));
    worst = std::max(worst, relative_error(fitted.net, sc.density));
    ++checked;
  }
  const bool pass = worst <= 1e-6;
  report(1, "exact representation round trip", pass,
         "20 networks, max rel err " + fmt(worst));
  CHECK(pass);
}

TEST_CASE("trim no-op under extra sketch columns") {
  DimensionTree tree(8, 2, 1);
  const BasisSet narrow = build_bases(tree, acceptance_sketch(3));
  const BasisSet wide = build_bases(tree, acceptance_sketch(4));
  std::mt19937_64 rng(171717);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const SyntheticCase sc = make_synthetic(tree, narrow, rng);
    REQUIRE(sc.captured);
    const RankSchedule schedule = RankSchedule::levels(sc.level_ranks);
    const FitResult a = fit(tree, moments_from_density(tree, sc.density, narrow), schedule);
    const FitResult b = fit(tree, moments_from_density(tree, sc.density, wide), schedule);
    const double diff =
        (materialize(a.net) - materialize(b.net)).norm() / sc.density.norm();
    worst = std::max(worst, diff);
  }
  const bool pass = worst <= 1e-8;
  report(2, "trim no-op under extra sketch columns", pass, "max rel change " + fmt(worst));
  CHECK(pass);
}

TEST_CASE("monte carlo rate on the ferro chain") {
  RunConfig config = chain16_config();
  config.experiment.betas = {0.6};
  const auto rows = run_benchmark(config);
  const double slope = slope_of(rows, 0.6);
  const bool pass = slope >= -0.65 && slope <= -0.35;
  report(3, "monte carlo rate on the ferro chain", pass,
         "log eps_p vs log N slope " + fmt(slope) + ", target [-0.65, -0.35]");
  CHECK(pass);
}

TEST_CASE("temperature ordering") {
  RunConfig config = chain16_config();
  config.experiment.betas = {0.4, 0.8};
  config.experiment.sample_counts = {64000};
  const auto rows = run_benchmark(config);
  const double cold = median(eps_at(rows, 0.8, 64000));
  const double warm = median(eps_at(rows, 0.4, 64000));
  const bool pass = cold < warm;
  report(4, "temperature ordering", pass,
         "median eps_p at N=64000: beta 0.8 -> " + fmt(cold) + ", beta 0.4 -> " +
             fmt(warm));
  CHECK(pass);
}

TEST_CASE("ferro vs antiferro ordering") {
  RunConfig ferro = chain16_config();
  ferro.experiment.betas = {0.4, 0.6};
  ferro.experiment.sample_counts = {64000};
  RunConfig anti = ferro;
  anti.model.coupling = Coupling::antiferro;
  const auto ferro_rows = run_benchmark(ferro);
  const auto anti_rows = run_benchmark(anti);
  bool pass = true;
  std::string details;
  for (double beta : {0.4, 0.6}) {
    const double f = median(eps_at(ferro_rows, beta, 64000));
    const double a = median(eps_at(anti_rows, beta, 64000));
    pass = pass && a >= f;
    details += "beta " + fmt(beta) + ": antiferro " + fmt(a) + " vs ferro " + fmt(f) + "; ";
  }
  report(5, "ferro vs antiferro ordering", pass, details);
  CHECK(pass);
}

TEST_CASE("2d grid rate") {
  bool pass = true;
  std::string details;
  for (Coupling coupling : {Coupling::ferro, Coupling::antiferro}) {
    RunConfig config = grid4x4_config();
    config.model.coupling = coupling;
    config.experiment.betas = {0.4, 0.6, 0.8};
    const auto rows = run_benchmark(config);
    for (double beta : {0.4, 0.6, 0.8}) {
      const double slope = slope_of(rows, beta);
      const bool ok = slope >= -0.65 && slope <= -0.35;
      pass = pass && ok;
      details += std::string(coupling == Coupling::ferro ? "ferro" : "antiferro") +
                 " beta " + fmt(beta) + " slope " + fmt(slope) + "; ";
    }
  }
  report(6, "2d grid rate", pass, details);
  CHECK(pass);
}

TEST_CASE("rank bias-variance trade-off") {
  RunConfig config = grid4x4_config();
  config.model.beta = 0.2;
  config.experiment.sample_counts = {16000, 128000};
  config.experiment.top_ranks = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  const auto rows = run_rank_sweep(config);

  // (a) approximation error is non-increasing in the top-level rank
  std::map<Index, double> approx;
  for (const RankSweepRow& r : rows) approx[r.top_rank] = r.eps_approx;
  bool monotone = true;
  double previous = 2.0;
  for (const auto& [rank, eps] : approx) {
    monotone = monotone && eps <= previous + 1e-10;
    previous = eps;
  }

  // (b) the best rank does not shrink when N grows
  auto argmin_rank = [&](Index count) {
    Index best_rank = 0;
    double best = 1e300;
    for (Index rank : config.experiment.top_ranks) {
      std::vector<double> eps;
      for (const RankSweepRow& r : rows)
        if (r.top_rank == rank && r.sample_count == count) eps.push_back(r.eps_p);
      const double m = median(eps);
      if (m < best) {
        best = m;
        best_rank = rank;
      }
    }
    return best_rank;
  };
  const Index best_small = argmin_rank(16000);
  const Index best_large = argmin_rank(128000);
  const bool ordered = best_small <= best_large;

  // (c) at the largest N, fixed ranks 6 and 10 sit within 2x of their floors
  bool converged = true;
  std::string conv_details;
  for (Index rank : {Index(6), Index(10)}) {
    std::vector<double> eps;
    for (const RankSweepRow& r : rows)
      if (r.top_rank == rank && r.sample_count == 128000) eps.push_back(r.eps_p);
    const double m = median(eps);
    converged = converged && m <= 2.0 * approx[rank];
    conv_details += "rank " + std::to_string(rank) + ": eps_p " + fmt(m) + " vs floor " +
                    fmt(approx[rank]) + "; ";
  }

  const bool pass = monotone && ordered && converged;
  report(7, "rank bias-variance trade-off", pass,
         std::string("monotone floors: ") + (monotone ? "yes" : "no") +
             "; argmin rank " + std::to_string(best_small) + " -> " +
             std::to_string(best_large) + "; " + conv_details);
  CHECK(monotone);
  CHECK(ordered);
  CHECK(converged);
}

TEST_CASE("complexity scaling") {
  auto lean_config = [](Index d) {
    RunConfig c;
    c.model.topology = Topology::chain_next_nearest;
    c.model.shape = {d};
    c.model.coupling = Coupling::ferro;
    c.model.beta = 0.4;
    c.estimator.t = 2;
    c.estimator.locality_radius = 2;
    c.estimator.cluster_radius = 2;
    c.estimator.leaf_sites = 2;
    c.sampler.kind = "gibbs";
    c.sampler.burn_in = 200;
    c.sampler.thin = 1;
    return c;
  };
  auto fit_time_ms = [&](Index d, Index count) {
    RunConfig c = lean_config(d);
    const DimensionTree tree = make_tree(c);
    c.estimator.ranks = RankSchedule::uniform(4, tree.levels());
    const IsingModel model(c.model);
    const BasisSet bases = build_bases(tree, make_sketch_options(c, model));
    const SampleSet samples = draw_samples(c, model, count, 1);
    std::vector<double> times;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const MomentSet moments = estimate_moments(tree, samples, bases);
      const FitResult fitted = fit(tree, moments, c.estimator.ranks);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      (void)fitted;
    }
    return median(times);
  };

  // d sweep at fixed N: fit t = C d^alpha log d, demand alpha <= 1.5
  const std::vector<Index> dims = {8, 16, 32, 64};
  std::vector<double> log_d, adjusted;
  std::string details = "times ms:";
  for (Index d : dims) {
    const double ms = fit_time_ms(d, 20000);
    details += " d" + std::to_string(d) + "=" + fmt(ms);
    log_d.push_back(std::log(double(d)));
    adjusted.push_back(std::log(ms) - std::log(std::log(double(d))));
  }
  const double alpha = least_squares_slope(log_d, adjusted);

  // N sweep at d = 16: per-doubling ratio within [1.6, 2.6]
  const double t10 = fit_time_ms(16, 10000);
  const double t20 = fit_time_ms(16, 20000);
  const double t40 = fit_time_ms(16, 40000);
  const double r1 = t20 / t10, r2 = t40 / t20;
  const bool alpha_ok = alpha <= 1.5;
  const bool ratio_ok = r1 >= 1.6 && r1 <= 2.6 && r2 >= 1.6 && r2 <= 2.6;
  report(8, "complexity scaling", alpha_ok && ratio_ok,
         details + "; alpha " + fmt(alpha) + "; N ratios " + fmt(r1) + ", " + fmt(r2));
  CHECK(alpha_ok);
  CHECK(ratio_ok);
}

TEST_CASE("property suites") {
  bool all = true;
  std::string details;

  {  // sketch orthonormality
    DimensionTree tree(16, 2, 2);
    SketchOptions opt;
    opt.t = 4;
    opt.locality_radius = 4;
    const BasisSet bases = build_bases(tree, opt);
    double worst = 0.0;
    for (Index slot = 0; slot < tree.node_count(); ++slot) {
      const NodeId node = tree.node_at_slot(slot);
      for (const SketchBasis* basis :
           {&bases.cluster_side[static_cast<std::size_t>(slot)],
            &bases.complement_side[static_cast<std::size_t>(slot)]}) {
        if (tree.is_root(node) && basis->side() == SketchSide::cluster) continue;
        if (basis->host_sites().size() > 12) continue;  // enumeration budget
        const Matrix m = basis_matrix(*basis);
        worst = std::max(
            worst, (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).norm());
      }
    }
    const bool ok = worst <= 1e-12;
    all = all && ok;
    details += "gram deviation " + fmt(worst) + "; ";
  }

  {  // streaming associativity, exact
    DimensionTree tree(8, 2, 2);
    SketchOptions opt;
    opt.t = 3;
    const BasisSet bases = build_bases(tree, opt);
    IsingSpec spec;
    spec.topology = Topology::chain_next_nearest;
    spec.shape = {8};
    spec.coupling = Coupling::ferro;
    spec.beta = 0.5;
    const IsingModel model(spec);
    const SampleSet a = model.sample_exact(301, 1);
    const SampleSet b = model.sample_exact(517, 2);
    const MomentSet merged =
        merge_moments(tree, bases, estimate_moments(tree, a, bases),
                      estimate_moments(tree, b, bases));
    const MomentSet joint = estimate_moments(tree, concat(a, b), bases);
    bool exact = true;
    for (Index slot = 0; slot < tree.node_count(); ++slot) {
      const std::size_t s = static_cast<std::size_t>(slot);
      if (joint.A[s].size() > 0 && !(merged.A[s] == joint.A[s])) exact = false;
      if (joint.B[s].size() > 0 &&
          !(merged.B[s].to_matrix() == joint.B[s].to_matrix()))
        exact = false;
    }
    all = all && exact;
    details += std::string("streaming merge exact: ") + (exact ? "yes" : "no") + "; ";
  }

  {  // unbiasedness over 200 resamples
    DimensionTree tree(4, 2, 1);
    SketchOptions opt;
    opt.t = 4;
    opt.locality_radius = 16;
    const BasisSet bases = build_bases(tree, opt);
    IsingSpec spec;
    spec.topology = Topology::chain_next_nearest;
    spec.shape = {4};
    spec.coupling = Coupling::ferro;
    spec.beta = 0.5;
    const IsingModel model(spec);
    const MomentSet exact = moments_from_density(tree, model.dense_density(), bases);
    const Index slot = 1;
    Matrix mean = Matrix::Zero(exact.A[slot].rows(), exact.A[slot].cols());
    Matrix second = mean;
    const int resamples = 200;
    for (int r = 0; r < resamples; ++r) {
      const MomentSet m =
          estimate_moments(tree, model.sample_exact(1000, 9000 + r), bases);
      mean += m.A[slot];
      second += m.A[slot].cwiseProduct(m.A[slot]);
    }
    mean /= double(resamples);
    second /= double(resamples);
    bool unbiased = true;
    for (Index i = 0; i < mean.rows(); ++i)
      for (Index j = 0; j < mean.cols(); ++j) {
        const double var = std::max(second(i, j) - mean(i, j) * mean(i, j), 1e-18);
        if (std::abs(mean(i, j) - exact.A[slot](i, j)) >
            4.0 * std::sqrt(var / double(resamples)) + 1e-12)
          unbiased = false;
      }
    all = all && unbiased;
    details += std::string("unbiased within 4 se: ") + (unbiased ? "yes" : "no") + "; ";
  }

  {  // gauge invariance and evaluate/materialize agreement
    DimensionTree tree(8, 2, 2);
    std::mt19937_64 rng(5150);
    const auto net = testing::random_network(tree, {3, 2}, rng);
    const Vector dense = materialize(net);
    double agree = 0.0;
    std::vector<std::uint8_t> config(8);
    for (Index idx = 0; idx < dense.size(); ++idx) {
      Index rem = idx;
      for (Index j = 7; j >= 0; --j) {
        config[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(rem % 2);
        rem /= 2;
      }
      agree = std::max(agree, std::abs(evaluate(net, config) - dense(idx)));
    }
    const double scale = dense.cwiseAbs().maxCoeff();

    Matrix gauss(3, 3);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Index i = 0; i < 9; ++i) gauss.data()[i] = dist(rng);
    const Matrix q =
        Eigen::HouseholderQR<Matrix>(gauss).householderQ() * Matrix::Identity(3, 3);
    auto rotated = net;
    const Index child = tree.node_slot({1, 1});
    rotated.internal_cores[static_cast<std::size_t>(child)] =
        contract_third_mode(net.internal_cores[static_cast<std::size_t>(child)], q);
    rotated.internal_cores[0] = sandwich(
        q.transpose(), rotated.internal_cores[0],
        Matrix::Identity(rotated.internal_cores[0].dim2(),
                         rotated.internal_cores[0].dim2()));
    const double gauge_dev = (materialize(rotated) - dense).cwiseAbs().maxCoeff();
    const bool ok = agree <= 1e-12 * std::max(1.0, scale) && gauge_dev <= 1e-12 * scale;
    all = all && ok;
    details += "eval/materialize dev " + fmt(agree) + ", gauge dev " + fmt(gauge_dev) + "; ";
  }

  {  // norm inequality on 100 random triples
    std::mt19937_64 rng(616);
    std::normal_distribution<double> dist(0.0, 1.0);
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      Matrix a(4, 3), b(3, 2);
      for (Index i = 0; i < a.size(); ++i) a.data()[i] = dist(rng);
      for (Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
      Tensor3 g(3, 2, 2);
      for (Index k = 0; k < 2; ++k)
        for (Index i = 0; i < 3; ++i)
          for (Index j = 0; j < 2; ++j) g(i, j, k) = dist(rng);
      const Tensor3 d = sandwich(a, g, b);
      if (d.frobenius_norm() >
          spectral_norm(a) * spectral_norm(b) * g.frobenius_norm() + 1e-12)
        ok = false;
    }
    all = all && ok;
    details += std::string("norm bound on 100 triples: ") + (ok ? "yes" : "no");
  }

  report(9, "property suites", all, details);
  CHECK(all);
}
