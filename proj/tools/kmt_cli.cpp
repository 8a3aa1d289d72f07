// kmt-cli: samplers, verification experiments and Stein identity checks.
//
// Exit codes: 0 success, 1 an asserted invariant failed, 2 invalid input, 3 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kmt/core/errors.hpp"
#include "kmt/core/parallel.hpp"
#include "kmt/core/random.hpp"
#include "kmt/onestep/coupling.hpp"
#include "kmt/recursion/pinned.hpp"
#include "kmt/recursion/walk.hpp"
#include "kmt/stein/density.hpp"
#include "kmt/stein/stein.hpp"
#include "kmt/verify/experiment.hpp"
#include "kmt/verify/lemmas.hpp"
#include "kmt/verify/marginals.hpp"
#include "kmt/verify/moments.hpp"
#include "kmt/verify/statistics.hpp"

namespace {

using nlohmann::json;
using kmt::RandomSource;

constexpr int kSchemaVersion = 1;
constexpr std::int64_t kPathEmissionLimit = 1024;
constexpr double kMarginalAlpha = 1e-3;
constexpr double kContinuousTolerance = 1e-7;
constexpr double kDiscreteTolerance = 1e-9;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::string subcommand;
  std::vector<std::int64_t> ns;
  std::optional<std::int64_t> endpoint;
  std::optional<std::int64_t> reps;
  std::uint64_t seed = kmt::kDefaultSeed;
  std::vector<double> lambdas;
  std::vector<double> thetas;
  std::string scheme = "kmt-recursive";
  std::string mode = "bridge";
  std::string out;
  std::string format = "json";
  int threads = 1;
  bool emit_paths = false;
  std::string experiment;
  bool negative_control = false;

  std::int64_t reps_or(std::int64_t fallback) const { return reps.value_or(fallback); }
  std::vector<std::int64_t> ns_or(std::vector<std::int64_t> fallback) const { return ns.empty() ? fallback : ns; }
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Outcome {
  json results = json::object();
  std::vector<Assertion> assertions;
  std::string csv;  // filled when the command has a per-replicate table
};

std::string number(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void assert_that(Outcome& out, std::string name, bool passed, std::string detail) {
  out.assertions.push_back({std::move(name), passed, std::move(detail)});
}

json config_json(const CliConfig& cfg) {
  // Thread count is deliberately absent: reports must not depend on it.
  json c = {{"seed", cfg.seed}, {"format", cfg.format}};
  if (!cfg.ns.empty()) c["n"] = cfg.ns;
  if (cfg.endpoint) c["endpoint"] = *cfg.endpoint;
  if (cfg.reps) c["reps"] = *cfg.reps;
  if (!cfg.lambdas.empty()) c["lambda_grid"] = cfg.lambdas;
  if (!cfg.thetas.empty()) c["theta_grid"] = cfg.thetas;
  if (cfg.subcommand == "simulate") c["mode"] = cfg.mode;
  if (cfg.subcommand == "verify") {
    c["experiment"] = cfg.experiment;
    c["scheme"] = cfg.scheme;
    if (cfg.experiment == "covariance") c["mode"] = cfg.mode;
  }
  if (cfg.emit_paths) c["emit_paths"] = true;
  if (cfg.negative_control) c["negative_control"] = true;
  return c;
}

json grid_json(const kmt::CouplingReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json j = {{"parameter", p.parameter}, {"estimate", p.estimate}, {"standard_error", p.standard_error},
              {"failed", p.failed}};
    if (p.failed) j["failure"] = p.failure;
    points.push_back(j);
  }
  return {{"label", r.label}, {"replicates", r.replicates}, {"points", points}};
}

json interval_json(const kmt::Interval& i) {
  return {{"estimate", i.estimate}, {"lower", i.lower}, {"upper", i.upper}};
}

std::string deviation_csv_header() { return "scheme,n,replicate,max_dev,seed_path\n"; }

void deviation_csv_row(std::string& csv, std::string_view scheme, std::int64_t n, std::int64_t replicate,
                       double max_dev, const std::string& seed_path) {
  csv += std::string(scheme) + "," + std::to_string(n) + "," + std::to_string(replicate) + "," + number(max_dev) +
         "," + seed_path + "\n";
}

// ---- simulate ----

Outcome cmd_simulate(const CliConfig& cfg) {
  if (cfg.ns.empty()) throw kmt::DomainError("simulate: --n is required");
  if (cfg.endpoint && cfg.mode != "bridge") throw kmt::DomainError("simulate: --endpoint applies only to --mode bridge");
  const std::int64_t a = cfg.endpoint.value_or(0);
  const std::int64_t reps = cfg.reps_or(1);
  if (reps < 1) throw kmt::DomainError("simulate: --reps must be positive");
  for (auto n : cfg.ns) {
    if (n < 1) throw kmt::DomainError("simulate: n must be positive");
    if (cfg.mode == "bridge" && !kmt::ConditionalWalkLaw::feasible(n, a)) {
      throw kmt::DomainError("simulate: infeasible (n=" + std::to_string(n) + ", endpoint=" + std::to_string(a) +
                             "): need |a| <= n and n + a even");
    }
  }
  Outcome out;
  out.csv = deviation_csv_header();
  json samples = json::array();
  const RandomSource root = RandomSource(cfg.seed).split(cfg.mode);
  for (auto n : cfg.ns) {
    const bool paths = cfg.emit_paths || n <= kPathEmissionLimit;
    const RandomSource base = root.split(static_cast<std::uint64_t>(n));
    auto rows = kmt::run_replicates(reps, cfg.threads, [&](std::int64_t r) {
      const RandomSource src = base.split(static_cast<std::uint64_t>(r));
      json j = {{"n", n}, {"replicate", r}, {"seed_path", src.path_string()}};
      if (cfg.mode == "bridge") {
        kmt::PinnedCouplingSampler sampler;
        const auto c = sampler(n, a, src);
        j["endpoint"] = a;
        j["max_dev"] = kmt::max_deviation(c);
        j["split"] = c.split;
        j["diag_tl"] = c.diag_tl;
        j["diag_tr"] = c.diag_tr;
        j["diag_t"] = c.diag_t;
        if (paths) {
          j["walk"] = c.s;
          j["w"] = c.w;
          j["gaussian"] = c.y;
        }
      } else {
        kmt::WalkCouplingSampler sampler;
        const auto c = cfg.mode == "walk" ? sampler.walk(n, src) : sampler.infinite(n, src);
        j["max_dev"] = kmt::max_deviation(c);
        if (paths) {
          j["walk"] = std::vector<std::int64_t>(c.walk.values().begin(), c.walk.values().end());
          j["gaussian"] = std::vector<double>(c.gauss.values().begin(), c.gauss.values().end());
        }
      }
      return j;
    });
    for (auto& j : rows) {
      deviation_csv_row(out.csv, "kmt-recursive", n, j["replicate"].get<std::int64_t>(), j["max_dev"].get<double>(),
                        j["seed_path"].get<std::string>());
      samples.push_back(std::move(j));
    }
  }
  out.results = {{"mode", cfg.mode}, {"samples", samples}};
  return out;
}

// ---- verify experiments ----

void require_json(const CliConfig& cfg, std::string_view what) {
  if (cfg.format != "json") {
    throw kmt::DomainError(std::string(what) + ": csv output covers per-replicate deviations only (simulate, growth, tails)");
  }
}

Outcome verify_marginals(const CliConfig& cfg) {
  require_json(cfg, "marginals");
  const auto scheme = kmt::parse_scheme(cfg.scheme);
  const auto ns = cfg.ns_or({8});
  const std::int64_t reps = cfg.reps_or(100000);
  if (reps < 100) throw kmt::DomainError("marginals: --reps must be >= 100");
  for (auto n : ns) {
    if (n < 1 || n > kmt::kMaxEnumeratedSteps) {
      throw kmt::DomainError("marginals: n must lie in [1, " + std::to_string(kmt::kMaxEnumeratedSteps) + "]");
    }
  }
  Outcome out;
  const RandomSource root = RandomSource(cfg.seed).split("marginals");
  json pinned = json::array(), walks = json::array();
  for (auto n : ns) {
    for (std::int64_t a = -n; a <= n; a += 2) {
      const auto src = root.split("pinned").split(static_cast<std::uint64_t>(n)).split(static_cast<std::uint64_t>(a + n));
      const auto gof = kmt::pinned_marginal_test(n, a, reps, src, cfg.threads);
      pinned.push_back({{"n", n}, {"endpoint", a}, {"statistic", gof.statistic}, {"dof", gof.dof},
                        {"p_value", gof.p_value}});
      if (gof.dof > 0) {
        assert_that(out, "pinned paths uniform n=" + std::to_string(n) + " a=" + std::to_string(a),
                    gof.p_value > kMarginalAlpha, "p=" + number(gof.p_value));
      }
    }
    const auto src = root.split(kmt::scheme_name(scheme)).split(static_cast<std::uint64_t>(n));
    const auto gof = kmt::walk_marginal_test(scheme, n, reps, src, cfg.threads);
    walks.push_back({{"n", n}, {"scheme", kmt::scheme_name(scheme)}, {"statistic", gof.statistic}, {"dof", gof.dof},
                     {"p_value", gof.p_value}});
    assert_that(out, "walk steps uniform n=" + std::to_string(n), gof.p_value > kMarginalAlpha,
                "p=" + number(gof.p_value));
  }
  out.results = {{"alpha", kMarginalAlpha}, {"pinned", pinned}, {"walk", walks}};
  return out;
}

Outcome verify_covariance(const CliConfig& cfg) {
  require_json(cfg, "covariance");
  const auto ns = cfg.ns_or({16});
  if (ns.size() != 1) throw kmt::DomainError("covariance: give a single --n");
  const std::int64_t n = ns[0];
  const std::int64_t a = cfg.endpoint.value_or(0);
  const std::int64_t reps = cfg.reps_or(100000);
  if (reps < 100) throw kmt::DomainError("covariance: --reps must be >= 100");
  if (n < 2 || n > 256) throw kmt::DomainError("covariance: n must lie in [2, 256]");
  if (cfg.mode == "bridge" && !kmt::ConditionalWalkLaw::feasible(n, a)) {
    throw kmt::DomainError("covariance: infeasible (n, endpoint)");
  }
  const bool bridge = cfg.mode == "bridge";
  const RandomSource root = RandomSource(cfg.seed).split("covariance").split(cfg.mode);
  const auto size = static_cast<std::size_t>(n + 1);
  // Chunked accumulation: per-chunk sums merged in index order.
  const std::int64_t chunks = std::min<std::int64_t>(reps, 64);
  auto partial = kmt::run_replicates(chunks, cfg.threads, [&](std::int64_t c) {
    std::vector<double> sum(size * size, 0.0), sq(size * size, 0.0);
    kmt::PinnedCouplingSampler pinned;
    kmt::WalkCouplingSampler walk;
    for (std::int64_t r = reps * c / chunks; r < reps * (c + 1) / chunks; ++r) {
      const auto src = root.split(static_cast<std::uint64_t>(r));
      std::vector<double> y;
      if (bridge) {
        y = pinned(n, a, src).y;
      } else {
        const auto w = cfg.mode == "walk" ? walk.walk(n, src) : walk.infinite(n, src);
        y.assign(w.gauss.values().begin(), w.gauss.values().end());
      }
      for (std::size_t i = 1; i < size; ++i)
        for (std::size_t j = i; j < size; ++j) {
          const double v = y[i] * y[j];
          sum[i * size + j] += v;
          sq[i * size + j] += v * v;
        }
    }
    return std::make_pair(sum, sq);
  });
  std::vector<double> sum(size * size, 0.0), sq(size * size, 0.0);
  for (const auto& [s, q] : partial) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      sum[i] += s[i];
      sq[i] += q[i];
    }
  }
  Outcome out;
  json entries = json::array();
  double worst = 0.0;
  std::int64_t beyond = 0, count = 0;
  const double dn = static_cast<double>(n), dr = static_cast<double>(reps);
  const std::size_t last = bridge ? size - 1 : size;
  for (std::size_t i = 1; i < last; ++i)
    for (std::size_t j = i; j < last; ++j) {
      const double target = bridge ? static_cast<double>(i) * (dn - static_cast<double>(j)) / dn : static_cast<double>(i);
      const double mean = sum[i * size + j] / dr;
      const double se = std::sqrt(std::max(0.0, sq[i * size + j] / dr - mean * mean) / dr);
      const double z = se > 0.0 ? (mean - target) / se : 0.0;
      worst = std::max(worst, std::fabs(z));
      beyond += std::fabs(z) > 3.0 ? 1 : 0;
      ++count;
      entries.push_back({{"i", i}, {"j", j}, {"estimate", mean}, {"standard_error", se}, {"target", target}, {"z", z}});
    }
  out.results = {{"n", n}, {"mode", cfg.mode}, {"replicates", reps}, {"entries", entries}, {"max_abs_z", worst},
                 {"entries_beyond_3se", beyond}, {"entry_count", count}};
  assert_that(out, "covariance within 3 SE", beyond == 0,
              std::to_string(beyond) + " of " + std::to_string(count) + " entries beyond 3 SE, max |z|=" + number(worst));
  return out;
}

json growth_json(const kmt::GrowthFit& fit) {
  json rows = json::array(), tails = json::array();
  for (const auto& r : fit.rows) {
    rows.push_back({{"n", r.n}, {"replicates", r.replicates}, {"median", r.median}, {"q90", r.q90}, {"q99", r.q99},
                    {"median_se", r.median_se}, {"median_ci", {r.median_lower, r.median_upper}}});
  }
  for (const auto& t : fit.tails) {
    json points = json::array();
    for (const auto& p : t.points) {
      points.push_back({{"x", p.x}, {"log_tail", p.log_tail}, {"band", {p.band_lower, p.band_upper}},
                        {"fitted", p.fitted}});
    }
    tails.push_back({{"n", t.n}, {"probability_floor", t.probability_floor}, {"slope", t.slope},
                     {"intercept", t.intercept}, {"band_multiplier", t.band_multiplier},
                     {"negative_slope", t.negative_slope}, {"within_bands", t.within_bands}, {"points", points}});
  }
  json j = {{"scheme", kmt::scheme_name(fit.scheme)}, {"model", kmt::model_name(fit.model)}, {"quantiles", rows},
            {"tails", tails}};
  if (!fit.coefficients.empty()) {
    const bool linear = fit.model == kmt::GrowthModel::linear_in_log_n;
    j["fit"] = {{linear ? "c1" : "exponent", interval_json(fit.coefficients[0])},
                {linear ? "c2" : "log_prefactor", interval_json(fit.coefficients[1])},
                {"residuals", fit.residuals},
                {"residual_sd", fit.residual_sd},
                {"curvature", interval_json(fit.curvature)},
                {"ratio_trend", interval_json(fit.ratio_trend)}};
  }
  return j;
}

std::string growth_csv(const kmt::ExperimentPlan& plan, const kmt::GrowthFit& fit) {
  std::string csv = deviation_csv_header();
  for (std::size_t i = 0; i < plan.ns.size(); ++i) {
    const auto src = plan.stream(plan.ns[i]);
    for (std::size_t r = 0; r < fit.samples[i].size(); ++r) {
      deviation_csv_row(csv, kmt::scheme_name(plan.scheme), plan.ns[i], static_cast<std::int64_t>(r), fit.samples[i][r],
                        src.split(r).path_string());
    }
  }
  return csv;
}

kmt::ExperimentPlan deviation_plan(const CliConfig& cfg, std::vector<std::int64_t> default_ns,
                                   std::int64_t default_reps) {
  kmt::ExperimentPlan plan;
  plan.scheme = kmt::parse_scheme(cfg.scheme);
  plan.ns = cfg.ns_or(std::move(default_ns));
  plan.replicates = {cfg.reps_or(default_reps)};
  plan.seed = cfg.seed;
  plan.threads = cfg.threads;
  plan.validate();
  return plan;
}

Outcome verify_growth(const CliConfig& cfg) {
  const auto plan = deviation_plan(cfg, {256, 1024, 4096, 16384}, 500);
  if (plan.ns.size() < 2) throw kmt::DomainError("growth: need at least two n values");
  const auto fit = kmt::run_deviation_experiment(plan);
  Outcome out;
  out.results = growth_json(fit);
  if (plan.scheme == kmt::Scheme::kmt_recursive) {
    assert_that(out, "median/log n has no increasing trend", fit.ratio_trend.lower <= 0.0,
                "ratio-trend slope CI [" + number(fit.ratio_trend.lower) + ", " + number(fit.ratio_trend.upper) + "]");
    if (plan.ns.size() >= 3) {
      assert_that(out, "no upward curvature in log n", fit.curvature.lower <= 0.0,
                  "curvature CI [" + number(fit.curvature.lower) + ", " + number(fit.curvature.upper) + "]");
    }
  } else if (plan.scheme == kmt::Scheme::skorokhod) {
    const double e = fit.coefficients[0].estimate;
    assert_that(out, "power-law exponent in [0.2, 0.3]", e >= 0.2 && e <= 0.3, "exponent " + number(e));
  }
  if (cfg.format == "csv") out.csv = growth_csv(plan, fit);
  return out;
}

Outcome verify_tails(const CliConfig& cfg) {
  const auto plan = deviation_plan(cfg, {4096}, 50000);
  const auto fit = kmt::run_deviation_experiment(plan);
  Outcome out;
  out.results = growth_json(fit);
  for (const auto& t : fit.tails) {
    const std::string at = " at n=" + std::to_string(t.n);
    assert_that(out, "negative tail slope" + at, t.negative_slope, "slope " + number(t.slope));
    assert_that(out, "log-tail within bootstrap bands of its linear fit" + at, t.within_bands,
                "band multiplier " + number(t.band_multiplier));
  }
  if (cfg.format == "csv") out.csv = growth_csv(plan, fit);
  return out;
}

Outcome verify_moments(const CliConfig& cfg) {
  require_json(cfg, "moments");
  const auto ns = cfg.ns_or({10, 100, 1000});
  const auto thetas = cfg.thetas.empty() ? std::vector<double>{0.2} : cfg.thetas;
  const auto lambdas = cfg.lambdas.empty() ? std::vector<double>{0.1, 0.2} : cfg.lambdas;
  const std::int64_t a = cfg.endpoint.value_or(0);
  const std::int64_t reps = cfg.reps_or(10000);
  for (auto n : ns) {
    if (n < 2) throw kmt::DomainError("moments: n must be >= 2");
  }
  const RandomSource root = RandomSource(cfg.seed).split("moments");
  Outcome out;

  // One-step coupling: E exp(theta |S_n - Z_n|) should not trend in n.
  std::vector<kmt::CouplingReport> onestep;
  json onestep_json = json::array();
  for (auto n : ns) {
    onestep.push_back(kmt::exp_moment_estimate(kmt::OneStepCoupler::binomial, n, 0, 0, thetas, reps,
                                               root.split("one-step").split(static_cast<std::uint64_t>(n)), cfg.threads));
    auto j = grid_json(onestep.back());
    j["n"] = n;
    onestep_json.push_back(j);
  }
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    double worst = 0.0;
    for (std::size_t i = 0; i < onestep.size(); ++i)
      for (std::size_t k = i + 1; k < onestep.size(); ++k) {
        const auto& p = onestep[i].points[t];
        const auto& q = onestep[k].points[t];
        const double se = std::hypot(p.standard_error, q.standard_error);
        worst = std::max(worst, se > 0.0 ? std::fabs(p.estimate - q.estimate) / se : 0.0);
      }
    assert_that(out, "one-step moment uniform in n at theta=" + number(thetas[t]), worst < 5.0,
                "max pairwise |diff|/SE " + number(worst));
  }

  // Pinned coupling: E exp(lambda max|W - Y|), reported against log n.
  json pinned = json::array();
  for (auto n : ns) {
    if (!kmt::ConditionalWalkLaw::feasible(n, a)) continue;
    const auto report = kmt::estimate_exp_max_moment(n, a, lambdas, reps,
                                                     root.split("pinned").split(static_cast<std::uint64_t>(n)), cfg.threads);
    auto j = grid_json(report);
    j["n"] = n;
    j["endpoint"] = a;
    j["log_estimate_over_log_n"] = kmt::log_estimate_over_log_n(report, n);
    pinned.push_back(j);
  }

  // Exact endpoint square moment against its closed-form bound.
  json exact = json::array();
  bool exact_ok = true;
  for (std::int64_t n = 1; n <= 20; ++n) {
    for (double theta : {0.05, 0.1, 0.15, 0.2, 0.24}) {
      const auto check = kmt::endpoint_square_moment_exact(n, theta);
      exact_ok = exact_ok && check.holds;
      exact.push_back({{"n", n}, {"theta", theta}, {"value", check.estimate}, {"bound", check.bound}});
    }
  }
  assert_that(out, "endpoint square moment bound (exact, n <= 20)", exact_ok, "");

  const auto constants = kmt::implied_constants(onestep, {});
  out.results = {{"one_step", onestep_json}, {"pinned_max", pinned}, {"endpoint_square_exact", exact},
                 {"implied_kappa", constants.kappa}};
  return out;
}

std::vector<kmt::DensitySpec> stein_densities() {
  return {kmt::uniform_density(), kmt::triangular_density(-std::sqrt(6.0), 0.0, std::sqrt(6.0)),
          kmt::triangular_density(-2.0, 0.5, 1.5), kmt::truncated_normal_density(8.0)};
}

Outcome run_stein(const CliConfig& cfg) {
  require_json(cfg, "stein");
  const auto ns = cfg.ns_or({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  for (auto n : ns) {
    if (n < 1 || n > kmt::kMaxEnumerationSteps) {
      throw kmt::DomainError("stein-check: n=" + std::to_string(n) + " exceeds the enumeration cutoff " +
                             std::to_string(kmt::kMaxEnumerationSteps));
    }
  }
  Outcome out;
  const auto battery = kmt::test_function_battery();
  if (cfg.negative_control) {
    // Constant coefficient T = Var(X) in place of h(X).
    json rows = json::array();
    for (const auto& density : stein_densities()) {
      const double var = density.variance();
      const double r = kmt::stein_identity_residual(density, [var](double) { return var; }, battery[2]);
      rows.push_back({{"density", density.name()}, {"phi", battery[2].name}, {"coefficient", "variance"},
                      {"residual", r}});
      assert_that(out, "wrong-coefficient residual below tolerance (" + density.name() + ")", r < kContinuousTolerance,
                  "residual " + number(r));
    }
    out.results = {{"negative_control", rows}, {"tolerance", kContinuousTolerance}};
    return out;
  }
  json continuous = json::array();
  for (const auto& density : stein_densities()) {
    const auto h = kmt::stein_h(density);
    for (const auto& phi : battery) {
      const double r = kmt::stein_identity_residual(h, phi);
      continuous.push_back({{"density", density.name()}, {"phi", phi.name}, {"residual", r}});
      assert_that(out, "continuous identity " + density.name() + " " + phi.name, r < kContinuousTolerance,
                  "residual " + number(r));
    }
  }
  json sign_uniform = json::array();
  for (const auto& phi : battery) {
    const auto [first, second] = kmt::sign_uniform_identity_residuals(phi);
    sign_uniform.push_back({{"phi", phi.name}, {"residual_x", first}, {"residual_y", second}});
    assert_that(out, "sign-uniform identities " + phi.name,
                first < kContinuousTolerance && second < kContinuousTolerance,
                "residuals " + number(first) + ", " + number(second));
  }
  const std::vector<kmt::Polynomial> polys = {{{0.0, 1.0}},
                                              {{0.0, 0.0, 1.0}},
                                              {{0.0, 0.0, 0.0, 1.0}},
                                              {{0.0, 0.0, 0.0, 0.0, 1.0}},
                                              {{0.5, -2.0, 0.25, 1.5, -0.75}}};
  json discrete = json::array();
  for (auto n : ns) {
    for (std::size_t p = 0; p < polys.size(); ++p) {
      const double r = kmt::discrete_identity_check(static_cast<int>(n), polys[p]);
      discrete.push_back({{"n", n}, {"coefficients", polys[p].coefficients}, {"residual", r}});
      assert_that(out, "discrete identity n=" + std::to_string(n) + " poly " + std::to_string(p),
                  r < kDiscreteTolerance, "residual " + number(r));
    }
  }
  out.results = {{"continuous", continuous}, {"sign_uniform", sign_uniform}, {"discrete", discrete},
                 {"continuous_tolerance", kContinuousTolerance}, {"discrete_tolerance", kDiscreteTolerance}};
  return out;
}

Outcome cmd_verify(const CliConfig& cfg) {
  kmt::parse_scheme(cfg.scheme);  // unknown schemes are input errors for every experiment
  if (cfg.experiment == "marginals") return verify_marginals(cfg);
  if (cfg.experiment == "covariance") return verify_covariance(cfg);
  if (cfg.experiment == "growth") return verify_growth(cfg);
  if (cfg.experiment == "tails") return verify_tails(cfg);
  if (cfg.experiment == "moments") return verify_moments(cfg);
  if (cfg.experiment == "stein") return run_stein(cfg);
  throw kmt::DomainError("verify: unknown experiment '" + cfg.experiment + "'");
}

// ---- output ----

void emit(const CliConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("failed writing to stdout");
    return;
  }
  std::ofstream file(cfg.out, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + cfg.out + "' for writing");
  file << text;
  file.close();
  if (!file) throw IoError("failed writing '" + cfg.out + "'");
}

std::string render(const CliConfig& cfg, const Outcome& outcome, bool passed) {
  if (cfg.format == "csv") return outcome.csv;
  json assertions = json::array();
  for (const auto& a : outcome.assertions) {
    assertions.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  }
  json report = {{"schema_version", kSchemaVersion},
                 {"command", cfg.subcommand},
                 {"config", config_json(cfg)},
                 {"results", outcome.results},
                 {"assertions", assertions},
                 {"passed", passed}};
  return report.dump(2) + "\n";
}

void add_common(CLI::App* app, CliConfig& cfg) {
  app->add_option("--n", cfg.ns, "Step counts (comma separated)")->delimiter(',');
  app->add_option("--reps", cfg.reps, "Replicates");
  app->add_option("--seed", cfg.seed, "Root seed")->capture_default_str();
  app->add_option("--out", cfg.out, "Output path (default stdout)");
  app->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strong random walk / Brownian motion couplings: samplers, verifiers and Stein checks"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto* simulate = app.add_subcommand("simulate", "Sample coupled walk and Gaussian paths");
  add_common(simulate, cfg);
  simulate->add_option("--endpoint", cfg.endpoint, "Pinned endpoint a (bridge mode)");
  simulate->add_option("--mode", cfg.mode, "Coupling")->check(CLI::IsMember({"bridge", "walk", "infinite"}))
      ->capture_default_str();
  simulate->add_flag("--emit-paths", cfg.emit_paths, "Write paths even when n > 1024");

  auto* verify = app.add_subcommand("verify", "Run a verification experiment");
  add_common(verify, cfg);
  verify->add_option("--experiment", cfg.experiment, "Experiment")
      ->required()
      ->check(CLI::IsMember({"marginals", "covariance", "growth", "tails", "moments", "stein"}));
  verify->add_option("--scheme", cfg.scheme, "kmt-recursive | skorokhod | independent")->capture_default_str();
  verify->add_option("--endpoint", cfg.endpoint, "Pinned endpoint a");
  verify->add_option("--mode", cfg.mode, "Coupling for the covariance experiment")
      ->check(CLI::IsMember({"bridge", "walk", "infinite"}))
      ->capture_default_str();
  verify->add_option("--lambda-grid", cfg.lambdas, "lambda values for max-moment estimates")->delimiter(',');
  verify->add_option("--theta-grid", cfg.thetas, "theta values for one-step moment estimates")->delimiter(',');
  verify->add_flag("--negative-control", cfg.negative_control, "Stein experiment: use a wrong coefficient");

  auto* stein = app.add_subcommand("stein-check", "Check the Stein identities by quadrature and enumeration");
  add_common(stein, cfg);
  stein->add_flag("--negative-control", cfg.negative_control, "Use a wrong coefficient; expected to fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();

  const auto start = std::chrono::steady_clock::now();
  try {
    Outcome outcome;
    if (cfg.subcommand == "simulate") {
      outcome = cmd_simulate(cfg);
    } else if (cfg.subcommand == "verify") {
      outcome = cmd_verify(cfg);
    } else {
      outcome = run_stein(cfg);
    }
    bool passed = true;
    for (const auto& a : outcome.assertions) {
      if (!a.passed) {
        passed = false;
        std::cerr << "FAILED: " << a.name << (a.detail.empty() ? "" : " (" + a.detail + ")") << "\n";
      }
    }
    emit(cfg, render(cfg, outcome, passed));
    std::cerr << "wall-clock " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";
    return passed ? 0 : 1;
  } catch (const kmt::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 1;
  }
}
