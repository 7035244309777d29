#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "censreg/error.hpp"
#include "censreg/sim.hpp"

using namespace censreg;
using namespace censreg::sim;

namespace {

bool same(const Dataset& a, const Dataset& b) {
  if (a.n() != b.n()) return false;
  for (std::size_t i = 0; i < a.n(); ++i)
    if (!(a[i] == b[i])) return false;
  return true;
}

const MetricsRow& row_for(const MonteCarloResult& r, Method m, const std::string& coef) {
  for (const auto& row : r.rows)
    if (row.method == m && row.coefficient == coef) return row;
  throw std::runtime_error("missing metrics row");
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("metrics from a fixed set of estimates") {
  const std::vector<double> est{1, 2, 3}, se{0.1, 0.2, 0.3};
  const MetricsRow m = compute_metrics(est, se, 2.0);
  CHECK(m.bias == 0.0);
  CHECK(m.pct_bias == 0.0);
  CHECK(std::abs(m.se_model - 0.2) < 1e-15);
  CHECK(std::abs(m.sd_empirical - 1.0) < 1e-15);
  CHECK(m.mse == m.bias * m.bias + m.se_model * m.se_model);
  CHECK(m.n_used_reps == 3);

  const MetricsRow b = compute_metrics(est, se, 1.0);
  CHECK(b.bias == 1.0);
  CHECK(b.pct_bias == 100.0);

  const MetricsRow z = compute_metrics(est, se, 0.0);
  CHECK_FALSE(z.pct_bias_defined);
  CHECK(z.pct_bias == 0.0);

  const std::vector<double> one{4.0}, one_se{0.5};
  const MetricsRow s = compute_metrics(one, one_se, 4.0);
  CHECK_FALSE(s.sd_defined);
  CHECK(s.sd_empirical == 0.0);

  const std::vector<double> empty;
  CHECK_THROWS_AS(compute_metrics(empty, empty, 1.0), DataError);
  CHECK_THROWS_AS(compute_metrics(est, one_se, 1.0), DataError);
}

TEST_CASE("substreams are reproducible and distinct") {
  auto a = substream(7, 3), b = substream(7, 3), c = substream(7, 4), d = substream(8, 3);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
}

TEST_CASE("generators are deterministic per stream") {
  for (Family f : {Family::Independent, Family::OutcomeDependent, Family::CovariateDependent,
                   Family::CovariateDependentInteraction}) {
    const CensorLevel level = (f == Family::Independent || f == Family::OutcomeDependent) ? CensorLevel::Heavy
                                                                                            : CensorLevel::C40;
    auto r1 = substream(11, 0), r2 = substream(11, 0);
    const ScenarioData a = generate(f, 300, level, r1), b = generate(f, 300, level, r2);
    CHECK(same(a.observed, b.observed));
    CHECK(same(a.full, b.full));
    CHECK(a.censoring_fraction == b.censoring_fraction);
    CHECK(a.censoring_fraction > 0.0);
    for (std::size_t i = 0; i < a.observed.n(); ++i) {
      CHECK(a.observed[i].v <= a.x_true[i]);
      if (a.observed[i].delta) CHECK(a.observed[i].v == a.x_true[i]);
      CHECK(a.full[i].v == a.x_true[i]);
      CHECK(a.full[i].delta == 1);
    }
  }
  auto r = substream(1, 0);
  CHECK_THROWS_AS(generate(Family::Independent, 10, CensorLevel::C20, r), SchemaError);
}

TEST_CASE("no-censoring hook") {
  auto r = substream(3, 1);
  GenerateOptions opts;
  opts.no_censoring = true;
  const ScenarioData s = generate(Family::OutcomeDependent, 200, CensorLevel::Heavy, r, opts);
  CHECK(s.censoring_fraction == 0.0);
  CHECK(same(s.observed, s.full));
}

TEST_CASE("calibrated light censoring holds across replications") {
  const CalibrationResult cal = calibrate_censoring(Family::Independent, CensorLevel::Light, 0.20);
  CHECK(std::abs(cal.achieved - 0.20) <= 0.005);
  GenerateOptions opts;
  opts.censor_scale = cal.scale;
  double total = 0.0;
  const int reps = 5000;
  for (int i = 0; i < reps; ++i) {
    auto r = substream(99, static_cast<std::uint64_t>(i));
    total += generate(Family::Independent, 400, CensorLevel::Light, r, opts).censoring_fraction;
  }
  CHECK(std::abs(total / reps - 0.20) <= 0.03);
}

TEST_CASE("scenario B shape") {
  const CalibrationResult cal = calibrate_censoring(Family::CovariateDependent, CensorLevel::C20, 0.20);
  CHECK(std::abs(cal.achieved - 0.20) <= 0.01);
  GenerateOptions opts;
  opts.censor_scale = cal.scale;
  auto r = substream(5, 0);
  const ScenarioData s = generate_scenario_B(850, CensorLevel::C20, false, r, opts);
  CHECK(std::abs(s.censoring_fraction - 0.20) < 0.06);
  for (double x : s.x_true) CHECK((x >= 0.3 && x <= 1.3));
  CHECK(s.observed.p() == 2);
  CHECK(s.truth.beta.size() == 4);
  CHECK(s.truth.target_names == std::vector<std::string>{"x"});

  auto r2 = substream(5, 0);
  const ScenarioData si = generate_scenario_B(100, CensorLevel::C20, true, r2, opts);
  CHECK(si.observed.p() == 2);
  CHECK(si.truth.beta.size() == 5);
  CHECK(si.truth.target_names == std::vector<std::string>{"x", "x:z1"});
  const WeightedDesign d = build_full_design(si.full, si.design);
  REQUIRE(d.k() == 5);
  for (Eigen::Index i = 0; i < d.n(); ++i) CHECK(d.x(i, 4) == d.x(i, 1) * d.x(i, 2));
}

TEST_CASE("scale calibration") {
  SUBCASE("default starting scales land near their nominal fractions after calibration") {
    for (CensorLevel c : {CensorLevel::C20, CensorLevel::C40, CensorLevel::C65}) {
      const CalibrationResult cal = calibrate_censoring(Family::CovariateDependent, c, nominal_censoring(c), 0.01,
                                                        20240101, 20000);
      CHECK(std::abs(cal.achieved - nominal_censoring(c)) <= 0.01);
      CHECK(std::abs(censoring_fraction(Family::CovariateDependent, c, cal.scale, 20000, 20240101) - cal.achieved) <
            1e-15);
    }
  }
  SUBCASE("analytic root") {
    const double x0 = 3.0;
    auto f = [&](double s) { return 1.0 - std::exp(-x0 / s); };
    const CalibrationResult r = calibrate_scale(f, 0.1, 0.5, 1e-10);
    CHECK(std::abs(r.scale - x0 / std::log(2.0)) < 1e-7);
  }
  SUBCASE("a start already within tolerance costs one evaluation") {
    int calls = 0;
    auto f = [&](double s) {
      ++calls;
      return 1.0 / (1.0 + s);
    };
    const CalibrationResult r = calibrate_scale(f, 1.0, 0.4, 0.25);
    CHECK(r.evaluations == 1);
    CHECK(calls == 1);
    CHECK(r.scale == 1.0);
  }
  SUBCASE("no bracket") {
    auto flat = [](double) { return 0.9; };
    CHECK_THROWS_AS(calibrate_scale(flat, 1.0, 0.2, 0.01), DataError);
  }
  SUBCASE("target range") {
    auto f = [](double s) { return 1.0 / (1.0 + s); };
    CHECK_THROWS_AS(calibrate_scale(f, 1.0, 1.5, 0.01), SchemaError);
    CHECK_THROWS_AS(calibrate_scale(f, 0.0, 0.5, 0.01), SchemaError);
    CHECK_THROWS_AS(calibrate_censoring(Family::Independent, CensorLevel::Light, 0.99), SchemaError);
  }
  SUBCASE("censoring fraction falls as the scale grows") {
    double prev = 1.0;
    for (double s : {0.2, 0.5, 1.0, 2.0, 4.0}) {
      const double f = censoring_fraction(Family::Independent, CensorLevel::Heavy, s, 5000, 1);
      CHECK(f <= prev);
      prev = f;
    }
  }
}

TEST_CASE("noiseless single replication recovers the truth") {
  ScenarioConfig cfg;
  cfg.family = Family::Independent;
  cfg.n = 200;
  cfg.censor_level = CensorLevel::Light;
  cfg.n_reps = 1;
  cfg.noise_scale = 0.0;
  cfg.methods = {Method::Full, Method::CC, Method::IpcwKm};
  const MonteCarloResult r = run_monte_carlo(cfg);
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) {
    CHECK(row.valid);
    CHECK(row.n_used_reps == 1);
    CHECK_FALSE(row.sd_defined);
    CHECK(std::abs(row.bias) < 1e-10);
  }
}

TEST_CASE("Full-only run with two replications") {
  ScenarioConfig cfg;
  cfg.n = 100;
  cfg.n_reps = 2;
  cfg.methods = {Method::Full};
  const MonteCarloResult r = run_monte_carlo(cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].method == Method::Full);
  CHECK(r.rows[0].coefficient == "x");
  CHECK(r.rows[0].sd_defined);
  CHECK(r.rows[0].n_used_reps == 2);
}

TEST_CASE("invalid configurations are rejected with every bad field") {
  ScenarioConfig cfg;
  cfg.n = 10;
  cfg.n_reps = 0;
  try {
    run_monte_carlo(cfg);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("n ") != std::string::npos);
    CHECK(msg.find("n_reps") != std::string::npos);
  }
  ScenarioConfig bad;
  bad.family = Family::CovariateDependent;
  bad.censor_level = CensorLevel::Heavy;
  CHECK_THROWS_AS(run_monte_carlo(bad), SchemaError);
}

TEST_CASE("serial and threaded runs agree exactly") {
  ScenarioConfig cfg;
  cfg.family = Family::OutcomeDependent;
  cfg.censor_level = CensorLevel::Heavy;
  cfg.n = 150;
  cfg.n_reps = 40;
  cfg.seed = 77;
  const std::string serial = metrics_csv(run_monte_carlo(cfg));
  cfg.threads = 3;
  CHECK(metrics_csv(run_monte_carlo(cfg)) == serial);
}

TEST_CASE("harness bookkeeping") {
  ScenarioConfig cfg;
  cfg.family = Family::Independent;
  cfg.censor_level = CensorLevel::Light;
  cfg.target_fraction = 0.20;
  cfg.calibration_draws = 20000;
  cfg.calibration_tol = 0.01;
  cfg.n = 400;
  cfg.n_reps = 200;
  cfg.seed = 4;
  const MonteCarloResult r = run_monte_carlo(cfg);
  CHECK(std::abs(r.calibrated_fraction - 0.20) <= 0.01);
  CHECK(std::abs(r.mean_censoring - 0.20) <= 0.03);
  for (const auto& row : r.rows) {
    CHECK(row.valid);
    CHECK(row.mse == row.bias * row.bias + row.se_model * row.se_model);
    if (row.pct_bias_defined) CHECK(row.pct_bias == 100.0 * std::abs(row.bias / row.truth));
    if (row.method == Method::IpcwLogistic || row.method == Method::IpcwKm || row.method == Method::IpcwCox) {
      CHECK(std::abs(row.mean_weight_ratio - 1.0) <= 0.10);
      CHECK(row.mean_floored == 0.0);
    }
    if (row.method == Method::CC) CHECK(std::abs(row.mean_weight_ratio - (1.0 - r.mean_censoring)) < 1e-12);
  }
}

TEST_CASE("config JSON") {
  const auto j = nlohmann::json::parse(R"({"family": "outcome_dependent", "n": 250, "censor_level": "heavy",
    "n_reps": 12, "seed": 9, "methods": ["cc", "ipcw-cox"], "stabilize": true, "threads": 2})");
  const ScenarioConfig c = config_from_json(j);
  CHECK(c.family == Family::OutcomeDependent);
  CHECK(c.n == 250);
  CHECK(c.methods == std::vector<Method>{Method::CC, Method::IpcwCox});
  CHECK(c.stabilize);
  const ScenarioConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  try {
    config_from_json(nlohmann::json::parse(R"({"n": "many", "colour": 1, "methods": ["bogus"]})"));
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("n ") != std::string::npos);
    CHECK(msg.find("colour") != std::string::npos);
    CHECK(msg.find("methods") != std::string::npos);
  }
  CHECK(method_from_string("IPCW_KM") == Method::IpcwKm);
  CHECK(method_from_string("ipcw-logistic") == Method::IpcwLogistic);
  CHECK(family_from_string("Covariate-Dependent") == Family::CovariateDependent);
}

TEST_CASE("report formats") {
  ScenarioConfig cfg;
  cfg.n = 100;
  cfg.n_reps = 3;
  cfg.methods = {Method::Full, Method::CC};
  const MonteCarloResult r = run_monte_carlo(cfg);
  const std::string csv = metrics_csv(r);
  CHECK(csv.rfind("method,coefficient,truth,bias,pct_bias", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const std::string table = metrics_table(r);
  CHECK(table.find("1e-1") != std::string::npos);
  CHECK(table.find("CC") != std::string::npos);
  CHECK(display_scale(Family::CovariateDependent).mse_exponent == 6);
}

TEST_CASE("full data dominates and error grows with censoring") {
  ScenarioConfig cfg;
  cfg.family = Family::Independent;
  cfg.n = 400;
  cfg.n_reps = 1000;
  cfg.seed = 2024;
  cfg.methods = {Method::Full, Method::CC, Method::IpcwKm};
  cfg.calibration_draws = 20000;
  cfg.calibration_tol = 0.01;
  cfg.censor_level = CensorLevel::Light;
  cfg.target_fraction = 0.20;
  const MonteCarloResult light = run_monte_carlo(cfg);
  cfg.censor_level = CensorLevel::Heavy;
  cfg.target_fraction = 0.40;
  const MonteCarloResult heavy = run_monte_carlo(cfg);
  for (const MonteCarloResult* r : {&light, &heavy}) {
    const double full = row_for(*r, Method::Full, "x").mse;
    CHECK(full <= row_for(*r, Method::CC, "x").mse);
    CHECK(full <= row_for(*r, Method::IpcwKm, "x").mse);
  }
  CHECK(row_for(light, Method::CC, "x").mse < row_for(heavy, Method::CC, "x").mse);
  CHECK(row_for(light, Method::IpcwKm, "x").mse < row_for(heavy, Method::IpcwKm, "x").mse);
}

}  // TEST_SUITE
