#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "censreg/data_model.hpp"
#include "censreg/glm.hpp"

namespace censreg::sim {

// ---------------------------------------------------------------------------
// Random streams

// Independent 64-bit engine for replication `index` of a run seeded by `seed`.
// The mapping is a fixed splitmix64 mix, so a replication's draws do not
// depend on which thread runs it or in what order.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

// Variates built directly on the engine's 64-bit output so that streams are
// identical across standard-library implementations.
class Variates {
 public:
  explicit Variates(std::mt19937_64& engine) : engine_(engine) {}

  double uniform();                               // [0, 1)
  double normal(double mean, double variance);    // Box-Muller, one draw per call
  bool bernoulli(double p);
  double uniform(double lo, double hi);
  // shape = a, scale = b: b * (-log(1 - U))^(1/a)
  double weibull(double shape, double scale);

 private:
  std::mt19937_64& engine_;
};

// ---------------------------------------------------------------------------
// Scenarios

enum class Family { Independent, OutcomeDependent, CovariateDependent, CovariateDependentInteraction };
enum class CensorLevel { Light, Heavy, C20, C40, C65 };

std::string_view to_string(Family f);
std::string_view to_string(CensorLevel c);
Family family_from_string(std::string_view s);
CensorLevel censor_level_from_string(std::string_view s);

// Printed censoring scale for a family/level pair (Weibull scale of C, or q).
double printed_censor_scale(Family f, CensorLevel c);
// Nominal censoring fraction associated with a level (0.20, 0.40, 0.65).
double nominal_censoring(CensorLevel c);

struct GenerateOptions {
  std::optional<double> censor_scale;  // overrides the printed scale
  bool no_censoring = false;           // C = +inf
  double noise_scale = 1.0;            // multiplies epsilon; 0 gives exact data
};

struct Truth {
  Eigen::VectorXd beta;                   // design order: (1, x, z1, z2[, x*z1])
  std::vector<std::size_t> target_index;  // coefficients evaluated by the harness
  std::vector<std::string> target_names;
};

struct ScenarioData {
  Dataset observed;           // (v, delta, z, y)
  Dataset full;               // v = true x, delta = 1
  std::vector<double> x_true;
  Truth truth;
  DesignSpec design;
  double censoring_fraction = 0.0;
};

// Independent / outcome-dependent censoring with a heavy-tailed Weibull X.
ScenarioData generate_scenario_A(std::size_t n, CensorLevel level, Family family,
                                 std::mt19937_64& rng, const GenerateOptions& opts = {});

// Covariate-dependent censoring mimicking a cohort analysis; optional x*z1 term.
ScenarioData generate_scenario_B(std::size_t n, CensorLevel level, bool interaction,
                                 std::mt19937_64& rng, const GenerateOptions& opts = {});

ScenarioData generate(Family family, std::size_t n, CensorLevel level, std::mt19937_64& rng,
                      const GenerateOptions& opts = {});

// ---------------------------------------------------------------------------
// Censoring calibration

struct CalibrationResult {
  double scale = 0.0;
  double achieved = 0.0;
  int evaluations = 0;
};

// Geometric bisection on a scale parameter for a censoring fraction that
// decreases as the scale grows. Returns as soon as |fraction - target| <= tol.
// Throws DataError when no bracket is found.
CalibrationResult calibrate_scale(const std::function<double(double)>& fraction_at, double start,
                                  double target, double tol);

// Monte Carlo censoring fraction for a scenario (common random numbers across
// scales, so the fraction is monotone in the scale).
double censoring_fraction(Family family, CensorLevel level, double scale, std::size_t draws,
                          std::uint64_t seed);

// Finds the censoring scale whose Monte Carlo fraction (draws samples) is
// within tol of target, starting from the printed parameter.
CalibrationResult calibrate_censoring(Family family, CensorLevel level, double target,
                                      double tol = 0.01, std::uint64_t seed = 20240101,
                                      std::size_t draws = 100000);

// ---------------------------------------------------------------------------
// Monte Carlo

enum class Method { Full, CC, IpcwLogistic, IpcwKm, IpcwCox };

std::string_view to_string(Method m);
std::string_view display_name(Method m);
Method method_from_string(std::string_view s);

struct ScenarioConfig {
  Family family = Family::Independent;
  std::size_t n = 400;
  CensorLevel censor_level = CensorLevel::Light;
  std::optional<double> target_fraction;  // calibrate the censoring scale to this
  std::optional<double> censor_scale;     // explicit scale; wins over calibration
  std::size_t n_reps = 1000;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Full, Method::CC, Method::IpcwLogistic, Method::IpcwKm,
                              Method::IpcwCox};
  bool stabilize = false;
  unsigned threads = 1;
  double calibration_tol = 0.005;
  std::size_t calibration_draws = 100000;
  double noise_scale = 1.0;
};

// Parses a JSON scenario config. Throws SchemaError naming every bad field.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& cfg);

struct MetricsRow {
  Method method = Method::Full;
  std::string coefficient;
  double truth = 0.0;
  double bias = 0.0;
  double pct_bias = 0.0;
  double se_model = 0.0;
  double sd_empirical = 0.0;
  double mse = 0.0;
  double achieved_censoring = 0.0;
  std::size_t n_failed_reps = 0;
  std::size_t n_used_reps = 0;
  bool valid = true;              // false when every replication failed
  bool pct_bias_defined = true;   // false when truth == 0
  bool sd_defined = true;         // false when only one replication was used
  double mean_floored = 0.0;      // floored weights per replication
  double mean_weight_ratio = 0.0; // mean of sum(w) / n
};

// bias = mean(est) - truth; pct_bias = 100 |bias / truth|; se_model = mean(se);
// sd_empirical with divisor M - 1; mse = bias^2 + se_model^2.
MetricsRow compute_metrics(std::span<const double> estimates, std::span<const double> ses,
                           double truth);

struct MonteCarloResult {
  ScenarioConfig config;
  double censor_scale = 0.0;
  double calibrated_fraction = -1.0;  // Monte Carlo fraction at the scale, if calibrated
  double mean_censoring = 0.0;
  std::vector<MetricsRow> rows;       // method-major, then coefficient
};

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg);

// Powers of ten used when printing (bias/SE/SD, MSE).
struct DisplayScale {
  int estimate_exponent = 1;
  int mse_exponent = 4;
};
DisplayScale display_scale(Family f);

std::string metrics_csv(const MonteCarloResult& r);
std::string metrics_table(const MonteCarloResult& r);

}  // namespace censreg::sim
