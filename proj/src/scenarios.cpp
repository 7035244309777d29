#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "censreg/error.hpp"
#include "censreg/sim.hpp"

namespace censreg::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string lowered(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  return out;
}

bool is_scenario_a(Family f) {
  return f == Family::Independent || f == Family::OutcomeDependent;
}

void check_level(Family f, CensorLevel c) {
  const bool a_level = c == CensorLevel::Light || c == CensorLevel::Heavy;
  if (is_scenario_a(f) != a_level) {
    throw SchemaError("censor level '" + std::string(to_string(c)) +
                      "' does not apply to family '" + std::string(to_string(f)) + "'");
  }
}

struct Draw {
  double z1 = 0.0;
  double z2 = 0.0;
  double x = 0.0;
  double eps = 0.0;
  double c = kInf;
};

// Scenario A: Z1 ~ N(18.5, var 3), Z2 ~ Ber(0.5), X ~ Weibull(0.2, 0.25),
// eps ~ N(0, var 0.1). Independent C ~ Weibull(1, s); outcome-dependent
// C = Weibull(1, s) when eps > 0, Weibull(1.5, s) otherwise.
Draw draw_a(Variates& rv, Family family, double scale, const GenerateOptions& opts) {
  Draw d;
  d.z1 = rv.normal(18.5, 3.0);
  d.z2 = rv.bernoulli(0.5) ? 1.0 : 0.0;
  d.x = rv.weibull(0.2, 0.25);
  d.eps = opts.noise_scale * rv.normal(0.0, 0.1);
  if (family == Family::Independent) {
    d.c = rv.weibull(1.0, scale);
  } else {
    const double c_pos = rv.weibull(1.0, scale);
    const double c_neg = rv.weibull(1.5, scale);
    d.c = d.eps > 0.0 ? c_pos : c_neg;
  }
  if (opts.no_censoring) d.c = kInf;
  return d;
}

// Scenario B: Z1 ~ Ber(0.53), Z2 ~ Ber(0.52), X ~ U(0.3, 1.3),
// eps ~ N(0, var 0.01); C ~ Weibull(0.75, q) if Z1 = 0, Weibull(1.25, q) if Z1 = 1.
Draw draw_b(Variates& rv, double scale, const GenerateOptions& opts) {
  Draw d;
  d.z1 = rv.bernoulli(0.53) ? 1.0 : 0.0;
  d.z2 = rv.bernoulli(0.52) ? 1.0 : 0.0;
  d.x = rv.uniform(0.3, 1.3);
  d.eps = opts.noise_scale * rv.normal(0.0, 0.01);
  const double c0 = rv.weibull(0.75, scale);
  const double c1 = rv.weibull(1.25, scale);
  d.c = d.z1 == 0.0 ? c0 : c1;
  if (opts.no_censoring) d.c = kInf;
  return d;
}

ScenarioData assemble(std::vector<Draw> draws, const Eigen::VectorXd& beta,
                      const DesignSpec& design, std::vector<std::size_t> targets,
                      std::vector<std::string> target_names) {
  std::vector<ObservedRecord> obs, full;
  obs.reserve(draws.size());
  full.reserve(draws.size());
  ScenarioData out;
  out.x_true.reserve(draws.size());
  std::size_t censored = 0;
  for (const Draw& d : draws) {
    double y = beta[0] + beta[1] * d.x + beta[2] * d.z1 + beta[3] * d.z2 + d.eps;
    if (beta.size() > 4) y += beta[4] * d.x * d.z1;
    ObservedRecord r;
    r.z = {d.z1, d.z2};
    r.y = y;
    // Ties x == c count as observed.
    r.delta = d.x <= d.c ? 1 : 0;
    r.v = r.delta == 1 ? d.x : d.c;
    if (r.delta == 0) ++censored;
    ObservedRecord f = r;
    f.v = d.x;
    f.delta = 1;
    obs.push_back(std::move(r));
    full.push_back(std::move(f));
    out.x_true.push_back(d.x);
  }
  ColumnNames names;
  names.v = "x";
  names.z = {"z1", "z2"};
  out.censoring_fraction =
      draws.empty() ? 0.0 : static_cast<double>(censored) / static_cast<double>(draws.size());
  out.observed = Dataset(std::move(obs), names);
  out.full = Dataset(std::move(full), names);
  out.truth.beta = beta;
  out.truth.target_index = std::move(targets);
  out.truth.target_names = std::move(target_names);
  out.design = design;
  return out;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Independent: return "independent";
    case Family::OutcomeDependent: return "outcome_dependent";
    case Family::CovariateDependent: return "covariate_dependent";
    case Family::CovariateDependentInteraction: return "covariate_dependent_interaction";
  }
  return "?";
}

std::string_view to_string(CensorLevel c) {
  switch (c) {
    case CensorLevel::Light: return "light";
    case CensorLevel::Heavy: return "heavy";
    case CensorLevel::C20: return "c20";
    case CensorLevel::C40: return "c40";
    case CensorLevel::C65: return "c65";
  }
  return "?";
}

Family family_from_string(std::string_view raw) {
  const std::string s = lowered(raw);
  if (s == "independent") return Family::Independent;
  if (s == "outcome_dependent") return Family::OutcomeDependent;
  if (s == "covariate_dependent") return Family::CovariateDependent;
  if (s == "covariate_dependent_interaction") return Family::CovariateDependentInteraction;
  throw SchemaError("unknown scenario family '" + std::string(raw) + "'");
}

CensorLevel censor_level_from_string(std::string_view raw) {
  const std::string s = lowered(raw);
  if (s == "light") return CensorLevel::Light;
  if (s == "heavy") return CensorLevel::Heavy;
  if (s == "c20") return CensorLevel::C20;
  if (s == "c40") return CensorLevel::C40;
  if (s == "c65") return CensorLevel::C65;
  throw SchemaError("unknown censor level '" + std::string(raw) + "'");
}

double printed_censor_scale(Family f, CensorLevel c) {
  check_level(f, c);
  switch (c) {
    case CensorLevel::Light: return 2.0;
    case CensorLevel::Heavy: return 0.35;
    case CensorLevel::C20: return 2.50;
    case CensorLevel::C40: return 1.50;
    case CensorLevel::C65: return 0.70;
  }
  return 1.0;
}

double nominal_censoring(CensorLevel c) {
  switch (c) {
    case CensorLevel::Light: return 0.20;
    case CensorLevel::Heavy: return 0.40;
    case CensorLevel::C20: return 0.20;
    case CensorLevel::C40: return 0.40;
    case CensorLevel::C65: return 0.65;
  }
  return 0.0;
}

ScenarioData generate_scenario_A(std::size_t n, CensorLevel level, Family family,
                                 std::mt19937_64& rng, const GenerateOptions& opts) {
  if (!is_scenario_a(family)) throw SchemaError("scenario A takes independent or outcome_dependent");
  check_level(family, level);
  const double scale = opts.censor_scale.value_or(printed_censor_scale(family, level));
  Variates rv(rng);
  std::vector<Draw> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) draws.push_back(draw_a(rv, family, scale, opts));
  Eigen::VectorXd beta(4);
  beta << 0.005, -0.05, 0.01, -0.01;  // (1, x, z1, z2)
  return assemble(std::move(draws), beta, {}, {1}, {"x"});
}

ScenarioData generate_scenario_B(std::size_t n, CensorLevel level, bool interaction,
                                 std::mt19937_64& rng, const GenerateOptions& opts) {
  check_level(Family::CovariateDependent, level);
  const double scale = opts.censor_scale.value_or(printed_censor_scale(Family::CovariateDependent, level));
  Variates rv(rng);
  std::vector<Draw> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) draws.push_back(draw_b(rv, scale, opts));
  if (interaction) {
    Eigen::VectorXd beta(5);
    beta << 4.90, 0.045, 0.0037, 0.10, 0.05;  // (1, x, z1, z2, x*z1)
    DesignSpec design;
    design.x_interactions = {0};
    return assemble(std::move(draws), beta, design, {1, 4}, {"x", "x:z1"});
  }
  Eigen::VectorXd beta(4);
  beta << 4.90, 0.045, 0.0037, 0.10;
  return assemble(std::move(draws), beta, {}, {1}, {"x"});
}

ScenarioData generate(Family family, std::size_t n, CensorLevel level, std::mt19937_64& rng,
                      const GenerateOptions& opts) {
  switch (family) {
    case Family::Independent:
    case Family::OutcomeDependent:
      return generate_scenario_A(n, level, family, rng, opts);
    case Family::CovariateDependent:
      return generate_scenario_B(n, level, false, rng, opts);
    case Family::CovariateDependentInteraction:
      return generate_scenario_B(n, level, true, rng, opts);
  }
  throw SchemaError("unknown scenario family");
}

double censoring_fraction(Family family, CensorLevel level, double scale, std::size_t draws,
                          std::uint64_t seed) {
  check_level(family, level);
  std::mt19937_64 rng = substream(seed, 0);
  Variates rv(rng);
  const GenerateOptions opts;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Draw d = is_scenario_a(family) ? draw_a(rv, family, scale, opts) : draw_b(rv, scale, opts);
    if (d.x > d.c) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(draws);
}

CalibrationResult calibrate_scale(const std::function<double(double)>& fraction_at, double start,
                                  double target, double tol) {
  if (!(target > 0.0 && target < 1.0)) throw SchemaError("calibration target must lie in (0, 1)");
  if (!(start > 0.0)) throw SchemaError("calibration start scale must be positive");
  CalibrationResult res;
  auto eval = [&](double s) {
    ++res.evaluations;
    return fraction_at(s);
  };
  double f = eval(start);
  if (std::abs(f - target) <= tol) return {start, f, res.evaluations};

  // Larger scale, later censoring, smaller fraction.
  double lo = start, hi = start;
  double f_lo = f, f_hi = f;
  bool bracketed = false;
  for (int k = 0; k < 60 && !bracketed; ++k) {
    if (f_lo < target) {
      lo *= 0.5;
      f_lo = eval(lo);
    } else if (f_hi > target) {
      hi *= 2.0;
      f_hi = eval(hi);
    }
    bracketed = f_lo >= target && f_hi <= target;
  }
  if (!bracketed) {
    throw DataError("censoring calibration could not bracket target " + std::to_string(target));
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = std::sqrt(lo * hi);
    const double fm = eval(mid);
    if (std::abs(fm - target) <= tol) return {mid, fm, res.evaluations};
    if (fm > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw DataError("censoring calibration did not reach tolerance " + std::to_string(tol));
}

CalibrationResult calibrate_censoring(Family family, CensorLevel level, double target, double tol,
                                      std::uint64_t seed, std::size_t draws) {
  if (!(target > 0.05 && target < 0.95)) {
    throw SchemaError("calibration target must lie in (0.05, 0.95)");
  }
  return calibrate_scale(
      [&](double s) { return censoring_fraction(family, level, s, draws, seed); },
      printed_censor_scale(family, level), target, tol);
}

}  // namespace censreg::sim
