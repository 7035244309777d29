#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "censreg/error.hpp"
#include "censreg/sim.hpp"
#include "censreg/weights.hpp"

namespace censreg::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string normalized(std::string_view s, char sep) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_' || c == '-') c = sep;
  }
  return out;
}

// Outcome of one replication for one method: estimate and SE per target
// coefficient, NaN when the fit failed.
struct MethodDraw {
  std::vector<double> est;
  std::vector<double> se;
  double floored = 0.0;
  double weight_ratio = 0.0;
  bool failed = false;
};

struct RepResult {
  double censoring = 0.0;
  std::vector<MethodDraw> methods;
};

Scheme scheme_of(Method m) {
  switch (m) {
    case Method::CC: return Scheme::CC;
    case Method::IpcwLogistic: return Scheme::IpcwLogistic;
    case Method::IpcwKm: return Scheme::IpcwKm;
    case Method::IpcwCox: return Scheme::IpcwCox;
    case Method::Full: break;
  }
  throw SchemaError("full-data fit has no weighting scheme");
}

MethodDraw fit_method(Method m, const ScenarioData& data, const ScenarioConfig& cfg) {
  MethodDraw out;
  const auto& targets = data.truth.target_index;
  out.est.assign(targets.size(), kNaN);
  out.se.assign(targets.size(), kNaN);
  const LinkFamily link = LinkFamily::identity();
  try {
    GlmFit fit;
    if (m == Method::Full) {
      fit = fit_glm(build_full_design(data.full, data.design), link);
      out.weight_ratio = 1.0;
    } else {
      WeightSpec spec;
      spec.scheme = scheme_of(m);
      spec.stabilize = cfg.stabilize;
      const WeightVector wv = build_weights(data.observed, spec);
      fit = fit_glm(data.observed, wv, link, {}, data.design);
      double sum = 0.0;
      for (double w : wv.w) sum += w;
      out.weight_ratio = sum / static_cast<double>(wv.size());
      out.floored = static_cast<double>(wv.n_floored);
    }
    const Eigen::VectorXd se = fit.standard_errors();
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto j = static_cast<Eigen::Index>(targets[t]);
      out.est[t] = fit.beta[j];
      out.se[t] = se[j];
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (!std::isfinite(out.est[t]) || !std::isfinite(out.se[t])) out.failed = true;
    }
  } catch (const Error&) {
    out.failed = true;
  }
  return out;
}

RepResult run_replication(const ScenarioConfig& cfg, double scale, std::uint64_t rep) {
  std::mt19937_64 rng = substream(cfg.seed, rep);
  GenerateOptions opts;
  opts.censor_scale = scale;
  opts.noise_scale = cfg.noise_scale;
  const ScenarioData data = generate(cfg.family, cfg.n, cfg.censor_level, rng, opts);
  RepResult r;
  r.censoring = data.censoring_fraction;
  r.methods.reserve(cfg.methods.size());
  for (Method m : cfg.methods) r.methods.push_back(fit_method(m, data, cfg));
  return r;
}

void validate(const ScenarioConfig& cfg) {
  std::vector<std::string> bad;
  if (cfg.n < 50) bad.push_back("n (must be >= 50)");
  if (cfg.n_reps < 1) bad.push_back("n_reps (must be >= 1)");
  if (cfg.target_fraction && !(*cfg.target_fraction > 0.0 && *cfg.target_fraction < 1.0)) {
    bad.push_back("target_fraction (must lie in (0, 1))");
  }
  if (cfg.censor_scale && !(*cfg.censor_scale > 0.0)) bad.push_back("censor_scale (must be > 0)");
  if (cfg.methods.empty()) bad.push_back("methods (empty)");
  if (!(cfg.calibration_tol > 0.0)) bad.push_back("calibration_tol (must be > 0)");
  if (cfg.calibration_draws < 1) bad.push_back("calibration_draws (must be >= 1)");
  if (!(cfg.noise_scale >= 0.0)) bad.push_back("noise_scale (must be >= 0)");
  if (!bad.empty()) {
    std::string msg = "invalid scenario config:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw SchemaError(msg);
  }
  printed_censor_scale(cfg.family, cfg.censor_level);  // family/level compatibility
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::CC: return "cc";
    case Method::IpcwLogistic: return "ipcw";
    case Method::IpcwKm: return "ipcw-km";
    case Method::IpcwCox: return "ipcw-cox";
  }
  return "?";
}

std::string_view display_name(Method m) {
  switch (m) {
    case Method::Full: return "Full";
    case Method::CC: return "CC";
    case Method::IpcwLogistic: return "IPCW";
    case Method::IpcwKm: return "IPCW-KM";
    case Method::IpcwCox: return "IPCW-Cox";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  const std::string k = normalized(s, '-');
  if (k == "full") return Method::Full;
  if (k == "cc") return Method::CC;
  if (k == "ipcw" || k == "ipcw-logistic") return Method::IpcwLogistic;
  if (k == "ipcw-km") return Method::IpcwKm;
  if (k == "ipcw-cox") return Method::IpcwCox;
  throw SchemaError("unknown method '" + std::string(s) + "'");
}

MetricsRow compute_metrics(std::span<const double> estimates, std::span<const double> ses,
                           double truth) {
  if (estimates.empty() || estimates.size() != ses.size()) {
    throw DataError("compute_metrics needs equal, nonzero numbers of estimates and SEs");
  }
  const double m = static_cast<double>(estimates.size());
  double sum_est = 0.0, sum_se = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    sum_est += estimates[i];
    sum_se += ses[i];
  }
  const double mean = sum_est / m;
  MetricsRow row;
  row.truth = truth;
  row.n_used_reps = estimates.size();
  row.bias = mean - truth;
  row.se_model = sum_se / m;
  if (estimates.size() > 1) {
    double ss = 0.0;
    for (double e : estimates) ss += (e - mean) * (e - mean);
    row.sd_empirical = std::sqrt(ss / (m - 1.0));
  } else {
    row.sd_empirical = 0.0;
    row.sd_defined = false;
  }
  if (truth != 0.0) {
    row.pct_bias = 100.0 * std::abs(row.bias / truth);
  } else {
    row.pct_bias = 0.0;
    row.pct_bias_defined = false;
  }
  row.mse = row.bias * row.bias + row.se_model * row.se_model;
  return row;
}

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg) {
  validate(cfg);
  MonteCarloResult res;
  res.config = cfg;
  if (cfg.censor_scale) {
    res.censor_scale = *cfg.censor_scale;
  } else if (cfg.target_fraction) {
    const CalibrationResult cal = calibrate_censoring(cfg.family, cfg.censor_level, *cfg.target_fraction,
                                                      cfg.calibration_tol, 20240101, cfg.calibration_draws);
    res.censor_scale = cal.scale;
    res.calibrated_fraction = cal.achieved;
  } else {
    res.censor_scale = printed_censor_scale(cfg.family, cfg.censor_level);
  }

  std::vector<RepResult> reps(cfg.n_reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.n_reps; r = next++) {
      reps[r] = run_replication(cfg, res.censor_scale, r);
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.n_reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Serial aggregation in replication order.
  double cens = 0.0;
  for (const auto& r : reps) cens += r.censoring;
  res.mean_censoring = cens / static_cast<double>(cfg.n_reps);

  std::mt19937_64 probe = substream(cfg.seed, 0);
  GenerateOptions popts;
  popts.censor_scale = res.censor_scale;
  const Truth truth = generate(cfg.family, 1, cfg.censor_level, probe, popts).truth;

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t t = 0; t < truth.target_index.size(); ++t) {
      std::vector<double> est, se;
      double floored = 0.0, ratio = 0.0;
      std::size_t failed = 0;
      for (const auto& r : reps) {
        const MethodDraw& d = r.methods[mi];
        if (d.failed) {
          ++failed;
          continue;
        }
        est.push_back(d.est[t]);
        se.push_back(d.se[t]);
        floored += d.floored;
        ratio += d.weight_ratio;
      }
      const double beta = truth.beta[static_cast<Eigen::Index>(truth.target_index[t])];
      MetricsRow row;
      if (est.empty()) {
        row.valid = false;
        row.truth = beta;
        row.bias = row.pct_bias = row.se_model = row.sd_empirical = row.mse = kNaN;
        row.sd_defined = false;
      } else {
        row = compute_metrics(est, se, beta);
        row.mean_floored = floored / static_cast<double>(est.size());
        row.mean_weight_ratio = ratio / static_cast<double>(est.size());
      }
      row.method = cfg.methods[mi];
      row.coefficient = truth.target_names[t];
      row.achieved_censoring = res.mean_censoring;
      row.n_failed_reps = failed;
      res.rows.push_back(std::move(row));
    }
  }
  return res;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("scenario config must be a JSON object");
  ScenarioConfig cfg;
  std::vector<std::string> bad;
  auto field = [&](const char* key, auto&& apply) {
    if (!j.contains(key)) return;
    try {
      apply(j.at(key));
    } catch (const std::exception& e) {
      bad.push_back(std::string(key) + " (" + e.what() + ")");
    }
  };
  static const std::vector<std::string> known{
      "family", "n", "censor_level", "target_fraction", "censor_scale", "n_reps", "seed", "methods",
      "stabilize", "threads", "calibration_tol", "calibration_draws", "noise_scale"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) bad.push_back(key + " (unknown field)");
  }
  auto non_negative = [](const nlohmann::json& v) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw std::invalid_argument("expected a non-negative integer");
    }
    return v.get<unsigned long long>();
  };
  auto number = [](const nlohmann::json& v) {
    if (!v.is_number()) throw std::invalid_argument("expected a number");
    return v.get<double>();
  };

  field("family", [&](const auto& v) { cfg.family = family_from_string(v.template get<std::string>()); });
  field("n", [&](const auto& v) { cfg.n = non_negative(v); });
  field("censor_level", [&](const auto& v) {
    cfg.censor_level = censor_level_from_string(v.template get<std::string>());
  });
  field("target_fraction", [&](const auto& v) {
    if (!v.is_null()) cfg.target_fraction = number(v);
  });
  field("censor_scale", [&](const auto& v) {
    if (!v.is_null()) cfg.censor_scale = number(v);
  });
  field("n_reps", [&](const auto& v) { cfg.n_reps = non_negative(v); });
  field("seed", [&](const auto& v) { cfg.seed = non_negative(v); });
  field("methods", [&](const auto& v) {
    if (!v.is_array()) throw std::invalid_argument("expected an array of method names");
    cfg.methods.clear();
    for (const auto& m : v) cfg.methods.push_back(method_from_string(m.template get<std::string>()));
  });
  field("stabilize", [&](const auto& v) {
    if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
    cfg.stabilize = v.template get<bool>();
  });
  field("threads", [&](const auto& v) { cfg.threads = static_cast<unsigned>(non_negative(v)); });
  field("calibration_tol", [&](const auto& v) { cfg.calibration_tol = number(v); });
  field("calibration_draws", [&](const auto& v) { cfg.calibration_draws = non_negative(v); });
  field("noise_scale", [&](const auto& v) { cfg.noise_scale = number(v); });

  if (!bad.empty()) {
    std::string msg = "invalid scenario config:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw SchemaError(msg);
  }
  validate(cfg);
  return cfg;
}

nlohmann::json config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["family"] = std::string(to_string(cfg.family));
  j["n"] = cfg.n;
  j["censor_level"] = std::string(to_string(cfg.censor_level));
  j["target_fraction"] = cfg.target_fraction ? nlohmann::json(*cfg.target_fraction) : nlohmann::json();
  j["censor_scale"] = cfg.censor_scale ? nlohmann::json(*cfg.censor_scale) : nlohmann::json();
  j["n_reps"] = cfg.n_reps;
  j["seed"] = cfg.seed;
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : cfg.methods) methods.push_back(std::string(to_string(m)));
  j["methods"] = methods;
  j["stabilize"] = cfg.stabilize;
  j["threads"] = cfg.threads;
  j["calibration_tol"] = cfg.calibration_tol;
  j["calibration_draws"] = cfg.calibration_draws;
  j["noise_scale"] = cfg.noise_scale;
  return j;
}

}  // namespace censreg::sim
