#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "censreg/sim.hpp"

namespace censreg::sim {

namespace {

std::string num(double x, int precision = 12) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  os << std::setprecision(precision) << x;
  return os.str();
}

std::string fixed(double x, int decimals) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << x;
  return os.str();
}

}  // namespace

DisplayScale display_scale(Family f) {
  if (f == Family::Independent || f == Family::OutcomeDependent) return {1, 4};
  return {2, 6};
}

std::string metrics_csv(const MonteCarloResult& r) {
  std::ostringstream os;
  os << "method,coefficient,truth,bias,pct_bias,se_model,sd_empirical,mse,achieved_censoring,"
        "n_failed_reps,n_used_reps,valid,pct_bias_defined,sd_defined,mean_floored,mean_weight_ratio\n";
  for (const auto& row : r.rows) {
    os << to_string(row.method) << ',' << row.coefficient << ',' << num(row.truth) << ','
       << num(row.bias) << ',' << (row.pct_bias_defined ? num(row.pct_bias) : "NA") << ','
       << num(row.se_model) << ',' << (row.sd_defined ? num(row.sd_empirical) : "NA") << ','
       << num(row.mse) << ',' << num(row.achieved_censoring) << ',' << row.n_failed_reps << ','
       << row.n_used_reps << ',' << (row.valid ? 1 : 0) << ',' << (row.pct_bias_defined ? 1 : 0)
       << ',' << (row.sd_defined ? 1 : 0) << ',' << num(row.mean_floored) << ','
       << num(row.mean_weight_ratio) << '\n';
  }
  return os.str();
}

std::string metrics_table(const MonteCarloResult& r) {
  const ScenarioConfig& cfg = r.config;
  const DisplayScale ds = display_scale(cfg.family);
  const double est_mul = std::pow(10.0, ds.estimate_exponent);
  const double mse_mul = std::pow(10.0, ds.mse_exponent);

  std::ostringstream os;
  os << "Scenario " << to_string(cfg.family) << ", n = " << cfg.n << ", M = " << cfg.n_reps
     << ", seed = " << cfg.seed << (cfg.stabilize ? ", stabilized weights" : "") << '\n';
  os << "Censoring " << to_string(cfg.censor_level) << ": scale " << num(r.censor_scale, 6)
     << ", mean censored " << fixed(100.0 * r.mean_censoring, 1) << "%\n";
  os << "Bias, SE, SD in 1e-" << ds.estimate_exponent << "; MSE in 1e-" << ds.mse_exponent << '\n';

  const std::vector<std::string> head{"Method", "Coef", "Bias", "Bias(%)", "SE", "SD", "MSE", "Failed"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : r.rows) {
    cells.push_back({std::string(display_name(row.method)), row.coefficient,
                     fixed(row.bias * est_mul, 2),
                     row.pct_bias_defined ? fixed(row.pct_bias, 0) : "NA",
                     fixed(row.se_model * est_mul, 2),
                     row.sd_defined ? fixed(row.sd_empirical * est_mul, 2) : "NA",
                     fixed(row.mse * mse_mul, 2), std::to_string(row.n_failed_reps)});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
  }
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) os << "  ";
      if (c < 2) {
        os << std::left << std::setw(static_cast<int>(width[c])) << line[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << line[c];
      }
    }
    os << '\n';
  };
  emit(head);
  for (const auto& line : cells) emit(line);
  return os.str();
}

}  // namespace censreg::sim
