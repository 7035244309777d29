#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace censreg {

// Product-limit estimate. Only distinct times carrying at least one event are
// stored; surv[k] = prod_{j <= k} (1 - events[j] / at_risk[j]).
struct KmCurve {
  std::vector<double> times;
  std::vector<double> surv;
  std::vector<int> at_risk;
  std::vector<int> events;
};

enum class Side { Right, LeftLimit };

// Events at a tied time are processed before censorings at that time, so a
// record censored at t is still at risk at t. Throws DataError on empty or
// mismatched input, or on negative/non-finite times.
KmCurve km_fit(std::span<const double> times, std::span<const int> event);

// S(t) (Right) or S(t-) (LeftLimit); 1 before the first event time and the
// last value beyond the final one.
double km_eval(const KmCurve& curve, double t, Side side = Side::Right);

struct CoxOptions {
  double tolerance = 1e-8;   // max-abs score at convergence
  int max_iter = 50;
  int max_halvings = 20;
  double theta_cap = 50.0;   // on the standardized scale; beyond it the fit diverges
  // Skips estimation and evaluates everything at this (raw-scale) theta.
  std::optional<Eigen::VectorXd> fixed_theta;
};

// Breslow-tie Cox fit. Covariates are centered at `center` internally;
// baseline increments pair with relative_risk(), so for each event time
//   baseline_increments[j] * sum_{k at risk} relative_risk(h_k) = events[j].
struct CoxFit {
  Eigen::VectorXd theta;               // raw covariate scale
  Eigen::VectorXd center;
  double lp_offset = 0.0;              // shift keeping exp() finite
  std::vector<double> baseline_times;  // distinct event times, increasing
  std::vector<double> baseline_increments;
  std::vector<int> baseline_events;
  double log_partial_likelihood = 0.0;
  Eigen::MatrixXd covariance;          // inverse observed information
  double score_norm = 0.0;             // max-abs score at theta
  int iterations = 0;
  bool converged = false;

  double relative_risk(std::span<const double> h_row) const;
};

// Breslow log partial likelihood, score and observed information on the raw
// covariate scale (no centering). Exposed for verification.
double cox_log_partial_likelihood(std::span<const double> times, std::span<const int> event,
                                  const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta);
Eigen::VectorXd cox_score(std::span<const double> times, std::span<const int> event,
                          const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta);
Eigen::MatrixXd cox_information(std::span<const double> times, std::span<const int> event,
                                const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta);

// Damped Newton maximization of the partial likelihood.
// Throws DataError (no events, size mismatch), SingularError (constant or
// collinear covariates), ConvergenceError (hint "divergence" past theta_cap).
CoxFit cox_fit(std::span<const double> times, std::span<const int> event,
               const Eigen::MatrixXd& covariates, const CoxOptions& opts = {});

struct BreslowBaseline {
  std::vector<double> times;
  std::vector<double> increments;
  std::vector<int> events;
};

// Increment at each distinct event time t_j:
//   events_j / sum_{k : time_k >= t_j} exp(theta' (h_k - center)).
// An empty center means no centering.
BreslowBaseline breslow_baseline(std::span<const double> times, std::span<const int> event,
                                 const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& center = {});

enum class SurvivalForm { Product, Exponential };

struct SurvivalOptions {
  SurvivalForm form = SurvivalForm::Product;
  double floor = 1e-6;
};

struct SurvivalValue {
  double value = 1.0;
  bool degenerate = false;  // a product factor was <= 0 and the result was floored
};

// prod_{j : t_j < u} [1 - increment_j * relative_risk(h_row)], or
// exp(-sum_{t_j < u} increment_j * relative_risk(h_row)) for the exponential form.
SurvivalValue cox_survival_at(const CoxFit& fit, std::span<const double> h_row, double u,
                              const SurvivalOptions& opts = {});

}  // namespace censreg
