#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "censreg/data_model.hpp"
#include "censreg/link.hpp"

namespace censreg {

// Extra design columns. Each index k appends the product x * z_k.
struct DesignSpec {
  std::vector<std::size_t> x_interactions;
};

// Rows entering the weighted estimating equation: design (1, x, z', extras),
// outcome and weight. Only records with positive weight are carried.
struct WeightedDesign {
  Eigen::MatrixXd x;             // rows x k, column-major
  Eigen::VectorXd y;
  Eigen::VectorXd w;
  std::vector<std::size_t> rows; // source record index per design row
  std::vector<std::string> names;

  Eigen::Index n() const noexcept { return x.rows(); }
  Eigen::Index k() const noexcept { return x.cols(); }
};

// Builds the design from records with w_i > 0, using x = v (which equals the
// true covariate for every uncensored record).
WeightedDesign build_design(const Dataset& d, const WeightVector& wv,
                            const DesignSpec& spec = {});

// Unweighted design over all records, treating every v as observed.
WeightedDesign build_full_design(const Dataset& d, const DesignSpec& spec = {});

struct GlmOptions {
  double tolerance = 1e-8;      // relative score norm and relative step size
  int max_iter = 100;
  int max_halvings = 20;
};

struct GlmFit {
  Eigen::VectorXd beta;         // (intercept, x, z..., extras...)
  Eigen::MatrixXd covariance;   // sandwich A^-1 B A^-T
  double dispersion = 1.0;      // Pearson tau^2; NaN when there are no residual df
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;      // see relative_score_norm
  LinkKind link = LinkKind::Identity;
  std::vector<std::string> names;

  Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
};

// U(beta) = sum_i w_i h_i (y_i - mu_i) X_i with h taken at tau^2 = 1; tau^2
// rescales U by a constant and moves neither the root nor the sandwich.
// Throws DomainError when some mu_i leaves the link's mean space.
Eigen::VectorXd glm_score(const Eigen::VectorXd& beta, const WeightedDesign& design,
                          const LinkFamily& link);

// A = -dU/dbeta' = sum_i w_i (d mu/d eta)_i X_i X_i'.
Eigen::MatrixXd glm_information(const Eigen::VectorXd& beta, const WeightedDesign& design,
                                const LinkFamily& link);

// max_j |U_j| / max(1, sum_i w_i |X_ij|): the score measured against the
// column scale of the design.
double relative_score_norm(const Eigen::VectorXd& score, const WeightedDesign& design);

// Solves U(beta) = 0. Identity link: weighted least squares in closed form;
// log/logit: Newton (Fisher scoring) with step halving.
// Throws SingularError, ConvergenceError (hint "separation" for logit), DomainError.
GlmFit fit_glm(const WeightedDesign& design, const LinkFamily& link, const GlmOptions& opts = {});

GlmFit fit_glm(const Dataset& d, const WeightVector& wv, const LinkFamily& link,
               const GlmOptions& opts = {}, const DesignSpec& spec = {});

// A^-1 B A^-T with B = sum_i w_i^2 (y_i - mu_i)^2 X_i X_i', weights treated
// as fixed constants.
Eigen::MatrixXd sandwich_covariance(const GlmFit& fit, const WeightedDesign& design,
                                    const LinkFamily& link);

// sum_i w_i (y_i - mu_i)^2 / v(mu_i) / (#rows - k); 1 for logit.
// Throws DataError when #rows <= k.
double estimate_dispersion(const GlmFit& fit, const WeightedDesign& design,
                           const LinkFamily& link);

}  // namespace censreg
