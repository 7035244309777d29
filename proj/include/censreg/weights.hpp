#pragma once

#include <optional>

#include "censreg/data_model.hpp"
#include "censreg/glm.hpp"
#include "censreg/survival.hpp"

namespace censreg {

struct WeightSpec {
  Scheme scheme = Scheme::CC;
  bool include_outcome = true;   // Y enters the logistic / Cox selection model
  bool stabilize = false;
  double floor = 1e-6;           // minimum selection probability
  // Clip complete-case weights to the [1 - p, p] percentile band.
  std::optional<double> truncate_percentile;
  Side km_side = Side::LeftLimit;  // where K-hat is read at each record's v
  SurvivalForm cox_form = SurvivalForm::Product;
  GlmOptions logistic;
  CoxOptions cox;
};

// w = delta, pi = 1. Throws DataError without complete cases.
WeightVector weights_cc(const Dataset& d);

// Logistic model for delta on (1, y?, h). Throws DataError when every record
// is censored; logistic failures propagate as ConvergenceError.
WeightVector weights_ipcw_logistic(const Dataset& d, const WeightSpec& spec);

// Product-limit estimate of P(C > u) from (v, 1 - delta), read at each v.
WeightVector weights_ipcw_km(const Dataset& d, const WeightSpec& spec);

// Cox model for the censoring hazard on (y?, h); pi_i is the fitted
// probability of remaining uncensored up to v_i.
WeightVector weights_ipcw_cox(const Dataset& d, const WeightSpec& spec);

// Multiplies the weights by the marginal probability of remaining uncensored:
// sum(delta)/n for the logistic scheme, the reverse-KM K0(v_i-) for KM and Cox.
// CC weights are returned unchanged (but marked stabilized).
WeightVector stabilize(const WeightVector& wv, const Dataset& d);

// Dispatches on spec.scheme and applies stabilization when requested.
WeightVector build_weights(const Dataset& d, const WeightSpec& spec);

// Selection-model covariates (y?, h) per record, as an n x r matrix.
Eigen::MatrixXd selection_covariates(const Dataset& d, bool include_outcome);

}  // namespace censreg
