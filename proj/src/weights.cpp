#include "censreg/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "censreg/error.hpp"

namespace censreg {

namespace {

void require_complete_cases(const Dataset& d, Scheme scheme) {
  if (d.empty()) throw DataError("empty dataset");
  if (d.n_uncensored() == 0) {
    throw DataError(std::string(to_string(scheme)) +
                    " weights need at least one uncensored record (all records are censored)");
  }
}

WeightVector unit_weights(const Dataset& d, Scheme scheme) {
  WeightVector wv;
  wv.scheme = scheme;
  wv.pi.assign(d.n(), 1.0);
  wv.w.assign(d.n(), 1.0);
  wv.floored.assign(d.n(), false);
  return wv;
}

double quantile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

void truncate(WeightVector& wv, double p) {
  if (!(p > 0.5 && p <= 1.0)) throw SchemaError("truncation percentile must lie in (0.5, 1]");
  std::vector<double> positive;
  for (double w : wv.w) {
    if (w > 0.0) positive.push_back(w);
  }
  if (positive.empty()) return;
  const double lo = quantile(positive, 1.0 - p);
  const double hi = quantile(positive, p);
  for (double& w : wv.w) {
    if (w <= 0.0) continue;
    const double clipped = std::clamp(w, lo, hi);
    if (clipped != w) {
      ++wv.n_truncated;
      w = clipped;
    }
  }
}

// w_i = delta_i / max(pi_i, floor), then optional stabilization and truncation.
WeightVector finish(const Dataset& d, std::vector<double> pi, Scheme scheme,
                    const WeightSpec& spec) {
  if (!(spec.floor > 0.0)) throw SchemaError("weight floor must be positive");
  WeightVector wv;
  wv.scheme = scheme;
  wv.w.assign(d.n(), 0.0);
  wv.floored.assign(d.n(), false);
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (d[i].delta != 1) continue;
    if (!(pi[i] >= spec.floor)) {
      pi[i] = spec.floor;
      wv.floored[i] = true;
      ++wv.n_floored;
    }
    wv.w[i] = 1.0 / pi[i];
  }
  wv.pi = std::move(pi);
  return wv;
}

WeightVector post_process(WeightVector wv, const Dataset& d, const WeightSpec& spec) {
  if (spec.stabilize) wv = stabilize(wv, d);
  if (spec.truncate_percentile) truncate(wv, *spec.truncate_percentile);
  return wv;
}

// f * w_i, computed as f / pi_i while w_i is still exactly 1 / pi_i so that
// f == pi_i gives exactly 1.
double scaled(const WeightVector& wv, std::size_t i, double f) {
  const double w = wv.w[i];
  if (w <= 0.0) return w;
  if (i < wv.pi.size() && w == 1.0 / wv.pi[i]) return f / wv.pi[i];
  return w * f;
}

KmCurve reverse_km(const Dataset& d) {
  const std::vector<double> v = d.v_column();
  std::vector<int> censored(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) censored[i] = d[i].delta_star();
  return km_fit(v, censored);
}

}  // namespace

Eigen::MatrixXd selection_covariates(const Dataset& d, bool include_outcome) {
  const std::size_t r = (include_outcome ? 1 : 0) + d.p() + d.q();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(d.n()), static_cast<Eigen::Index>(r));
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& rec = d[i];
    Eigen::Index c = 0;
    const auto row = static_cast<Eigen::Index>(i);
    if (include_outcome) m(row, c++) = rec.y;
    for (double z : rec.z) m(row, c++) = z;
    for (double h : rec.h_extra) m(row, c++) = h;
  }
  return m;
}

WeightVector weights_cc(const Dataset& d) {
  require_complete_cases(d, Scheme::CC);
  WeightVector wv;
  wv.scheme = Scheme::CC;
  wv.pi.assign(d.n(), 1.0);
  wv.w.resize(d.n());
  wv.floored.assign(d.n(), false);
  for (std::size_t i = 0; i < d.n(); ++i) wv.w[i] = static_cast<double>(d[i].delta);
  return wv;
}

WeightVector weights_ipcw_logistic(const Dataset& d, const WeightSpec& spec) {
  require_complete_cases(d, Scheme::IpcwLogistic);
  if (d.n_censored() == 0) return post_process(unit_weights(d, Scheme::IpcwLogistic), d, spec);

  const Eigen::MatrixXd cov = selection_covariates(d, spec.include_outcome);
  WeightedDesign design;
  design.x.resize(cov.rows(), cov.cols() + 1);
  design.x.col(0).setOnes();
  design.x.rightCols(cov.cols()) = cov;
  design.y.resize(cov.rows());
  for (std::size_t i = 0; i < d.n(); ++i) design.y[static_cast<Eigen::Index>(i)] = d[i].delta;
  design.w = Eigen::VectorXd::Ones(cov.rows());
  design.names.assign(static_cast<std::size_t>(design.x.cols()), "");

  const LinkFamily logit = LinkFamily::logit();
  const GlmFit fit = fit_glm(design, logit, spec.logistic);
  const Eigen::VectorXd eta = design.x * fit.beta;
  std::vector<double> pi(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) pi[i] = logit.inverse(eta[static_cast<Eigen::Index>(i)]);
  return post_process(finish(d, std::move(pi), Scheme::IpcwLogistic, spec), d, spec);
}

WeightVector weights_ipcw_km(const Dataset& d, const WeightSpec& spec) {
  require_complete_cases(d, Scheme::IpcwKm);
  if (d.n_censored() == 0) return post_process(unit_weights(d, Scheme::IpcwKm), d, spec);

  const KmCurve k = reverse_km(d);
  std::vector<double> pi(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) pi[i] = km_eval(k, d[i].v, spec.km_side);
  return post_process(finish(d, std::move(pi), Scheme::IpcwKm, spec), d, spec);
}

WeightVector weights_ipcw_cox(const Dataset& d, const WeightSpec& spec) {
  require_complete_cases(d, Scheme::IpcwCox);
  if (d.n_censored() == 0) return post_process(unit_weights(d, Scheme::IpcwCox), d, spec);

  const Eigen::MatrixXd cov = selection_covariates(d, spec.include_outcome);
  const std::vector<double> v = d.v_column();
  std::vector<int> censored(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) censored[i] = d[i].delta_star();
  const CoxFit fit = cox_fit(v, censored, cov, spec.cox);

  const SurvivalOptions sopts{spec.cox_form, spec.floor};
  std::vector<double> pi(d.n());
  std::size_t degenerate = 0;
  std::vector<double> row(static_cast<std::size_t>(cov.cols()));
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = cov(static_cast<Eigen::Index>(i), j);
    }
    const SurvivalValue s = cox_survival_at(fit, row, d[i].v, sopts);
    pi[i] = s.value;
    if (s.degenerate && d[i].delta == 1) ++degenerate;
  }
  WeightVector wv = finish(d, std::move(pi), Scheme::IpcwCox, spec);
  wv.n_degenerate = degenerate;
  return post_process(std::move(wv), d, spec);
}

WeightVector stabilize(const WeightVector& wv, const Dataset& d) {
  if (wv.stabilized) throw DataError("weights are already stabilized");
  if (wv.w.size() != d.n()) throw DataError("weight vector length differs from dataset size");
  WeightVector out = wv;
  out.stabilized = true;
  switch (wv.scheme) {
    case Scheme::CC:
      break;
    case Scheme::IpcwLogistic: {
      const double f = static_cast<double>(d.n_uncensored()) / static_cast<double>(d.n());
      for (std::size_t i = 0; i < d.n(); ++i) out.w[i] = scaled(wv, i, f);
      break;
    }
    case Scheme::IpcwKm:
    case Scheme::IpcwCox: {
      if (d.n_censored() == 0) break;
      const KmCurve k0 = reverse_km(d);
      for (std::size_t i = 0; i < d.n(); ++i) {
        out.w[i] = scaled(wv, i, km_eval(k0, d[i].v, Side::LeftLimit));
      }
      break;
    }
  }
  return out;
}

WeightVector build_weights(const Dataset& d, const WeightSpec& spec) {
  switch (spec.scheme) {
    case Scheme::CC: {
      WeightVector wv = weights_cc(d);
      return post_process(std::move(wv), d, spec);
    }
    case Scheme::IpcwLogistic: return weights_ipcw_logistic(d, spec);
    case Scheme::IpcwKm: return weights_ipcw_km(d, spec);
    case Scheme::IpcwCox: return weights_ipcw_cox(d, spec);
  }
  throw SchemaError("unknown weighting scheme");
}

}  // namespace censreg
