#include "censreg/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "censreg/error.hpp"

namespace censreg {

namespace {

void check_inputs(std::span<const double> times, std::span<const int> event) {
  if (times.empty()) throw DataError("survival input is empty");
  if (times.size() != event.size()) throw DataError("times and event indicators differ in length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) {
      throw DataError("survival times must be finite and >= 0");
    }
    if (event[i] != 0 && event[i] != 1) throw DataError("event indicators must be 0 or 1");
  }
}

// Records sorted by time and grouped by distinct time.
struct TimeGroups {
  std::vector<std::size_t> order;
  std::vector<std::size_t> starts;  // group g spans order[starts[g], starts[g+1])

  TimeGroups(std::span<const double> times) : order(times.size()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (k == 0 || times[order[k]] != times[order[k - 1]]) starts.push_back(k);
    }
    starts.push_back(order.size());
  }

  std::size_t size() const { return starts.size() - 1; }
};

struct PartialLikelihood {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
  double offset = 0.0;
};

// Breslow partial likelihood on an already-transformed covariate matrix.
PartialLikelihood evaluate(const TimeGroups& groups, std::span<const double> /*times*/,
                           std::span<const int> event, const Eigen::MatrixXd& h,
                           const Eigen::VectorXd& theta, bool derivatives) {
  const Eigen::Index n = h.rows();
  const Eigen::Index r = h.cols();
  Eigen::VectorXd lp = r > 0 ? Eigen::VectorXd(h * theta) : Eigen::VectorXd::Zero(n);
  const double offset = n > 0 ? lp.maxCoeff() : 0.0;

  PartialLikelihood out;
  out.offset = offset;
  if (derivatives) {
    out.score = Eigen::VectorXd::Zero(r);
    out.info = Eigen::MatrixXd::Zero(r, r);
  }
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(r);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd event_sum = Eigen::VectorXd::Zero(r);

  for (std::size_t g = groups.size(); g-- > 0;) {
    double d = 0.0;
    double lp_events = 0.0;
    if (derivatives) event_sum.setZero();
    for (std::size_t k = groups.starts[g]; k < groups.starts[g + 1]; ++k) {
      const auto i = static_cast<Eigen::Index>(groups.order[k]);
      const double e = std::exp(lp[i] - offset);
      s0 += e;
      if (derivatives) {
        s1.noalias() += e * h.row(i).transpose();
        s2.noalias() += e * h.row(i).transpose() * h.row(i);
      }
      if (event[static_cast<std::size_t>(i)] == 1) {
        d += 1.0;
        lp_events += lp[i];
        if (derivatives) event_sum += h.row(i).transpose();
      }
    }
    if (d == 0.0) continue;
    out.loglik += lp_events - d * (std::log(s0) + offset);
    if (derivatives) {
      const Eigen::VectorXd mean = s1 / s0;
      out.score += event_sum - d * mean;
      out.info += d * (s2 / s0 - mean * mean.transpose());
    }
  }
  return out;
}

struct Standardized {
  Eigen::MatrixXd h;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

Standardized standardize(const Eigen::MatrixXd& cov) {
  Standardized s;
  const Eigen::Index n = cov.rows();
  s.center = cov.colwise().mean().transpose();
  s.scale.resize(cov.cols());
  s.h = cov.rowwise() - s.center.transpose();
  for (Eigen::Index j = 0; j < cov.cols(); ++j) {
    const double sd = std::sqrt(s.h.col(j).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n, 1)));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.center[j])))) {
      throw SingularError("Cox covariate " + std::to_string(j + 1) +
                          " is constant; its coefficient is not identifiable");
    }
    s.scale[j] = sd;
    s.h.col(j) /= sd;
  }
  return s;
}

}  // namespace

KmCurve km_fit(std::span<const double> times, std::span<const int> event) {
  check_inputs(times, event);
  const TimeGroups groups(times);
  KmCurve curve;
  double surv = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    int d = 0;
    for (std::size_t k = groups.starts[g]; k < groups.starts[g + 1]; ++k) {
      d += event[groups.order[k]];
    }
    const std::size_t group_size = groups.starts[g + 1] - groups.starts[g];
    if (d > 0) {
      surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.times.push_back(times[groups.order[groups.starts[g]]]);
      curve.surv.push_back(surv);
      curve.at_risk.push_back(static_cast<int>(at_risk));
      curve.events.push_back(d);
    }
    at_risk -= group_size;
  }
  return curve;
}

double km_eval(const KmCurve& curve, double t, Side side) {
  // Number of event times <= t (right) or < t (left limit).
  const auto it = side == Side::Right
                      ? std::upper_bound(curve.times.begin(), curve.times.end(), t)
                      : std::lower_bound(curve.times.begin(), curve.times.end(), t);
  const auto k = static_cast<std::size_t>(it - curve.times.begin());
  return k == 0 ? 1.0 : curve.surv[k - 1];
}

double CoxFit::relative_risk(std::span<const double> h_row) const {
  double lp = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    lp += theta[j] * (h_row[static_cast<std::size_t>(j)] - center[j]);
  }
  return std::exp(lp - lp_offset);
}

double cox_log_partial_likelihood(std::span<const double> times, std::span<const int> event,
                                  const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta) {
  check_inputs(times, event);
  return evaluate(TimeGroups(times), times, event, covariates, theta, false).loglik;
}

Eigen::VectorXd cox_score(std::span<const double> times, std::span<const int> event,
                          const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta) {
  check_inputs(times, event);
  return evaluate(TimeGroups(times), times, event, covariates, theta, true).score;
}

Eigen::MatrixXd cox_information(std::span<const double> times, std::span<const int> event,
                                const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta) {
  check_inputs(times, event);
  return evaluate(TimeGroups(times), times, event, covariates, theta, true).info;
}

BreslowBaseline breslow_baseline(std::span<const double> times, std::span<const int> event,
                                 const Eigen::MatrixXd& covariates, const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& center) {
  check_inputs(times, event);
  const TimeGroups groups(times);
  const Eigen::Index n = covariates.rows();
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(n);
  if (theta.size() > 0) {
    if (center.size() > 0) {
      lp = (covariates.rowwise() - center.transpose()) * theta;
    } else {
      lp = covariates * theta;
    }
  }
  BreslowBaseline out;
  double s0 = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    int d = 0;
    for (std::size_t k = groups.starts[g]; k < groups.starts[g + 1]; ++k) {
      const std::size_t i = groups.order[k];
      s0 += std::exp(lp[static_cast<Eigen::Index>(i)]);
      d += event[i];
    }
    if (d == 0) continue;
    out.times.push_back(times[groups.order[groups.starts[g]]]);
    out.increments.push_back(static_cast<double>(d) / s0);
    out.events.push_back(d);
  }
  std::reverse(out.times.begin(), out.times.end());
  std::reverse(out.increments.begin(), out.increments.end());
  std::reverse(out.events.begin(), out.events.end());
  return out;
}

CoxFit cox_fit(std::span<const double> times, std::span<const int> event,
               const Eigen::MatrixXd& covariates, const CoxOptions& opts) {
  check_inputs(times, event);
  if (static_cast<std::size_t>(covariates.rows()) != times.size()) {
    throw DataError("covariate rows differ from the number of survival times");
  }
  if (std::none_of(event.begin(), event.end(), [](int e) { return e == 1; })) {
    throw DataError("Cox model needs at least one event");
  }
  const TimeGroups groups(times);
  const Eigen::Index r = covariates.cols();

  CoxFit fit;
  Eigen::VectorXd theta_std = Eigen::VectorXd::Zero(r);
  Standardized st;
  if (opts.fixed_theta) {
    if (opts.fixed_theta->size() != r) throw DataError("fixed theta has the wrong length");
    st.h = covariates;
    st.center = Eigen::VectorXd::Zero(r);
    st.scale = Eigen::VectorXd::Ones(r);
    if (r > 0) {
      st.center = covariates.colwise().mean().transpose();
      st.h = covariates.rowwise() - st.center.transpose();
    }
    theta_std = *opts.fixed_theta;
    fit.converged = true;
  } else if (r > 0) {
    st = standardize(covariates);
  } else {
    st.h = covariates;
    st.center = Eigen::VectorXd::Zero(0);
    st.scale = Eigen::VectorXd::Zero(0);
    fit.converged = true;
  }

  PartialLikelihood pl = evaluate(groups, times, event, st.h, theta_std, true);
  if (!fit.converged) {
    for (int it = 0; it < opts.max_iter; ++it) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(pl.info);
      qr.setThreshold(1e-11);
      if (qr.rank() < r) {
        // Away from zero a vanishing information means the risk sets are
        // already perfectly ordered by the linear predictor.
        if (it > 0 && theta_std.cwiseAbs().maxCoeff() > 5.0) {
          throw ConvergenceError("Cox partial likelihood is monotone; coefficients diverge",
                                 {theta_std.data(), theta_std.data() + r}, "divergence");
        }
        throw SingularError("Cox information matrix is singular (collinear covariates)");
      }
      const Eigen::VectorXd step = qr.solve(pl.score);
      Eigen::VectorXd candidate = theta_std + step;
      PartialLikelihood next = evaluate(groups, times, event, st.h, candidate, true);
      double scale = 1.0;
      for (int h = 0; h < opts.max_halvings && !(next.loglik >= pl.loglik - 1e-12 * std::abs(pl.loglik)); ++h) {
        scale *= 0.5;
        candidate = theta_std + scale * step;
        next = evaluate(groups, times, event, st.h, candidate, true);
      }
      const double moved = (candidate - theta_std).cwiseAbs().maxCoeff();
      theta_std = candidate;
      pl = std::move(next);
      fit.iterations = it + 1;
      if (theta_std.cwiseAbs().maxCoeff() > opts.theta_cap) {
        throw ConvergenceError("Cox partial likelihood is monotone; coefficients diverge",
                               {theta_std.data(), theta_std.data() + r}, "divergence");
      }
      const double raw_score = (pl.score.cwiseQuotient(st.scale)).cwiseAbs().maxCoeff();
      const double std_score = pl.score.cwiseAbs().maxCoeff();
      if (std::max(raw_score, std_score) <= opts.tolerance && moved <= 1e-6) {
        // A flat tail of a monotone likelihood also has a vanishing score.
        if (r > 0 && Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pl.info).eigenvalues().minCoeff() < 1e-8) {
          throw ConvergenceError("Cox partial likelihood is monotone; coefficients diverge",
                                 {theta_std.data(), theta_std.data() + r}, "divergence");
        }
        fit.converged = true;
        break;
      }
    }
    if (!fit.converged) {
      Eigen::VectorXd raw = theta_std.cwiseQuotient(st.scale);
      throw ConvergenceError("Cox fit did not converge in " + std::to_string(opts.max_iter) +
                                 " iterations",
                             {raw.data(), raw.data() + r});
    }
  }

  // Back to the raw covariate scale; the centered linear predictor is unchanged.
  fit.theta = opts.fixed_theta ? theta_std : Eigen::VectorXd(theta_std.cwiseQuotient(st.scale));
  fit.center = st.center;
  fit.log_partial_likelihood = pl.loglik;
  fit.lp_offset = pl.offset;
  if (r > 0) {
    Eigen::VectorXd raw_score = pl.score.cwiseQuotient(st.scale);
    fit.score_norm = opts.fixed_theta ? pl.score.cwiseAbs().maxCoeff() : raw_score.cwiseAbs().maxCoeff();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(pl.info);
    if (qr.rank() == r) {
      const Eigen::MatrixXd inv = qr.inverse();
      const Eigen::VectorXd s = opts.fixed_theta ? Eigen::VectorXd::Ones(r) : st.scale;
      fit.covariance = s.cwiseInverse().asDiagonal() * inv * s.cwiseInverse().asDiagonal();
      fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
    } else {
      fit.covariance = Eigen::MatrixXd::Constant(r, r, std::numeric_limits<double>::quiet_NaN());
    }
  } else {
    fit.covariance = Eigen::MatrixXd(0, 0);
  }

  // Breslow increments paired with relative_risk(): exp(theta'(h - center) - offset).
  double s0 = 0.0;
  Eigen::VectorXd lp = r > 0 ? Eigen::VectorXd(st.h * theta_std) : Eigen::VectorXd::Zero(covariates.rows());
  for (std::size_t g = groups.size(); g-- > 0;) {
    int d = 0;
    for (std::size_t k = groups.starts[g]; k < groups.starts[g + 1]; ++k) {
      const std::size_t i = groups.order[k];
      s0 += std::exp(lp[static_cast<Eigen::Index>(i)] - pl.offset);
      d += event[i];
    }
    if (d == 0) continue;
    fit.baseline_times.push_back(times[groups.order[groups.starts[g]]]);
    fit.baseline_increments.push_back(static_cast<double>(d) / s0);
    fit.baseline_events.push_back(d);
  }
  std::reverse(fit.baseline_times.begin(), fit.baseline_times.end());
  std::reverse(fit.baseline_increments.begin(), fit.baseline_increments.end());
  std::reverse(fit.baseline_events.begin(), fit.baseline_events.end());
  return fit;
}

SurvivalValue cox_survival_at(const CoxFit& fit, std::span<const double> h_row, double u,
                              const SurvivalOptions& opts) {
  const double rr = fit.relative_risk(h_row);
  const auto end = std::lower_bound(fit.baseline_times.begin(), fit.baseline_times.end(), u);
  const auto m = static_cast<std::size_t>(end - fit.baseline_times.begin());
  SurvivalValue out;
  if (opts.form == SurvivalForm::Exponential) {
    double cum = 0.0;
    for (std::size_t j = 0; j < m; ++j) cum += fit.baseline_increments[j] * rr;
    out.value = std::exp(-cum);
    return out;
  }
  double prod = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double factor = 1.0 - fit.baseline_increments[j] * rr;
    if (factor <= 0.0) {
      out.degenerate = true;
      prod = opts.floor;
      break;
    }
    prod *= factor;
  }
  out.value = prod;
  return out;
}

}  // namespace censreg
