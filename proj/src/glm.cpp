#include "censreg/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "censreg/error.hpp"
#include "censreg/kernels.hpp"

namespace censreg {

namespace {

std::span<const double> col(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd linear_predictor(const Eigen::VectorXd& beta, const WeightedDesign& d) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(d.n());
  std::span<double> out{eta.data(), static_cast<std::size_t>(eta.size())};
  for (Eigen::Index j = 0; j < d.k(); ++j) kernels::axpy(beta[j], col(d.x, j), out);
  return eta;
}

Eigen::MatrixXd gram(const WeightedDesign& d, const Eigen::VectorXd& weights) {
  const auto n = static_cast<std::size_t>(d.n());
  const auto k = static_cast<std::size_t>(d.k());
  Eigen::MatrixXd out(d.k(), d.k());
  kernels::weighted_gram({d.x.data(), n * k}, n, k, as_span(weights),
                         {out.data(), k * k});
  return out;
}

// Column-equilibrated pivoted QR; rank decisions do not depend on units.
struct ScaledSolver {
  Eigen::VectorXd scale;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;

  explicit ScaledSolver(const Eigen::MatrixXd& a) {
    scale = a.diagonal().cwiseAbs().cwiseSqrt();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (!(scale[j] > 0.0)) scale[j] = 1.0;
    }
    const Eigen::VectorXd inv = scale.cwiseInverse();
    qr.compute(inv.asDiagonal() * a * inv.asDiagonal());
    qr.setThreshold(1e-11);
  }

  bool full_rank() const { return qr.rank() == qr.cols(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const Eigen::VectorXd inv = scale.cwiseInverse();
    return inv.asDiagonal() * qr.solve(inv.asDiagonal() * b);
  }

  Eigen::MatrixXd inverse() const {
    const Eigen::Index k = scale.size();
    return solve_matrix(Eigen::MatrixXd::Identity(k, k));
  }

  Eigen::MatrixXd solve_matrix(const Eigen::MatrixXd& b) const {
    const Eigen::VectorXd inv = scale.cwiseInverse();
    return inv.asDiagonal() * qr.solve(inv.asDiagonal() * b);
  }
};

double objective(const Eigen::VectorXd& beta, const WeightedDesign& d, const LinkFamily& link) {
  const Eigen::VectorXd eta = linear_predictor(beta, d);
  double s = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    s += d.w[i] * (d.y[i] * eta[i] - link.cumulant(eta[i]));
  }
  return s;
}

Eigen::VectorXd log_link_start(const WeightedDesign& d) {
  double smallest = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (d.y[i] > 0.0) smallest = std::min(smallest, d.y[i]);
  }
  if (!std::isfinite(smallest)) {
    throw DataError("log link needs at least one positive outcome");
  }
  const double eps = 0.5 * smallest;
  WeightedDesign shifted = d;
  for (Eigen::Index i = 0; i < d.n(); ++i) shifted.y[i] = std::log(d.y[i] + eps);
  const Eigen::MatrixXd a = gram(shifted, shifted.w);
  ScaledSolver solver(a);
  if (!solver.full_rank()) throw SingularError("design matrix is rank deficient");
  Eigen::VectorXd rhs(d.k());
  for (Eigen::Index j = 0; j < d.k(); ++j) {
    rhs[j] = kernels::weighted_dot(col(d.x, j), as_span(shifted.y), as_span(d.w));
  }
  return solver.solve(rhs);
}

bool saturated(const Eigen::VectorXd& beta, const WeightedDesign& d, const LinkFamily& link) {
  const Eigen::VectorXd eta = linear_predictor(beta, d);
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double mu = link.inverse(eta[i]);
    if (mu < 1e-10 || mu > 1.0 - 1e-10) return true;
  }
  return false;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

WeightedDesign build_design(const Dataset& d, const WeightVector& wv, const DesignSpec& spec) {
  if (wv.w.size() != d.n()) throw DataError("weight vector length differs from dataset size");
  for (std::size_t k : spec.x_interactions) {
    if (k >= d.p()) throw SchemaError("interaction index exceeds covariate count");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double w = wv.w[i];
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weights must be finite and >= 0");
    if (w > 0.0) {
      if (d[i].delta != 1) throw DataError("positive weight on a censored record");
      rows.push_back(i);
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(2 + d.p() + spec.x_interactions.size());
  WeightedDesign out;
  out.x.resize(n, k);
  out.y.resize(n);
  out.w.resize(n);
  out.rows = rows;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = d[rows[static_cast<std::size_t>(r)]];
    out.x(r, 0) = 1.0;
    out.x(r, 1) = rec.v;
    for (std::size_t j = 0; j < d.p(); ++j) out.x(r, static_cast<Eigen::Index>(2 + j)) = rec.z[j];
    for (std::size_t m = 0; m < spec.x_interactions.size(); ++m) {
      out.x(r, static_cast<Eigen::Index>(2 + d.p() + m)) = rec.v * rec.z[spec.x_interactions[m]];
    }
    out.y[r] = rec.y;
    out.w[r] = wv.w[rows[static_cast<std::size_t>(r)]];
  }
  const auto& nm = d.names();
  out.names.push_back("(Intercept)");
  out.names.push_back(nm.v);
  for (const auto& z : nm.z) out.names.push_back(z);
  for (std::size_t k2 : spec.x_interactions) out.names.push_back(nm.v + ":" + nm.z[k2]);
  return out;
}

WeightedDesign build_full_design(const Dataset& d, const DesignSpec& spec) {
  std::vector<ObservedRecord> all(d.records());
  for (auto& r : all) r.delta = 1;
  Dataset full(std::move(all), d.names());
  WeightVector unit;
  unit.w.assign(d.n(), 1.0);
  unit.pi.assign(d.n(), 1.0);
  return build_design(full, unit, spec);
}

Eigen::VectorXd glm_score(const Eigen::VectorXd& beta, const WeightedDesign& design,
                          const LinkFamily& link) {
  const Eigen::VectorXd eta = linear_predictor(beta, design);
  Eigen::VectorXd resid(design.n());
  for (Eigen::Index i = 0; i < design.n(); ++i) {
    const double mu = link.inverse(eta[i]);
    if (!link.valid_mean(mu)) {
      throw DomainError("fitted mean outside the " + std::string(to_string(link.kind())) +
                        " link's mean space at design row " + std::to_string(i));
    }
    resid[i] = link.h_weight(eta[i]) * (design.y[i] - mu);
  }
  Eigen::VectorXd u(design.k());
  for (Eigen::Index j = 0; j < design.k(); ++j) {
    u[j] = kernels::weighted_dot(col(design.x, j), as_span(resid), as_span(design.w));
  }
  return u;
}

Eigen::MatrixXd glm_information(const Eigen::VectorXd& beta, const WeightedDesign& design,
                                const LinkFamily& link) {
  const Eigen::VectorXd eta = linear_predictor(beta, design);
  Eigen::VectorXd wd(design.n());
  for (Eigen::Index i = 0; i < design.n(); ++i) wd[i] = design.w[i] * link.dmu_deta(eta[i]);
  return gram(design, wd);
}

double relative_score_norm(const Eigen::VectorXd& score, const WeightedDesign& design) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < design.k(); ++j) {
    const double scale = std::max(1.0, design.w.dot(design.x.col(j).cwiseAbs()));
    worst = std::max(worst, std::abs(score[j]) / scale);
  }
  return worst;
}

GlmFit fit_glm(const WeightedDesign& design, const LinkFamily& link, const GlmOptions& opts) {
  const Eigen::Index k = design.k();
  if (design.n() < k) {
    throw SingularError("fewer weighted rows (" + std::to_string(design.n()) +
                        ") than design columns (" + std::to_string(k) + ")");
  }
  for (Eigen::Index i = 0; i < design.n(); ++i) {
    if (!link.valid_outcome(design.y[i])) {
      throw DomainError("outcome outside the support of the " +
                        std::string(to_string(link.kind())) + " link");
    }
  }

  GlmFit fit;
  fit.link = link.kind();
  fit.names = design.names;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  {
    ScaledSolver check(gram(design, design.w));
    if (!check.full_rank()) throw SingularError("design matrix is rank deficient");
    if (link.kind() == LinkKind::Identity) {
      Eigen::VectorXd rhs(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        rhs[j] = kernels::weighted_dot(col(design.x, j), as_span(design.y), as_span(design.w));
      }
      beta = check.solve(rhs);
    } else if (link.kind() == LinkKind::Log) {
      beta = log_link_start(design);
    }
  }

  bool stepped = false;
  double last_step = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= opts.max_iter; ++it) {
    Eigen::VectorXd u;
    try {
      u = glm_score(beta, design, link);
    } catch (const DomainError&) {
      if (link.kind() == LinkKind::Logit) {
        throw ConvergenceError("logistic fit diverged (fitted probabilities reached 0 or 1)",
                               to_std(beta), "separation");
      }
      throw;
    }
    fit.score_norm = relative_score_norm(u, design);
    fit.iterations = it;
    if (fit.score_norm <= opts.tolerance && (!stepped || last_step <= opts.tolerance)) {
      fit.converged = true;
      break;
    }
    if (it == opts.max_iter) break;

    const Eigen::MatrixXd info = glm_information(beta, design, link);
    ScaledSolver solver(info);
    if (!solver.full_rank()) {
      if (link.kind() == LinkKind::Logit && saturated(beta, design, link)) {
        throw ConvergenceError("logistic information matrix degenerated", to_std(beta),
                               "separation");
      }
      throw SingularError("information matrix is singular");
    }
    const Eigen::VectorXd step = solver.solve(u);

    Eigen::VectorXd candidate = beta + step;
    if (link.kind() != LinkKind::Identity) {
      const double base = objective(beta, design, link);
      double scale = 1.0;
      for (int h = 0; h < opts.max_halvings; ++h) {
        const double value = objective(candidate, design, link);
        if (std::isfinite(value) && value >= base - 1e-12 * std::abs(base)) break;
        scale *= 0.5;
        candidate = beta + scale * step;
      }
    }
    last_step = (candidate - beta).cwiseAbs().maxCoeff() /
                std::max(1.0, beta.cwiseAbs().maxCoeff());
    beta = candidate;
    stepped = true;
  }

  fit.beta = beta;
  if (!fit.converged) {
    std::string hint;
    if (link.kind() == LinkKind::Logit &&
        (saturated(beta, design, link) || beta.cwiseAbs().maxCoeff() > 50.0)) {
      hint = "separation";
    }
    throw ConvergenceError("GLM solver did not converge in " + std::to_string(opts.max_iter) +
                               " iterations (score norm " + std::to_string(fit.score_norm) + ")",
                           to_std(beta), hint);
  }

  fit.covariance = sandwich_covariance(fit, design, link);
  try {
    fit.dispersion = estimate_dispersion(fit, design, link);
  } catch (const DataError&) {
    fit.dispersion = std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

GlmFit fit_glm(const Dataset& d, const WeightVector& wv, const LinkFamily& link,
               const GlmOptions& opts, const DesignSpec& spec) {
  return fit_glm(build_design(d, wv, spec), link, opts);
}

Eigen::MatrixXd sandwich_covariance(const GlmFit& fit, const WeightedDesign& design,
                                    const LinkFamily& link) {
  const Eigen::MatrixXd a = glm_information(fit.beta, design, link);
  ScaledSolver solver(a);
  if (!solver.full_rank()) throw SingularError("sandwich bread matrix is singular");

  const Eigen::VectorXd eta = linear_predictor(fit.beta, design);
  Eigen::VectorXd meat_w(design.n());
  for (Eigen::Index i = 0; i < design.n(); ++i) {
    const double r = link.h_weight(eta[i]) * (design.y[i] - link.inverse(eta[i]));
    meat_w[i] = design.w[i] * design.w[i] * r * r;
  }
  const Eigen::MatrixXd b = gram(design, meat_w);
  const Eigen::MatrixXd a_inv = solver.inverse();
  Eigen::MatrixXd cov = a_inv * b * a_inv.transpose();
  return 0.5 * (cov + cov.transpose());
}

double estimate_dispersion(const GlmFit& fit, const WeightedDesign& design,
                           const LinkFamily& link) {
  if (link.fixed_dispersion()) return 1.0;
  const Eigen::Index df = design.n() - design.k();
  if (df <= 0) {
    throw DataError("no residual degrees of freedom for the dispersion estimate");
  }
  const Eigen::VectorXd eta = linear_predictor(fit.beta, design);
  double s = 0.0;
  for (Eigen::Index i = 0; i < design.n(); ++i) {
    const double mu = link.inverse(eta[i]);
    const double r = design.y[i] - mu;
    s += design.w[i] * r * r / link.variance(mu);
  }
  return s / static_cast<double>(df);
}

}  // namespace censreg
