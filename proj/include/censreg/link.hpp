#pragma once

#include <string_view>

namespace censreg {

enum class LinkKind { Identity, Log, Logit };

std::string_view to_string(LinkKind k);
LinkKind link_from_string(std::string_view s);

// Link g, its inverse, d g^{-1}/d eta and the variance function v(mu) for the
// three canonical GLM families (Gaussian, Poisson, Bernoulli).
class LinkFamily {
 public:
  constexpr explicit LinkFamily(LinkKind kind = LinkKind::Identity) noexcept : kind_(kind) {}

  static constexpr LinkFamily identity() noexcept { return LinkFamily(LinkKind::Identity); }
  static constexpr LinkFamily log() noexcept { return LinkFamily(LinkKind::Log); }
  static constexpr LinkFamily logit() noexcept { return LinkFamily(LinkKind::Logit); }

  constexpr LinkKind kind() const noexcept { return kind_; }

  double link(double mu) const;
  double inverse(double eta) const;
  double dmu_deta(double eta) const;
  double variance(double mu) const;

  // h = (tau2 * v(mu))^{-1} * d g^{-1}/d eta. All three links are canonical,
  // so this reduces to 1 / tau2 everywhere on the valid range.
  double h_weight(double eta, double tau2 = 1.0) const;

  // Mean space: any real (identity), (0, inf) (log), [0, 1] (logit; the
  // endpoints are reachable in floating point at large |eta|).
  bool valid_mean(double mu) const;
  // Outcome support used for fitting: [0, inf) for log, [0, 1] for logit.
  bool valid_outcome(double y) const;

  // Cumulant b(eta) of the canonical family, used for the line-search
  // objective sum w (y eta - b(eta)). Identity uses b = eta^2 / 2.
  double cumulant(double eta) const;

  // True when the dispersion is fixed at 1 (Bernoulli).
  constexpr bool fixed_dispersion() const noexcept { return kind_ == LinkKind::Logit; }

 private:
  LinkKind kind_;
};

}  // namespace censreg
