#include "censreg/link.hpp"

#include <cmath>
#include <string>

#include "censreg/error.hpp"

namespace censreg {

std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::Identity: return "identity";
    case LinkKind::Log: return "log";
    case LinkKind::Logit: return "logit";
  }
  return "?";
}

LinkKind link_from_string(std::string_view s) {
  if (s == "identity") return LinkKind::Identity;
  if (s == "log") return LinkKind::Log;
  if (s == "logit") return LinkKind::Logit;
  throw SchemaError("unknown link '" + std::string(s) + "' (expected identity, log, logit)");
}

double LinkFamily::link(double mu) const {
  switch (kind_) {
    case LinkKind::Identity: return mu;
    case LinkKind::Log: return std::log(mu);
    case LinkKind::Logit: return std::log(mu / (1.0 - mu));
  }
  return mu;
}

double LinkFamily::inverse(double eta) const {
  switch (kind_) {
    case LinkKind::Identity: return eta;
    case LinkKind::Log: return std::exp(eta);
    case LinkKind::Logit:
      if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
      {
        const double e = std::exp(eta);
        return e / (1.0 + e);
      }
  }
  return eta;
}

double LinkFamily::dmu_deta(double eta) const {
  switch (kind_) {
    case LinkKind::Identity: return 1.0;
    case LinkKind::Log: return std::exp(eta);
    case LinkKind::Logit: {
      const double mu = inverse(eta);
      return mu * (1.0 - mu);
    }
  }
  return 1.0;
}

double LinkFamily::variance(double mu) const {
  switch (kind_) {
    case LinkKind::Identity: return 1.0;
    case LinkKind::Log: return mu;
    case LinkKind::Logit: return mu * (1.0 - mu);
  }
  return 1.0;
}

// All supported links are canonical, so (d mu / d eta) / v(mu) == 1.
double LinkFamily::h_weight(double /*eta*/, double tau2) const { return 1.0 / tau2; }

bool LinkFamily::valid_mean(double mu) const {
  if (!std::isfinite(mu)) return false;
  switch (kind_) {
    case LinkKind::Identity: return true;
    case LinkKind::Log: return mu > 0.0;
    case LinkKind::Logit: return mu >= 0.0 && mu <= 1.0;  // limits reached in floating point
  }
  return false;
}

bool LinkFamily::valid_outcome(double y) const {
  switch (kind_) {
    case LinkKind::Identity: return std::isfinite(y);
    case LinkKind::Log: return y >= 0.0;
    case LinkKind::Logit: return y >= 0.0 && y <= 1.0;
  }
  return false;
}

double LinkFamily::cumulant(double eta) const {
  switch (kind_) {
    case LinkKind::Identity: return 0.5 * eta * eta;
    case LinkKind::Log: return std::exp(eta);
    case LinkKind::Logit:
      return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
  }
  return 0.0;
}

}  // namespace censreg
