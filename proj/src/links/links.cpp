#include "miglmm/links.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "miglmm/errors.hpp"

namespace miglmm {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

[[noreturn]] void domain_error(Link link, const char* what, double value) {
  std::ostringstream msg;
  msg.precision(17);
  msg << link_name(link) << " link: " << what << " (got " << value << ")";
  throw InvalidArgument(msg.str());
}

// Acklam's rational approximation, relative error ~1.2e-9 before refinement.
double quantile_guess(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

std::string_view link_name(Link link) {
  switch (link) {
    case Link::Identity: return "identity";
    case Link::Log: return "log";
    case Link::Probit: return "probit";
    case Link::Logit: return "logit";
    case Link::CLogLog: return "cloglog";
    case Link::Sqrt: return "sqrt";
    case Link::Reciprocal: return "reciprocal";
  }
  return "unknown";
}

Link parse_link(std::string_view name) {
  for (Link link : kAllLinks) {
    if (link_name(link) == name) return link;
  }
  throw ConfigError("unknown link '" + std::string(name) +
                    "' (expected identity, log, probit, logit, cloglog, sqrt or reciprocal)");
}

bool is_bounded(Link link) {
  return link == Link::Probit || link == Link::Logit || link == Link::CLogLog;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double log_normal_cdf(double x) {
  if (x > -5.0) return std::log(normal_cdf(x));
  // erfc stays representable down to about -37; asymptotic series below.
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / kSqrt2));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) + std::log(series);
}

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw InvalidArgument("normal_quantile: p must lie in [0, 1]");
  }
  double x = quantile_guess(p);
  // Halley refinement on Phi(x) - p, computed on the tail closest to p.
  for (int it = 0; it < 2; ++it) {
    const double e = (p < 0.5) ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double inverse_link(Link link, double eta) {
  switch (link) {
    case Link::Identity: return eta;
    case Link::Log: return std::exp(eta);
    case Link::Probit: return normal_cdf(eta);
    case Link::Logit: return logistic(eta);
    case Link::CLogLog: return -std::expm1(-std::exp(eta));
    case Link::Sqrt:
      if (!(eta >= 0.0)) domain_error(link, "inverse link requires eta >= 0", eta);
      return eta * eta;
    case Link::Reciprocal:
      if (!(eta > 0.0)) domain_error(link, "inverse link requires eta > 0", eta);
      return 1.0 / eta;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double apply_link(Link link, double mu) {
  switch (link) {
    case Link::Identity:
      if (!std::isfinite(mu)) domain_error(link, "mu must be finite", mu);
      return mu;
    case Link::Log:
      if (!(mu > 0.0)) domain_error(link, "mu must be > 0", mu);
      return std::log(mu);
    case Link::Probit:
      if (!(mu > 0.0 && mu < 1.0)) domain_error(link, "mu must lie in (0, 1)", mu);
      return normal_quantile(mu);
    case Link::Logit:
      if (!(mu > 0.0 && mu < 1.0)) domain_error(link, "mu must lie in (0, 1)", mu);
      return std::log(mu) - std::log1p(-mu);
    case Link::CLogLog:
      if (!(mu > 0.0 && mu < 1.0)) domain_error(link, "mu must lie in (0, 1)", mu);
      return std::log(-std::log1p(-mu));
    case Link::Sqrt:
      if (!(mu >= 0.0) || !std::isfinite(mu)) domain_error(link, "mu must be >= 0", mu);
      return std::sqrt(mu);
    case Link::Reciprocal:
      if (!(mu > 0.0) || !std::isfinite(mu)) domain_error(link, "mu must be > 0", mu);
      return 1.0 / mu;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace miglmm
