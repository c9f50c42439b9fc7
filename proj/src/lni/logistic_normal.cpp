#include <cmath>

#include "miglmm/links.hpp"
#include "miglmm/lni.hpp"

namespace miglmm {

double NormalMixtureApprox::operator()(double z) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < k(); ++i) acc += p[i] * normal_cdf(z * s[i]);
  return acc;
}

double phi_gh(double mu, double sigma2, const GaussHermiteRule& rule) {
  // 1 / (1 + e^w) = logistic(-w)
  return rule.normal_expectation(mu, sigma2, [](double w) { return logistic(-w); });
}

double phi_grid_exact(long t, double sigma2) {
  double phi = 0.5;
  for (long j = 0; j < t; ++j) {
    const double m = static_cast<double>(j) * sigma2;
    phi = std::exp(-m - 0.5 * sigma2) * (1.0 - phi);
  }
  return phi;
}

double phi_ms(double mu, double sigma2, const NormalMixtureApprox& approx) {
  if (mu == 0.0) return 0.5;
  double acc = 0.0;
  for (std::size_t i = 0; i < approx.k(); ++i) {
    const double s = approx.s[i];
    acc += approx.p[i] * normal_cdf(-mu * s / std::sqrt(1.0 + sigma2 * s * s));
  }
  return acc;
}

double phi_hybrid(double mu, double sigma2) {
  if (mu < 0.0) return 1.0 - phi_hybrid(-mu, sigma2);
  // Far tail: 1 / (1 + e^w) = e^{-w} - e^{-2w} + ..., the second term is
  // below e^{-40} relative to the first.
  if (mu > 40.0 + 4.0 * sigma2) return std::exp(-(mu - 0.5 * sigma2));

  double steps = std::floor(mu / sigma2);
  if (steps > static_cast<double>(detail::kMaxRecursionSteps)) return phi_ms(mu, sigma2);
  long t = static_cast<long>(steps);
  double r = mu - static_cast<double>(t) * sigma2;
  if (r >= sigma2) {
    ++t;
    r = 0.0;
  }
  if (r < 0.0) r = 0.0;

  double phi = phi_ms(r, sigma2);
  for (long j = 0; j < t; ++j) {
    const double m = r + static_cast<double>(j) * sigma2;
    phi = std::exp(-m - 0.5 * sigma2) * (1.0 - phi);
  }
  return phi;
}

double logistic_normal_mean(double kappa, double tau2) {
  if (tau2 == 0.0) return logistic(kappa);
  // E[h(kappa + V)] = 1 - phi(kappa, tau2) = phi(-kappa, tau2)
  return phi_hybrid(-kappa, tau2);
}

}  // namespace miglmm
