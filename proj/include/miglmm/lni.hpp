#pragma once

// Logistic-normal integral
//
//   phi(mu, sigma2) = E[1 / (1 + exp(W))],  W ~ N(mu, sigma2)
//
// evaluated four ways: Gauss-Hermite quadrature, the exact recursion on the
// grid mu = t * sigma2, a normal-mixture approximation of the logistic CDF,
// and a hybrid that evaluates the mixture near zero and walks the recursion
// out to mu.

#include <cmath>
#include <memory>
#include <vector>

namespace miglmm {

/// Physicists' Gauss-Hermite rule: int f(x) exp(-x^2) dx ~ sum_i w_i f(x_i).
/// Weights of the outermost nodes of high-order rules underflow to zero.
struct GaussHermiteRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  /// E[f(W)], W ~ N(mean, variance), via x -> mean + sqrt(2 variance) x.
  template <class F>
  double normal_expectation(double mean, double variance, F&& f) const {
    const double scale = std::sqrt(2.0 * variance);
    double acc = 0.0;
    for (int i = 0; i < order; ++i) {
      if (weights[i] == 0.0) continue;
      acc += weights[i] * f(mean + scale * nodes[i]);
    }
    return acc * kInvSqrtPi;
  }

  static constexpr double kInvSqrtPi = 0.56418958354775628695;
};

/// Golub-Welsch nodes (eigenvalues of the Jacobi matrix) polished by one
/// Newton step; weights from the derivative of the orthonormal Hermite
/// recurrence. 1 <= order <= 1000, otherwise InvalidArgument.
GaussHermiteRule gauss_hermite_rule(int order);

/// Process-wide immutable rule of the given order, built on first use.
std::shared_ptr<const GaussHermiteRule> shared_gauss_hermite_rule(int order);

/// h*(z) = sum_i p_i Phi(z s_i), a minimax approximation of the logistic CDF.
struct NormalMixtureApprox {
  std::vector<double> p;
  std::vector<double> s;

  std::size_t k() const { return p.size(); }
  double operator()(double z) const;
};

/// The frozen k = 8 constants (see tools/fit_logistic_mixture.py).
const NormalMixtureApprox& logistic_mixture_k8();

/// Quadrature estimate of phi(mu, sigma2).
double phi_gh(double mu, double sigma2, const GaussHermiteRule& rule);

/// phi(t sigma2, sigma2) by t applications of
///   phi(m + sigma2) = exp(-m - sigma2 / 2) (1 - phi(m)),  phi(0) = 1/2.
double phi_grid_exact(long t, double sigma2);

/// Mixture approximation: sum_i p_i Phi(-mu s_i / sqrt(1 + sigma2 s_i^2)).
double phi_ms(double mu, double sigma2, const NormalMixtureApprox& approx = logistic_mixture_k8());

/// Hybrid evaluation. For mu >= 0 write mu = r + t sigma2 with r in
/// [0, sigma2), evaluate the mixture at r and apply the recursion t times;
/// for mu < 0 use phi(-mu) = 1 - phi(mu).
double phi_hybrid(double mu, double sigma2);

/// E[h(kappa + V)], h the logistic CDF, V ~ N(0, tau2). Exactly h(kappa)
/// when tau2 == 0.
double logistic_normal_mean(double kappa, double tau2);

namespace detail {
/// Recursion steps beyond which phi_hybrid falls back to the mixture.
inline constexpr long kMaxRecursionSteps = 1'000'000;
}  // namespace detail

}  // namespace miglmm
