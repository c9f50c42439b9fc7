#pragma once

// Reference evaluators for tests and acceptance runs. Built on the link
// functions and law types only.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "miglmm/laws.hpp"
#include "miglmm/links.hpp"

namespace miglmm::oracle {

struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Physicists' Gauss-Hermite rule. Roots are bracketed by a sign scan of the
/// scaled Hermite recurrence and bisected. 1 <= order <= 1000.
HermiteRule hermite_rule(int order);

/// phi(mu, sigma2) = E[1 / (1 + exp(W))], W ~ N(mu, sigma2), by the
/// order-1000 rule.
double phi_gold(double mu, double sigma2);

/// E[1 / (1 + exp(W))] by adaptive Gauss-Kronrod on the real line.
double phi_adaptive(double mu, double sigma2);

struct McEstimate {
  double estimate;
  double std_error;
};

/// Plain Monte Carlo of E[f(d'U)], U ~ law. size >= 1e4.
McEstimate mc_integral(const std::function<double(double)>& f, const NormalLaw& law,
                       const Eigen::VectorXd& design, std::size_t size, std::uint64_t seed);
McEstimate mc_integral(const std::function<double(double)>& f, const NormalMixtureLaw& law,
                       std::size_t size, std::uint64_t seed);

enum class Family { Bernoulli, Binomial, Poisson };

/// log f(y | eta) for the given family and inverse link mean.
double log_density(Family family, double y, double trials, double mean);

/// Small-instance marginal log-likelihood with one independent N(0, sigma2)
/// intercept per observation:
///
///   sum_i log int f(y_i | h(kappa_i + offset_i + u)) N(u; 0, sigma2) du
///
/// by 201-point Gauss-Hermite centred and scaled at each integrand's mode.
/// At most 20 observations (InvalidArgument otherwise).
double exact_marginal_loglik_small(Family family, Link link, const std::vector<double>& y,
                                   const std::vector<double>& trials,
                                   const std::vector<double>& kappa,
                                   const std::vector<double>& offset, double sigma2);

/// int h(kappa + u) N(u; 0, sigma2) du by adaptive Gauss-Kronrod.
double marginal_mean(Link link, double kappa, double sigma2);

}  // namespace miglmm::oracle
