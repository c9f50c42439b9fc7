#pragma once

// Adjustments d'a that keep the marginal mean at h(x'beta):
//
//   h(kappa) = E[h(kappa + d'U + d'a)],  kappa = x'beta.
//
// Closed forms where they exist (identity, log, probit, sqrt), bisection
// over the logistic-normal engine for the logit link, and bisection over
// Gauss-Hermite quadrature otherwise.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <tuple>
#include <variant>

#include "miglmm/laws.hpp"
#include "miglmm/links.hpp"
#include "miglmm/lni.hpp"

namespace miglmm {

/// Design vector d plus the law of U for one observation. The reciprocal
/// link carries a GammaShiftLaw whose shape is the only input.
struct RandomEffectSpec {
  Eigen::VectorXd design;
  std::variant<NormalLaw, NormalMixtureLaw, GammaShiftLaw> law;

  static RandomEffectSpec scalar_normal(double variance);
  static RandomEffectSpec mixture(NormalMixtureLaw law);
  static RandomEffectSpec gamma_shape(double shape);
};

struct Adjustment {
  double value = 0.0;  // d'a; reciprocal link: the gamma scale
  Link link = Link::Identity;
  double kappa = 0.0;
  double tau2 = 0.0;  // effective variance (mixtures: total variance)
};

/// tau2 = d' Sigma d.
double effective_variance(const Eigen::VectorXd& d, const NormalLaw& law);

/// Zero for any zero-mean law.
Adjustment adjust_identity(double kappa, double tau2);
/// Throws InvalidArgument when the mixture mean is not zero.
Adjustment adjust_identity(double kappa, const NormalMixtureLaw& law);

/// -log M_U(d): -d'Sigma d / 2 for a normal law.
Adjustment adjust_log(const Eigen::VectorXd& d, const NormalLaw& law);
/// -log sum_m w_m exp(mu_m + sigma2_m / 2) for a scalar mixture (d = 1).
Adjustment adjust_log(const NormalMixtureLaw& law);

/// (sqrt(1 + tau2) - 1) kappa.
Adjustment adjust_probit(double kappa, double tau2);

/// Root of h(kappa) = 1 - phi(kappa + a, tau2). The grid recursion brackets
/// kappa + a within one tau2-wide cell, bisection on phi_hybrid finishes.
/// Odd in kappa; zero when kappa == 0 or tau2 == 0.
Adjustment adjust_logit(double kappa, double tau2);

/// Logit adjustment for a zero-mean scalar normal mixture.
Adjustment adjust_logit_mixture(double kappa, const NormalMixtureLaw& law);

/// Complementary log-log adjustment by bisection over quadrature.
/// Throws ConvergenceError when the bracket cannot be established.
Adjustment adjust_cloglog(double kappa, double tau2, const GaussHermiteRule& rule);

/// -kappa + sqrt(kappa^2 - var_du); ModelUndefined when kappa < sqrt(var_du).
Adjustment adjust_sqrt(double kappa, double var_du);

/// Gamma law of kappa + U with E[1 / (kappa + U)] = 1 / kappa.
/// Requires kappa > 0 and shape > 1.
GammaShiftLaw adjust_reciprocal(double kappa, double shape);

/// Generic quadrature + bisection path for a bounded link (probit, logit,
/// cloglog) and any supported law.
Adjustment adjust_numeric(Link link, double kappa, const RandomEffectSpec& re,
                          const GaussHermiteRule& rule);

/// Table-driven dispatch for a normal random effect reduced to variance
/// tau2. Reciprocal is rejected (it alters the law, not the location).
double adjustment_shift(Link link, double kappa, double tau2);

/// Dispatch for an arbitrary RandomEffectSpec.
Adjustment compute_adjustment(Link link, double kappa, const RandomEffectSpec& re);

/// Gauss-Hermite order used by the cloglog and generic quadrature paths.
inline constexpr int kAdjustQuadratureOrder = 1000;

struct CheckOracle {
  enum class Kind { Quadrature, MonteCarlo };
  Kind kind = Kind::Quadrature;
  std::uint64_t seed = 1;
  std::size_t size = 1'000'000;
};

struct MonteCarloEstimate {
  double mean;
  double std_error;
};

/// Monte Carlo estimate of E[h(kappa + d'U + d'a)] drawing the full
/// q-dimensional U. The reciprocal link averages 1 / X, X ~ Gamma(shape,
/// adj.value).
MonteCarloEstimate marginal_mean_monte_carlo(Link link, double kappa, const RandomEffectSpec& re,
                                             const Adjustment& adj, std::uint64_t seed,
                                             std::size_t size);

/// E[h(kappa + d'U + d'a)] evaluated numerically; compare with h(kappa).
/// The square-root link is integrated without its domain restriction, as
/// the defining identity requires. Throws NumericError on a non-finite
/// integrand.
double marginal_mean_check(Link link, double kappa, const RandomEffectSpec& re,
                           const Adjustment& adj, const CheckOracle& oracle = {});

/// Memo of adjustments keyed on (link, kappa rounded to 1e-14, tau2).
/// Internally synchronized; cleared when it reaches capacity.
class AdjustmentCache {
 public:
  explicit AdjustmentCache(std::size_t capacity = 1 << 16) : capacity_(capacity) {}

  double get(Link link, double kappa, double tau2);
  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  using Key = std::tuple<int, double, double>;
  mutable std::mutex mutex_;
  std::map<Key, double> entries_;
  std::size_t capacity_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace miglmm
