#include "miglmm/adjust.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "miglmm/errors.hpp"
#include "miglmm/root.hpp"

namespace miglmm {

namespace {

constexpr double kSolverWidth = 1e-13;
constexpr long kLogitStepCap = 1'000'000;
constexpr int kMaxDoublings = 10;

double design_scalar(const RandomEffectSpec& re) {
  if (re.design.size() == 0) return 1.0;
  if (re.design.size() != 1) {
    throw InvalidArgument("mixture random effect must be scalar, design has " +
                          std::to_string(re.design.size()) + " entries");
  }
  return re.design[0];
}

NormalMixtureLaw scaled(const NormalMixtureLaw& law, double d) {
  NormalMixtureLaw out = law;
  for (std::size_t m = 0; m < out.size(); ++m) {
    out.means[m] *= d;
    out.variances[m] *= d * d;
  }
  return out;
}

double reduced_variance(const RandomEffectSpec& re, const NormalLaw& law) {
  if (re.design.size() == 0 && law.dim() == 1) return std::max(0.0, law.covariance(0, 0));
  return effective_variance(re.design, law);
}

// Root of an increasing residual, starting from [-half_width, half_width]
// and doubling the bracket until the sign changes.
double solve_increasing(const std::function<double(double)>& residual, double half_width,
                        double width_tol, const char* what) {
  double lo = -half_width;
  double hi = half_width;
  int doublings = 0;
  while (residual(lo) > 0.0 || residual(hi) < 0.0) {
    if (++doublings > kMaxDoublings) {
      throw ConvergenceError(std::string(what) + ": no sign change in [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "] after " +
                             std::to_string(kMaxDoublings) + " doublings");
    }
    lo *= 2.0;
    hi *= 2.0;
  }
  return bisect(residual, lo, hi, width_tol).root;
}

double check_tau2(double tau2, const char* what) {
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) {
    throw InvalidArgument(std::string(what) + ": variance must be finite and >= 0, got " +
                          std::to_string(tau2));
  }
  return tau2;
}

template <class F>
double expect_over_law(const RandomEffectSpec& re, const GaussHermiteRule& rule, F&& f) {
  if (const auto* normal = std::get_if<NormalLaw>(&re.law)) {
    const double tau2 = reduced_variance(re, *normal);
    if (tau2 == 0.0) return f(0.0);
    return rule.normal_expectation(0.0, tau2, f);
  }
  if (const auto* mix = std::get_if<NormalMixtureLaw>(&re.law)) {
    const NormalMixtureLaw law = scaled(*mix, design_scalar(re));
    double acc = 0.0;
    for (std::size_t m = 0; m < law.size(); ++m) {
      const double part = law.variances[m] == 0.0
                              ? f(law.means[m])
                              : rule.normal_expectation(law.means[m], law.variances[m], f);
      acc += law.weights[m] * part;
    }
    return acc;
  }
  throw InvalidArgument("quadrature over a gamma law is not supported here");
}

double law_variance(const RandomEffectSpec& re) {
  if (const auto* normal = std::get_if<NormalLaw>(&re.law)) return reduced_variance(re, *normal);
  if (const auto* mix = std::get_if<NormalMixtureLaw>(&re.law)) {
    const double d = design_scalar(re);
    return d * d * mix->variance();
  }
  return 0.0;
}

// 1 - h(eta) without cancellation for the bounded links
double upper_tail(Link link, double eta) {
  switch (link) {
    case Link::Probit: return normal_cdf(-eta);
    case Link::Logit: return logistic(-eta);
    case Link::CLogLog: return std::exp(-std::exp(eta));
    default: return 1.0 - inverse_link(link, eta);
  }
}

// Increasing residual in a for E[h(kappa + a + V)] = h(kappa); switches to
// the upper tail when h(kappa) > 1/2 so targets near one keep their digits.
template <class Expect>
std::function<double(double)> bounded_residual(Link link, double kappa, Expect expect) {
  const double lower = inverse_link(link, kappa);
  if (lower <= 0.5) {
    return [=](double a) {
      return expect([=](double v) { return inverse_link(link, kappa + v + a); }) - lower;
    };
  }
  const double upper = upper_tail(link, kappa);
  return [=](double a) {
    return upper - expect([=](double v) { return upper_tail(link, kappa + v + a); });
  };
}

double integrand(Link link, double eta) {
  // the square-root identity E[(kappa + V + a)^2] = kappa^2 holds on all of R
  if (link == Link::Sqrt) return eta * eta;
  return inverse_link(link, eta);
}

double normal_integral(const std::function<double(double)>& g, double mean, double variance) {
  if (variance == 0.0) return g(mean);
  const double sd = std::sqrt(variance);
  auto f = [&](double z) {
    const double w = normal_pdf(z);
    return w == 0.0 ? 0.0 : g(mean + sd * z) * w;
  };
  const double inf = std::numeric_limits<double>::infinity();
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-14,
                                                                       &err);
}

}  // namespace

RandomEffectSpec RandomEffectSpec::scalar_normal(double variance) {
  return {Eigen::VectorXd::Ones(1), NormalLaw::scalar(variance)};
}

RandomEffectSpec RandomEffectSpec::mixture(NormalMixtureLaw law) {
  return {Eigen::VectorXd::Ones(1), std::move(law)};
}

RandomEffectSpec RandomEffectSpec::gamma_shape(double shape) {
  return {Eigen::VectorXd::Ones(1), GammaShiftLaw{0.0, shape, 0.0}};
}

double effective_variance(const Eigen::VectorXd& d, const NormalLaw& law) {
  if (d.size() != law.covariance.rows() || law.covariance.rows() != law.covariance.cols()) {
    throw InvalidArgument("effective_variance: design has " + std::to_string(d.size()) +
                          " entries, covariance is " + std::to_string(law.covariance.rows()) +
                          "x" + std::to_string(law.covariance.cols()));
  }
  return std::max(0.0, d.dot(law.covariance * d));
}

Adjustment adjust_identity(double kappa, double tau2) {
  return {0.0, Link::Identity, kappa, check_tau2(tau2, "adjust_identity")};
}

Adjustment adjust_identity(double kappa, const NormalMixtureLaw& law) {
  validate_zero_mean(law);
  return {0.0, Link::Identity, kappa, law.variance()};
}

Adjustment adjust_log(const Eigen::VectorXd& d, const NormalLaw& law) {
  validate(law);
  const double tau2 = effective_variance(d, law);
  return {-0.5 * tau2, Link::Log, 0.0, tau2};
}

Adjustment adjust_log(const NormalMixtureLaw& law) {
  validate_zero_mean(law);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < law.size(); ++m) {
    top = std::max(top, law.means[m] + 0.5 * law.variances[m]);
  }
  double acc = 0.0;
  for (std::size_t m = 0; m < law.size(); ++m) {
    acc += law.weights[m] * std::exp(law.means[m] + 0.5 * law.variances[m] - top);
  }
  return {-(top + std::log(acc)), Link::Log, 0.0, law.variance()};
}

Adjustment adjust_probit(double kappa, double tau2) {
  check_tau2(tau2, "adjust_probit");
  return {(std::sqrt(1.0 + tau2) - 1.0) * kappa, Link::Probit, kappa, tau2};
}

Adjustment adjust_logit(double kappa, double tau2) {
  check_tau2(tau2, "adjust_logit");
  if (kappa == 0.0 || tau2 == 0.0) return {0.0, Link::Logit, kappa, tau2};
  if (kappa < 0.0) {
    Adjustment mirrored = adjust_logit(-kappa, tau2);
    return {-mirrored.value, Link::Logit, kappa, tau2};
  }

  // phi(kappa + a) = 1 - h(kappa) = h(-kappa); the root lies in [kappa, kappa + tau2 / 2]
  const double target = logistic(-kappa);
  double lo = kappa;
  double hi = kappa + 0.5 * tau2;

  double phi = 0.5;
  long t = 0;
  while (phi > target && t < kLogitStepCap) {
    phi = std::exp(-static_cast<double>(t) * tau2 - 0.5 * tau2) * (1.0 - phi);
    ++t;
  }
  if (phi <= target) {
    lo = std::max(lo, static_cast<double>(t - 1) * tau2);
    hi = std::min(hi, static_cast<double>(t) * tau2);
    if (lo > hi) std::swap(lo, hi);
  }

  auto residual = [&](double x) { return target - phi_hybrid(x, tau2); };
  const double width = kSolverWidth * std::max(1.0, tau2);
  const double root = bisect(residual, lo, hi, width).root;
  return {root - kappa, Link::Logit, kappa, tau2};
}

Adjustment adjust_logit_mixture(double kappa, const NormalMixtureLaw& law) {
  validate_zero_mean(law);
  const double target = logistic(kappa);
  double half_width = 0.0;
  for (std::size_t m = 0; m < law.size(); ++m) {
    half_width = std::max(half_width, 0.5 * (law.means[m] * law.means[m] + law.variances[m]));
  }
  half_width += std::abs(kappa);
  const double tau2 = law.variance();
  if (half_width == 0.0) return {0.0, Link::Logit, kappa, tau2};

  auto residual = [&](double a) {
    double acc = 0.0;
    for (std::size_t m = 0; m < law.size(); ++m) {
      acc += law.weights[m] * logistic_normal_mean(kappa + a + law.means[m], law.variances[m]);
    }
    return acc - target;
  };
  const double a = solve_increasing(residual, half_width, kSolverWidth * std::max(1.0, tau2),
                                    "adjust_logit_mixture");
  return {a, Link::Logit, kappa, tau2};
}

Adjustment adjust_cloglog(double kappa, double tau2, const GaussHermiteRule& rule) {
  check_tau2(tau2, "adjust_cloglog");
  if (tau2 == 0.0) return {0.0, Link::CLogLog, kappa, tau2};
  if (rule.order < 30) {
    throw InvalidArgument("adjust_cloglog: quadrature order must be >= 30, got " +
                          std::to_string(rule.order));
  }
  auto residual = bounded_residual(Link::CLogLog, kappa, [&](const auto& f) {
    return rule.normal_expectation(0.0, tau2, f);
  });
  const double tau = std::sqrt(tau2);
  const double a = solve_increasing(residual, 0.5 * tau2 + 5.0 * tau + 5.0,
                                    kSolverWidth * std::max(1.0, tau2), "adjust_cloglog");
  return {a, Link::CLogLog, kappa, tau2};
}

Adjustment adjust_sqrt(double kappa, double var_du) {
  check_tau2(var_du, "adjust_sqrt");
  if (kappa < std::sqrt(var_du)) {
    throw ModelUndefined("square-root link undefined: kappa = " + std::to_string(kappa) +
                             " < sqrt(Var(d'U)) = " + std::to_string(std::sqrt(var_du)),
                         kappa, var_du);
  }
  return {-kappa + std::sqrt(kappa * kappa - var_du), Link::Sqrt, kappa, var_du};
}

GammaShiftLaw adjust_reciprocal(double kappa, double shape) {
  if (!(shape > 1.0)) {
    throw InvalidArgument("adjust_reciprocal: shape must exceed 1, got " + std::to_string(shape));
  }
  if (!(kappa > 0.0)) {
    throw InvalidArgument("adjust_reciprocal: kappa must be positive, got " +
                          std::to_string(kappa));
  }
  return {kappa, shape, kappa / (shape - 1.0)};
}

Adjustment adjust_numeric(Link link, double kappa, const RandomEffectSpec& re,
                          const GaussHermiteRule& rule) {
  if (!is_bounded(link)) {
    throw InvalidArgument("adjust_numeric: link " + std::string(link_name(link)) +
                          " has a closed form; numeric path covers probit, logit, cloglog");
  }
  if (const auto* mix = std::get_if<NormalMixtureLaw>(&re.law)) validate_zero_mean(*mix);
  const double tau2 = law_variance(re);
  if (tau2 == 0.0) return {0.0, link, kappa, tau2};
  auto residual = bounded_residual(
      link, kappa, [&](const auto& f) { return expect_over_law(re, rule, f); });
  const double tau = std::sqrt(tau2);
  const double a = solve_increasing(residual, 0.5 * tau2 + 5.0 * tau + 5.0 + std::abs(kappa),
                                    kSolverWidth * std::max(1.0, tau2), "adjust_numeric");
  return {a, link, kappa, tau2};
}

double adjustment_shift(Link link, double kappa, double tau2) {
  switch (link) {
    case Link::Identity: return 0.0;
    case Link::Log: return -0.5 * check_tau2(tau2, "adjust_log");
    case Link::Probit: return adjust_probit(kappa, tau2).value;
    case Link::Logit: return adjust_logit(kappa, tau2).value;
    case Link::CLogLog:
      return adjust_cloglog(kappa, tau2, *shared_gauss_hermite_rule(kAdjustQuadratureOrder)).value;
    case Link::Sqrt: return adjust_sqrt(kappa, tau2).value;
    case Link::Reciprocal:
      throw InvalidArgument("reciprocal link changes the random-effect shape, not its location");
  }
  throw InvalidArgument("unknown link");
}

Adjustment compute_adjustment(Link link, double kappa, const RandomEffectSpec& re) {
  if (const auto* gamma = std::get_if<GammaShiftLaw>(&re.law)) {
    if (link != Link::Reciprocal) {
      throw InvalidArgument("gamma random effect is only defined for the reciprocal link");
    }
    const GammaShiftLaw law = adjust_reciprocal(kappa, gamma->shape);
    return {law.scale, link, kappa, law.shape * law.scale * law.scale};
  }
  if (link == Link::Reciprocal) {
    throw InvalidArgument("reciprocal link needs a gamma random effect (shape > 1)");
  }

  if (const auto* normal = std::get_if<NormalLaw>(&re.law)) {
    validate(*normal);
    const double tau2 = reduced_variance(re, *normal);
    if (link == Link::Log) {
      return {-0.5 * tau2, link, kappa, tau2};
    }
    Adjustment adj{adjustment_shift(link, kappa, tau2), link, kappa, tau2};
    return adj;
  }

  const auto& raw = std::get<NormalMixtureLaw>(re.law);
  const NormalMixtureLaw law = scaled(raw, design_scalar(re));
  validate_zero_mean(law);
  switch (link) {
    case Link::Identity: return adjust_identity(kappa, law);
    case Link::Log: {
      Adjustment adj = adjust_log(law);
      adj.kappa = kappa;
      return adj;
    }
    case Link::Logit: return adjust_logit_mixture(kappa, law);
    case Link::Sqrt: return adjust_sqrt(kappa, law.variance());
    case Link::Probit:
    case Link::CLogLog:
      return adjust_numeric(link, kappa, re, *shared_gauss_hermite_rule(kAdjustQuadratureOrder));
    case Link::Reciprocal: break;
  }
  throw InvalidArgument("unsupported link for a mixture law");
}

MonteCarloEstimate marginal_mean_monte_carlo(Link link, double kappa, const RandomEffectSpec& re,
                                             const Adjustment& adj, std::uint64_t seed,
                                             std::size_t size) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  auto push = [&](double v) {
    if (!std::isfinite(v)) throw NumericError("marginal_mean_check: non-finite integrand");
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  };

  if (const auto* gamma = std::get_if<GammaShiftLaw>(&re.law)) {
    std::gamma_distribution<double> draw(gamma->shape, adj.value);
    for (std::size_t i = 0; i < size; ++i) push(1.0 / draw(gen));
  } else if (const auto* normal = std::get_if<NormalLaw>(&re.law)) {
    validate(*normal);
    const int q = normal->dim();
    Eigen::VectorXd d = re.design.size() == 0 ? Eigen::VectorXd::Ones(q) : re.design;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal->covariance);
    const Eigen::MatrixXd root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Eigen::VectorXd z(q);
    for (std::size_t i = 0; i < size; ++i) {
      for (int j = 0; j < q; ++j) z[j] = stdnorm(gen);
      const double du = d.dot(root * z);
      push(integrand(link, kappa + du + adj.value));
    }
  } else {
    const NormalMixtureLaw law = scaled(std::get<NormalMixtureLaw>(re.law), design_scalar(re));
    std::discrete_distribution<std::size_t> pick(law.weights.begin(), law.weights.end());
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t m = pick(gen);
      const double du = law.means[m] + std::sqrt(law.variances[m]) * stdnorm(gen);
      push(integrand(link, kappa + du + adj.value));
    }
  }
  const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double marginal_mean_check(Link link, double kappa, const RandomEffectSpec& re,
                           const Adjustment& adj, const CheckOracle& oracle) {
  if (oracle.kind == CheckOracle::Kind::MonteCarlo) {
    return marginal_mean_monte_carlo(link, kappa, re, adj, oracle.seed, oracle.size).mean;
  }

  double result = 0.0;
  if (const auto* gamma = std::get_if<GammaShiftLaw>(&re.law)) {
    const boost::math::gamma_distribution<double> law(gamma->shape, adj.value);
    auto f = [&](double x) { return x > 0.0 ? boost::math::pdf(law, x) / x : 0.0; };
    double err = 0.0;
    result = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-14, &err);
  } else {
    const std::function<double(double)> g = [&](double eta) { return integrand(link, eta); };
    const double centre = kappa + adj.value;
    if (const auto* normal = std::get_if<NormalLaw>(&re.law)) {
      result = normal_integral(g, centre, reduced_variance(re, *normal));
    } else {
      const NormalMixtureLaw law = scaled(std::get<NormalMixtureLaw>(re.law), design_scalar(re));
      for (std::size_t m = 0; m < law.size(); ++m) {
        result += law.weights[m] * normal_integral(g, centre + law.means[m], law.variances[m]);
      }
    }
  }
  if (!std::isfinite(result)) throw NumericError("marginal_mean_check: non-finite integral");
  return result;
}

double AdjustmentCache::get(Link link, double kappa, double tau2) {
  const Key key{static_cast<int>(link), std::nearbyint(kappa * 1e14) * 1e-14, tau2};
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      return it->second;
    }
    ++misses_;
  }
  const double value = adjustment_shift(link, std::get<1>(key), tau2);
  std::lock_guard<std::mutex> lock(mutex_);
  if (entries_.size() >= capacity_) entries_.clear();
  entries_.emplace(key, value);
  return value;
}

std::size_t AdjustmentCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

std::size_t AdjustmentCache::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

std::size_t AdjustmentCache::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

}  // namespace miglmm
