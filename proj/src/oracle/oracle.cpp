#include "miglmm/oracle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <string>

#include "miglmm/errors.hpp"

namespace miglmm::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Recurrence {
  double value;     // psi_n, scaled
  double previous;  // psi_{n-1}, scaled
  double log_scale;
};

// Orthonormal Hermite polynomials (weight exp(-x^2)), rescaled by powers of
// two so that order 1000 at the outermost root stays finite.
Recurrence hermite_recurrence(int n, double x) {
  double prev = 0.0;
  double cur = std::pow(M_PI, -0.25);
  double log_scale = 0.0;
  for (int k = 0; k < n; ++k) {
    const double next =
        std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    int e = 0;
    std::frexp(cur, &e);
    if (e > 400) {
      cur = std::ldexp(cur, -e);
      prev = std::ldexp(prev, -e);
      log_scale += e * M_LN2;
    }
  }
  return {cur, prev, log_scale};
}

const HermiteRule& cached_rule(int order) {
  static std::mutex mutex;
  static std::map<int, HermiteRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, hermite_rule(order)).first;
  return it->second;
}

double log_sum_exp(const std::vector<double>& terms) {
  double top = kNegInf;
  for (double t : terms) top = std::max(top, t);
  if (top == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

double normal_expectation_adaptive(const std::function<double(double)>& g, double mean,
                                   double variance) {
  if (variance == 0.0) return g(mean);
  const double sd = std::sqrt(variance);
  auto f = [&](double z) {
    const double w = normal_pdf(z);
    return w == 0.0 ? 0.0 : g(mean + sd * z) * w;
  };
  const double inf = std::numeric_limits<double>::infinity();
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-13,
                                                                       &err);
}

}  // namespace

HermiteRule hermite_rule(int order) {
  if (order < 1 || order > 1000) {
    throw InvalidArgument("hermite_rule: order must lie in [1, 1000], got " + std::to_string(order));
  }
  const int n = order;
  HermiteRule rule{std::vector<double>(n), std::vector<double>(n)};
  // positive roots: sign changes of psi_n on a grid finer than the
  // smallest root spacing, each bracket bisected to rounding, then one
  // Newton step
  std::vector<double> roots;
  const double top = std::sqrt(2.0 * n + 1.0) + 1.0;
  const double grid = 0.1 * M_PI / std::sqrt(2.0 * n + 1.0);
  auto sign_at = [n](double x) { return std::signbit(hermite_recurrence(n, x).value); };
  double left = (n % 2 == 1) ? 0.5 * grid : 0.0;
  bool left_sign = sign_at(left);
  while (left < top && static_cast<int>(roots.size()) < n / 2) {
    const double right = left + grid;
    const bool right_sign = sign_at(right);
    if (right_sign != left_sign) {
      double lo = left;
      double hi = right;
      while (true) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (sign_at(mid) == left_sign ? lo : hi) = mid;
      }
      double z = 0.5 * (lo + hi);
      const Recurrence r = hermite_recurrence(n, z);
      const double step = r.value / (std::sqrt(2.0 * n) * r.previous);
      if (std::abs(step) < hi - lo + 1e-300) z -= step;
      roots.push_back(z);
    }
    left = right;
    left_sign = right_sign;
  }
  if (static_cast<int>(roots.size()) != n / 2) {
    throw NumericError("hermite_rule: found " + std::to_string(roots.size()) +
                       " positive roots, expected " + std::to_string(n / 2));
  }
  if (n % 2 == 1) roots.insert(roots.begin(), 0.0);
  std::vector<double> all;
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
    if (*it != 0.0) all.push_back(-*it);
  }
  all.insert(all.end(), roots.begin(), roots.end());
  for (int i = 0; i < n; ++i) {
    const Recurrence r = hermite_recurrence(n, all[i]);
    rule.nodes[i] = all[i];
    rule.weights[i] = std::exp(-std::log(static_cast<double>(n)) -
                               2.0 * (std::log(std::abs(r.previous)) + r.log_scale));
  }
  if (n == 1) rule.weights[0] = std::sqrt(M_PI);
  return rule;
}

double phi_gold(double mu, double sigma2) {
  const HermiteRule& rule = cached_rule(1000);
  const double scale = std::sqrt(2.0 * sigma2);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    if (rule.weights[i] == 0.0) continue;
    acc += rule.weights[i] * logistic(-(mu + scale * rule.nodes[i]));
  }
  return acc / std::sqrt(M_PI);
}

double phi_adaptive(double mu, double sigma2) {
  return normal_expectation_adaptive([](double w) { return logistic(-w); }, mu, sigma2);
}

McEstimate mc_integral(const std::function<double(double)>& f, const NormalLaw& law,
                       const Eigen::VectorXd& design, std::size_t size, std::uint64_t seed) {
  if (size < 10'000) throw InvalidArgument("mc_integral: size must be >= 1e4");
  validate(law);
  if (design.size() != law.dim()) throw InvalidArgument("mc_integral: design/covariance mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(law.covariance);
  const Eigen::RowVectorXd projection =
      design.transpose() * eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  Eigen::VectorXd z(law.dim());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (int j = 0; j < z.size(); ++j) z[j] = stdnorm(gen);
    const double v = f(projection.dot(z));
    if (!std::isfinite(v)) {
      throw NumericError("mc_integral: non-finite integrand at draw " + std::to_string(i));
    }
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(size - 1) / static_cast<double>(size))};
}

McEstimate mc_integral(const std::function<double(double)>& f, const NormalMixtureLaw& law,
                       std::size_t size, std::uint64_t seed) {
  if (size < 10'000) throw InvalidArgument("mc_integral: size must be >= 1e4");
  validate(law);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::discrete_distribution<std::size_t> pick(law.weights.begin(), law.weights.end());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t m = pick(gen);
    const double v = f(law.means[m] + std::sqrt(law.variances[m]) * stdnorm(gen));
    if (!std::isfinite(v)) {
      throw NumericError("mc_integral: non-finite integrand at draw " + std::to_string(i));
    }
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(size - 1) / static_cast<double>(size))};
}

double log_density(Family family, double y, double trials, double mean) {
  auto xlogy = [](double a, double b) { return a == 0.0 ? 0.0 : a * std::log(b); };
  switch (family) {
    case Family::Bernoulli: return y > 0.5 ? std::log(mean) : std::log1p(-mean);
    case Family::Binomial:
      return std::lgamma(trials + 1.0) - std::lgamma(y + 1.0) - std::lgamma(trials - y + 1.0) +
             xlogy(y, mean) + (trials - y == 0.0 ? 0.0 : (trials - y) * std::log1p(-mean));
    case Family::Poisson: return xlogy(y, mean) - mean - std::lgamma(y + 1.0);
  }
  return kNegInf;
}

double exact_marginal_loglik_small(Family family, Link link, const std::vector<double>& y,
                                   const std::vector<double>& trials,
                                   const std::vector<double>& kappa,
                                   const std::vector<double>& offset, double sigma2) {
  const std::size_t n = y.size();
  if (n > 20) {
    throw InvalidArgument("exact_marginal_loglik_small handles at most 20 observations, got " +
                          std::to_string(n));
  }
  if (kappa.size() != n || offset.size() != n || (!trials.empty() && trials.size() != n)) {
    throw InvalidArgument("exact_marginal_loglik_small: input lengths differ");
  }
  if (!(sigma2 >= 0.0)) throw InvalidArgument("exact_marginal_loglik_small: sigma2 < 0");
  const HermiteRule& rule = cached_rule(201);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = trials.empty() ? 1.0 : trials[i];
    const double centre = kappa[i] + offset[i];
    auto log_f = [&](double u) {
      const double mu = inverse_link(link, centre + u);
      const double v = log_density(family, y[i], m, mu);
      return std::isnan(v) ? kNegInf : v;
    };
    if (sigma2 == 0.0) {
      total += log_f(0.0);
      continue;
    }
    const double sd = std::sqrt(sigma2);
    auto g = [&](double u) {
      return log_f(u) - 0.5 * u * u / sigma2 - 0.5 * std::log(2.0 * M_PI * sigma2);
    };
    const double reach = 10.0 * sd + 2.0 * sigma2 + 10.0 + std::abs(centre);
    const auto best = boost::math::tools::brent_find_minima(
        [&](double u) {
          const double v = g(u);
          return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
        },
        -reach, reach, 52);
    const double mode = best.first;
    const double step = 1e-3 * sd;
    const double curvature = (g(mode + step) - 2.0 * g(mode) + g(mode - step)) / (step * step);
    const double scale = curvature < 0.0 && std::isfinite(curvature) ? 1.0 / std::sqrt(-curvature) : sd;
    std::vector<double> terms;
    terms.reserve(rule.nodes.size());
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      if (rule.weights[k] == 0.0) continue;
      const double x = rule.nodes[k];
      terms.push_back(std::log(rule.weights[k]) + x * x + g(mode + M_SQRT2 * scale * x));
    }
    total += std::log(M_SQRT2 * scale) + log_sum_exp(terms);
  }
  return total;
}

double marginal_mean(Link link, double kappa, double sigma2) {
  return normal_expectation_adaptive([link](double eta) { return inverse_link(link, eta); }, kappa,
                                     sigma2);
}

}  // namespace miglmm::oracle
