#include <doctest.h>

#include <cmath>
#include <random>

#include "miglmm/adjust.hpp"
#include "miglmm/errors.hpp"
#include "miglmm/oracle.hpp"

using namespace miglmm;

namespace {

// E[h(kappa + a + V)], V ~ N(0, tau2), by the independent adaptive reference
double reference_mean(Link link, double kappa, double a, double tau2) {
  if (link == Link::Sqrt) return (kappa + a) * (kappa + a) + tau2;
  return oracle::marginal_mean(link, kappa + a, tau2);
}

}  // namespace

TEST_CASE("closed forms") {
  CHECK(adjust_identity(1.7, 2.0).value == 0.0);
  CHECK(adjust_log(Eigen::VectorXd::Ones(1), NormalLaw::scalar(0.8)).value == -0.4);
  CHECK(adjust_probit(1.5, 3.0).value == (2.0 - 1.0) * 1.5);
  CHECK(adjust_sqrt(5.0, 9.0).value == -1.0);
  // 2-dim law: d' Sigma d = 1 + 2 + 2 * 0.5 = 4
  NormalLaw law;
  law.covariance.resize(2, 2);
  law.covariance << 1.0, 0.5, 0.5, 2.0;
  Eigen::VectorXd d(2);
  d << 1.0, 1.0;
  CHECK(effective_variance(d, law) == 4.0);
  CHECK(adjust_log(d, law).value == -2.0);
}

TEST_CASE("marginal mean is preserved for every link") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> kappa_dist(-3.0, 3.0);
  std::uniform_real_distribution<double> tau2_dist(0.01, 4.0);
  for (Link link : {Link::Log, Link::Probit, Link::Logit, Link::CLogLog, Link::Sqrt}) {
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
      const double tau2 = tau2_dist(gen);
      double kappa = kappa_dist(gen);
      if (link == Link::Sqrt) kappa = std::sqrt(tau2) + std::abs(kappa);
      const double a = adjustment_shift(link, kappa, tau2);
      const double target = inverse_link(link, kappa);
      worst = std::max(worst, std::abs(reference_mean(link, kappa, a, tau2) - target) /
                                  std::max(1.0, std::abs(target)));
    }
    INFO(link_name(link));
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("logit adjustment is odd in kappa and vanishes at zero") {
  CHECK(adjust_logit(0.0, 2.0).value == 0.0);
  CHECK(adjust_logit(1.0, 0.0).value == 0.0);
  for (double kappa : {0.3, 1.0, 4.0, 12.0}) {
    CHECK(adjust_logit(-kappa, 1.5).value == doctest::Approx(-adjust_logit(kappa, 1.5).value));
  }
}

TEST_CASE("logit adjustment approaches tau2 / 2 for large kappa") {
  for (double tau2 : {0.25, 1.0, 2.0, 4.0}) {
    const double a = adjust_logit(50.0, tau2).value;
    INFO("tau2 " << tau2);
    CHECK(std::abs(a - 0.5 * tau2) <= 1e-3);
  }
}

TEST_CASE("logit adjustment shrinks the linear predictor") {
  // E[h(kappa + V)] lies nearer 1/2 than h(kappa), so a pushes away from 0
  for (double kappa : {0.5, 2.0, 6.0}) {
    const double a = adjust_logit(kappa, 2.0).value;
    CHECK(a > 0.0);
  }
}

TEST_CASE("square root link undefined below the variance bound") {
  try {
    adjust_sqrt(1.0, 4.0);
    FAIL("expected ModelUndefined");
  } catch (const ModelUndefined& e) {
    CHECK(e.kappa() == 1.0);
    CHECK(e.variance() == 4.0);
  }
  CHECK(adjust_sqrt(2.0, 4.0).value == -2.0);
}

TEST_CASE("reciprocal link keeps E[1 / (kappa + U)] = 1 / kappa") {
  const GammaShiftLaw law = adjust_reciprocal(2.0, 5.0);
  CHECK(law.scale == 0.5);
  CHECK(law.reciprocal_mean() == 0.5);
  const auto re = RandomEffectSpec::gamma_shape(5.0);
  const Adjustment adj = compute_adjustment(Link::Reciprocal, 2.0, re);
  CHECK(marginal_mean_check(Link::Reciprocal, 2.0, re, adj) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_THROWS_AS(adjust_reciprocal(2.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(adjust_reciprocal(-1.0, 3.0), InvalidArgument);
  CHECK_THROWS_AS(adjustment_shift(Link::Reciprocal, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("mixture laws") {
  NormalMixtureLaw law{{0.3, 0.7}, {0.7, -0.3}, {0.5, 1.5}};
  REQUIRE(std::abs(law.mean()) < 1e-15);
  const auto re = RandomEffectSpec::mixture(law);
  for (Link link : {Link::Log, Link::Probit, Link::Logit, Link::CLogLog}) {
    const double kappa = 0.8;
    const Adjustment adj = compute_adjustment(link, kappa, re);
    double mean = 0.0;
    for (std::size_t m = 0; m < law.size(); ++m) {
      mean += law.weights[m] *
              oracle::marginal_mean(link, kappa + adj.value + law.means[m], law.variances[m]);
    }
    INFO(link_name(link));
    CHECK(std::abs(mean - inverse_link(link, kappa)) <= 1e-8);
  }
  NormalMixtureLaw shifted{{0.5, 0.5}, {1.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(compute_adjustment(Link::Logit, 0.5, RandomEffectSpec::mixture(shifted)),
                  InvalidArgument);
}

TEST_CASE("multivariate normal effect reduces to its effective variance") {
  NormalLaw law;
  law.covariance.resize(2, 2);
  law.covariance << 0.6, 0.1, 0.1, 0.4;
  RandomEffectSpec re{Eigen::Vector2d(1.0, 2.0), law};
  const double tau2 = effective_variance(re.design, law);
  const Adjustment adj = compute_adjustment(Link::Logit, 1.2, re);
  CHECK(adj.tau2 == doctest::Approx(tau2));
  CHECK(adj.value == doctest::Approx(adjust_logit(1.2, tau2).value).epsilon(1e-14));
  // Monte Carlo over the full 2-dim law agrees within sampling error
  const auto mc = marginal_mean_monte_carlo(Link::Logit, 1.2, re, adj, 9, 400'000);
  CHECK(std::abs(mc.mean - logistic(1.2)) <= 4.0 * mc.std_error);
}

TEST_CASE("cache returns identical values") {
  AdjustmentCache cache(4);
  const double first = cache.get(Link::Logit, 0.7, 1.1);
  const double second = cache.get(Link::Logit, 0.7, 1.1);
  CHECK(first == second);
  CHECK(cache.hits() == 1);
  CHECK(cache.misses() == 1);
  for (int i = 0; i < 10; ++i) cache.get(Link::Probit, 0.1 * i, 1.0);
  CHECK(cache.size() <= 4);
}

TEST_CASE("invalid variances are rejected") {
  CHECK_THROWS_AS(adjust_logit(1.0, -0.5), InvalidArgument);
  CHECK_THROWS_AS(adjust_probit(1.0, std::nan("")), InvalidArgument);
}
