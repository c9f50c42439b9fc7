#include <doctest.h>

#include <cmath>

#include "miglmm/errors.hpp"
#include "miglmm/links.hpp"
#include "miglmm/oracle.hpp"

using namespace miglmm;

namespace {

// int x^(2k) exp(-x^2) dx = Gamma(k + 1/2)
double even_moment(int k) { return std::tgamma(k + 0.5); }

}  // namespace

TEST_CASE("reference rules integrate polynomials exactly") {
  for (int order : {1, 2, 3, 10, 51, 200, 201, 500, 1000}) {
    const auto rule = oracle::hermite_rule(order);
    REQUIRE(static_cast<int>(rule.nodes.size()) == order);
    for (int k = 0; k <= std::min(order - 1, 6); ++k) {
      double acc = 0.0;
      for (int i = 0; i < order; ++i) acc += rule.weights[i] * std::pow(rule.nodes[i], 2 * k);
      INFO("order " << order << " moment " << 2 * k);
      CHECK(acc == doctest::Approx(even_moment(k)).epsilon(1e-11));
    }
    // odd moments vanish by symmetry of the nodes
    for (int i = 0; i < order; ++i) CHECK(rule.nodes[i] == -rule.nodes[order - 1 - i]);
  }
  CHECK_THROWS_AS(oracle::hermite_rule(0), InvalidArgument);
}

TEST_CASE("two independent references for phi agree") {
  for (double sigma : {0.05, 0.5, 1.0, 2.5, 4.0}) {
    for (double t : {0.0, 0.5, 1.7, 3.9}) {
      const double s2 = sigma * sigma;
      const double gold = oracle::phi_gold(t * s2, s2);
      const double gk = oracle::phi_adaptive(t * s2, s2);
      INFO("sigma " << sigma << " t " << t);
      CHECK(std::abs(gold - gk) <= 1e-13 + 1e-10 * gk);
    }
  }
  CHECK(oracle::phi_gold(0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("Monte Carlo references") {
  const auto law = NormalLaw::scalar(2.0);
  const auto est = oracle::mc_integral([](double v) { return v * v; }, law,
                                       Eigen::VectorXd::Ones(1), 200'000, 3);
  CHECK(std::abs(est.estimate - 2.0) <= 4.0 * est.std_error);
  const NormalMixtureLaw mix{{0.5, 0.5}, {-1.0, 1.0}, {0.25, 0.25}};
  const auto m = oracle::mc_integral([](double v) { return v * v; }, mix, 200'000, 4);
  CHECK(std::abs(m.estimate - 1.25) <= 4.0 * m.std_error);
}

TEST_CASE("adaptive marginal mean has known closed forms") {
  // probit: Phi(kappa / sqrt(1 + s2)); log: exp(kappa + s2 / 2)
  CHECK(oracle::marginal_mean(Link::Probit, 0.7, 1.5) ==
        doctest::Approx(normal_cdf(0.7 / std::sqrt(2.5))).epsilon(1e-12));
  CHECK(oracle::marginal_mean(Link::Log, 0.3, 0.8) ==
        doctest::Approx(std::exp(0.7)).epsilon(1e-12));
}

TEST_CASE("small-instance marginal likelihood") {
  const std::vector<double> y = {1, 0, 1};
  const std::vector<double> kappa = {0.2, -0.3, 1.0};
  const std::vector<double> zero(3, 0.0);
  double direct = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = inverse_link(Link::Probit, kappa[i]);
    direct += y[i] > 0.5 ? std::log(p) : std::log1p(-p);
  }
  CHECK(oracle::exact_marginal_loglik_small(oracle::Family::Bernoulli, Link::Probit, y, {}, kappa,
                                            zero, 0.0) == doctest::Approx(direct));
  // conventional probit marginal: Phi(kappa / sqrt(1 + s2)) per observation
  double closed = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = normal_cdf(kappa[i] / std::sqrt(3.0));
    closed += y[i] > 0.5 ? std::log(p) : std::log1p(-p);
  }
  CHECK(oracle::exact_marginal_loglik_small(oracle::Family::Bernoulli, Link::Probit, y, {}, kappa,
                                            zero, 2.0) == doctest::Approx(closed).epsilon(1e-11));
  CHECK_THROWS_AS(oracle::exact_marginal_loglik_small(oracle::Family::Bernoulli, Link::Probit,
                                                      std::vector<double>(21, 1.0), {},
                                                      std::vector<double>(21, 0.0),
                                                      std::vector<double>(21, 0.0), 1.0),
                  InvalidArgument);
}

TEST_CASE("Poisson marginal likelihood at vanishing variance") {
  // as sigma2 -> 0 the marginal reduces to log f(0 | exp(kappa)) = -exp(kappa)
  const std::vector<double> y = {0};
  const std::vector<double> k = {0.4};
  const std::vector<double> o = {0.0};
  CHECK(oracle::exact_marginal_loglik_small(oracle::Family::Poisson, Link::Log, y, {}, k, o, 1e-10) ==
        doctest::Approx(-std::exp(0.4)).epsilon(1e-8));
}
