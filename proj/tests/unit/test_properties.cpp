#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "miglmm/adjust.hpp"
#include "miglmm/cases.hpp"
#include "miglmm/inference.hpp"
#include "miglmm/lni.hpp"
#include "miglmm/oracle.hpp"
#include "miglmm/root.hpp"
#include "miglmm/sampler.hpp"

using namespace miglmm;

namespace {

std::vector<double> sigma_grid() {
  std::vector<double> out;
  for (int k = 1; k <= 80; ++k) out.push_back(0.05 * k);
  return out;
}

// bivariate normal with correlation 0.6, analytic density
class CorrelatedTarget : public BlockTarget {
 public:
  ParamState initial_state() const override {
    ParamState s;
    s.beta = Eigen::VectorXd::Zero(2);
    s.log_variance = Eigen::VectorXd();
    return s;
  }
  double log_density(const ParamState& s, const BlockRef&) override {
    const double r = 0.6;
    const double a = s.beta[0] - 1.0;
    const double b = (s.beta[1] + 2.0) / 1.5;
    return -(a * a - 2 * r * a * b + b * b) / (2 * (1 - r * r));
  }
};

// flat target: every proposal is accepted
class FlatTarget : public BlockTarget {
 public:
  ParamState initial_state() const override {
    ParamState s;
    s.beta = Eigen::VectorXd::Zero(3);
    return s;
  }
  double log_density(const ParamState&, const BlockRef&) override { return 0.0; }
};

double ks_distance(std::vector<double> x, double mean, double sd) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf((x[i] - mean) / sd);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

// one observation in one group whose variance parameter is tau2
struct SingleObservation {
  ModelSpec spec;
  Dataset data;
  ParamState state;
};

SingleObservation single_observation(Family family, Link link, double kappa, double tau2) {
  SingleObservation s;
  s.spec.family = family;
  s.spec.link = link;
  s.spec.beta_names = {"intercept"};
  s.spec.beta_priors = {{0.0, 100.0}};
  s.spec.variance_names = {"v"};
  s.spec.log_variance_priors = {{0.0, 1.0}};
  s.spec.levels = {{"unit", 0, {0}}};
  s.data.y = {0.0};
  if (family == Family::Binomial) s.data.trials = {1.0};
  s.data.x = Eigen::MatrixXd::Constant(1, 1, kappa);
  s.data.groups = {{0}};
  s.state.beta = Eigen::VectorXd::Ones(1);
  s.state.log_variance = Eigen::VectorXd::Constant(1, std::log(tau2));
  s.state.u = {Eigen::VectorXd::Zero(1)};
  return s;
}

}  // namespace

// ---- links -------------------------------------------------------------

TEST_CASE("inverse links are strictly monotone where double resolves them") {
  for (Link link : kAllLinks) {
    const double lo = link == Link::Sqrt || link == Link::Reciprocal ? 0.05 : -5.0;
    // past eta = 3 a 1e-4 step moves 1 - exp(-e^eta) by less than the spacing of doubles near 1
    const int steps = link == Link::CLogLog ? 80'000 : 100'000;
    double prev = inverse_link(link, lo);
    bool ok = true;
    for (int i = 1; i <= steps; ++i) {
      const double v = inverse_link(link, lo + 1e-4 * i);
      ok = ok && (link == Link::Reciprocal ? v < prev : v > prev);
      prev = v;
    }
    INFO(link_name(link));
    CHECK(ok);
  }
}

// ---- logistic-normal integral ------------------------------------------

TEST_CASE("recursion consistency on every sigma of the grid") {
  std::mt19937_64 gen(31);
  double worst = 0.0;
  for (double s : sigma_grid()) {
    const double s2 = s * s;
    std::uniform_real_distribution<double> mu_dist(0.0, 6.0 * s2 + 10.0);
    for (int i = 0; i < 100; ++i) {
      const double mu = mu_dist(gen);
      const double lhs = phi_hybrid(mu + s2, s2);
      const double rhs = std::exp(-mu - 0.5 * s2) * (1.0 - phi_hybrid(mu, s2));
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("phi is strictly decreasing within recursion cells") {
  for (double s : {0.05, 0.3, 1.0, 2.2, 4.0}) {
    const double s2 = s * s;
    bool ok = true;
    double prev = phi_hybrid(-10.0, s2);
    for (int i = 1; i <= 50'000; ++i) {
      const double v = phi_hybrid(-10.0 + 1e-3 * i, s2);
      ok = ok && v < prev;
      prev = v;
    }
    INFO("sigma " << s);
    CHECK(ok);
  }
}

TEST_CASE("phi is strictly decreasing across recursion cell boundaries at 1e-6 spacing") {
  for (double s : sigma_grid()) {
    const double s2 = s * s;
    bool ok = true;
    // mu < 0 follows by the exact symmetry; there 1 - phi rounds to 1 before it decreases
    for (int k = 0; k <= 4; ++k) {
      double p = phi_hybrid(k * s2 - 1e-4, s2);
      for (int i = 1; i <= 200; ++i) {
        const double v = phi_hybrid(k * s2 - 1e-4 + 1e-6 * i, s2);
        ok = ok && v < p;
        p = v;
      }
    }
    INFO("sigma " << s);
    CHECK(ok);
  }
}

TEST_CASE("symmetry is exact") {
  std::mt19937_64 gen(32);
  std::uniform_real_distribution<double> mu_dist(-60.0, 60.0);
  for (double s : sigma_grid()) {
    for (int i = 0; i < 20; ++i) {
      const double mu = mu_dist(gen);
      CHECK(phi_hybrid(-mu, s * s) + phi_hybrid(mu, s * s) == 1.0);
    }
  }
}

// ---- adjustments -------------------------------------------------------

TEST_CASE("defining identity over wide kappa and variance ranges") {
  std::mt19937_64 gen(33);
  std::uniform_real_distribution<double> kappa_dist(-10.0, 10.0);
  std::uniform_real_distribution<double> tau2_dist(0.0, 16.0);
  for (Link link : {Link::Identity, Link::Log, Link::Probit, Link::Logit, Link::CLogLog}) {
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double kappa = kappa_dist(gen);
      const double tau2 = tau2_dist(gen);
      const auto re = RandomEffectSpec::scalar_normal(tau2);
      const Adjustment adj = compute_adjustment(link, kappa, re);
      worst = std::max(worst, std::abs(marginal_mean_check(link, kappa, re, adj) -
                                       inverse_link(link, kappa)));
    }
    INFO(link_name(link));
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("probit closed form agrees with the numeric solver") {
  std::mt19937_64 gen(34);
  std::uniform_real_distribution<double> kappa_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> tau2_dist(0.01, 9.0);
  const auto rule = shared_gauss_hermite_rule(kAdjustQuadratureOrder);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double kappa = kappa_dist(gen);
    const double tau2 = tau2_dist(gen);
    const double closed = adjust_probit(kappa, tau2).value;
    const double numeric =
        adjust_numeric(Link::Probit, kappa, RandomEffectSpec::scalar_normal(tau2), *rule).value;
    worst = std::max(worst, std::abs(closed - numeric));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("logit adjustment: parity, sign and monotone magnitude") {
  std::vector<double> kappas;
  std::vector<double> tau2s;
  for (int i = 1; i <= 50; ++i) {
    kappas.push_back(0.2 * i);
    tau2s.push_back(16.0 * i / 50.0);
  }
  bool parity = true;
  bool sign = true;
  bool in_tau2 = true;
  bool in_kappa = true;
  std::vector<std::vector<double>> a(50, std::vector<double>(50));
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      a[i][j] = adjust_logit(kappas[i], tau2s[j]).value;
      parity = parity && adjust_logit(-kappas[i], tau2s[j]).value == -a[i][j];
      sign = sign && a[i][j] >= 0.0;
    }
  }
  for (int i = 0; i < 50; ++i) {
    for (int j = 1; j < 50; ++j) in_tau2 = in_tau2 && a[i][j] >= a[i][j - 1];
  }
  for (int j = 0; j < 50; ++j) {
    for (int i = 1; i < 50; ++i) in_kappa = in_kappa && a[i][j] >= a[i - 1][j];
  }
  CHECK(parity);
  CHECK(sign);
  CHECK(in_tau2);
  CHECK(in_kappa);
  for (double tau2 : {0.25, 1.0, 4.0}) CHECK(std::abs(adjust_logit(50.0, tau2).value - tau2 / 2) <= 1e-3);
}

TEST_CASE("dimension reduction: scalar adjustment holds under the full q-variate law") {
  std::mt19937_64 gen(35);
  std::uniform_int_distribution<int> q_dist(1, 4);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Link link : {Link::Logit, Link::Probit, Link::CLogLog}) {
    const int q = q_dist(gen);
    Eigen::MatrixXd root(q, q);
    for (int r = 0; r < q; ++r) {
      for (int c = 0; c < q; ++c) root(r, c) = 0.5 * z(gen);
    }
    NormalLaw law{root * root.transpose() + 0.1 * Eigen::MatrixXd::Identity(q, q)};
    Eigen::VectorXd d(q);
    for (int r = 0; r < q; ++r) d[r] = z(gen);
    const double kappa = z(gen);
    const RandomEffectSpec re{d, law};
    const Adjustment adj = compute_adjustment(link, kappa, re);
    const auto mc = marginal_mean_monte_carlo(link, kappa, re, adj, 36, 10'000'000);
    INFO(link_name(link) << " q=" << q << " tau2=" << adj.tau2);
    CHECK(std::abs(mc.mean - inverse_link(link, kappa)) <= 4.0 * mc.std_error);
  }
}

// ---- model ---------------------------------------------------------------

TEST_CASE("Bernoulli marginal probability does not depend on sigma2 in the MI model") {
  const double kappa = 2.0;
  for (Link link : {Link::Logit, Link::Probit, Link::CLogLog}) {
    for (double s2 : {0.1, 1.0, 4.0}) {
      const double a = adjustment_shift(link, kappa, s2);
      CHECK(std::abs(oracle::marginal_mean(link, kappa + a, s2) - inverse_link(link, kappa)) <= 1e-8);
    }
    CHECK(std::abs(oracle::marginal_mean(link, kappa, 4.0) - inverse_link(link, kappa)) >= 1e-3);
    // conventional marginal moves with sigma2; MI does not
    const double conv_gap =
        std::abs(oracle::marginal_mean(link, kappa, 0.5) - oracle::marginal_mean(link, kappa, 2.0));
    const double mi_gap =
        std::abs(oracle::marginal_mean(link, kappa + adjustment_shift(link, kappa, 0.5), 0.5) -
                 oracle::marginal_mean(link, kappa + adjustment_shift(link, kappa, 2.0), 2.0));
    INFO(link_name(link));
    CHECK(conv_gap >= 1e-3);
    CHECK(mi_gap <= 1e-8);
  }
}

TEST_CASE("conditional means average to the marginal mean for every family/link pair") {
  const struct {
    Family family;
    Link link;
    double kappa, tau2;
  } pairs[] = {
      {Family::Bernoulli, Link::Logit, 0.8, 1.5},   {Family::Bernoulli, Link::Probit, -0.4, 2.0},
      {Family::Bernoulli, Link::CLogLog, 0.3, 1.0}, {Family::Binomial, Link::Logit, -1.2, 0.6},
      {Family::Binomial, Link::Probit, 1.1, 0.3},   {Family::Binomial, Link::CLogLog, -0.5, 2.5},
      {Family::Poisson, Link::Log, 1.0, 0.8},       {Family::Poisson, Link::Sqrt, 6.0, 0.5},
      {Family::Poisson, Link::Identity, 3.0, 0.7},
  };
  for (const auto& c : pairs) {
    SingleObservation s = single_observation(c.family, c.link, c.kappa, c.tau2);
    const double a = adjustment_shift(c.link, c.kappa, c.tau2);
    const Adjuster fixed = [a](Link, double, double) { return a; };
    Rng rng(37);
    const double sd = std::sqrt(c.tau2);
    double mean = 0.0;
    double m2 = 0.0;
    const int n = 1'000'000;
    for (int k = 1; k <= n; ++k) {
      s.state.u[0][0] = sd * rng.normal();
      const double v = conditional_mean(s.spec, s.data, s.state, 0, fixed);
      const double delta = v - mean;
      mean += delta / k;
      m2 += delta * (v - mean);
    }
    const double se = std::sqrt(m2 / (n - 1) / n);
    const double target = marginal_mean(s.spec, s.state.beta, s.data.x.row(0).transpose());
    INFO(family_name(c.family) << "/" << link_name(c.link));
    CHECK(std::abs(mean - target) <= 4.0 * se);
  }
}

// ---- sampler ---------------------------------------------------------------

TEST_CASE("sampler reproduces an analytic target") {
  CorrelatedTarget target;
  McmcConfig config;
  config.steps = 2'010'000;
  config.burn_in = 10'000;
  config.thin = 20;
  config.seed = 38;
  const ChainOutput out = run_chain(target, config);
  REQUIRE(out.draws() == 100'000);
  CHECK(ks_distance(out.beta_series(0), 1.0, 1.0) <= 0.02);
  CHECK(ks_distance(out.beta_series(1), -2.0, 1.5) <= 0.02);
}

TEST_CASE("flat target accepts every proposal; an infinite drop is never accepted") {
  FlatTarget flat;
  McmcConfig config;
  config.steps = 10'001;
  config.burn_in = 1;
  config.adapt = false;
  const ChainOutput out = run_chain(flat, config);
  CHECK(out.beta_counts.rate() >= 0.99);

  class Wall : public FlatTarget {
   public:
    double log_density(const ParamState& s, const BlockRef&) override {
      return s.beta[0] == 0.0 ? 0.0 : -INFINITY;
    }
  } wall;
  ParamState s = wall.initial_state();
  Rng rng(1);
  const ProposalScales scales = ProposalScales::from(config, 3, 0, 0);
  int accepted = 0;
  for (int i = 0; i < 1000; ++i) accepted += mh_block_step(wall, s, {BlockKind::Beta}, scales, rng);
  CHECK(accepted == 0);
  CHECK(s.beta.isZero());
}

TEST_CASE("consistent proposals keep the epilepsy likelihood unchanged") {
  for (Variant v : {Variant::Mi, Variant::Conventional}) {
    const BoundModel m = load_case(CaseName::Epilepsy, v);
    std::mt19937_64 gen(39);
    std::normal_distribution<double> z(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      ParamState s = ParamState::initial(m.spec, m.data);
      for (int j = 0; j < s.beta.size(); ++j) s.beta[j] = 0.3 * z(gen);
      s.log_variance << -1.0 + 0.5 * z(gen), -2.0 + 0.5 * z(gen);
      for (auto& u : s.u) {
        for (int g = 0; g < u.size(); ++g) u[g] = 0.4 * z(gen);
      }
      Eigen::VectorXd beta_star = s.beta;
      for (int j = 0; j < beta_star.size(); ++j) beta_star[j] += 0.2 * z(gen);
      const ParamState moved = propose_beta_consistent(s, beta_star, m.spec, m.data);
      worst = std::max(worst, std::abs(log_likelihood(m.spec, moved, m.data) -
                                       log_likelihood(m.spec, s, m.data)));
    }
    INFO(variant_name(v));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("beta proposals recompute adjustments only in the MI model") {
  for (bool mi : {true, false}) {
    BoundModel m = load_case(CaseName::Rats, mi ? Variant::Mi : Variant::Conventional);
    long calls = 0;
    const Adjuster spy = [&calls](Link link, double kappa, double tau2) {
      ++calls;
      return adjustment_shift(link, kappa, tau2);
    };
    GlmmTarget target(m.spec, m.data, spy);
    ParamState s = target.initial_state();
    McmcConfig config;
    const ProposalScales scales = ProposalScales::from(config, m.spec.p(), 2, 1);
    Rng rng(40);
    bool every = true;
    for (int i = 0; i < 200; ++i) {
      const long before = calls;
      mh_block_step(target, s, {BlockKind::Beta}, scales, rng);
      every = every && (mi ? calls - before >= 1 : calls == before);
    }
    INFO(std::string(mi ? "mi" : "conventional"));
    CHECK(every);
    if (!mi) CHECK(calls == 0);
  }
}

// ---- inference -----------------------------------------------------------

TEST_CASE("MI contrast follows the sign of the treatment coefficient") {
  const BoundModel m = load_case(CaseName::Rats, Variant::Mi);
  ChainOutput draws;
  std::mt19937_64 gen(41);
  std::normal_distribution<double> z(0.0, 0.5);
  for (int d = 0; d < 2000; ++d) {
    draws.beta.push_back(Eigen::Vector2d(1.6 + z(gen), -0.3 + z(gen)));
    draws.log_variance.push_back(Eigen::Vector2d(z(gen), z(gen)));
  }
  const GroupSpec treated{Eigen::Vector2d(1.0, 1.0), {0}};
  const GroupSpec control{Eigen::Vector2d(1.0, -1.0), {1}};
  const auto contrast = group_contrast(m.spec, draws, treated, control);
  bool agree = true;
  for (std::size_t d = 0; d < contrast.size(); ++d) {
    agree = agree && ((contrast[d] > 0.0) == (draws.beta[d][1] > 0.0));
  }
  CHECK(agree);
  CHECK(tail_area(contrast, 0.0) == tail_area(draws.beta_series(1), 0.0));
}

TEST_CASE("Bayes factor is stable under thinning by two") {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> z(-0.5, 0.3);
  std::vector<double> draws(20'000);
  for (double& v : draws) v = z(gen);
  std::vector<double> thinned;
  for (std::size_t i = 0; i < draws.size(); i += 2) thinned.push_back(draws[i]);
  const NormalPrior prior{0.0, 10.0};
  const double full = savage_dickey_bf(draws, prior, 0.0);
  const double half = savage_dickey_bf(thinned, prior, 0.0);
  CHECK(std::abs(half / full - 1.0) <= 0.10);
}
