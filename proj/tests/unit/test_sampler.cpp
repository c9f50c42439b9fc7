#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "miglmm/errors.hpp"
#include "miglmm/links.hpp"
#include "miglmm/rng.hpp"
#include "miglmm/sampler.hpp"

using namespace miglmm;

namespace {

// beta ~ N(mean, diag(sd^2)); log variance ~ N(0.2, 0.5); three groups with
// u_g | v ~ N(0, exp(v)). The marginal of the log variance is its prior.
class GaussianTarget : public BlockTarget {
 public:
  Eigen::Vector2d mean{1.5, -0.7};
  Eigen::Vector2d sd{0.8, 2.0};
  NormalPrior alpha_prior{0.2, 0.5};

  ParamState initial_state() const override {
    ParamState s;
    s.beta = Eigen::VectorXd::Zero(2);
    s.log_variance = Eigen::VectorXd::Zero(1);
    s.u = {Eigen::VectorXd::Zero(3)};
    return s;
  }

  double log_density(const ParamState& s, const BlockRef& block) override {
    if (block.kind == BlockKind::Beta) {
      double acc = 0.0;
      for (int j = 0; j < 2; ++j) acc += NormalPrior{mean[j], sd[j] * sd[j]}.log_density(s.beta[j]);
      return acc;
    }
    double acc = alpha_prior.log_density(s.log_variance[0]);
    for (int g = 0; g < 3; ++g) acc += NormalPrior{0.0, s.variance(0)}.log_density(s.u[0][g]);
    return acc;
  }
};

// largest gap between the empirical CDF and the normal CDF
double ks_statistic(std::vector<double> x, double mean, double sd) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf((x[i] - mean) / sd);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

std::vector<double> alpha_series(const ChainOutput& out) {
  std::vector<double> v;
  for (const auto& a : out.log_variance) v.push_back(a[0]);
  return v;
}

}  // namespace

TEST_CASE("thinned draws pass a Kolmogorov-Smirnov test against the target") {
  GaussianTarget target;
  McmcConfig config;
  config.steps = 410'000;
  config.burn_in = 10'000;
  config.thin = 200;
  config.seed = 17;
  const ChainOutput out = run_chain(target, config);
  REQUIRE(out.draws() == 2000);
  // critical value at the 0.1% level is 1.95 / sqrt(n)
  const double critical = 1.95 / std::sqrt(2000.0);
  CHECK(ks_statistic(out.beta_series(0), 1.5, 0.8) < critical);
  CHECK(ks_statistic(out.beta_series(1), -0.7, 2.0) < critical);
  CHECK(ks_statistic(alpha_series(out), 0.2, std::sqrt(0.5)) < critical);
}

TEST_CASE("adaptation moves acceptance toward its target") {
  GaussianTarget target;
  McmcConfig config;
  config.steps = 60'000;
  config.burn_in = 20'000;
  config.thin = 1;
  config.beta_scale = {20.0};  // far too wide to start with
  const ChainOutput out = run_chain(target, config);
  CHECK(out.beta_counts.rate() == doctest::Approx(0.35).epsilon(0.25));
  CHECK(out.alpha_counts.rate() == doctest::Approx(0.35).epsilon(0.25));
  CHECK(out.u_counts[0].rate() == doctest::Approx(0.35).epsilon(0.25));
  CHECK(out.beta_counts.proposed == 40'000);
}

TEST_CASE("draw count and determinism") {
  GaussianTarget target;
  McmcConfig config;
  config.steps = 5'000;
  config.burn_in = 1'003;
  config.thin = 7;
  config.seed = 99;
  const ChainOutput a = run_chain(target, config);
  const ChainOutput b = run_chain(target, config);
  CHECK(a.draws() == static_cast<std::size_t>(config.retained()));
  CHECK(a.draws() == (5'000 - 1'003) / 7);
  bool same = true;
  for (std::size_t d = 0; d < a.draws(); ++d) same = same && a.beta[d] == b.beta[d];
  CHECK(same);
  config.seed = 100;
  const ChainOutput c = run_chain(target, config);
  CHECK(c.beta.back() != a.beta.back());
}

TEST_CASE("frozen scales stay fixed") {
  GaussianTarget target;
  McmcConfig config;
  config.steps = 3'000;
  config.burn_in = 1'000;
  config.beta_scale = {0.4, 0.9};
  config.adapt_beta = false;
  const ChainOutput out = run_chain(target, config);
  CHECK(out.beta_scale[0] == 0.4);
  CHECK(out.beta_scale[1] == 0.9);
  CHECK(out.alpha_scale[0] != 0.3);
}

TEST_CASE("configuration errors") {
  McmcConfig config;
  config.burn_in = config.steps;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.thin = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.beta_scale = {-1.0};
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.beta_scale = {0.1, 0.2, 0.3};  // p = 2
  GaussianTarget target;
  CHECK_THROWS_AS(run_chain(target, config), ConfigError);
  config = {};
  config.consistent_proposals = true;
  CHECK_THROWS_AS(run_chain(target, config), ConfigError);
}

TEST_CASE("IACT of white noise and of an AR(1) series") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> noise(100'000);
  for (double& v : noise) v = z(gen);
  CHECK(iact(noise) == doctest::Approx(1.0).epsilon(0.1));

  // AR(1) with coefficient r: tau = (1 + r) / (1 - r)
  const double r = 0.9;
  std::vector<double> ar(200'000);
  double x = 0.0;
  for (double& v : ar) {
    x = r * x + z(gen);
    v = x;
  }
  CHECK(iact(ar) == doctest::Approx((1 + r) / (1 - r)).epsilon(0.1));

  bool degenerate = false;
  CHECK(iact(std::vector<double>(200, 3.0), &degenerate) == 1.0);
  CHECK(degenerate);
  CHECK_THROWS_AS(iact(std::vector<double>(99, 0.0)), InvalidArgument);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(7, 1);
  Rng b(7, 1);
  Rng c(7, 2);
  const double first = a.normal();
  CHECK(first == b.normal());
  CHECK(first != c.normal());
  Rng root(7);
  Rng child = root.split(3);
  CHECK(child.stream() != root.stream());
  Rng again = Rng(7).split(3);
  CHECK(child.uniform() == again.uniform());
}

TEST_CASE("consistent beta proposals leave every linear predictor unchanged") {
  // subject level plus one intercept per observation, four rows per subject
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z(0.0, 1.0);
  ModelSpec spec;
  spec.family = Family::Poisson;
  spec.link = Link::Log;
  spec.beta_names = {"intercept", "a", "b"};
  spec.beta_priors.assign(3, {0.0, 100.0});
  spec.variance_names = {"sigma", "tau"};
  spec.log_variance_priors.assign(2, {-1.0, 2.0});
  const int subjects = 5;
  const int n = 20;
  spec.levels = {{"subject", 0, std::vector<int>(subjects, 0)}, {"visit", 1, std::vector<int>(n, 1)}};
  Dataset data;
  data.x.resize(n, 3);
  data.groups.resize(2);
  for (int i = 0; i < n; ++i) {
    data.x.row(i) << 1.0, z(gen), (i % 4 == 3 ? 1.0 : 0.0);
    data.y.push_back(static_cast<double>(gen() % 5));
    data.groups[0].push_back(i / 4);
    data.groups[1].push_back(i);
  }
  data.covariate_names = spec.beta_names;
  data.level_names = {"subject", "visit"};

  ParamState state = ParamState::initial(spec, data);
  for (auto& u : state.u) {
    for (int g = 0; g < u.size(); ++g) u[g] = z(gen);
  }
  state.beta << 0.3, -0.2, 0.1;
  Eigen::VectorXd beta_star(3);
  beta_star << 0.9, 0.4, -0.6;
  const ParamState moved = propose_beta_consistent(state, beta_star, spec, data);
  CHECK(moved.beta == beta_star);
  for (int i = 0; i < n; ++i) {
    CHECK(linear_predictor(spec, data, moved, i) ==
          doctest::Approx(linear_predictor(spec, data, state, i)).epsilon(1e-13));
  }
  // the subject effect absorbs the first row's change
  const double first_shift = data.x.row(0).dot(state.beta - beta_star);
  CHECK(moved.u[0][0] == doctest::Approx(state.u[0][0] + first_shift).epsilon(1e-14));
  CHECK(moved.u[1][0] == doctest::Approx(state.u[1][0]).epsilon(1e-14));

  ModelSpec logit = spec;
  logit.family = Family::Bernoulli;
  logit.link = Link::Logit;
  Dataset binary = data;
  for (double& y : binary.y) y = y > 0 ? 1.0 : 0.0;
  CHECK_THROWS_AS(propose_beta_consistent(state, beta_star, logit, binary), ConfigError);
}
