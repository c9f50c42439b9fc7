#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <random>

#include "miglmm/cases.hpp"
#include "miglmm/errors.hpp"
#include "miglmm/parallel.hpp"

using namespace miglmm;

namespace {

std::vector<double> uniform_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = u(gen);
  return out;
}

// several threads even on a single core, so interleavings differ
struct Threads {
  int saved = omp_get_max_threads();
  Threads() { omp_set_num_threads(4); }
  ~Threads() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("integral kernels: parallel equals serial") {
  Threads threads;
  const auto mu = uniform_values(20'000, -30.0, 30.0, 1);
  CHECK(phi_hybrid_batch(mu, 2.3, Execution::Parallel) == phi_hybrid_batch(mu, 2.3, Execution::Serial));
  CHECK(phi_gh_batch(mu, 0.7, 100, Execution::Parallel) ==
        phi_gh_batch(mu, 0.7, 100, Execution::Serial));
}

TEST_CASE("adjustment kernel: parallel equals serial and propagates errors") {
  Threads threads;
  const auto kappa = uniform_values(5'000, -8.0, 8.0, 2);
  const auto tau2 = uniform_values(5'000, 0.01, 9.0, 3);
  CHECK(logit_adjust_batch(kappa, tau2, Execution::Parallel) ==
        logit_adjust_batch(kappa, tau2, Execution::Serial));
  auto bad = tau2;
  bad[1234] = -1.0;
  CHECK_THROWS_AS(logit_adjust_batch(kappa, bad, Execution::Parallel), InvalidArgument);
  CHECK_THROWS_AS(logit_adjust_batch(kappa, {1.0}, Execution::Serial), InvalidArgument);
}

TEST_CASE("contrast kernel: Monte Carlo streams do not depend on the thread count") {
  Threads threads;
  ModelSpec spec = load_case(CaseName::Rats, Variant::Conventional).spec;
  spec.link = Link::Probit;  // forces the Monte Carlo path
  ChainOutput draws;
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z(0.0, 0.3);
  for (int d = 0; d < 200; ++d) {
    draws.beta.push_back(Eigen::Vector2d(1.0 + z(gen), -0.4 + z(gen)));
    draws.log_variance.push_back(Eigen::Vector2d(z(gen), z(gen) - 1.0));
  }
  const GroupSpec a{Eigen::Vector2d(1.0, 1.0), {0}};
  const GroupSpec b{Eigen::Vector2d(1.0, -1.0), {1}};
  const auto parallel = group_contrast_batch(spec, draws, a, b, 2'000, 9, Execution::Parallel);
  const auto serial = group_contrast_batch(spec, draws, a, b, 2'000, 9, Execution::Serial);
  CHECK(parallel == serial);
  omp_set_num_threads(2);
  CHECK(group_contrast_batch(spec, draws, a, b, 2'000, 9, Execution::Parallel) == serial);
}

TEST_CASE("independent chains: parallel equals serial") {
  Threads threads;
  const BoundModel m = load_case(CaseName::Rats, Variant::Mi);
  McmcConfig config;
  config.steps = 2'000;
  config.burn_in = 500;
  config.thin = 5;
  config.seed = 21;
  const auto parallel = run_chains(m.spec, m.data, config, 3, Execution::Parallel);
  const auto serial = run_chains(m.spec, m.data, config, 3, Execution::Serial);
  REQUIRE(parallel.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(parallel[c].config.seed == 21u + c);
    CHECK(parallel[c].beta == serial[c].beta);
    CHECK(parallel[c].log_variance == serial[c].log_variance);
  }
  CHECK(parallel[0].beta.back() != parallel[1].beta.back());
}
