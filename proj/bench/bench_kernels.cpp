// Serial reference against the OpenMP kernels: wall time of each and a
// bitwise comparison of their outputs.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "miglmm/cases.hpp"
#include "miglmm/lni.hpp"
#include "miglmm/parallel.hpp"

using namespace miglmm;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same(const std::vector<double>& a, const std::vector<double>& b) { return a == b; }

bool same(const std::vector<ChainOutput>& a, const std::vector<ChainOutput>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c].beta != b[c].beta || a[c].log_variance != b[c].log_variance) return false;
  }
  return true;
}

struct Row {
  const char* name;
  double serial;
  double parallel;
  bool identical;
};

template <class F>
Row compare(const char* name, F&& kernel) {
  decltype(kernel(Execution::Serial)) s;
  decltype(kernel(Execution::Serial)) p;
  const double ts = seconds([&] { s = kernel(Execution::Serial); });
  const double tp = seconds([&] { p = kernel(Execution::Parallel); });
  return {name, ts, tp, same(s, p)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP kernel timings"};
  int points = 320'000;
  long chain_steps = 5'000;
  int chains = 4;
  app.add_option("--points", points, "mu points for the integral kernels")->capture_default_str();
  app.add_option("--chain-steps", chain_steps, "steps per chain")->capture_default_str();
  app.add_option("--chains", chains, "chains in the multi-chain kernel")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> mu_dist(-20.0, 20.0);
  std::uniform_real_distribution<double> kappa_dist(-6.0, 6.0);
  std::uniform_real_distribution<double> tau_dist(0.05, 9.0);
  std::vector<double> mu(points);
  for (auto& v : mu) v = mu_dist(gen);
  std::vector<double> kappa(points / 16);
  std::vector<double> tau2(points / 16);
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    kappa[i] = kappa_dist(gen);
    tau2[i] = tau_dist(gen);
  }
  const std::vector<double> mu_small(mu.begin(), mu.begin() + points / 32);

  const BoundModel rats = load_case(CaseName::Rats, Variant::Conventional);
  McmcConfig mc;
  mc.steps = chain_steps;
  mc.burn_in = chain_steps / 5;
  mc.thin = 1;
  const ChainOutput draws = run_chain(rats.spec, rats.data, mc);
  const GroupSpec treated{Eigen::Vector2d(1.0, 1.0), {0}};
  const GroupSpec control{Eigen::Vector2d(1.0, -1.0), {1}};
  ModelSpec probit = rats.spec;
  probit.link = Link::Probit;

  std::vector<Row> rows;
  rows.push_back(compare("phi_hybrid", [&](Execution e) { return phi_hybrid_batch(mu, 1.7, e); }));
  rows.push_back(compare("phi_gh order 1000",
                         [&](Execution e) { return phi_gh_batch(mu_small, 1.7, 1000, e); }));
  rows.push_back(
      compare("logit adjustment", [&](Execution e) { return logit_adjust_batch(kappa, tau2, e); }));
  rows.push_back(compare("group contrast (MC)", [&](Execution e) {
    return group_contrast_batch(probit, draws, treated, control, 2'000, 11, e);
  }));
  rows.push_back(compare("independent chains",
                         [&](Execution e) { return run_chains(rats.spec, rats.data, mc, chains, e); }));

  std::printf("threads available: %d\n", max_threads());
  std::printf("%-22s %10s %10s %8s %s\n", "kernel", "serial s", "openmp s", "speedup", "output");
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("%-22s %10.4f %10.4f %8.2f %s\n", r.name, r.serial, r.parallel,
                r.serial / r.parallel, r.identical ? "identical" : "MISMATCH");
    ok = ok && r.identical;
  }
  return ok ? 0 : 1;
}
