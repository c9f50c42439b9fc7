#include <omp.h>

#include <exception>
#include <mutex>

#include "miglmm/adjust.hpp"
#include "miglmm/errors.hpp"
#include "miglmm/lni.hpp"
#include "miglmm/parallel.hpp"
#include "miglmm/rng.hpp"

namespace miglmm {

namespace {

// Runs f over [0, n); the first exception thrown by any index is rethrown.
template <class F>
void guarded_for(long n, F&& f, Execution exec) {
  std::exception_ptr error;
  std::mutex mutex;
  for_each_index(
      n,
      [&](long i) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mutex);
          if (!error) error = std::current_exception();
        }
      },
      exec);
  if (error) std::rethrow_exception(error);
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

std::vector<double> phi_hybrid_batch(const std::vector<double>& mu, double sigma2, Execution exec) {
  std::vector<double> out(mu.size());
  for_each_index(static_cast<long>(mu.size()), [&](long i) { out[i] = phi_hybrid(mu[i], sigma2); },
                 exec);
  return out;
}

std::vector<double> phi_gh_batch(const std::vector<double>& mu, double sigma2, int order,
                                 Execution exec) {
  const auto rule = shared_gauss_hermite_rule(order);
  std::vector<double> out(mu.size());
  for_each_index(static_cast<long>(mu.size()),
                 [&](long i) { out[i] = phi_gh(mu[i], sigma2, *rule); }, exec);
  return out;
}

std::vector<double> logit_adjust_batch(const std::vector<double>& kappa,
                                       const std::vector<double>& tau2, Execution exec) {
  if (kappa.size() != tau2.size()) throw InvalidArgument("kappa and tau2 differ in length");
  std::vector<double> out(kappa.size());
  guarded_for(static_cast<long>(kappa.size()),
              [&](long i) { out[i] = adjust_logit(kappa[i], tau2[i]).value; }, exec);
  return out;
}

std::vector<double> group_contrast_batch(const ModelSpec& spec, const ChainOutput& draws,
                                         const GroupSpec& a, const GroupSpec& b,
                                         std::size_t mc_size, std::uint64_t seed, Execution exec) {
  if (draws.draws() == 0) throw InvalidArgument("group contrast needs at least one draw");
  const long n = static_cast<long>(draws.draws());
  std::vector<double> out(n);
  guarded_for(
      n,
      [&](long d) {
        // both groups share the draw's stream so Monte Carlo noise partly cancels
        Rng stream(seed, static_cast<std::uint64_t>(d));
        const std::uint64_t draw_seed = stream.engine()();
        const double mean_a =
            population_mean(spec, draws.beta[d], draws.log_variance[d], a, mc_size, draw_seed);
        const double mean_b =
            population_mean(spec, draws.beta[d], draws.log_variance[d], b, mc_size, draw_seed);
        out[d] = mean_a - mean_b;
      },
      exec);
  return out;
}

std::vector<ChainOutput> run_chains(const ModelSpec& spec, const Dataset& data,
                                    const McmcConfig& config, int chains, Execution exec) {
  if (chains < 1) throw ConfigError("chain count must be >= 1");
  config.validate();
  std::vector<ChainOutput> out(chains);
  guarded_for(
      chains,
      [&](long c) {
        McmcConfig local = config;
        local.seed = config.seed + static_cast<std::uint64_t>(c);
        out[c] = run_chain(spec, data, local);
      },
      exec);
  return out;
}

}  // namespace miglmm
