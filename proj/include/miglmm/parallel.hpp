#pragma once

// Data-parallel kernels. Each has a serial reference with identical output;
// the OpenMP version only changes which thread computes which index.

#include <vector>

#include "miglmm/inference.hpp"
#include "miglmm/model.hpp"
#include "miglmm/sampler.hpp"

namespace miglmm {

enum class Execution { Serial, Parallel };

/// Threads an OpenMP region would use.
int max_threads();

template <class F>
void for_each_index(long n, F&& f, Execution exec) {
  if (exec == Execution::Serial) {
    for (long i = 0; i < n; ++i) f(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) f(i);
}

/// phi_hybrid(mu[i], sigma2) for every i.
std::vector<double> phi_hybrid_batch(const std::vector<double>& mu, double sigma2, Execution exec);

/// phi_gh(mu[i], sigma2) with a shared rule of the given order.
std::vector<double> phi_gh_batch(const std::vector<double>& mu, double sigma2, int order,
                                 Execution exec);

/// adjust_logit(kappa[i], tau2[i]).value for every i.
std::vector<double> logit_adjust_batch(const std::vector<double>& kappa,
                                       const std::vector<double>& tau2, Execution exec);

/// group_contrast with an explicit execution policy.
std::vector<double> group_contrast_batch(const ModelSpec& spec, const ChainOutput& draws,
                                         const GroupSpec& a, const GroupSpec& b,
                                         std::size_t mc_size, std::uint64_t seed, Execution exec);

/// Independent chains; chain c runs with seed config.seed + c.
std::vector<ChainOutput> run_chains(const ModelSpec& spec, const Dataset& data,
                                    const McmcConfig& config, int chains, Execution exec);

}  // namespace miglmm
