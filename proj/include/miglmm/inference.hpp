#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "miglmm/model.hpp"
#include "miglmm/sampler.hpp"

namespace miglmm {

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> tail_above;  // P(theta > threshold) per threshold
};

struct PosteriorSummary {
  std::vector<double> thresholds;
  std::vector<ParameterSummary> parameters;
};

double sample_mean(const std::vector<double>& samples);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(const std::vector<double>& samples);
/// Fraction of samples strictly above threshold.
double tail_area(const std::vector<double>& samples, double threshold);

ParameterSummary summarize(const std::string& name, const std::vector<double>& samples,
                           const std::vector<double>& thresholds = {0.0});

/// Columns: beta names, then one sd column per variance parameter.
PosteriorSummary summarize_chain(const ModelSpec& spec, const ChainOutput& chain,
                                 const std::vector<double>& thresholds = {0.0});

/// Silverman's rule 0.9 min(sd, IQR / 1.34) n^(-1/5).
double silverman_bandwidth(const std::vector<double>& samples);

/// Gaussian-kernel density estimate at point with bandwidth
/// bandwidth_scale * silverman_bandwidth. Requires >= 100 samples;
/// NumericError for a zero-spread sample.
double kde_at(const std::vector<double>& samples, double point, double bandwidth_scale = 1.0);

/// kde_at over a grid of points.
std::vector<double> kde_curve(const std::vector<double>& samples, const std::vector<double>& grid,
                              double bandwidth_scale = 1.0);

/// Posterior over prior density at `at`: the Bayes factor for theta = at.
double savage_dickey_bf(const std::vector<double>& samples, const NormalPrior& prior, double at,
                        double bandwidth_scale = 1.0);

/// Covariates of one population group and the variance parameters whose
/// sum is the group's random-intercept variance.
struct GroupSpec {
  Eigen::VectorXd x;
  std::vector<int> variance_indices;
};

/// E(Y | beta, alpha, group): h(x'beta) when the model is marginally
/// interpretable; otherwise the integral of h(x'beta + u) over
/// N(0, tau2), by the logistic-normal engine for the logit link and by
/// seeded Monte Carlo of size mc_size for other links.
double population_mean(const ModelSpec& spec, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& log_variance, const GroupSpec& group,
                       std::size_t mc_size, std::uint64_t seed);

/// Per-draw E(Y | a) - E(Y | b). Draw d uses the Monte Carlo stream
/// (seed, d), so the result does not depend on the thread count.
std::vector<double> group_contrast(const ModelSpec& spec, const ChainOutput& draws,
                                   const GroupSpec& a, const GroupSpec& b,
                                   std::size_t mc_size = 100'000, std::uint64_t seed = 1);

}  // namespace miglmm
