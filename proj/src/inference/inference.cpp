#include "miglmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "miglmm/errors.hpp"
#include "miglmm/lni.hpp"
#include "miglmm/parallel.hpp"
#include "miglmm/rng.hpp"

namespace miglmm {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double sample_mean(const std::vector<double>& samples) {
  if (samples.empty()) throw InvalidArgument("mean of an empty sample");
  double acc = 0.0;
  for (double v : samples) acc += v;
  return acc / static_cast<double>(samples.size());
}

double sample_sd(const std::vector<double>& samples) {
  if (samples.size() < 2) return 0.0;
  const double m = sample_mean(samples);
  double acc = 0.0;
  for (double v : samples) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(samples.size() - 1));
}

double tail_area(const std::vector<double>& samples, double threshold) {
  if (samples.empty()) throw InvalidArgument("tail area of an empty sample");
  const auto above = std::count_if(samples.begin(), samples.end(),
                                   [threshold](double v) { return v > threshold; });
  return static_cast<double>(above) / static_cast<double>(samples.size());
}

ParameterSummary summarize(const std::string& name, const std::vector<double>& samples,
                           const std::vector<double>& thresholds) {
  ParameterSummary s{name, sample_mean(samples), sample_sd(samples), {}};
  for (double t : thresholds) s.tail_above.push_back(tail_area(samples, t));
  return s;
}

PosteriorSummary summarize_chain(const ModelSpec& spec, const ChainOutput& chain,
                                 const std::vector<double>& thresholds) {
  PosteriorSummary out{thresholds, {}};
  for (int j = 0; j < spec.p(); ++j) {
    const std::string name =
        j < static_cast<int>(spec.beta_names.size()) ? spec.beta_names[j] : "beta" + std::to_string(j);
    out.parameters.push_back(summarize(name, chain.beta_series(j), thresholds));
  }
  for (int k = 0; k < spec.variance_count(); ++k) {
    const std::string name = k < static_cast<int>(spec.variance_names.size())
                                 ? spec.variance_names[k]
                                 : "sigma" + std::to_string(k);
    out.parameters.push_back(summarize(name, chain.sd_series(k), thresholds));
  }
  return out;
}

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 100) {
    throw InvalidArgument("density estimate needs at least 100 samples, got " +
                          std::to_string(samples.size()));
  }
  const double sd = sample_sd(samples);
  if (!(sd > 0.0)) throw NumericError("density estimate of a degenerate (zero-spread) sample");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

double kde_at(const std::vector<double>& samples, double point, double bandwidth_scale) {
  const double h = bandwidth_scale * silverman_bandwidth(samples);
  double acc = 0.0;
  for (double v : samples) acc += normal_pdf((point - v) / h);
  return acc / (static_cast<double>(samples.size()) * h);
}

std::vector<double> kde_curve(const std::vector<double>& samples, const std::vector<double>& grid,
                              double bandwidth_scale) {
  const double h = bandwidth_scale * silverman_bandwidth(samples);
  std::vector<double> out;
  out.reserve(grid.size());
  for (double point : grid) {
    double acc = 0.0;
    for (double v : samples) acc += normal_pdf((point - v) / h);
    out.push_back(acc / (static_cast<double>(samples.size()) * h));
  }
  return out;
}

double savage_dickey_bf(const std::vector<double>& samples, const NormalPrior& prior, double at,
                        double bandwidth_scale) {
  if (!(prior.variance > 0.0)) throw InvalidArgument("prior variance must be > 0");
  return kde_at(samples, at, bandwidth_scale) / std::exp(prior.log_density(at));
}

double population_mean(const ModelSpec& spec, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& log_variance, const GroupSpec& group,
                       std::size_t mc_size, std::uint64_t seed) {
  const double kappa = group.x.dot(beta);
  if (spec.marginally_interpretable) return inverse_link(spec.link, kappa);
  double tau2 = 0.0;
  for (int k : group.variance_indices) tau2 += std::exp(log_variance[k]);
  if (tau2 == 0.0) return inverse_link(spec.link, kappa);
  if (spec.link == Link::Logit) return logistic_normal_mean(kappa, tau2);
  if (mc_size == 0) throw InvalidArgument("Monte Carlo size must be positive");
  Rng rng(seed);
  const double sd = std::sqrt(tau2);
  double acc = 0.0;
  for (std::size_t i = 0; i < mc_size; ++i) {
    const double eta = kappa + sd * rng.normal();
    acc += spec.link == Link::Sqrt ? eta * eta : inverse_link(spec.link, eta);
  }
  return acc / static_cast<double>(mc_size);
}

std::vector<double> group_contrast(const ModelSpec& spec, const ChainOutput& draws,
                                   const GroupSpec& a, const GroupSpec& b, std::size_t mc_size,
                                   std::uint64_t seed) {
  return group_contrast_batch(spec, draws, a, b, mc_size, seed, Execution::Parallel);
}

}  // namespace miglmm
