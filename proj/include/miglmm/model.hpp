#pragma once

// Marginally interpretable GLMM:
//
//   E(Y_i | U) = h(x_i'beta + sum_l u_{l, g_l(i)} + a_i),
//
// with a_i the adjustment for (x_i'beta, tau2_i) and tau2_i the summed
// variances of the random intercepts observation i belongs to.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "miglmm/adjust.hpp"
#include "miglmm/links.hpp"

namespace miglmm {

enum class Family { Bernoulli, Binomial, Poisson };

std::string_view family_name(Family family);
/// Throws ConfigError for an unknown name.
Family parse_family(std::string_view name);
/// {Bernoulli, Binomial} x {Logit, Probit, CLogLog}, Poisson x {Log, Sqrt, Identity}.
bool is_supported(Family family, Link link);

struct Dataset {
  std::vector<double> y;
  std::vector<double> trials;  // Binomial only; empty otherwise
  Eigen::MatrixXd x;           // n x p
  std::vector<std::string> covariate_names;
  std::vector<std::vector<int>> groups;  // per level: group index of each observation
  std::vector<std::string> level_names;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(x.cols()); }
  int group_count(int level) const;

  /// Throws DataError on shape mismatches or y outside its family range.
  void validate(Family family) const;
  /// Column rank of x below p.
  bool rank_deficient() const;
};

/// Rows [begin, end) of a dataset, group indices kept as they are.
Dataset slice(const Dataset& data, int begin, int end);
/// Row concatenation; groups of b are offset past those of a.
Dataset concatenate(const Dataset& a, const Dataset& b);

struct NormalPrior {
  double mean = 0.0;
  double variance = 1.0;

  double log_density(double v) const;
};

/// One level of scalar random intercepts. Each group draws its variance
/// parameter through variance_of_group (a stratum map); a level with one
/// shared variance maps every group to the same parameter.
struct RandomEffectLevel {
  std::string name;
  int data_level = 0;  // index into Dataset::groups
  std::vector<int> variance_of_group;
};

struct ModelSpec {
  Family family = Family::Bernoulli;
  Link link = Link::Logit;
  std::vector<std::string> beta_names;
  std::vector<NormalPrior> beta_priors;
  std::vector<RandomEffectLevel> levels;
  std::vector<std::string> variance_names;
  std::vector<NormalPrior> log_variance_priors;
  bool marginally_interpretable = true;

  int p() const { return static_cast<int>(beta_priors.size()); }
  int variance_count() const { return static_cast<int>(log_variance_priors.size()); }

  /// Throws ConfigError for an unsupported family/link pair, nonpositive
  /// prior variances or a stratum map pointing past the variances.
  void validate() const;
  /// validate() plus agreement with the dataset's shape.
  void validate(const Dataset& data) const;
};

struct ParamState {
  Eigen::VectorXd beta;
  Eigen::VectorXd log_variance;       // log sigma2 per variance parameter
  std::vector<Eigen::VectorXd> u;     // per level, one entry per group

  double variance(int k) const;
  /// Starting point: beta = 0, log variances at their prior means, u = 0.
  static ParamState initial(const ModelSpec& spec, const Dataset& data);
};

/// Adjustment provider d'a = f(link, kappa, tau2); replaceable for testing.
using Adjuster = std::function<double(Link, double, double)>;
Adjuster default_adjuster();

/// tau2_i: sum over levels of the variance assigned to observation i's group.
double observation_variance(const ModelSpec& spec, const Dataset& data, const ParamState& state,
                            int i);

/// Linear predictor including random effects and (MI on) the adjustment.
double linear_predictor(const ModelSpec& spec, const Dataset& data, const ParamState& state,
                        int i, const Adjuster& adjuster = default_adjuster());

double conditional_mean(const ModelSpec& spec, const Dataset& data, const ParamState& state,
                        int i, const Adjuster& adjuster = default_adjuster());

/// log f(y | eta) for one observation; -infinity outside the mean's range.
double observation_loglik(Family family, Link link, double y, double trials, double eta);

/// Sum of observation log-likelihoods. -infinity when a mean leaves its
/// range; NumericError for non-finite covariates or parameters.
double log_likelihood(const ModelSpec& spec, const ParamState& state, const Dataset& data,
                      const Adjuster& adjuster = default_adjuster());

/// Priors on beta and the log variances plus the N(0, sigma2) density of u.
double log_prior(const ModelSpec& spec, const ParamState& state);

/// Posterior mode of beta under its prior with every random effect at zero,
/// by Fisher scoring with step halving. A chain starting point; returns
/// zeros when the iteration does not reach a finite optimum.
Eigen::VectorXd fixed_effect_mode(const ModelSpec& spec, const Dataset& data);

/// h(x'beta); the MI marginal mean, free of the variance parameters.
double marginal_mean(const ModelSpec& spec, const Eigen::VectorXd& beta,
                     const Eigen::VectorXd& x);

}  // namespace miglmm
