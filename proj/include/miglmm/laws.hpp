#pragma once

#include <Eigen/Dense>
#include <vector>

namespace miglmm {

/// Zero-mean q-variate normal random effect with covariance Sigma.
struct NormalLaw {
  Eigen::MatrixXd covariance;

  static NormalLaw scalar(double variance);
  int dim() const { return static_cast<int>(covariance.rows()); }
};

/// Finite mixture of scalar normals: sum_m w_m N(mu_m, sigma2_m).
struct NormalMixtureLaw {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t size() const { return weights.size(); }
  double mean() const;
  double variance() const;
};

/// Law of kappa + U for the reciprocal link: Gamma(shape, scale) with
/// scale = kappa / (shape - 1), so that E[1 / (kappa + U)] = 1 / kappa.
struct GammaShiftLaw {
  double kappa;
  double shape;
  double scale;

  /// E(U) = shape * scale - kappa.
  double mean_shift() const { return shape * scale - kappa; }
  /// E[1 / (kappa + U)] = 1 / (scale * (shape - 1)).
  double reciprocal_mean() const { return 1.0 / (scale * (shape - 1.0)); }
};

/// Throws InvalidArgument unless Sigma is square, symmetric and PSD.
void validate(const NormalLaw& law);
/// Throws InvalidArgument unless weights are positive and sum to one,
/// variances are nonnegative and the lengths agree.
void validate(const NormalMixtureLaw& law);
/// validate() plus the zero-mean requirement (|sum w_m mu_m| <= 1e-12).
void validate_zero_mean(const NormalMixtureLaw& law);

}  // namespace miglmm
