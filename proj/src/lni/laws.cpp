#include "miglmm/laws.hpp"

#include <cmath>
#include <numeric>

#include "miglmm/errors.hpp"

namespace miglmm {

NormalLaw NormalLaw::scalar(double variance) {
  NormalLaw law;
  law.covariance = Eigen::MatrixXd::Constant(1, 1, variance);
  return law;
}

double NormalMixtureLaw::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m += weights[i] * means[i];
  return m;
}

double NormalMixtureLaw::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    v += weights[i] * (variances[i] + (means[i] - m) * (means[i] - m));
  }
  return v;
}

void validate(const NormalLaw& law) {
  const auto& s = law.covariance;
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw InvalidArgument("normal law: covariance must be a non-empty square matrix");
  }
  if (!s.allFinite()) throw InvalidArgument("normal law: covariance has non-finite entries");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("normal law: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw InvalidArgument("normal law: covariance is not positive semidefinite");
  }
}

void validate(const NormalMixtureLaw& law) {
  if (law.size() == 0 || law.means.size() != law.size() || law.variances.size() != law.size()) {
    throw InvalidArgument("normal mixture: weights, means and variances must have equal, nonzero length");
  }
  for (std::size_t i = 0; i < law.size(); ++i) {
    if (!(law.weights[i] > 0.0)) throw InvalidArgument("normal mixture: weights must be positive");
    if (!(law.variances[i] >= 0.0) || !std::isfinite(law.variances[i])) {
      throw InvalidArgument("normal mixture: variances must be finite and nonnegative");
    }
    if (!std::isfinite(law.means[i])) throw InvalidArgument("normal mixture: means must be finite");
  }
  const double total = std::accumulate(law.weights.begin(), law.weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("normal mixture: weights must sum to 1");
  }
}

void validate_zero_mean(const NormalMixtureLaw& law) {
  validate(law);
  if (std::abs(law.mean()) > 1e-12) {
    throw InvalidArgument("normal mixture: random-effect law must have mean zero");
  }
}

}  // namespace miglmm
