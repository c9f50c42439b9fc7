#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "miglmm/errors.hpp"
#include "miglmm/lni.hpp"

namespace miglmm {

namespace {

constexpr int kMaxOrder = 1000;

// Orthonormal Hermite recurrence at x (w.r.t. exp(-x^2)), tracking a log
// scale so that high orders at large |x| do not overflow. Returns
// psi_n / psi_n' and log |psi_{n-1}|.
struct HermiteEval {
  double newton_ratio;
  double log_abs_prev;
};

HermiteEval hermite_eval(int n, double x) {
  const double log_psi0 = -0.25 * std::log(M_PI);
  double prev = 0.0;  // psi_{k-1}, scaled
  double cur = 1.0;   // psi_k, scaled
  double log_scale = log_psi0;
  for (int k = 0; k < n; ++k) {
    const double next =
        std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    const double mag = std::abs(cur);
    if (mag > 1e150) {
      prev /= mag;
      cur /= mag;
      log_scale += std::log(mag);
    }
  }
  // psi_n' = sqrt(2n) psi_{n-1}
  return {cur / (std::sqrt(2.0 * n) * prev), std::log(std::abs(prev)) + log_scale};
}

}  // namespace

GaussHermiteRule gauss_hermite_rule(int order) {
  if (order < 1 || order > kMaxOrder) {
    throw InvalidArgument("gauss_hermite_rule: order must lie in [1, 1000], got " +
                          std::to_string(order));
  }
  GaussHermiteRule rule;
  rule.order = order;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);
  if (order == 1) {
    rule.weights[0] = std::sqrt(M_PI);
    return rule;
  }

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& roots = eig.eigenvalues();  // ascending

  for (int i = 0; i < order; ++i) {
    // symmetric pairs share one computation; the middle node of an odd rule is 0
    const int mirror = order - 1 - i;
    if (mirror < i) break;
    double x = 0.5 * (roots[mirror] - roots[i]);
    if (mirror == i) x = 0.0;
    HermiteEval ev = hermite_eval(order, x);
    if (mirror != i) {
      x -= ev.newton_ratio;
      ev = hermite_eval(order, x);
    }
    // w = 1 / (n psi_{n-1}(x)^2)
    const double w = std::exp(-std::log(static_cast<double>(order)) - 2.0 * ev.log_abs_prev);
    rule.nodes[mirror] = x;
    rule.nodes[i] = -x;
    rule.weights[mirror] = w;
    rule.weights[i] = w;
  }
  return rule;
}

std::shared_ptr<const GaussHermiteRule> shared_gauss_hermite_rule(int order) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const GaussHermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_shared<const GaussHermiteRule>(gauss_hermite_rule(order));
  return slot;
}

}  // namespace miglmm
