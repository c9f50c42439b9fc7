#include <cmath>
#include <string>
#include <vector>

#include "miglmm/errors.hpp"
#include "miglmm/sampler.hpp"

namespace miglmm {

double iact(const std::vector<double>& series, bool* degenerate) {
  const std::size_t n = series.size();
  if (n < 100) {
    throw InvalidArgument("iact needs at least 100 values, got " + std::to_string(n));
  }
  if (degenerate) *degenerate = false;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = series[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += centred[i] * centred[i + lag];
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }

  // tau = -1 + 2 sum_m (rho_{2m} + rho_{2m+1}) while the pair sums stay positive
  double tau = -1.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(1.0, tau);
}

}  // namespace miglmm
