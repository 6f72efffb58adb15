#include "symvi/special.hpp"

#include <cmath>
#include <numbers>

namespace symvi::special {

double log_normal_cdf(double x) {
  if (x > -20.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic series of the Mills ratio.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * kLog2Pi + std::log(series);
}

double normal_hazard(double x) {
  if (x > -20.0) {
    const double log_pdf = -0.5 * x * x - 0.5 * kLog2Pi;
    return std::exp(log_pdf - log_normal_cdf(x));
  }
  const double x2 = x * x;
  // phi/Phi ~ -x / (1 - 1/x^2 + 3/x^4 - 15/x^6)
  return -x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

}  // namespace symvi::special
