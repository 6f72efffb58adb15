#pragma once

#include "symvi/linalg.hpp"

namespace symvi::special {

inline constexpr double kLog2Pi = 1.8378770664093453;
inline constexpr double kSqrt2OverPi = 0.7978845608028654;

// log of the standard normal CDF, accurate far into the lower tail.
double log_normal_cdf(double x);
// phi(x) / Phi(x).
double normal_hazard(double x);

// x^T a x without temporaries.
inline double quad_form(const Matrix& a, const Vector& x) {
  const auto n = x.size();
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) col += a(i, j) * x[i];
    s += col * x[j];
  }
  return s;
}

}  // namespace symvi::special
