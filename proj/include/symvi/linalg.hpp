#pragma once

#include <Eigen/Dense>

namespace symvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Symmetric positive-definite matrix with its lower Cholesky factor cached.
// Immutable after construction.
class PDMatrix {
 public:
  // Throws NotPositiveDefinite if m is not symmetric (1e-12 absolute) or if a
  // pivot falls below 1e-12 * max diagonal.
  explicit PDMatrix(const Matrix& m);

  static PDMatrix identity(int dim);
  static PDMatrix diagonal(const Vector& diag);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  const Matrix& chol() const { return chol_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  double log_det() const;
  // m^{-1} x via two triangular solves.
  Vector solve(const Vector& x) const;
  Matrix inverse() const;

 private:
  Matrix entries_;
  Matrix chol_;
};

// Lower-triangular L with L L^T = m.
Matrix cholesky(const Matrix& m);

// Unique symmetric positive-definite R with R R = m (eigendecomposition).
PDMatrix sqrt_pd(const PDMatrix& m);

// sqrt((z - nu)^T m^{-1} (z - nu)).
double mahalanobis(const Vector& z, const Vector& nu, const PDMatrix& m);

// d * sigma / trace(sigma).
PDMatrix normalized_cov(const PDMatrix& sigma);

// Unit-diagonal rescaling of sigma.
PDMatrix correlation_of(const PDMatrix& sigma);

}  // namespace symvi
