#include "symvi/linalg.hpp"

#include <cmath>
#include <string>

#include "symvi/error.hpp"

namespace symvi {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPivotTol = 1e-12;

void require_square(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(Errc::DimensionMismatch, "matrix must be square and nonempty, got " +
                                             std::to_string(m.rows()) + "x" +
                                             std::to_string(m.cols()));
  }
}

}  // namespace

Matrix cholesky(const Matrix& m) {
  require_square(m);
  const auto n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > kSymmetryTol) {
        throw Error(Errc::NotPositiveDefinite, "matrix is not symmetric");
      }
    }
  }
  const double max_diag = m.diagonal().maxCoeff();
  if (!(max_diag > 0.0)) throw Error(Errc::NotPositiveDefinite, "nonpositive diagonal");

  // Plain column Cholesky so the pivot threshold is applied explicitly.
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > kPivotTol * max_diag)) {
      throw Error(Errc::NotPositiveDefinite, "pivot " + std::to_string(j) + " is " +
                                                 std::to_string(pivot));
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

PDMatrix::PDMatrix(const Matrix& m) : entries_(m), chol_(cholesky(m)) {}

PDMatrix PDMatrix::identity(int dim) { return PDMatrix(Matrix::Identity(dim, dim)); }

PDMatrix PDMatrix::diagonal(const Vector& diag) {
  return PDMatrix(Matrix(diag.asDiagonal()));
}

double PDMatrix::log_det() const { return 2.0 * chol_.diagonal().array().log().sum(); }

Vector PDMatrix::solve(const Vector& x) const {
  if (x.size() != dim()) throw Error(Errc::DimensionMismatch, "solve: size mismatch");
  Vector y = chol_.triangularView<Eigen::Lower>().solve(x);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix PDMatrix::inverse() const {
  Matrix linv = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
  return linv.transpose() * linv;
}

PDMatrix sqrt_pd(const PDMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m.entries());
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw Error(Errc::NotPositiveDefinite, "sqrt_pd: nonpositive eigenvalue");
  }
  const Matrix& v = eig.eigenvectors();
  Matrix r = v * eig.eigenvalues().cwiseSqrt().asDiagonal() * v.transpose();
  // Remove round-off asymmetry so the result passes the PDMatrix check.
  return PDMatrix(0.5 * (r + r.transpose()));
}

double mahalanobis(const Vector& z, const Vector& nu, const PDMatrix& m) {
  if (z.size() != nu.size() || z.size() != m.dim()) {
    throw Error(Errc::DimensionMismatch, "mahalanobis: z, nu and m disagree in size");
  }
  Vector w = m.chol().triangularView<Eigen::Lower>().solve(z - nu);
  return w.norm();
}

PDMatrix normalized_cov(const PDMatrix& sigma) {
  return PDMatrix(sigma.dim() * sigma.entries() / sigma.entries().trace());
}

PDMatrix correlation_of(const PDMatrix& sigma) {
  const Vector inv_sd = sigma.entries().diagonal().cwiseSqrt().cwiseInverse();
  Matrix c = inv_sd.asDiagonal() * sigma.entries() * inv_sd.asDiagonal();
  for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, i) = 1.0;
  c = 0.5 * (c + c.transpose());
  return PDMatrix(c);
}

}  // namespace symvi
