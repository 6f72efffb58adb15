#include <doctest.h>

#include <random>

#include "symvi/error.hpp"
#include "symvi/linalg.hpp"
#include "symvi/rng.hpp"

using namespace symvi;

namespace {

Matrix random_pd(Rng& rng, int d) {
  std::normal_distribution<double> n;
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(rng);
  return a * a.transpose() + 0.5 * Matrix::Identity(d, d);
}

double rel_err(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("cholesky examples") {
  CHECK(cholesky(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3), 0.0));
  Matrix d{{4, 0}, {0, 9}};
  Matrix expect{{2, 0}, {0, 3}};
  CHECK((cholesky(d) - expect).norm() == 0.0);
  Matrix m{{2, 1}, {1, 2}};
  const Matrix l = cholesky(m);
  CHECK(l(0, 1) == 0.0);
  CHECK(l(0, 0) > 0.0);
  CHECK(l(1, 1) > 0.0);
  CHECK(rel_err(l * l.transpose(), m) < 1e-10);
}

TEST_CASE("cholesky rejects non-PD and asymmetric input") {
  Matrix bad{{1, 2}, {2, 1}};
  CHECK_THROWS_AS(cholesky(bad), Error);
  try {
    PDMatrix p(bad);
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotPositiveDefinite);
  }
  Matrix asym{{2, 1}, {0.5, 2}};
  CHECK_THROWS_AS(PDMatrix{asym}, Error);
  Matrix near{{1, 1}, {1, 1 + 1e-14}};
  CHECK_THROWS_AS(PDMatrix{near}, Error);
}

TEST_CASE("PDMatrix reconstructs and solves") {
  Rng rng = make_rng(11);
  for (int d = 1; d <= 6; ++d) {
    const Matrix m = random_pd(rng, d);
    const PDMatrix p(m);
    CHECK(rel_err(p.chol() * p.chol().transpose(), m) < 1e-10);
    const Vector x = Vector::LinSpaced(d, -1, 1);
    CHECK((m * p.solve(x) - x).norm() < 1e-10);
    CHECK(std::abs(p.log_det() - std::log(m.determinant())) < 1e-10);
    CHECK(rel_err(p.inverse(), m.inverse()) < 1e-10);
  }
}

TEST_CASE("sqrt_pd examples and reconstruction") {
  CHECK(rel_err(sqrt_pd(PDMatrix::identity(3)).entries(), Matrix::Identity(3, 3)) < 1e-15);
  const PDMatrix r = sqrt_pd(PDMatrix::diagonal(Vector{{4, 9}}));
  CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs(r(0, 1)) < 1e-15);
  Matrix m{{5, 4}, {4, 5}};
  const PDMatrix s = sqrt_pd(PDMatrix(m));
  CHECK(rel_err(s.entries() * s.entries(), m) < 1e-10);
  // Closed form: eigenvalues 9 and 1 -> sqrt entries (3+1)/2 and (3-1)/2.
  CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  Rng rng = make_rng(3);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = random_pd(rng, 4);
    const PDMatrix q = sqrt_pd(PDMatrix(a));
    CHECK(rel_err(q.entries() * q.entries(), a) < 1e-10);
  }
}

TEST_CASE("mahalanobis examples") {
  const Vector nu{{0.3, -1.2}};
  CHECK(mahalanobis(nu, nu, PDMatrix::identity(2)) == 0.0);
  CHECK(mahalanobis(Vector{{1.3, -1.2}}, nu, PDMatrix::identity(2)) == doctest::Approx(1.0));
  // Explicit inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]]/3; (1,1) gives 2/3.
  const double expect = std::sqrt((2.0 - 1.0 - 1.0 + 2.0) / 3.0);
  CHECK(mahalanobis(Vector{{1, 1}}, Vector::Zero(2), PDMatrix(Matrix{{2, 1}, {1, 2}})) ==
        doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(mahalanobis(Vector::Zero(3), Vector::Zero(2), PDMatrix::identity(2)), Error);
}

TEST_CASE("mahalanobis is affine invariant") {
  Rng rng = make_rng(5);
  std::normal_distribution<double> n;
  for (int k = 0; k < 50; ++k) {
    const int d = 3;
    const Matrix m = random_pd(rng, d);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = n(rng);
    a += 2.0 * Matrix::Identity(d, d);
    Vector z(d), nu(d), b(d);
    for (int i = 0; i < d; ++i) {
      z[i] = n(rng);
      nu[i] = n(rng);
      b[i] = n(rng);
    }
    const double before = mahalanobis(z, nu, PDMatrix(m));
    Matrix am = a * m * a.transpose();
    am = 0.5 * (am + am.transpose());
    const double after = mahalanobis(a * z + b, a * nu + b, PDMatrix(am));
    CHECK(after == doctest::Approx(before).epsilon(1e-8));
  }
}

TEST_CASE("normalized_cov") {
  CHECK(rel_err(normalized_cov(PDMatrix::identity(3)).entries(), Matrix::Identity(3, 3)) < 1e-15);
  const PDMatrix m = normalized_cov(PDMatrix::diagonal(Vector{{4, 1}}));
  CHECK(m(0, 0) == doctest::Approx(1.6).epsilon(1e-14));
  CHECK(m(1, 1) == doctest::Approx(0.4).epsilon(1e-14));
  Rng rng = make_rng(8);
  for (int d = 1; d <= 5; ++d) {
    const PDMatrix s(random_pd(rng, d) * 7.3);
    const PDMatrix n1 = normalized_cov(s);
    CHECK(std::abs(n1.entries().trace() - d) < 1e-12);
    CHECK((normalized_cov(n1).entries() - n1.entries()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("correlation_of") {
  CHECK(rel_err(correlation_of(PDMatrix::diagonal(Vector{{3, 0.2}})).entries(), Matrix::Identity(2, 2)) == 0.0);
  Matrix c{{1, 0.7}, {0.7, 1}};
  CHECK((correlation_of(PDMatrix(c)).entries() - c).norm() < 1e-15);
  Matrix s{{4, 1.4}, {1.4, 1}};
  CHECK((correlation_of(PDMatrix(s)).entries() - c).norm() < 1e-15);
  Rng rng = make_rng(9);
  const Matrix sigma = random_pd(rng, 3);
  const Matrix base = correlation_of(PDMatrix(sigma)).entries();
  for (double g : {0.1, 1.0, 10.0}) {
    const Matrix scaled = correlation_of(PDMatrix(g * g * sigma)).entries();
    CHECK((scaled - base).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(scaled.diagonal().isOnes(0.0));
  }
}
