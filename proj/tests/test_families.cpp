#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "symvi/error.hpp"
#include "symvi/families.hpp"

using namespace symvi;

namespace {

// Asymptotic Kolmogorov p-value for statistic d at sample size n.
double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

template <class Cdf>
double ks_statistic(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

LocationScaleParams random_params(Rng& rng, const BaseDensity& base) {
  std::normal_distribution<double> n;
  const int d = base.dim;
  Vector nu(d);
  Matrix l = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    nu[i] = n(rng);
    for (int j = 0; j < i; ++j) l(i, j) = 0.5 * n(rng);
    l(i, i) = std::exp(0.3 * n(rng));
  }
  return {nu, l, base};
}

}  // namespace

TEST_CASE("log_density examples") {
  const auto q = LocationScaleParams::standard(BaseDensity::normal(1));
  CHECK(log_density(q, Vector::Zero(1)) == doctest::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-15));
  Rng rng = make_rng(1);
  for (const auto& base : {BaseDensity::normal(3), BaseDensity::laplace(3), BaseDensity::student(3, 4.0)}) {
    const auto p = random_params(rng, base);
    CHECK(log_density(p, p.nu) ==
          doctest::Approx(base.log_density(Vector::Zero(3)) - p.scale_factor.diagonal().array().log().sum())
              .epsilon(1e-13));
  }
  CHECK_THROWS_AS(log_density(q, Vector::Zero(2)), Error);
}

TEST_CASE("densities integrate to one in 1-D") {
  // Trapezoid on [-40, 40] (scale 2) and [-400, 400] for the student base tails.
  for (const auto& base : {BaseDensity::normal(1), BaseDensity::laplace(1), BaseDensity::student(1, 5.0)}) {
    const LocationScaleParams q(Vector::Zero(1), Matrix::Constant(1, 1, 2.0), base);
    const double lim = base.kind == BaseKind::StandardStudentT ? 400.0 : 40.0;
    const int m = 800001;
    const double h = 2 * lim / (m - 1);
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      const double w = (i == 0 || i == m - 1) ? 0.5 : 1.0;
      s += w * std::exp(log_density(q, Vector::Constant(1, -lim + i * h)));
    }
    CHECK(std::abs(s * h - 1.0) < 1e-6);
  }
}

TEST_CASE("base densities are spherically symmetric") {
  Rng rng = make_rng(2);
  std::normal_distribution<double> n;
  for (const auto& base : {BaseDensity::normal(4), BaseDensity::laplace(4), BaseDensity::student(4)}) {
    for (int k = 0; k < 100; ++k) {
      Matrix a(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = n(rng);
      const Matrix rot = Eigen::HouseholderQR<Matrix>(a).householderQ();
      Vector z(4);
      for (int i = 0; i < 4; ++i) z[i] = 2.0 * n(rng);
      CHECK(std::abs(base.log_density(rot * z) - base.log_density(z)) < 1e-10);
    }
  }
}

TEST_CASE("sampling is affine in the base draws") {
  const BaseDensity base = BaseDensity::laplace(2);
  Rng r1 = make_rng(4);
  Rng r2 = make_rng(4);
  const Matrix raw = sample(LocationScaleParams::standard(base), r1, 100);
  CHECK((raw - sample_base(base, r2, 100)).norm() == 0.0);
  Rng r3 = make_rng(4);
  const LocationScaleParams q(Vector{{3, -1}}, Matrix{{1.5, 0}, {0.4, 0.7}}, base);
  const Matrix z = sample(q, r3, 100);
  const Matrix expect = (q.scale_factor * raw).colwise() + q.nu;
  CHECK((z - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample moments (CLT bounds)") {
  const int n = 1000000;
  Rng rng = make_rng(6);
  const Matrix s{{2, 1}, {1, 2}};
  const LocationScaleParams q(Vector{{3, -1}}, cholesky(s), BaseDensity::normal(2));
  const Matrix z = sample(q, rng, n);
  const Vector mean = z.rowwise().mean();
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] - q.nu[i]) < 5.0 * std::sqrt(s(i, i) / n));
  const Matrix c = z.colwise() - mean;
  const Matrix cov = c * c.transpose() / (n - 1.0);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      // Var of a Gaussian product moment: S_ii S_jj + S_ij^2.
      const double se = std::sqrt((s(i, i) * s(j, j) + s(i, j) * s(i, j)) / n);
      CHECK(std::abs(cov(i, j) - s(i, j)) < 5.0 * se);
    }
  }
}

TEST_CASE("Mahalanobis radius of samples follows the base (KS)") {
  const int n = 100000;
  const Matrix l{{1.2, 0}, {-0.6, 0.5}};
  const Vector nu{{0.5, 2.0}};
  {
    Rng rng = make_rng(7);
    const LocationScaleParams q(nu, l, BaseDensity::normal(2));
    const Matrix z = sample(q, rng, n);
    std::vector<double> r2(n);
    for (int k = 0; k < n; ++k) r2[k] = std::pow(mahalanobis(z.col(k), nu, PDMatrix(q.scale())), 2);
    // Chi-square with 2 degrees of freedom.
    const double d = ks_statistic(r2, [](double x) { return 1.0 - std::exp(-x / 2.0); });
    CHECK(ks_pvalue(d, n) > 0.01);
  }
  {
    Rng rng = make_rng(8);
    const LocationScaleParams q(nu, l, BaseDensity::laplace(2));
    const Matrix z = sample(q, rng, n);
    std::vector<double> r(n);
    for (int k = 0; k < n; ++k) r[k] = mahalanobis(z.col(k), nu, PDMatrix(q.scale()));
    // Radius of exp(-|x|) in 2-D is Gamma(2, 1).
    const double d = ks_statistic(r, [](double x) { return 1.0 - std::exp(-x) * (1.0 + x); });
    CHECK(ks_pvalue(d, n) > 0.01);
  }
  {
    Rng rng = make_rng(9);
    const LocationScaleParams q(nu, l, BaseDensity::student(2, 5.0));
    const Matrix z = sample(q, rng, n);
    std::vector<double> r2(n);
    for (int k = 0; k < n; ++k) r2[k] = std::pow(mahalanobis(z.col(k), nu, PDMatrix(q.scale())), 2);
    // r^2 / 2 of a bivariate t_5 is F(2, 5): CDF 1 - (1 + 2x/5)^{-5/2}.
    const double d = ks_statistic(r2, [](double x) { return 1.0 - std::pow(1.0 + x / 5.0, -2.5); });
    CHECK(ks_pvalue(d, n) > 0.01);
  }
}

TEST_CASE("grad_log_density") {
  const auto q = LocationScaleParams::standard(BaseDensity::normal(3));
  const Vector z{{0.3, -1.0, 2.0}};
  CHECK((grad_log_density(q, z) + z).norm() < 1e-15);
  Rng rng = make_rng(10);
  for (const auto& base : {BaseDensity::normal(3), BaseDensity::laplace(3), BaseDensity::student(3)}) {
    const auto p = random_params(rng, base);
    if (base.kind == BaseKind::StandardNormal) CHECK(grad_log_density(p, p.nu).norm() < 1e-14);
    std::normal_distribution<double> n;
    for (int k = 0; k < 20; ++k) {
      Vector x(3);
      for (int i = 0; i < 3; ++i) x[i] = p.nu[i] + n(rng);
      const Vector g = grad_log_density(p, x);
      for (int i = 0; i < 3; ++i) {
        Vector a = x, b = x;
        a[i] += 1e-5;
        b[i] -= 1e-5;
        CHECK(std::abs((log_density(p, a) - log_density(p, b)) / 2e-5 - g[i]) < 1e-5);
      }
    }
  }
}

TEST_CASE("frozen scale") {
  const LocationScaleParams q(Vector{{1.0}}, Matrix::Constant(1, 1, 2.0), BaseDensity::laplace(1));
  LocationFamily fam = freeze_scale(q);
  const Vector z{{0.4}};
  CHECK(fam.log_density(Vector{{1.5}}, z) == doctest::Approx(log_density(q, Vector{{-0.1}})).epsilon(1e-15));
  CHECK(fam.at(Vector{{7.0}}).scale_factor(0, 0) == 2.0);
  try {
    fam.set_scale_factor(Matrix::Identity(1, 1));
    FAIL("expected ScaleFrozen");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ScaleFrozen);
  }
}

TEST_CASE("params validation and JSON round trip") {
  CHECK_THROWS_AS(LocationScaleParams(Vector::Zero(2), Matrix{{1, 0.5}, {0, 1}}, BaseDensity::normal(2)), Error);
  CHECK_THROWS_AS(LocationScaleParams(Vector::Zero(2), Matrix{{1, 0}, {0, -1}}, BaseDensity::normal(2)), Error);
  const LocationScaleParams q(Vector{{0.25, -3}}, Matrix{{1.5, 0}, {0.1, 0.3}}, BaseDensity::student(2, 7.0));
  const LocationScaleParams back = params_from_json(to_json(q));
  CHECK((back.nu - q.nu).norm() == 0.0);
  CHECK((back.scale_factor - q.scale_factor).norm() == 0.0);
  CHECK(back.base.kind == BaseKind::StandardStudentT);
  CHECK(back.base.df == 7.0);
  CHECK_THROWS_AS(params_from_json(nlohmann::json{{"family", "normal"}}), Error);
}
