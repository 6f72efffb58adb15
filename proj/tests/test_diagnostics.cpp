#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "symvi/diagnostics.hpp"
#include "symvi/error.hpp"

using namespace symvi;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Usage;
}

}  // namespace

TEST_CASE("quantile") {
  std::vector<double> v(101);
  std::iota(v.begin(), v.end(), 0.0);
  std::reverse(v.begin(), v.end());
  CHECK(quantile(v, 0.9) == 90.0);
  CHECK(quantile(v, 0.0) == 0.0);
  CHECK(quantile(v, 1.0) == 100.0);
  CHECK(quantile(std::vector<double>{1.0, 2.0}, 0.25) == doctest::Approx(1.25));
  CHECK(quantile(std::vector<double>{7.0}, 0.9) == 7.0);
  CHECK(code_of([] { quantile(std::vector<double>{}, 0.5); }) == Errc::EmptyInput);
  CHECK(code_of([] { quantile(std::vector<double>{1.0}, 1.5); }) == Errc::InvalidParameter);
  CHECK(parse_reflection("literal") == Reflection::Literal);
  CHECK(std::string(reflection_name(Reflection::Point)) == "point");
  CHECK(code_of([] { parse_reflection("mirror"); }) == Errc::Usage);
}

TEST_CASE("alpha: involution, zero at the center, shift invariance") {
  const auto c = make_crescent();
  Rng rng = make_rng(1);
  const Matrix x = c->sample(rng, 500);
  const Vector mh = c->benchmark()->mean;
  const auto a = asymmetry(*c, x, mh);
  // Reflecting the samples first gives the same alpha values.
  const Matrix xr = (2.0 * mh).replicate(1, 500) - x;
  const auto b = asymmetry(*c, xr, mh);
  REQUIRE(a.alpha_values.size() == b.alpha_values.size());
  for (std::size_t i = 0; i < a.alpha_values.size(); ++i) {
    CHECK(std::abs(a.alpha_values[i] - b.alpha_values[i]) <= 1e-9 * (1 + a.alpha_values[i]));
  }
  // At the center itself alpha is zero.
  const auto z = asymmetry(*c, mh.replicate(1, 100), mh);
  CHECK(z.q90 == 0.0);
  // Translating target, samples and center together changes nothing.
  const Vector off{{5.0, -3.0, 1.0}};
  const auto s = asymmetry(*shift(c, off), x.colwise() + off, mh + off);
  CHECK(std::abs(s.q90 - a.q90) < 1e-9 * (1 + a.q90));
  CHECK(a.n == 500);
  CHECK(a.n_excluded == 0);
}

TEST_CASE("alpha on symmetric and asymmetric targets") {
  Rng rng = make_rng(2);
  const auto t = parse_target("student:5:0.5");
  const auto r = asymmetry(*t, t->sample(rng, 20000), t->benchmark()->mean);
  CHECK(r.q90 < 1e-12);
  const auto sk = parse_target("skewnormal:5");
  CHECK(asymmetry(*sk, sk->sample(rng, 2000), sk->benchmark()->mean).q90 > 0.5);
  // Literal reflection differs from point reflection away from the origin.
  const auto g = make_gaussian(Vector::Constant(1, 3.0), PDMatrix::identity(1));
  const Matrix x = g->sample(rng, 1000);
  CHECK(asymmetry(*g, x, g->benchmark()->mean).q90 < 1e-12);
  CHECK(asymmetry(*g, x, g->benchmark()->mean, Reflection::Literal).q90 > 1.0);
}

TEST_CASE("alpha input checks") {
  const auto g = make_gaussian(Vector::Zero(1), PDMatrix::identity(1));
  CHECK(code_of([&] { asymmetry(*g, Matrix::Zero(1, 99), Vector::Zero(1)); }) == Errc::InvalidParameter);
  CHECK(code_of([&] { asymmetry(*g, Matrix::Zero(2, 100), Vector::Zero(2)); }) == Errc::DimensionMismatch);
  struct Half : Target {
    Half() : Target("half", 1, true) {}
    double log_density(const Vector& z) const override {
      return z[0] > 0 ? -z[0] : -std::numeric_limits<double>::infinity();
    }
    Vector grad_log_density(const Vector&) const override { return -Vector::Ones(1); }
  } half;
  Matrix x(1, 200);
  for (int i = 0; i < 200; ++i) x(0, i) = i < 150 ? 1.0 + i : -1.0 - i;
  // Every reflected point lands on the zero-density side.
  CHECK(code_of([&] { asymmetry(half, x, Vector::Zero(1)); }) == Errc::NonFiniteLogDensity);
  const auto r = asymmetry(half, x, Vector::Constant(1, 0.5 * (x.maxCoeff() + x.minCoeff()) + 500.0));
  CHECK(r.n_excluded + static_cast<int>(r.alpha_values.size()) == 200);
}

TEST_CASE("schools parameterizations order by asymmetry") {
  double q[3];
  int k = 0;
  for (const char* v : {"schools:centered", "schools:noncentered", "schools:marginalized"}) {
    const auto t = parse_target(v);
    Rng rng = make_rng(0);
    q[k++] = asymmetry(*t, t->sample(rng, 20000), t->benchmark()->mean).q90;
  }
  CHECK(q[0] > q[1]);
  CHECK(q[1] > q[2]);
}

TEST_CASE("accuracy against the benchmark") {
  const auto f = parse_target("funnel:2:0.5");
  const auto& b = *f->benchmark();
  // q whose mean and correlation equal the benchmark's.
  const LocationScaleParams q(b.mean, b.cov.chol(), BaseDensity::normal(3));
  const auto r = accuracy(q, *f);
  REQUIRE(r.means.size() == 3);
  REQUIRE(r.correlations.size() == 3);
  for (const auto& m : r.means) CHECK(m.scaled_error == 0.0);
  for (const auto& c : r.correlations) CHECK(c.error < 1e-12);
  CHECK(r.means[0].group == CoordGroup::SigmaBar);
  CHECK(r.means[1].group == CoordGroup::Sigma);
  CHECK(r.correlations[0].i == 1);
  CHECK(r.correlations[0].j == 0);
  CHECK(r.correlations[0].group == CoordGroup::Cross);
  CHECK(r.correlations[2].group == CoordGroup::Sigma);
  // A shifted mean gives the expected scaled error.
  LocationScaleParams q2 = q;
  q2.nu[1] += 0.5 * std::sqrt(b.cov(1, 1));
  const auto r2 = accuracy(q2, *f);
  CHECK(r2.max_mean_error(CoordGroup::Sigma) == doctest::Approx(0.5));
  CHECK(r2.max_mean_error(CoordGroup::SigmaBar) == 0.0);
  // Correlations ignore the overall scale.
  LocationScaleParams q3 = q;
  q3.scale_factor *= 3.0;
  CHECK(accuracy(q3, *f).max_correlation_error(CoordGroup::Sigma) < 1e-12);

  std::ostringstream os;
  write_accuracy_csv(os, r);
  const std::string csv = os.str();
  CHECK(csv.rfind("kind,i,j,group,fitted,benchmark,benchmark_sd,error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  struct Bare : Target {
    Bare() : Target("bare", 1, true) {}
    double log_density(const Vector& z) const override { return -0.5 * z[0] * z[0]; }
    Vector grad_log_density(const Vector& z) const override { return -z; }
  } bare;
  CHECK(code_of([&] { accuracy(LocationScaleParams::standard(BaseDensity::normal(1)), bare); }) ==
        Errc::MissingBenchmark);
}

TEST_CASE("alpha csv") {
  const auto g = make_gaussian(Vector::Zero(1), PDMatrix::identity(1));
  Rng rng = make_rng(3);
  const auto r = asymmetry(*g, g->sample(rng, 100), Vector::Zero(1));
  std::ostringstream os;
  write_alpha_csv(os, r);
  const std::string csv = os.str();
  CHECK(csv.rfind("sample,alpha\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 101);
  const auto j = to_json(r);
  CHECK(j.at("n").get<int>() == 100);
}
