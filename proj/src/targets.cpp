#include "symvi/targets.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "symvi/error.hpp"
#include "symvi/special.hpp"

namespace symvi {

using special::kLog2Pi;
using special::quad_form;

const char* symmetry_kind_name(SymmetryKind kind) {
  switch (kind) {
    case SymmetryKind::FullElliptical: return "full_elliptical";
    case SymmetryKind::FullEven: return "full_even";
    case SymmetryKind::PartialElliptical: return "partial_elliptical";
    case SymmetryKind::PartialEven: return "partial_even";
    case SymmetryKind::Asymmetric: return "asymmetric";
  }
  return "asymmetric";
}

const char* benchmark_source_name(BenchmarkSource source) {
  switch (source) {
    case BenchmarkSource::Analytic: return "analytic";
    case BenchmarkSource::GenerativeSampler: return "generative_sampler";
    case BenchmarkSource::GridQuadrature: return "grid_quadrature";
  }
  return "analytic";
}

double Target::log_density_and_grad(const Vector& z, Vector& grad) const {
  grad = grad_log_density(z);
  return log_density(z);
}

Matrix Target::sample(Rng&, int) const {
  throw Error(Errc::MissingSampler, "target '" + name_ + "' has no sampler");
}

namespace {

void require_dim(const Vector& z, int dim, const std::string& name) {
  if (z.size() != dim) {
    throw Error(Errc::DimensionMismatch, name + ": expected dimension " + std::to_string(dim) +
                                             ", got " + std::to_string(z.size()));
  }
}

std::vector<int> iota_indices(int from, int to) {
  std::vector<int> out;
  for (int i = from; i < to; ++i) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- gaussian

class GaussianTarget final : public Target {
 public:
  GaussianTarget(const Vector& mean, const PDMatrix& cov)
      : Target("gaussian", static_cast<int>(mean.size()), true),
        mean_(mean),
        cov_(cov),
        prec_(cov.inverse()),
        log_norm_(-0.5 * mean.size() * kLog2Pi - 0.5 * cov.log_det()) {
    if (cov.dim() != dim_) throw Error(Errc::DimensionMismatch, "gaussian: mean/cov size");
    symmetry_.kind = SymmetryKind::FullElliptical;
    symmetry_.sigma_indices = iota_indices(0, dim_);
    symmetry_.even_point = mean;
    symmetry_.normalized_cov_sigma = normalized_cov(cov);
    benchmark_ = BenchmarkMoments{mean, cov, BenchmarkSource::Analytic};
  }

  double log_density(const Vector& z) const override {
    require_dim(z, dim_, name_);
    return log_norm_ - 0.5 * quad_form(prec_, z - mean_);
  }
  Vector grad_log_density(const Vector& z) const override {
    require_dim(z, dim_, name_);
    return -prec_ * (z - mean_);
  }
  bool has_sampler() const override { return true; }
  Matrix sample(Rng& rng, int n) const override {
    std::normal_distribution<double> normal;
    Matrix out(dim_, n);
    for (int k = 0; k < n; ++k) {
      Vector g(dim_);
      for (int i = 0; i < dim_; ++i) g[i] = normal(rng);
      out.col(k) = mean_ + cov_.chol() * g;
    }
    return out;
  }

 private:
  Vector mean_;
  PDMatrix cov_;
  Matrix prec_;
  double log_norm_;
};

// --------------------------------------------------------------- student-t

class StudentTarget final : public Target {
 public:
  StudentTarget(double df, const PDMatrix& shape)
      : Target("student", shape.dim(), true), df_(df), shape_(shape), prec_(shape.inverse()) {
    const int d = dim_;
    log_norm_ = std::lgamma(0.5 * (df + d)) - std::lgamma(0.5 * df) -
                0.5 * d * std::log(df * std::numbers::pi) - 0.5 * shape.log_det();
    symmetry_.kind = SymmetryKind::FullElliptical;
    symmetry_.sigma_indices = iota_indices(0, d);
    symmetry_.even_point = Vector::Zero(d);
    symmetry_.normalized_cov_sigma = normalized_cov(shape);
    benchmark_ = BenchmarkMoments{Vector::Zero(d), PDMatrix(df / (df - 2.0) * shape.entries()),
                                  BenchmarkSource::Analytic};
  }

  double log_density(const Vector& z) const override {
    require_dim(z, dim_, name_);
    return log_norm_ - 0.5 * (df_ + dim_) * std::log1p(quad_form(prec_, z) / df_);
  }
  Vector grad_log_density(const Vector& z) const override {
    require_dim(z, dim_, name_);
    return -(df_ + dim_) / (df_ + quad_form(prec_, z)) * (prec_ * z);
  }
  double log_density_and_grad(const Vector& z, Vector& grad) const override {
    require_dim(z, dim_, name_);
    const double q = quad_form(prec_, z);
    grad = -(df_ + dim_) / (df_ + q) * (prec_ * z);
    return log_norm_ - 0.5 * (df_ + dim_) * std::log1p(q / df_);
  }
  bool has_sampler() const override { return true; }
  Matrix sample(Rng& rng, int n) const override {
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi2(df_);
    Matrix out(dim_, n);
    for (int k = 0; k < n; ++k) {
      Vector g(dim_);
      for (int i = 0; i < dim_; ++i) g[i] = normal(rng);
      const double w = chi2(rng);
      out.col(k) = shape_.chol() * g * std::sqrt(df_ / w);
    }
    return out;
  }

 private:
  double df_;
  PDMatrix shape_;
  Matrix prec_;
  double log_norm_ = 0.0;
};

// ------------------------------------------------------------- skew normal

class SkewNormalTarget final : public Target {
 public:
  SkewNormalTarget(double location, double scale, double kappa)
      : Target("skewnormal", 1, true), loc_(location), scale_(scale), kappa_(kappa) {
    const double delta = kappa / std::sqrt(1.0 + kappa * kappa);
    Vector mean(1);
    mean[0] = location + scale * delta * special::kSqrt2OverPi;
    Matrix var(1, 1);
    var(0, 0) = scale * scale * (1.0 - 2.0 * delta * delta / std::numbers::pi);
    benchmark_ = BenchmarkMoments{mean, PDMatrix(var), BenchmarkSource::Analytic};
    if (kappa == 0.0) {
      symmetry_.kind = SymmetryKind::FullEven;
      symmetry_.sigma_indices = {0};
      symmetry_.even_point = Vector::Constant(1, location);
      symmetry_.normalized_cov_sigma = PDMatrix::identity(1);
    }
  }

  double log_density(const Vector& z) const override {
    require_dim(z, 1, name_);
    const double x = (z[0] - loc_) / scale_;
    return std::numbers::ln2 - std::log(scale_) - 0.5 * kLog2Pi - 0.5 * x * x +
           special::log_normal_cdf(kappa_ * x);
  }
  Vector grad_log_density(const Vector& z) const override {
    require_dim(z, 1, name_);
    const double x = (z[0] - loc_) / scale_;
    return Vector::Constant(1, (-x + kappa_ * special::normal_hazard(kappa_ * x)) / scale_);
  }
  bool has_sampler() const override { return true; }
  Matrix sample(Rng& rng, int n) const override {
    const double delta = kappa_ / std::sqrt(1.0 + kappa_ * kappa_);
    std::normal_distribution<double> normal;
    Matrix out(1, n);
    for (int k = 0; k < n; ++k) {
      const double u0 = normal(rng);
      const double u1 = normal(rng);
      out(0, k) = loc_ + scale_ * (delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1);
    }
    return out;
  }

 private:
  double loc_;
  double scale_;
  double kappa_;
};

// ------------------------------------------------------------------ funnels

// Shared pieces of log N(theta; mean, e^{2 tau} C).
struct ScaledNormal {
  PDMatrix corr;
  Matrix prec;
  double log_norm;

  explicit ScaledNormal(const PDMatrix& c)
      : corr(c), prec(c.inverse()), log_norm(-0.5 * c.dim() * kLog2Pi - 0.5 * c.log_det()) {}

  int n() const { return corr.dim(); }
};

class FunnelTarget final : public Target {
 public:
  FunnelTarget(const PDMatrix& c) : Target("funnel", 1 + c.dim(), true), cond_(c) {
    const int n = c.dim();
    symmetry_.kind = SymmetryKind::PartialElliptical;
    symmetry_.sigma_indices = iota_indices(1, 1 + n);
    symmetry_.even_point = Vector::Zero(n);
    symmetry_.normalized_cov_sigma = normalized_cov(c);
    // Var(theta) = E[e^{2 tau}] C = e^2 C; tau and theta are uncorrelated.
    Matrix cov = Matrix::Zero(dim_, dim_);
    cov(0, 0) = 1.0;
    cov.bottomRightCorner(n, n) = std::exp(2.0) * c.entries();
    benchmark_ = BenchmarkMoments{Vector::Zero(dim_), PDMatrix(cov), BenchmarkSource::Analytic};
  }

  double log_density(const Vector& z) const override {
    require_dim(z, dim_, name_);
    const double tau = z[0];
    const int n = cond_.n();
    const Vector theta = z.tail(n);
    return -0.5 * kLog2Pi - 0.5 * tau * tau + cond_.log_norm - n * tau -
           0.5 * std::exp(-2.0 * tau) * quad_form(cond_.prec, theta);
  }
  Vector grad_log_density(const Vector& z) const override {
    Vector g;
    log_density_and_grad(z, g);
    return g;
  }
  double log_density_and_grad(const Vector& z, Vector& grad) const override {
    require_dim(z, dim_, name_);
    const double tau = z[0];
    const int n = cond_.n();
    const Vector theta = z.tail(n);
    const Vector ptheta = cond_.prec * theta;
    const double q = theta.dot(ptheta);
    const double s = std::exp(-2.0 * tau);
    grad.resize(dim_);
    grad[0] = -tau - n + s * q;
    grad.tail(n) = -s * ptheta;
    return -0.5 * kLog2Pi - 0.5 * tau * tau + cond_.log_norm - n * tau - 0.5 * s * q;
  }
  bool has_sampler() const override { return true; }
  Matrix sample(Rng& rng, int n_draws) const override {
    std::normal_distribution<double> normal;
    const int n = cond_.n();
    Matrix out(dim_, n_draws);
    for (int k = 0; k < n_draws; ++k) {
      const double tau = normal(rng);
      Vector g(n);
      for (int i = 0; i < n; ++i) g[i] = normal(rng);
      out(0, k) = tau;
      out.col(k).tail(n) = std::exp(tau) * (cond_.corr.chol() * g);
    }
    return out;
  }

 private:
  ScaledNormal cond_;
};

class ExtendedFunnelTarget final : public Target {
 public:
  ExtendedFunnelTarget(const PDMatrix& c) : Target("extfunnel", 2 + c.dim(), true), cond_(c) {
    const int n = c.dim();
    symmetry_.kind = SymmetryKind::PartialElliptical;
    symmetry_.sigma_indices = {0};
    for (int i = 0; i < n; ++i) symmetry_.sigma_indices.push_back(2 + i);
    symmetry_.even_point = Vector::Zero(1 + n);
    // The normalized covariance of (mu, theta) | tau varies with tau.
    Matrix cov = Matrix::Zero(dim_, dim_);
    cov(0, 0) = 1.0;
    cov(1, 1) = 1.0;
    cov.block(0, 2, 1, n).setOnes();
    cov.block(2, 0, n, 1).setOnes();
    cov.bottomRightCorner(n, n) = Matrix::Ones(n, n) + std::exp(2.0) * c.entries();
    benchmark_ = BenchmarkMoments{Vector::Zero(dim_), PDMatrix(cov), BenchmarkSource::Analytic};
  }

  double log_density(const Vector& z) const override {
    Vector g;
    return log_density_and_grad(z, g);
  }
  Vector grad_log_density(const Vector& z) const override {
    Vector g;
    log_density_and_grad(z, g);
    return g;
  }
  double log_density_and_grad(const Vector& z, Vector& grad) const override {
    require_dim(z, dim_, name_);
    const double mu = z[0];
    const double tau = z[1];
    const int n = cond_.n();
    const Vector dev = z.tail(n).array() - mu;
    const Vector pdev = cond_.prec * dev;
    const double q = dev.dot(pdev);
    const double s = std::exp(-2.0 * tau);
    grad.resize(dim_);
    grad[0] = -mu + s * pdev.sum();
    grad[1] = -tau - n + s * q;
    grad.tail(n) = -s * pdev;
    return -kLog2Pi - 0.5 * (mu * mu + tau * tau) + cond_.log_norm - n * tau - 0.5 * s * q;
  }
  bool has_sampler() const override { return true; }
  Matrix sample(Rng& rng, int n_draws) const override {
    std::normal_distribution<double> normal;
    const int n = cond_.n();
    Matrix out(dim_, n_draws);
    for (int k = 0; k < n_draws; ++k) {
      const double mu = normal(rng);
      const double tau = normal(rng);
      Vector g(n);
      for (int i = 0; i < n; ++i) g[i] = normal(rng);
      out(0, k) = mu;
      out(1, k) = tau;
      out.col(k).tail(n) = (std::exp(tau) * (cond_.corr.chol() * g)).array() + mu;
    }
    return out;
  }

 private:
  ScaledNormal cond_;
};

// ----------------------------------------------------------------- crescent

class CrescentTarget final : public Target {
 public:
  static constexpr double kA = 0.03;
  static constexpr double kB = 100.0;
  static constexpr double kC = 0.02;

  CrescentTarget() : Target("crescent", 3, true), sigma_(make_sigma()), prec_(sigma_.inverse()) {
    log_norm_ = -kLog2Pi - 0.5 * sigma_.log_det() - 0.5 * kLog2Pi - std::log(kC);
    symmetry_.kind = SymmetryKind::PartialElliptical;
    symmetry_.sigma_indices = {0, 1};
    symmetry_.even_point = Vector::Zero(2);
    symmetry_.normalized_cov_sigma = normalized_cov(sigma_);
    // x^T Sigma^{-1} x ~ chi^2_2: mean 2, variance 4; Cov(x, y) = 0 by oddness.
    Matrix cov = Matrix::Zero(3, 3);
    cov.topLeftCorner(2, 2) = sigma_.entries();
    cov(2, 2) = kA * kA * 4.0 + kC * kC;
    Vector mean = Vector::Zero(3);
    mean[2] = kA * (2.0 - kB);
    benchmark_ = BenchmarkMoments{mean, PDMatrix(cov), BenchmarkSource::Analytic};
  }

  double log_density(const Vector& z) const override {
    require_dim(z, 3, name_);
    const Vector x = z.head(2);
    const double q = quad_form(prec_, x);
    const double r = (z[2] - kA * (q - kB)) / kC;
    return log_norm_ - 0.5 * q - 0.5 * r * r;
  }
  Vector grad_log_density(const Vector& z) const override {
    Vector g;
    log_density_and_grad(z, g);
    return g;
  }
  double log_density_and_grad(const Vector& z, Vector& grad) const override {
    require_dim(z, 3, name_);
    const Vector x = z.head(2);
    const Vector px = prec_ * x;
    const double q = x.dot(px);
    const double resid = z[2] - kA * (q - kB);
    grad.resize(3);
    grad.head(2) = px * (-1.0 + 2.0 * kA * resid / (kC * kC));
    grad[2] = -resid / (kC * kC);
    return log_norm_ - 0.5 * q - 0.5 * resid * resid / (kC * kC);
  }
  bool has_sampler() const override { return true; }
  Matrix sample(Rng& rng, int n) const override {
    std::normal_distribution<double> normal;
    Matrix out(3, n);
    for (int k = 0; k < n; ++k) {
      Vector g(2);
      g[0] = normal(rng);
      g[1] = normal(rng);
      const Vector x = sigma_.chol() * g;
      out.col(k).head(2) = x;
      out(2, k) = kA * (g.squaredNorm() - kB) + kC * normal(rng);
    }
    return out;
  }

 private:
  static PDMatrix make_sigma() {
    Matrix s(2, 2);
    s << 100.0, 50.0, 50.0, 100.0;
    return PDMatrix(s);
  }

  PDMatrix sigma_;
  Matrix prec_;
  double log_norm_ = 0.0;
};

// -------------------------------------------------------------------- shift

class ShiftedTarget final : public Target {
 public:
  ShiftedTarget(TargetPtr inner, const Vector& offset)
      : Target(inner->name() + "+shift", inner->dim(), inner->normalized()),
        inner_(std::move(inner)),
        offset_(offset) {
    require_dim(offset, dim_, "shift");
    symmetry_ = inner_->symmetry();
    if (symmetry_.even_point) {
      for (std::size_t k = 0; k < symmetry_.sigma_indices.size(); ++k) {
        (*symmetry_.even_point)[static_cast<Eigen::Index>(k)] +=
            offset[symmetry_.sigma_indices[k]];
      }
    }
    if (inner_->benchmark()) {
      const auto& b = *inner_->benchmark();
      benchmark_ = BenchmarkMoments{b.mean + offset, b.cov, b.source};
    }
  }

  double log_density(const Vector& z) const override { return inner_->log_density(z - offset_); }
  Vector grad_log_density(const Vector& z) const override {
    return inner_->grad_log_density(z - offset_);
  }
  double log_density_and_grad(const Vector& z, Vector& grad) const override {
    return inner_->log_density_and_grad(z - offset_, grad);
  }
  bool has_sampler() const override { return inner_->has_sampler(); }
  Matrix sample(Rng& rng, int n) const override {
    Matrix s = inner_->sample(rng, n);
    s.colwise() += offset_;
    return s;
  }

 private:
  TargetPtr inner_;
  Vector offset_;
};

PDMatrix equicorrelation(int n, double c12) {
  Matrix c = Matrix::Constant(n, n, c12);
  c.diagonal().setOnes();
  return PDMatrix(c);
}

}  // namespace

TargetPtr make_gaussian(const Vector& mean, const PDMatrix& cov) {
  return std::make_shared<GaussianTarget>(mean, cov);
}

TargetPtr make_student_t(double df, double correlation) {
  if (!(df > 2.0)) throw Error(Errc::InvalidParameter, "student-t needs df > 2");
  if (!(std::abs(correlation) < 1.0)) {
    throw Error(Errc::InvalidParameter, "student-t needs |correlation| < 1");
  }
  Matrix r(2, 2);
  r << 1.0, correlation, correlation, 1.0;
  return make_student_t(df, PDMatrix(r));
}

TargetPtr make_student_t(double df, const PDMatrix& shape) {
  if (!(df > 2.0)) throw Error(Errc::InvalidParameter, "student-t needs df > 2");
  return std::make_shared<StudentTarget>(df, shape);
}

TargetPtr make_skew_normal(double location, double scale, double kappa) {
  if (!(scale > 0.0)) throw Error(Errc::InvalidParameter, "skew-normal needs scale > 0");
  if (!std::isfinite(location) || !std::isfinite(kappa)) {
    throw Error(Errc::InvalidParameter, "skew-normal parameters must be finite");
  }
  return std::make_shared<SkewNormalTarget>(location, scale, kappa);
}

TargetPtr make_funnel(int n_theta, const PDMatrix& correlation_matrix) {
  if (n_theta < 1 || correlation_matrix.dim() != n_theta) {
    throw Error(Errc::InvalidParameter, "funnel: correlation matrix must be n_theta x n_theta");
  }
  for (int i = 0; i < n_theta; ++i) {
    if (std::abs(correlation_matrix(i, i) - 1.0) > 1e-12) {
      throw Error(Errc::InvalidParameter, "funnel: correlation matrix needs a unit diagonal");
    }
  }
  return std::make_shared<FunnelTarget>(correlation_matrix);
}

TargetPtr make_extended_funnel(int n_theta, double c12) {
  if (n_theta < 1) throw Error(Errc::InvalidParameter, "extended funnel: n_theta >= 1");
  if (!(std::abs(c12) < 1.0)) throw Error(Errc::InvalidParameter, "extended funnel: |c12| < 1");
  try {
    return std::make_shared<ExtendedFunnelTarget>(equicorrelation(n_theta, c12));
  } catch (const Error&) {
    throw Error(Errc::InvalidParameter, "extended funnel: correlation matrix is not PD");
  }
}

TargetPtr make_crescent() { return std::make_shared<CrescentTarget>(); }

TargetPtr shift(TargetPtr target, const Vector& offset) {
  return std::make_shared<ShiftedTarget>(std::move(target), offset);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::UnknownTarget, "bad number '" + s + "' in target spec '" + spec + "'");
  }
}

int to_int(const std::string& s, const std::string& spec) {
  const double v = to_double(s, spec);
  if (v != std::floor(v) || v < 1) {
    throw Error(Errc::UnknownTarget, "expected a positive count in '" + spec + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

TargetPtr parse_target(const std::string& spec, const std::optional<SchoolsData>& data) {
  const auto parts = split(spec, ':');
  const std::string& kind = parts[0];
  auto arg = [&](std::size_t i) -> const std::string* {
    return i < parts.size() ? &parts[i] : nullptr;
  };
  auto too_many = [&](std::size_t max_parts) {
    if (parts.size() > max_parts) {
      throw Error(Errc::UnknownTarget, "too many fields in target spec '" + spec + "'");
    }
  };
  if (kind == "student") {
    too_many(3);
    const double df = arg(1) ? to_double(*arg(1), spec) : 5.0;
    const double rho = arg(2) ? to_double(*arg(2), spec) : 0.7;
    return make_student_t(df, rho);
  }
  if (kind == "skewnormal") {
    too_many(2);
    const double kappa = arg(1) ? to_double(*arg(1), spec) : 0.0;
    return make_skew_normal(0.0, 2.0, kappa);
  }
  if (kind == "funnel") {
    too_many(3);
    const int n = arg(1) ? to_int(*arg(1), spec) : 2;
    const double c12 = arg(2) ? to_double(*arg(2), spec) : 0.5;
    return make_funnel(n, equicorrelation(n, c12));
  }
  if (kind == "extfunnel") {
    too_many(3);
    const int n = arg(1) ? to_int(*arg(1), spec) : 2;
    const double c12 = arg(2) ? to_double(*arg(2), spec) : 0.5;
    return make_extended_funnel(n, c12);
  }
  if (kind == "crescent") {
    too_many(1);
    return make_crescent();
  }
  if (kind == "schools") {
    too_many(2);
    const std::string variant = arg(1) ? *arg(1) : "centered";
    const SchoolsData d = data ? *data : SchoolsData::canonical();
    if (variant == "centered") return make_schools(d, SchoolsVariant::Centered);
    if (variant == "noncentered") return make_schools(d, SchoolsVariant::Noncentered);
    if (variant == "marginalized") return make_schools(d, SchoolsVariant::Marginalized);
    throw Error(Errc::UnknownTarget, "unknown schools variant '" + variant + "'");
  }
  throw Error(Errc::UnknownTarget, "unknown target '" + spec + "'");
}

}  // namespace symvi
