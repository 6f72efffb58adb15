#include "symvi/families.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "symvi/error.hpp"

namespace symvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double laplace_log_norm(int d) {
  // Normalizer of exp(-|zeta|) on R^d: 2 pi^{d/2} Gamma(d) / Gamma(d/2).
  return std::log(2.0) + 0.5 * d * std::log(std::numbers::pi) + std::lgamma(d) -
         std::lgamma(0.5 * d);
}

void check_dim(const Vector& v, int dim, const char* where) {
  if (v.size() != dim) {
    throw Error(Errc::DimensionMismatch, std::string(where) + ": expected dimension " +
                                             std::to_string(dim) + ", got " +
                                             std::to_string(v.size()));
  }
}

}  // namespace

double BaseDensity::log_density(const Vector& zeta) const {
  check_dim(zeta, dim, "base log_density");
  const double r2 = zeta.squaredNorm();
  switch (kind) {
    case BaseKind::StandardNormal:
      return -0.5 * dim * kLog2Pi - 0.5 * r2;
    case BaseKind::StandardLaplaceIsotropic:
      return -laplace_log_norm(dim) - std::sqrt(r2);
    case BaseKind::StandardStudentT:
      return std::lgamma(0.5 * (df + dim)) - std::lgamma(0.5 * df) -
             0.5 * dim * std::log(df * std::numbers::pi) -
             0.5 * (df + dim) * std::log1p(r2 / df);
  }
  return 0.0;
}

Vector BaseDensity::grad_log_density(const Vector& zeta) const {
  check_dim(zeta, dim, "base grad_log_density");
  switch (kind) {
    case BaseKind::StandardNormal:
      return -zeta;
    case BaseKind::StandardLaplaceIsotropic: {
      const double r = zeta.norm();
      // Subgradient 0 at the cusp.
      if (r == 0.0) return Vector::Zero(dim);
      return -zeta / r;
    }
    case BaseKind::StandardStudentT:
      return -(df + dim) / (df + zeta.squaredNorm()) * zeta;
  }
  return Vector::Zero(dim);
}

double BaseDensity::axis_sd() const {
  switch (kind) {
    case BaseKind::StandardNormal: return 1.0;
    case BaseKind::StandardLaplaceIsotropic: return std::sqrt(dim + 1.0);
    case BaseKind::StandardStudentT: return df > 2.0 ? std::sqrt(df / (df - 2.0)) : 3.0;
  }
  return 1.0;
}

Vector BaseDensity::draw(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector g(dim);
  for (int i = 0; i < dim; ++i) g[i] = normal(rng);
  switch (kind) {
    case BaseKind::StandardNormal:
      return g;
    case BaseKind::StandardLaplaceIsotropic: {
      // Uniform direction, radius ~ Gamma(dim, 1).
      std::gamma_distribution<double> radius(static_cast<double>(dim), 1.0);
      const double r = radius(rng);
      return g * (r / g.norm());
    }
    case BaseKind::StandardStudentT: {
      std::chi_squared_distribution<double> chi2(df);
      const double w = chi2(rng);
      return g * std::sqrt(df / w);
    }
  }
  return g;
}

const char* BaseDensity::name() const {
  switch (kind) {
    case BaseKind::StandardNormal: return "normal";
    case BaseKind::StandardLaplaceIsotropic: return "laplace";
    case BaseKind::StandardStudentT: return "student";
  }
  return "normal";
}

BaseKind parse_base_kind(const std::string& name) {
  if (name == "normal" || name == "gaussian") return BaseKind::StandardNormal;
  if (name == "laplace") return BaseKind::StandardLaplaceIsotropic;
  if (name == "student" || name == "student_t") return BaseKind::StandardStudentT;
  throw Error(Errc::InvalidParameter, "unknown base density '" + name + "'");
}

LocationScaleParams::LocationScaleParams(Vector nu_, Matrix l, BaseDensity b)
    : nu(std::move(nu_)), scale_factor(std::move(l)), base(b) {
  base.dim = static_cast<int>(nu.size());
  validate();
}

LocationScaleParams LocationScaleParams::standard(const BaseDensity& base) {
  return LocationScaleParams(Vector::Zero(base.dim), Matrix::Identity(base.dim, base.dim), base);
}

void LocationScaleParams::validate() const {
  const auto d = nu.size();
  if (d == 0 || scale_factor.rows() != d || scale_factor.cols() != d) {
    throw Error(Errc::DimensionMismatch, "location and scale factor disagree in size");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(scale_factor(i, i) > 0.0) || !std::isfinite(scale_factor(i, i))) {
      throw Error(Errc::InvalidParameter, "scale factor diagonal must be positive");
    }
    for (Eigen::Index j = i + 1; j < d; ++j) {
      if (scale_factor(i, j) != 0.0) {
        throw Error(Errc::InvalidParameter, "scale factor must be lower triangular");
      }
    }
  }
  if (!nu.allFinite() || !scale_factor.allFinite()) {
    throw Error(Errc::InvalidParameter, "non-finite variational parameters");
  }
}

double log_density(const LocationScaleParams& q, const Vector& z) {
  check_dim(z, q.dim(), "log_density");
  Vector zeta = q.scale_factor.triangularView<Eigen::Lower>().solve(z - q.nu);
  return q.base.log_density(zeta) - q.log_det_scale_factor();
}

Vector grad_log_density(const LocationScaleParams& q, const Vector& z) {
  check_dim(z, q.dim(), "grad_log_density");
  Vector zeta = q.scale_factor.triangularView<Eigen::Lower>().solve(z - q.nu);
  Vector g0 = q.base.grad_log_density(zeta);
  return q.scale_factor.transpose().triangularView<Eigen::Upper>().solve(g0);
}

Matrix sample_base(const BaseDensity& base, Rng& rng, int n) {
  Matrix out(base.dim, n);
  for (int k = 0; k < n; ++k) out.col(k) = base.draw(rng);
  return out;
}

Matrix sample(const LocationScaleParams& q, Rng& rng, int n) {
  Matrix zeta = sample_base(q.base, rng, n);
  Matrix z = q.scale_factor.triangularView<Eigen::Lower>() * zeta;
  z.colwise() += q.nu;
  return z;
}

LocationScaleParams LocationFamily::at(const Vector& nu) const {
  check_dim(nu, dim(), "LocationFamily::at");
  LocationScaleParams q = frozen_;
  q.nu = nu;
  return q;
}

double LocationFamily::log_density(const Vector& nu, const Vector& z) const {
  return symvi::log_density(at(nu), z);
}

void LocationFamily::set_scale_factor(const Matrix&) {
  throw Error(Errc::ScaleFrozen, "scale is frozen in a location family");
}

LocationFamily freeze_scale(const LocationScaleParams& q) { return LocationFamily(q); }

nlohmann::json to_json(const LocationScaleParams& q) {
  nlohmann::json j;
  j["family"] = q.base.name();
  if (q.base.kind == BaseKind::StandardStudentT) j["df"] = q.base.df;
  j["nu"] = std::vector<double>(q.nu.data(), q.nu.data() + q.nu.size());
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < q.scale_factor.rows(); ++i) {
    std::vector<double> row(q.scale_factor.cols());
    for (Eigen::Index k = 0; k < q.scale_factor.cols(); ++k) row[k] = q.scale_factor(i, k);
    rows.push_back(row);
  }
  j["scale_factor_rows"] = rows;
  return j;
}

LocationScaleParams params_from_json(const nlohmann::json& j) {
  try {
    BaseDensity base;
    base.kind = parse_base_kind(j.at("family").get<std::string>());
    if (j.contains("df")) base.df = j.at("df").get<double>();
    const auto nu = j.at("nu").get<std::vector<double>>();
    const auto rows = j.at("scale_factor_rows").get<std::vector<std::vector<double>>>();
    const auto d = static_cast<Eigen::Index>(nu.size());
    Matrix l(d, d);
    if (static_cast<Eigen::Index>(rows.size()) != d) {
      throw Error(Errc::DimensionMismatch, "scale_factor_rows has wrong row count");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) {
        throw Error(Errc::DimensionMismatch, "scale_factor_rows has a ragged row");
      }
      for (Eigen::Index k = 0; k < d; ++k) l(i, k) = rows[i][k];
    }
    return LocationScaleParams(Eigen::Map<const Vector>(nu.data(), d), l, base);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("variational parameters: ") + e.what());
  }
}

}  // namespace symvi
