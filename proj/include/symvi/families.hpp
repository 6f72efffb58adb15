#pragma once

#include <json.hpp>

#include "symvi/linalg.hpp"
#include "symvi/rng.hpp"

namespace symvi {

enum class BaseKind { StandardNormal, StandardLaplaceIsotropic, StandardStudentT };

// Spherically symmetric base density q0 on R^dim.
struct BaseDensity {
  BaseKind kind = BaseKind::StandardNormal;
  int dim = 1;
  double df = 5.0;  // StandardStudentT only

  static BaseDensity normal(int dim) { return {BaseKind::StandardNormal, dim, 5.0}; }
  static BaseDensity laplace(int dim) { return {BaseKind::StandardLaplaceIsotropic, dim, 5.0}; }
  static BaseDensity student(int dim, double df = 5.0) {
    return {BaseKind::StandardStudentT, dim, df};
  }

  double log_density(const Vector& zeta) const;
  Vector grad_log_density(const Vector& zeta) const;
  // Per-axis standard deviation; sets quadrature coverage.
  double axis_sd() const;
  Vector draw(Rng& rng) const;
  const char* name() const;
};

BaseKind parse_base_kind(const std::string& name);

// q(z) = q0(L^{-1}(z - nu)) / |det L|, with L lower triangular, positive
// diagonal, and S = L L^T.
struct LocationScaleParams {
  Vector nu;
  Matrix scale_factor;
  BaseDensity base;

  LocationScaleParams() = default;
  LocationScaleParams(Vector nu_, Matrix l, BaseDensity b);

  static LocationScaleParams standard(const BaseDensity& base);

  int dim() const { return static_cast<int>(nu.size()); }
  Matrix scale() const { return scale_factor * scale_factor.transpose(); }
  double log_det_scale_factor() const { return scale_factor.diagonal().array().log().sum(); }
  // Throws InvalidParameter unless L is lower triangular with positive diagonal.
  void validate() const;
};

double log_density(const LocationScaleParams& q, const Vector& z);
Vector grad_log_density(const LocationScaleParams& q, const Vector& z);

// Draws z = nu + L zeta, one sample per column.
Matrix sample(const LocationScaleParams& q, Rng& rng, int n);
// Raw base draws zeta, one per column.
Matrix sample_base(const BaseDensity& base, Rng& rng, int n);

// Location family obtained by fixing the scale factor of a location-scale
// family; only nu is free.
class LocationFamily {
 public:
  explicit LocationFamily(const LocationScaleParams& q) : frozen_(q) {}

  LocationScaleParams at(const Vector& nu) const;
  double log_density(const Vector& nu, const Vector& z) const;
  const Matrix& scale_factor() const { return frozen_.scale_factor; }
  const BaseDensity& base() const { return frozen_.base; }
  int dim() const { return frozen_.dim(); }

  // Always throws ScaleFrozen.
  [[noreturn]] void set_scale_factor(const Matrix& l);

 private:
  LocationScaleParams frozen_;
};

LocationFamily freeze_scale(const LocationScaleParams& q);

nlohmann::json to_json(const LocationScaleParams& q);
LocationScaleParams params_from_json(const nlohmann::json& j);

}  // namespace symvi
