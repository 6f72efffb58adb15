#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "symvi/families.hpp"
#include "symvi/targets.hpp"

namespace symvi {

struct PhiFlags {
  bool convex = true;
  bool strictly_decreasing = false;
  bool linear = false;
  bool differentiable_everywhere = true;
  bool is_f_divergence = true;
};

// D_phi(p || q) = E_q[phi(log p(z) - log q(z))].
struct PhiSpec {
  std::string name;
  std::function<double(double)> phi;
  std::function<double(double)> phi_prime;
  // Order in the (e^{at} - 1) / (a (a - 1)) parameterization.
  std::optional<double> alpha;
  PhiFlags flags;

  // CLI form, e.g. "renyi:0.5".
  std::string label() const;
};

// name in {reverse_kl, renyi, forward_kl, hellinger_sq, total_variation};
// renyi needs alpha > 0, alpha != 1. Throws UnknownDivergence / InvalidAlpha.
// Each returned spec has passed check_phi_invariants.
PhiSpec builtin_phi(const std::string& name, std::optional<double> alpha = {});

// "reverse_kl", "renyi:0.5", ...
PhiSpec parse_divergence(const std::string& spec);

// The five divergences in registry order, with the given Renyi order.
std::vector<PhiSpec> builtin_phis(double renyi_alpha = 0.5);

struct PhiCheck {
  bool zero_at_origin = false;
  bool convex_numerically = false;
  bool concave_numerically = false;
  bool decreasing_numerically = false;
  bool derivative_matches = false;
  double max_convexity_violation = 0.0;
  double max_derivative_error = 0.0;

  // Flags agree with what was measured.
  bool consistent_with(const PhiFlags& flags) const;
};

// Numerical checks on 10^3 random triples / points in [-range, range].
PhiCheck check_phi_invariants(const PhiSpec& phi, std::uint64_t seed = 0, double range = 6.0);

// Set when the objective reported for (phi, target) is not D_phi itself
// because the target is unnormalized and phi is not linear.
std::optional<std::string> unnormalized_warning(const PhiSpec& phi, const Target& target);

struct DivergenceEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo over n reparameterized draws. Draws are split into `shards`
// blocks seeded from (seed, shard index) and reduced in shard order, so the
// result depends only on (seed, n, shards). Throws NonFiniteLogDensity.
DivergenceEstimate estimate(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                            int n, std::uint64_t seed, int shards = 1);

// Same estimator over caller-supplied base draws (one per column); used for
// common-random-number comparisons across parameter values.
DivergenceEstimate estimate_on(const PhiSpec& phi, const Target& target,
                               const LocationScaleParams& q, const Matrix& zeta);

// Deterministic tensor-grid trapezoid rule in base coordinates:
// zeta in [-half_width * sd, half_width * sd]^d, sd the base per-axis sd.
struct QuadratureGrid {
  double half_width = 10.0;
  int points_per_axis = 0;  // 0 picks 16001 (d = 1) or 241 (d = 2)

  int resolved_points(int dim) const;
};

// Nodes and weights (trapezoid weight times q0) of a QuadratureGrid for one
// base density; reusable across many parameter values.
class QuadratureRule {
 public:
  // Throws DimensionTooLarge for d > 2.
  QuadratureRule(const BaseDensity& base, const QuadratureGrid& grid = {});

  const BaseDensity& base() const { return base_; }
  const Matrix& nodes() const { return nodes_; }       // one node per column
  const Vector& weights() const { return weights_; }   // trapezoid weight * q0(node)
  const Vector& log_q0() const { return log_q0_; }

 private:
  BaseDensity base_;
  Matrix nodes_;
  Vector weights_;
  Vector log_q0_;
};

// Throws DimensionTooLarge for d > 2.
double estimate_quadrature(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                           const QuadratureGrid& grid = {});
double estimate_quadrature(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                           const QuadratureRule& rule);

// Gradient with respect to (nu, L); scale_factor is lower triangular.
struct ParamGradient {
  Vector nu;
  Matrix scale_factor;
};

struct GradientEstimate {
  ParamGradient grad;
  double objective = 0.0;
  double objective_std_error = 0.0;
};

// Pathwise (reparameterization) gradient: derivative of
// phi(log p(nu + L zeta) - log q(nu + L zeta)) holding zeta fixed, averaged
// over the same draws that estimate() would use. Throws NonFiniteGradient.
ParamGradient pathwise_grad(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                            int n, std::uint64_t seed, int shards = 1);

// Same estimator over caller-supplied base draws (one per column).
GradientEstimate pathwise_grad_on(const PhiSpec& phi, const Target& target,
                                  const LocationScaleParams& q, const Matrix& zeta);

// Pathwise gradient integrated on the quadrature grid (d <= 2).
ParamGradient quadrature_grad(const PhiSpec& phi, const Target& target,
                              const LocationScaleParams& q, const QuadratureGrid& grid = {});
ParamGradient quadrature_grad(const PhiSpec& phi, const Target& target,
                              const LocationScaleParams& q, const QuadratureRule& rule);

}  // namespace symvi
