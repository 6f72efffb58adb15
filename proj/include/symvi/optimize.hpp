#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "symvi/divergences.hpp"
#include "symvi/families.hpp"
#include "symvi/targets.hpp"

namespace symvi {

// Which entries of (nu, L) are free.
enum class FamilyMode {
  Full,          // nu and the whole lower triangle of L
  MeanField,     // nu and diag(L)
  LocationOnly,  // nu; L frozen at its initial value
};

const char* family_mode_name(FamilyMode mode);
FamilyMode parse_family_mode(const std::string& name);

struct OptimizerConfig {
  int batch_size = 50;
  int max_iters = 20000;
  double step_size = 0.05;
  // Step size at iteration t is step_size / sqrt(1 + t / decay_scale).
  double decay_scale = 100.0;
  int smoothing_window = 50;
  double rel_tol = 1e-2;
  int min_iters = 2000;
  // Returned parameters are the mean of the last average_window iterates.
  int average_window = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool warm_start_meanfield = true;
  FamilyMode mode = FamilyMode::Full;

  // Throws InvalidParameter.
  void validate() const;
};

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;  // windowed median of per-iteration batch estimates
  double std_error = 0.0;  // standard error of that median
  std::string phase;
};

struct FitResult {
  LocationScaleParams params;
  std::vector<TracePoint> trace;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  OptimizerConfig config;
  std::string divergence;
  std::string target;
  std::vector<std::string> warnings;
};

// Adaptive-moment descent on pathwise gradients of D_phi. With
// cfg.warm_start_meanfield and cfg.mode == Full, a diagonal-L phase runs
// first and its diagonal seeds the full phase. A phase ends when the relative
// change between consecutive windowed medians of the objective drops below
// rel_tol (after min_iters) or at max_iters; in the latter case converged is
// false. Throws InvalidParameter for phi that are not differentiable
// everywhere, NonFiniteGradient (what() carries the last trace point) and
// NonFiniteLogDensity when the initial point is degenerate.
FitResult fit_stochastic(const PhiSpec& phi, const Target& target, const LocationScaleParams& init,
                         const OptimizerConfig& cfg);

struct GridAxis {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  int n_points = 2;

  double at(int i) const { return n_points == 1 ? lo : lo + (hi - lo) * i / (n_points - 1); }
  double step() const { return (hi - lo) / (n_points - 1); }
};

struct GridSpec {
  std::vector<GridAxis> axes;

  // Throws InvalidParameter (lo >= hi or n < 2).
  void validate() const;
  std::size_t total_points() const;
};

// Maps a grid point to family parameters.
struct GridFamily {
  std::string name;
  BaseDensity base;
  std::function<LocationScaleParams(std::span<const double>)> map;
};

// Axes: nu (scale factor frozen at q's value).
GridFamily location_grid_family(const LocationScaleParams& q);
// Axes: nu_1..nu_d, sd_1..sd_d.
GridFamily meanfield_grid_family(const BaseDensity& base);
// d = 2 only. Axes: nu_1, nu_2, sd_1, sd_2, rho; S = [[sd1^2, rho sd1 sd2], ...].
GridFamily scale_corr_grid_family(const BaseDensity& base);

struct GridObjective {
  bool use_quadrature = true;  // otherwise fixed-seed Monte Carlo
  QuadratureGrid quadrature;
  int mc_samples = 10000;
  std::uint64_t seed = 0;
};

struct GridFitResult {
  LocationScaleParams best;
  std::vector<double> best_point;
  double best_value = 0.0;
  std::vector<double> surface;  // row-major over the axes, first axis slowest
  GridSpec grid;
};

// Exhaustive search. Ties go to the first point in row-major order.
// Throws GridTooLarge above 10^7 points.
GridFitResult fit_grid(const PhiSpec& phi, const Target& target, const GridFamily& family,
                       const GridSpec& grid, const GridObjective& objective = {});

// For an elliptically symmetric target with even point mu and normalized
// covariance M, minimizes gamma -> D_phi(p || q_{mu, gamma^2 M}) by
// golden-section search in log gamma on [1e-3, 1e3] (tolerance 1e-7). With
// objective.use_quadrature the profile is integrated exactly along the radius
// (any dimension); otherwise it is fixed-seed Monte Carlo.
// Throws NoBracket if the minimum sits on the interval boundary and
// MissingBenchmark if the target lacks the symmetry metadata.
double solve_gamma(const PhiSpec& phi, const Target& target, const BaseDensity& base,
                   const GridObjective& objective = {});

}  // namespace symvi
