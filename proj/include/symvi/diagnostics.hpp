#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "symvi/families.hpp"
#include "symvi/optimize.hpp"
#include "symvi/targets.hpp"

namespace symvi {

// Empirical quantile with linear interpolation between order statistics:
// position q (n - 1) in the sorted values. Throws EmptyInput.
double quantile(std::span<const double> values, double q);

enum class Reflection {
  Point,    // z' = 2 mu_hat - z
  Literal,  // z' = mu_hat - z
};

Reflection parse_reflection(const std::string& name);
const char* reflection_name(Reflection r);

struct AsymmetryReport {
  std::vector<double> alpha_values;  // finite values only, in sample order
  double q90 = 0.0;
  int n = 0;           // samples supplied
  int n_excluded = 0;  // samples where either log-density was not finite
  Vector mean_hat;
  Reflection reflection = Reflection::Point;
};

// alpha(z) = |log p(z) - log p(z')| over samples (one per column).
// Requires at least 100 samples (InvalidParameter) and throws
// NonFiniteLogDensity only when every sample is excluded.
AsymmetryReport asymmetry(const Target& target, const Matrix& samples, const Vector& mean_hat,
                          Reflection reflection = Reflection::Point);

enum class CoordGroup { Sigma, SigmaBar, Cross };
const char* coord_group_name(CoordGroup g);

struct MeanError {
  int index = 0;
  CoordGroup group = CoordGroup::Sigma;
  double fitted = 0.0;
  double benchmark = 0.0;
  double benchmark_sd = 0.0;
  double scaled_error = 0.0;  // |fitted - benchmark| / benchmark_sd
};

struct CorrelationError {
  int i = 0;
  int j = 0;
  CoordGroup group = CoordGroup::Sigma;  // Cross when i and j are in different groups
  double fitted = 0.0;
  double benchmark = 0.0;
  double error = 0.0;
};

struct AccuracyReport {
  std::vector<MeanError> means;
  std::vector<CorrelationError> correlations;  // i > j

  // Largest entry within a group; 0 when the group is empty.
  double max_mean_error(CoordGroup g) const;
  double max_correlation_error(CoordGroup g) const;
};

// Groups follow target.symmetry().sigma_indices. Throws MissingBenchmark.
AccuracyReport accuracy(const LocationScaleParams& q, const Target& target);
AccuracyReport accuracy(const FitResult& fit, const Target& target);

// Tidy table: one row per coordinate (kind = mean) and per pair (kind = corr).
void write_accuracy_csv(std::ostream& os, const AccuracyReport& r);
void write_alpha_csv(std::ostream& os, const AsymmetryReport& r);

nlohmann::json to_json(const AsymmetryReport& r);
nlohmann::json to_json(const AccuracyReport& r);

// Shortest round-trip decimal form, used for every numeric output.
std::string format_double(double x);

}  // namespace symvi
