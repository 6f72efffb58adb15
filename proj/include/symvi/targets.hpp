#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symvi/linalg.hpp"
#include "symvi/rng.hpp"

namespace symvi {

enum class SymmetryKind { FullElliptical, FullEven, PartialElliptical, PartialEven, Asymmetric };

const char* symmetry_kind_name(SymmetryKind kind);

// Which coordinates are symmetric, and about what.
//
// For an asymmetric target sigma_indices may still be set: it then names the
// coordinates whose *prior* is symmetric (used to group diagnostics), and
// even_point is empty.
struct SymmetryMeta {
  SymmetryKind kind = SymmetryKind::Asymmetric;
  std::vector<int> sigma_indices;
  std::optional<Vector> even_point;                 // over sigma_indices
  std::optional<PDMatrix> normalized_cov_sigma;     // constant M_sigma, when one exists
};

enum class BenchmarkSource { Analytic, GenerativeSampler, GridQuadrature };

const char* benchmark_source_name(BenchmarkSource source);

struct BenchmarkMoments {
  Vector mean;
  PDMatrix cov;
  BenchmarkSource source;
};

// A target density p on R^dim. Implementations are immutable and every
// method is safe to call concurrently.
class Target {
 public:
  virtual ~Target() = default;

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  // False when log_density is only known up to an additive constant.
  bool normalized() const { return normalized_; }
  const SymmetryMeta& symmetry() const { return symmetry_; }
  const std::optional<BenchmarkMoments>& benchmark() const { return benchmark_; }

  virtual double log_density(const Vector& z) const = 0;
  virtual Vector grad_log_density(const Vector& z) const = 0;
  // Default calls both; targets override when sharing work is cheap.
  virtual double log_density_and_grad(const Vector& z, Vector& grad) const;

  virtual bool has_sampler() const { return false; }
  // Exact (or benchmark) draws, one per column. Throws MissingSampler.
  virtual Matrix sample(Rng& rng, int n) const;

 protected:
  Target(std::string name, int dim, bool normalized)
      : name_(std::move(name)), dim_(dim), normalized_(normalized) {}

  std::string name_;
  int dim_;
  bool normalized_;
  SymmetryMeta symmetry_;
  std::optional<BenchmarkMoments> benchmark_;
};

using TargetPtr = std::shared_ptr<const Target>;

// N(mean, cov).
TargetPtr make_gaussian(const Vector& mean, const PDMatrix& cov);

// Bivariate student-t at the origin with unit scales and the given correlation.
TargetPtr make_student_t(double df, double correlation);
// Student-t at the origin with the given shape matrix, any dimension.
TargetPtr make_student_t(double df, const PDMatrix& shape);

// Skew-normal(location, scale^2, kappa) on R.
TargetPtr make_skew_normal(double location, double scale, double kappa);

// tau ~ N(0,1), theta | tau ~ N(0, e^{2 tau} C); coordinates (tau, theta).
TargetPtr make_funnel(int n_theta, const PDMatrix& correlation_matrix);

// mu ~ N(0,1), tau ~ N(0,1), theta | mu, tau ~ N(mu, e^{2 tau} C) with C
// equicorrelated at c12; coordinates (mu, tau, theta).
TargetPtr make_extended_funnel(int n_theta, double c12);

// x ~ N(0, Sigma), y | x ~ N(a (x^T Sigma^{-1} x - b), c^2) with
// Sigma = 100 [[1, .5], [.5, 1]], a = 0.03, b = 100, c = 0.02.
TargetPtr make_crescent();

// p(z - offset): translates the target, its benchmark and its even point.
TargetPtr shift(TargetPtr target, const Vector& offset);

struct SchoolsData {
  Vector y;
  Vector eta;

  int size() const { return static_cast<int>(y.size()); }
  // Rubin (1981) eight-schools data.
  static SchoolsData canonical();
};

enum class SchoolsVariant { Centered, Noncentered, Marginalized };

const char* schools_variant_name(SchoolsVariant variant);

// CSV with header "y,eta", one school per row. Throws ParseError (with the
// line number) or InvalidData.
SchoolsData ingest_schools_data(const std::string& path);

// Eight-schools posterior with tau on the log scale. Coordinates:
//   centered     (mu, log tau, theta_1..theta_N)
//   noncentered  (mu, log tau, eps_1..eps_N), theta = mu + tau eps
//   marginalized (mu, log tau)
// Benchmarks come from a dense grid over (mu, log tau) with the latent
// effects integrated exactly; sample() resamples that grid.
TargetPtr make_schools(const SchoolsData& data, SchoolsVariant variant);

// Posterior of theta_i given (mu, tau) and the data: N(mean, var).
struct ConditionalNormal {
  double mean;
  double var;
};
ConditionalNormal schools_theta_conditional(double y, double eta, double mu, double tau);

// Builds a target from a CLI spec such as "student:5:0.7", "skewnormal:5",
// "funnel:2", "extfunnel:2:0.5", "crescent", "schools:centered".
// Schools specs use the canonical data unless data is given.
TargetPtr parse_target(const std::string& spec, const std::optional<SchoolsData>& data = {});

}  // namespace symvi
