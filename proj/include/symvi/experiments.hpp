#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symvi/diagnostics.hpp"
#include "symvi/optimize.hpp"

namespace symvi {

// Student-t (df 5, rho 0.7) against Gaussian q, grid search for every
// builtin divergence with a factorized and a full-covariance family.
struct Fig2Settings {
  double df = 5.0;
  double rho = 0.7;
  double renyi_alpha = 0.5;
  int quadrature_points = 33;
  GridSpec meanfield{{{"nu1", -0.5, 0.5, 11},
                      {"nu2", -0.5, 0.5, 11},
                      {"sd1", 0.6, 1.6, 26},
                      {"sd2", 0.6, 1.6, 26}}};
  GridSpec fullcov{{{"nu1", -0.1, 0.1, 3},
                    {"nu2", -0.1, 0.1, 3},
                    {"sd1", 1.0, 1.35, 36},
                    {"sd2", 1.0, 1.35, 36},
                    {"rho", 0.55, 0.85, 13}}};
};

struct Fig2Row {
  std::string divergence;
  std::string family;  // meanfield | fullcov
  std::vector<double> point;  // argmin, in the family's axis order
  double objective = 0.0;
  LocationScaleParams params;
};

std::vector<Fig2Row> run_fig2(const Fig2Settings& s);
std::string fig2_csv(const std::vector<Fig2Row>& rows);

// Skew-normal(0, 2^2, kappa) against Laplace(nu, 1): grid argmin over nu and
// location-only stochastic fits (not for phi that are not differentiable
// everywhere, which get grid rows only).
struct Fig3Settings {
  std::vector<double> kappas{0, 1, 2, 3, 4, 5};
  double location = 0.0;
  double scale = 2.0;
  double renyi_alpha = 0.5;
  GridAxis nu_axis{"nu", -3.0, 3.0, 1201};
  int quadrature_points = 16001;
  int seeds = 10;
  std::uint64_t base_seed = 0;
  OptimizerConfig sgd;
};

struct Fig3Row {
  double kappa = 0.0;
  std::string divergence;
  std::string method;  // grid | sgd
  int seed = -1;       // -1 for grid rows
  double nu = 0.0;
  double target_mean = 0.0;
  double error = 0.0;  // nu - target_mean
};

std::vector<Fig3Row> run_fig3(const Fig3Settings& s);
std::string fig3_csv(const std::vector<Fig3Row>& rows);

// Stochastic fits with accuracy against the benchmark, one tidy row per
// (target, divergence, seed, quantity).
struct FitStudySettings {
  std::vector<std::string> targets;
  std::vector<std::string> divergences{"reverse_kl"};
  int seeds = 1;
  std::uint64_t base_seed = 0;
  OptimizerConfig sgd;
};

struct FitStudyRow {
  std::string target;
  std::string divergence;
  int seed = 0;
  std::string quantity;  // mean | corr | cov
  int i = 0;
  int j = 0;
  std::string group;
  double fitted = 0.0;
  double benchmark = 0.0;
  double error = 0.0;  // scaled mean error, absolute correlation error, or empty for cov
};

std::vector<FitStudyRow> run_fit_study(const FitStudySettings& s);
std::string fit_study_csv(const std::vector<FitStudyRow>& rows);

// Funnel (n_theta 2, C12 0.5), reverse KL, full covariance.
FitStudySettings fig1_settings();
// Funnel, crescent and the three schools parameterizations.
FitStudySettings fig4_settings();

struct Table2Row {
  std::string target;
  double q90 = 0.0;
  int n = 0;
  int n_excluded = 0;
};

struct Table2Settings {
  std::vector<std::string> targets{"student:5:0.5",       "extfunnel:2:0.5",
                                   "crescent",            "schools:centered",
                                   "schools:noncentered", "schools:marginalized"};
  int n = 20000;
  std::uint64_t seed = 0;
  Reflection reflection = Reflection::Point;
};

std::vector<Table2Row> run_table2(const Table2Settings& s);
std::string table2_csv(const std::vector<Table2Row>& rows);

}  // namespace symvi
