#include "symvi/experiments.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "symvi/error.hpp"

namespace symvi {

std::vector<Fig2Row> run_fig2(const Fig2Settings& s) {
  const TargetPtr target = make_student_t(s.df, s.rho);
  const BaseDensity base = BaseDensity::normal(2);
  GridObjective obj;
  obj.quadrature.points_per_axis = s.quadrature_points;
  std::vector<Fig2Row> rows;
  for (const PhiSpec& phi : builtin_phis(s.renyi_alpha)) {
    for (const char* fam : {"meanfield", "fullcov"}) {
      const bool full = std::string(fam) == "fullcov";
      const GridFamily family = full ? scale_corr_grid_family(base) : meanfield_grid_family(base);
      const GridFitResult r = fit_grid(phi, *target, family, full ? s.fullcov : s.meanfield, obj);
      rows.push_back({phi.label(), fam, r.best_point, r.best_value, r.best});
    }
  }
  return rows;
}

std::string fig2_csv(const std::vector<Fig2Row>& rows) {
  std::ostringstream os;
  os << "target,divergence,family,nu1,nu2,sd1,sd2,rho,var1,var2,objective\n";
  for (const auto& r : rows) {
    const Matrix cov = r.params.scale();
    const double rho = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
    os << "student," << r.divergence << ',' << r.family << ',' << format_double(r.params.nu[0])
       << ',' << format_double(r.params.nu[1]) << ',' << format_double(std::sqrt(cov(0, 0)))
       << ',' << format_double(std::sqrt(cov(1, 1))) << ',' << format_double(rho) << ','
       << format_double(cov(0, 0)) << ',' << format_double(cov(1, 1)) << ','
       << format_double(r.objective) << '\n';
  }
  return os.str();
}

std::vector<Fig3Row> run_fig3(const Fig3Settings& s) {
  const BaseDensity base = BaseDensity::laplace(1);
  const LocationScaleParams q0(Vector::Zero(1), Matrix::Identity(1, 1), base);
  const QuadratureRule rule(base, QuadratureGrid{10.0, s.quadrature_points});
  std::vector<Fig3Row> rows;
  for (double kappa : s.kappas) {
    const TargetPtr target = make_skew_normal(s.location, s.scale, kappa);
    const double mean = target->benchmark()->mean[0];
    for (const PhiSpec& phi : builtin_phis(s.renyi_alpha)) {
      // Grid search over nu with the rule reused across points.
      double best = std::numeric_limits<double>::infinity();
      double best_nu = 0.0;
      for (int i = 0; i < s.nu_axis.n_points; ++i) {
        LocationScaleParams q = q0;
        q.nu[0] = s.nu_axis.at(i);
        const double v = estimate_quadrature(phi, *target, q, rule);
        if (v < best) {
          best = v;
          best_nu = q.nu[0];
        }
      }
      rows.push_back({kappa, phi.label(), "grid", -1, best_nu, mean, best_nu - mean});
      if (!phi.flags.differentiable_everywhere) continue;
      for (int seed = 0; seed < s.seeds; ++seed) {
        OptimizerConfig cfg = s.sgd;
        cfg.mode = FamilyMode::LocationOnly;
        cfg.seed = s.base_seed + static_cast<std::uint64_t>(seed);
        const FitResult fit = fit_stochastic(phi, *target, q0, cfg);
        const double nu = fit.params.nu[0];
        rows.push_back({kappa, phi.label(), "sgd", seed, nu, mean, nu - mean});
      }
    }
  }
  return rows;
}

std::string fig3_csv(const std::vector<Fig3Row>& rows) {
  std::ostringstream os;
  os << "target,kappa,divergence,method,seed,nu,target_mean,error\n";
  for (const auto& r : rows) {
    os << "skewnormal," << format_double(r.kappa) << ',' << r.divergence << ',' << r.method << ',';
    if (r.seed >= 0) os << r.seed;
    os << ',' << format_double(r.nu) << ',' << format_double(r.target_mean) << ','
       << format_double(r.error) << '\n';
  }
  return os.str();
}

std::vector<FitStudyRow> run_fit_study(const FitStudySettings& s) {
  std::vector<FitStudyRow> rows;
  for (const auto& spec : s.targets) {
    const TargetPtr target = parse_target(spec);
    const auto& bench = target->benchmark();
    if (!bench) throw Error(Errc::MissingBenchmark, "target '" + spec + "' has no benchmark");
    const LocationScaleParams init = LocationScaleParams::standard(BaseDensity::normal(target->dim()));
    for (const auto& div : s.divergences) {
      const PhiSpec phi = parse_divergence(div);
      for (int seed = 0; seed < s.seeds; ++seed) {
        OptimizerConfig cfg = s.sgd;
        cfg.seed = s.base_seed + static_cast<std::uint64_t>(seed);
        const FitResult fit = fit_stochastic(phi, *target, init, cfg);
        const AccuracyReport acc = accuracy(fit, *target);
        for (const auto& e : acc.means) {
          rows.push_back({spec, phi.label(), seed, "mean", e.index, e.index,
                          coord_group_name(e.group), e.fitted, e.benchmark, e.scaled_error});
        }
        for (const auto& e : acc.correlations) {
          rows.push_back({spec, phi.label(), seed, "corr", e.i, e.j, coord_group_name(e.group),
                          e.fitted, e.benchmark, e.error});
        }
        const double v = fit.params.base.axis_sd();
        const Matrix cov = v * v * fit.params.scale();
        for (int i = 0; i < target->dim(); ++i) {
          for (int j = 0; j <= i; ++j) {
            const double b = bench->cov(i, j);
            rows.push_back({spec, phi.label(), seed, "cov", i, j, "", cov(i, j), b,
                            std::abs(cov(i, j) - b)});
          }
        }
      }
    }
  }
  return rows;
}

std::string fit_study_csv(const std::vector<FitStudyRow>& rows) {
  std::ostringstream os;
  os << "target,divergence,seed,quantity,i,j,group,fitted,benchmark,error\n";
  for (const auto& r : rows) {
    os << r.target << ',' << r.divergence << ',' << r.seed << ',' << r.quantity << ',' << r.i
       << ',' << r.j << ',' << r.group << ',' << format_double(r.fitted) << ','
       << format_double(r.benchmark) << ',' << format_double(r.error) << '\n';
  }
  return os.str();
}

FitStudySettings fig1_settings() {
  FitStudySettings s;
  s.targets = {"funnel:2:0.5"};
  s.seeds = 5;
  return s;
}

FitStudySettings fig4_settings() {
  FitStudySettings s;
  s.targets = {"funnel:2:0.5", "crescent", "schools:centered", "schools:noncentered",
               "schools:marginalized"};
  s.seeds = 5;
  return s;
}

std::vector<Table2Row> run_table2(const Table2Settings& s) {
  std::vector<Table2Row> rows;
  for (const auto& spec : s.targets) {
    const TargetPtr target = parse_target(spec);
    if (!target->benchmark()) throw Error(Errc::MissingBenchmark, "target '" + spec + "' has no benchmark");
    Rng rng = make_rng(s.seed);
    const Matrix x = target->sample(rng, s.n);
    const AsymmetryReport r = asymmetry(*target, x, target->benchmark()->mean, s.reflection);
    rows.push_back({spec, r.q90, r.n, r.n_excluded});
  }
  return rows;
}

std::string table2_csv(const std::vector<Table2Row>& rows) {
  std::ostringstream os;
  os << "target,alpha90,n,n_excluded\n";
  for (const auto& r : rows) {
    os << r.target << ',' << format_double(r.q90) << ',' << r.n << ',' << r.n_excluded << '\n';
  }
  return os.str();
}

}  // namespace symvi
