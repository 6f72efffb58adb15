#include "symvi/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "symvi/error.hpp"

namespace symvi {

const char* family_mode_name(FamilyMode mode) {
  switch (mode) {
    case FamilyMode::Full: return "full";
    case FamilyMode::MeanField: return "meanfield";
    case FamilyMode::LocationOnly: return "location";
  }
  return "?";
}

FamilyMode parse_family_mode(const std::string& name) {
  if (name == "full") return FamilyMode::Full;
  if (name == "meanfield") return FamilyMode::MeanField;
  if (name == "location") return FamilyMode::LocationOnly;
  throw Error(Errc::InvalidParameter, "unknown family mode '" + name + "'");
}

void OptimizerConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidParameter, what); };
  if (batch_size < 2) bad("batch_size must be >= 2");
  if (max_iters < 1) bad("max_iters must be >= 1");
  if (!(step_size > 0.0)) bad("step_size must be positive");
  if (!(decay_scale > 0.0)) bad("decay_scale must be positive");
  if (smoothing_window < 1) bad("smoothing_window must be >= 1");
  if (!(rel_tol > 0.0)) bad("rel_tol must be positive");
  if (min_iters < 0) bad("min_iters must be >= 0");
  if (average_window < 1) bad("average_window must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) bad("adam_eps must be positive");
}

namespace {

// theta = (nu, packed lower triangle of L row by row, diagonal as log).
Vector pack(const LocationScaleParams& q) {
  const int d = q.dim();
  Vector theta(d + d * (d + 1) / 2);
  theta.head(d) = q.nu;
  int k = d;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      theta[k++] = i == j ? std::log(q.scale_factor(i, i)) : q.scale_factor(i, j);
    }
  }
  return theta;
}

LocationScaleParams unpack(const Vector& theta, const BaseDensity& base) {
  const int d = base.dim;
  Matrix l = Matrix::Zero(d, d);
  int k = d;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      l(i, j) = i == j ? std::exp(theta[k]) : theta[k];
      ++k;
    }
  }
  return LocationScaleParams(theta.head(d), l, base);
}

Vector pack_grad(const ParamGradient& g, const LocationScaleParams& q) {
  const int d = q.dim();
  Vector out(d + d * (d + 1) / 2);
  out.head(d) = g.nu;
  int k = d;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      out[k++] = i == j ? g.scale_factor(i, i) * q.scale_factor(i, i) : g.scale_factor(i, j);
    }
  }
  return out;
}

Vector free_mask(int d, FamilyMode mode) {
  Vector mask = Vector::Zero(d + d * (d + 1) / 2);
  mask.head(d).setOnes();
  int k = d;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (mode == FamilyMode::Full || (mode == FamilyMode::MeanField && i == j)) mask[k] = 1.0;
      ++k;
    }
  }
  return mask;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct PhaseOutcome {
  Vector theta;
  bool converged = false;
};

PhaseOutcome run_phase(const PhiSpec& phi, const Target& target, const BaseDensity& base,
                       Vector theta, FamilyMode mode, const char* phase, const OptimizerConfig& cfg,
                       int& counter, std::vector<TracePoint>& trace) {
  const Vector mask = free_mask(base.dim, mode);
  const Eigen::Index p = theta.size();
  Vector m = Vector::Zero(p);
  Vector v = Vector::Zero(p);
  std::vector<double> window;
  window.reserve(cfg.smoothing_window);
  std::deque<Vector> recent;
  Vector recent_sum = Vector::Zero(p);
  std::optional<double> prev_median;
  bool converged = false;

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const LocationScaleParams q = unpack(theta, base);
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(counter++));
    const Matrix zeta = sample_base(base, rng, cfg.batch_size);
    GradientEstimate est;
    try {
      est = pathwise_grad_on(phi, target, q, zeta);
    } catch (const Error& e) {
      std::ostringstream os;
      os << e.what() << " (phase " << phase << ", iteration " << t;
      if (!trace.empty()) {
        os << "; last trace point: iteration " << trace.back().iteration << ", objective "
           << trace.back().objective;
      }
      os << ")";
      throw Error(Errc::NonFiniteGradient, os.str());
    }
    const Vector g = pack_grad(est.grad, q).cwiseProduct(mask);
    if (!g.allFinite()) {
      throw Error(Errc::NonFiniteGradient,
                  std::string("non-finite gradient in phase ") + phase + " at iteration " +
                      std::to_string(t));
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double mhat_scale = 1.0 / (1.0 - std::pow(cfg.beta1, t));
    const double vhat_scale = 1.0 / (1.0 - std::pow(cfg.beta2, t));
    const double lr = cfg.step_size / std::sqrt(1.0 + t / cfg.decay_scale);
    theta.array() -= lr * (m.array() * mhat_scale) /
                     ((v.array() * vhat_scale).sqrt() + cfg.adam_eps);

    recent.push_back(theta);
    recent_sum += theta;
    if (static_cast<int>(recent.size()) > cfg.average_window) {
      recent_sum -= recent.front();
      recent.pop_front();
    }

    window.push_back(est.objective);
    if (static_cast<int>(window.size()) == cfg.smoothing_window) {
      const double med = median_of(window);
      // Asymptotic standard error of a median of normal draws.
      const double se = 1.2533 * sd_of(window) / std::sqrt(static_cast<double>(window.size()));
      trace.push_back({counter, med, se, phase});
      window.clear();
      if (prev_median && t >= cfg.min_iters) {
        const double rel = std::abs(med - *prev_median) / std::max(std::abs(*prev_median), 1.0);
        if (rel < cfg.rel_tol) {
          converged = true;
          break;
        }
      }
      prev_median = med;
    }
  }
  if (!window.empty()) {
    const double se = 1.2533 * sd_of(window) / std::sqrt(static_cast<double>(window.size()));
    trace.push_back({counter, median_of(window), se, phase});
  }
  return {recent_sum / static_cast<double>(recent.size()), converged};
}

}  // namespace

FitResult fit_stochastic(const PhiSpec& phi, const Target& target, const LocationScaleParams& init,
                         const OptimizerConfig& cfg) {
  cfg.validate();
  init.validate();
  if (!phi.flags.differentiable_everywhere) {
    throw Error(Errc::InvalidParameter,
                phi.label() + " is not differentiable everywhere; use grid search instead");
  }
  if (init.dim() != target.dim()) {
    throw Error(Errc::DimensionMismatch, "initial parameters and target differ in dimension");
  }
  if (!std::isfinite(target.log_density(init.nu))) {
    throw Error(Errc::NonFiniteLogDensity,
                "target log-density is not finite at the initial location; choose another init");
  }
  FitResult out;
  out.seed = cfg.seed;
  out.config = cfg;
  out.divergence = phi.label();
  out.target = target.name();
  if (auto w = unnormalized_warning(phi, target)) out.warnings.push_back(*w);

  int counter = 0;
  Vector theta = pack(init);
  bool converged = true;
  if (cfg.mode == FamilyMode::Full && cfg.warm_start_meanfield && init.dim() > 1) {
    // Start from the diagonal of init.
    LocationScaleParams diag_init = init;
    diag_init.scale_factor = Matrix(init.scale_factor.diagonal().asDiagonal());
    PhaseOutcome mf = run_phase(phi, target, init.base, pack(diag_init), FamilyMode::MeanField,
                                "meanfield", cfg, counter, out.trace);
    converged = mf.converged;
    LocationScaleParams warm = unpack(mf.theta, init.base);
    warm.scale_factor = Matrix(warm.scale_factor.diagonal().asDiagonal());
    theta = pack(warm);
  }
  const char* phase = family_mode_name(cfg.mode);
  PhaseOutcome last = run_phase(phi, target, init.base, theta, cfg.mode, phase, cfg, counter,
                                out.trace);
  out.converged = converged && last.converged;
  out.iterations = counter;
  out.params = unpack(last.theta, init.base);
  if (cfg.mode == FamilyMode::LocationOnly) out.params.scale_factor = init.scale_factor;
  if (!out.converged) {
    out.warnings.push_back("did not converge within max_iters; returning the averaged final iterate");
  }
  return out;
}

void GridSpec::validate() const {
  if (axes.empty()) throw Error(Errc::InvalidParameter, "grid has no axes");
  for (const auto& a : axes) {
    if (!(a.lo < a.hi) || a.n_points < 2) {
      throw Error(Errc::InvalidParameter,
                  "grid axis '" + a.name + "' needs lo < hi and at least 2 points");
    }
  }
}

std::size_t GridSpec::total_points() const {
  double total = 1.0;
  for (const auto& a : axes) total *= a.n_points;
  if (total > 1e18) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(total);
}

GridFamily location_grid_family(const LocationScaleParams& q) {
  return {"location", q.base, [q](std::span<const double> x) {
            LocationScaleParams out = q;
            for (int i = 0; i < q.dim(); ++i) out.nu[i] = x[i];
            return out;
          }};
}

GridFamily meanfield_grid_family(const BaseDensity& base) {
  return {"meanfield", base, [base](std::span<const double> x) {
            const int d = base.dim;
            Vector nu(d), sd(d);
            for (int i = 0; i < d; ++i) {
              nu[i] = x[i];
              sd[i] = x[d + i];
            }
            return LocationScaleParams(nu, Matrix(sd.asDiagonal()), base);
          }};
}

GridFamily scale_corr_grid_family(const BaseDensity& base) {
  if (base.dim != 2) {
    throw Error(Errc::DimensionMismatch, "scale/correlation grid family is two-dimensional");
  }
  return {"fullcov", base, [base](std::span<const double> x) {
            const double s1 = x[2], s2 = x[3], rho = x[4];
            Matrix l = Matrix::Zero(2, 2);
            l(0, 0) = s1;
            l(1, 0) = rho * s2;
            l(1, 1) = s2 * std::sqrt(1.0 - rho * rho);
            return LocationScaleParams(Vector{{x[0], x[1]}}, l, base);
          }};
}

GridFitResult fit_grid(const PhiSpec& phi, const Target& target, const GridFamily& family,
                       const GridSpec& grid, const GridObjective& objective) {
  grid.validate();
  const std::size_t total = grid.total_points();
  if (total > 10'000'000) {
    throw Error(Errc::GridTooLarge, std::to_string(total) + " grid points exceed 10^7");
  }
  const std::size_t k = grid.axes.size();
  std::vector<double> point(k);
  const BaseDensity& base = family.base;

  std::optional<QuadratureRule> rule;
  Matrix zeta;
  if (objective.use_quadrature) {
    rule.emplace(base, objective.quadrature);
  } else {
    Rng rng = make_rng(objective.seed, 0);
    zeta = sample_base(base, rng, objective.mc_samples);
  }

  GridFitResult out;
  out.grid = grid;
  out.surface.resize(total);
  out.best_value = std::numeric_limits<double>::infinity();
  std::size_t best_index = total;
  std::vector<int> idx(k, 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rem = n;
    for (std::size_t a = k; a-- > 0;) {
      idx[a] = static_cast<int>(rem % grid.axes[a].n_points);
      rem /= grid.axes[a].n_points;
      point[a] = grid.axes[a].at(idx[a]);
    }
    double value = std::numeric_limits<double>::infinity();
    try {
      const LocationScaleParams q = family.map(point);
      value = rule ? estimate_quadrature(phi, target, q, *rule)
                   : estimate_on(phi, target, q, zeta).value;
    } catch (const Error& e) {
      if (e.code() == Errc::DimensionMismatch) throw;
    }
    if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
    out.surface[n] = value;
    if (value < out.best_value) {
      out.best_value = value;
      best_index = n;
      out.best_point = point;
    }
  }
  if (best_index == total) {
    throw Error(Errc::NonFiniteLogDensity, "objective is not finite anywhere on the grid");
  }
  out.best = family.map(out.best_point);
  return out;
}

double solve_gamma(const PhiSpec& phi, const Target& target, const BaseDensity& base,
                   const GridObjective& objective) {
  const SymmetryMeta& sym = target.symmetry();
  const int d = target.dim();
  if (!sym.normalized_cov_sigma || !sym.even_point ||
      static_cast<int>(sym.sigma_indices.size()) != d || base.dim != d) {
    throw Error(Errc::MissingBenchmark,
                "solve_gamma needs a fully elliptical target with known M and even point");
  }
  const Vector mu = *sym.even_point;
  const Matrix lm = sym.normalized_cov_sigma->chol();

  // Both densities are functions of the radius r in the coordinates
  // u = L_M^{-1}(z - mu), so D reduces to a 1-D integral over s = log r:
  //   D(gamma) = A_d int q0(r / gamma) gamma^{-d} phi(t(r)) r^d ds.
  // The nodes are placed relative to gamma, so every gamma is resolved.
  constexpr int kRadial = 20001;
  constexpr double kTailT = 600.0;
  const double log_area = std::log(2.0) + 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d);
  const double log_det_lm = lm.diagonal().array().log().sum();
  Vector log_p_ref(kRadial);  // log p at radius exp(s_k) * gamma, filled per gamma
  Matrix zeta;
  if (!objective.use_quadrature) {
    Rng rng = make_rng(objective.seed, 0);
    zeta = sample_base(base, rng, objective.mc_samples);
  }
  auto radial = [&](double log_gamma) {
    const double s_lo = -30.0, s_hi = 12.0, h = (s_hi - s_lo) / (kRadial - 1);
    Vector e1 = Vector::Zero(d), u0 = Vector::Zero(d);
    e1[0] = 1.0;
    double sum = 0.0;
    for (int k = 0; k < kRadial; ++k) {
      const double s = s_lo + k * h;  // log of the base radius r / gamma
      const double rb = std::exp(s);
      u0[0] = rb;
      const double log_q0 = base.log_density(u0);
      const double log_w = log_area + log_q0 + d * s;
      const double log_q = log_q0 - d * log_gamma - log_det_lm;
      const double log_p = target.log_density(mu + lm * (std::exp(log_gamma) * rb * e1));
      const double t = log_p - log_q;
      if (log_w < -745.0 && log_w + t < -745.0) continue;
      // Far in q's tail write q phi(t) = p phi(t) e^{-t}, holding the second
      // factor at its value for t = 600.
      const double term = t > kTailT ? std::exp(log_w + t) * phi.phi(kTailT) * std::exp(-kTailT)
                                     : std::exp(log_w) * phi.phi(t);
      if (!std::isfinite(term)) return std::numeric_limits<double>::infinity();
      sum += ((k == 0 || k == kRadial - 1) ? 0.5 : 1.0) * term;
    }
    return sum * h;
  };
  auto f = [&](double log_gamma) {
    double v = std::numeric_limits<double>::infinity();
    try {
      if (objective.use_quadrature) {
        v = radial(log_gamma);
      } else {
        const LocationScaleParams q(mu, std::exp(log_gamma) * lm, base);
        v = estimate_on(phi, target, q, zeta).value;
      }
    } catch (const Error& e) {
      if (!e.is_numeric()) throw;
    }
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  const double lo = std::log(1e-3), hi = std::log(1e3);
  const int n_scan = 121;
  std::vector<double> xs(n_scan), fs(n_scan);
  int best = 0;
  for (int i = 0; i < n_scan; ++i) {
    xs[i] = lo + (hi - lo) * i / (n_scan - 1);
    fs[i] = f(xs[i]);
    if (fs[i] < fs[best]) best = i;
  }
  if (!std::isfinite(fs[best]) || best == 0 || best == n_scan - 1) {
    throw Error(Errc::NoBracket, "no interior minimum of the gamma profile on [1e-3, 1e3]");
  }
  int local_minima = 0;
  for (int i = 1; i + 1 < n_scan; ++i) {
    if (fs[i] < fs[i - 1] && fs[i] < fs[i + 1]) ++local_minima;
  }
  if (local_minima > 1) {
    throw Error(Errc::NoBracket, "gamma profile is not unimodal on [1e-3, 1e3]");
  }

  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = xs[best - 1], b = xs[best + 1];
  double c = b - invphi * (b - a), e = a + invphi * (b - a);
  double fc = f(c), fe = f(e);
  // Relative tolerance on gamma equals absolute tolerance on log gamma.
  while (b - a > 1e-7) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + invphi * (b - a);
      fe = f(e);
    }
  }
  return std::exp(0.5 * (a + b));
}

}  // namespace symvi
