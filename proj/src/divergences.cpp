#include "symvi/divergences.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "symvi/error.hpp"

namespace symvi {

std::string PhiSpec::label() const {
  if (!alpha) return name;
  std::ostringstream os;
  os << name << ':' << *alpha;
  return os.str();
}

namespace {

PhiSpec make_builtin(const std::string& name, std::optional<double> alpha) {
  PhiSpec s;
  s.name = name;
  if (name == "reverse_kl") {
    s.phi = [](double t) { return -t; };
    s.phi_prime = [](double) { return -1.0; };
    s.flags = {true, true, true, true, true};
    return s;
  }
  if (name == "renyi") {
    if (!alpha) throw Error(Errc::InvalidAlpha, "renyi needs an order, e.g. renyi:0.5");
    const double a = *alpha;
    if (!std::isfinite(a) || a <= 0.0 || a == 1.0) {
      throw Error(Errc::InvalidAlpha, "renyi order must be positive and not 1");
    }
    const double denom = a * (a - 1.0);
    s.alpha = a;
    s.phi = [a, denom](double t) { return std::expm1(a * t) / denom; };
    s.phi_prime = [a, denom](double t) { return a * std::exp(a * t) / denom; };
    const bool inside = a < 1.0;
    // For a in (0, 1) phi is decreasing and concave; it is not an f-divergence.
    s.flags = {!inside, inside, false, true, !inside};
    return s;
  }
  if (alpha) {
    throw Error(Errc::InvalidAlpha, "divergence '" + name + "' takes no order");
  }
  if (name == "forward_kl") {
    s.phi = [](double t) { return std::exp(t) * t; };
    s.phi_prime = [](double t) { return std::exp(t) * (1.0 + t); };
    // phi'' = e^t (2 + t): concave below t = -2.
    s.flags = {false, false, false, true, true};
    return s;
  }
  if (name == "hellinger_sq") {
    s.phi = [](double t) {
      const double e = std::expm1(0.5 * t);
      return e * e;
    };
    s.phi_prime = [](double t) { return std::expm1(0.5 * t) * std::exp(0.5 * t); };
    // phi'' = e^{t/2} (e^{t/2} - 1/2): concave below t = -2 ln 2.
    s.flags = {false, false, false, true, true};
    return s;
  }
  if (name == "total_variation") {
    s.phi = [](double t) { return std::abs(std::expm1(t)); };
    // Subgradient 0 at the kink t = 0.
    s.phi_prime = [](double t) {
      if (t == 0.0) return 0.0;
      return t > 0.0 ? std::exp(t) : -std::exp(t);
    };
    // Concave on t < 0.
    s.flags = {false, false, false, false, true};
    return s;
  }
  throw Error(Errc::UnknownDivergence, "unknown divergence '" + name + "'");
}

}  // namespace

bool PhiCheck::consistent_with(const PhiFlags& flags) const {
  if (!zero_at_origin) return false;
  if (flags.convex != convex_numerically) return false;
  if (flags.strictly_decreasing && !decreasing_numerically) return false;
  if (flags.linear && !(convex_numerically && concave_numerically)) return false;
  if (flags.differentiable_everywhere && !derivative_matches) return false;
  return true;
}

PhiCheck check_phi_invariants(const PhiSpec& phi, std::uint64_t seed, double range) {
  PhiCheck c;
  c.zero_at_origin = phi.phi(0.0) == 0.0;
  Rng rng = make_rng(seed, 0x9417);
  std::uniform_real_distribution<double> unif(-range, range);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  constexpr int kTriples = 1000;
  constexpr double kSlack = 1e-9;
  double worst_convex = 0.0;
  double worst_concave = 0.0;
  bool decreasing = true;
  for (int k = 0; k < kTriples; ++k) {
    double t0 = unif(rng);
    double t1 = unif(rng);
    if (t0 > t1) std::swap(t0, t1);
    if (t1 - t0 < 1e-6) continue;
    const double l = lam(rng);
    const double tl = (1.0 - l) * t0 + l * t1;
    const double chord = (1.0 - l) * phi.phi(t0) + l * phi.phi(t1);
    const double f = phi.phi(tl);
    // Scale the slack with magnitude so large exponentials do not trip it.
    const double tol = kSlack * (1.0 + std::abs(chord));
    worst_convex = std::max(worst_convex, f - chord - tol);
    worst_concave = std::max(worst_concave, chord - f - tol);
    if (!(phi.phi(t1) < phi.phi(t0))) decreasing = false;
  }
  c.max_convexity_violation = worst_convex;
  c.convex_numerically = worst_convex <= 0.0;
  c.concave_numerically = worst_concave <= 0.0;
  c.decreasing_numerically = decreasing;

  constexpr double kStep = 1e-6;
  constexpr double kDerivTol = 1e-5;
  double worst_deriv = 0.0;
  bool matches = true;
  for (int k = 0; k < kTriples; ++k) {
    const double t = unif(rng);
    if (std::abs(t) < 10 * kStep) continue;  // away from kinks at the origin
    const double fd = (phi.phi(t + kStep) - phi.phi(t - kStep)) / (2 * kStep);
    const double err = std::abs(fd - phi.phi_prime(t)) / std::max(1.0, std::abs(fd));
    worst_deriv = std::max(worst_deriv, err);
    if (err > kDerivTol) matches = false;
  }
  c.max_derivative_error = worst_deriv;
  c.derivative_matches = matches;
  return c;
}

PhiSpec builtin_phi(const std::string& name, std::optional<double> alpha) {
  PhiSpec s = make_builtin(name, alpha);
  const PhiCheck check = check_phi_invariants(s);
  if (!check.consistent_with(s.flags)) {
    throw Error(Errc::InvalidParameter, "divergence '" + s.label() +
                                            "' fails its registry invariants");
  }
  return s;
}

PhiSpec parse_divergence(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return builtin_phi(spec);
  const std::string name = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (name != "renyi") {
    builtin_phi(name);  // unknown names report as such
    throw Error(Errc::InvalidAlpha, "'" + name + "' takes no order (got '" + spec + "')");
  }
  double a = 0.0;
  try {
    std::size_t used = 0;
    a = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(rest);
  } catch (const std::exception&) {
    throw Error(Errc::InvalidAlpha, "cannot parse order '" + rest + "' in '" + spec + "'");
  }
  return builtin_phi(name, a);
}

std::vector<PhiSpec> builtin_phis(double renyi_alpha) {
  return {builtin_phi("reverse_kl"), builtin_phi("renyi", renyi_alpha), builtin_phi("forward_kl"),
          builtin_phi("hellinger_sq"), builtin_phi("total_variation")};
}

std::optional<std::string> unnormalized_warning(const PhiSpec& phi, const Target& target) {
  if (target.normalized() || phi.flags.linear) return std::nullopt;
  return "unnormalized target; objective is unnormalized (" + phi.label() + " on " +
         target.name() + ")";
}

namespace {

// Accumulates sum_k w_k phi(r_k) and, optionally, the pathwise gradient, over
// base nodes zeta_k (columns). log_q0 holds log q0(zeta_k).
struct Accumulator {
  const PhiSpec& phi;
  const Target& target;
  const LocationScaleParams& q;
  bool want_grad;

  double value = 0.0;
  double sum_sq = 0.0;
  Vector g_nu;
  Matrix g_l;

  Accumulator(const PhiSpec& p, const Target& t, const LocationScaleParams& params, bool grad)
      : phi(p), target(t), q(params), want_grad(grad) {
    if (t.dim() != params.dim()) {
      throw Error(Errc::DimensionMismatch, "target and variational family differ in dimension");
    }
    g_nu = Vector::Zero(params.dim());
    g_l = Matrix::Zero(params.dim(), params.dim());
  }

  void run(const Matrix& zeta, const Vector& log_q0, const Vector& weights) {
    const int d = q.dim();
    const double log_det = q.log_det_scale_factor();
    Vector z(d);
    Vector g(d);
    for (Eigen::Index k = 0; k < zeta.cols(); ++k) {
      const double w = weights[k];
      if (w == 0.0) continue;
      z.noalias() = q.nu + q.scale_factor.triangularView<Eigen::Lower>() * zeta.col(k);
      double lp;
      if (want_grad) {
        lp = target.log_density_and_grad(z, g);
      } else {
        lp = target.log_density(z);
      }
      const double r = lp - log_q0[k] + log_det;
      if (!std::isfinite(r)) {
        throw Error(Errc::NonFiniteLogDensity,
                    "log-ratio is not finite at a draw; check tails and parameters");
      }
      const double f = phi.phi(r);
      if (!std::isfinite(f)) {
        throw Error(Errc::NonFiniteLogDensity, "phi(log-ratio) overflowed");
      }
      value += w * f;
      sum_sq += w * f * f;
      if (want_grad) {
        const double s = w * phi.phi_prime(r);
        if (!std::isfinite(s) || !g.allFinite()) {
          throw Error(Errc::NonFiniteGradient, "non-finite pathwise gradient term");
        }
        g_nu.noalias() += s * g;
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j <= i; ++j) g_l(i, j) += s * g[i] * zeta(j, k);
          g_l(i, i) += s / q.scale_factor(i, i);
        }
      }
    }
  }
};

std::vector<int> shard_sizes(int n, int shards) {
  if (shards < 1) shards = 1;
  if (shards > n) shards = n;
  std::vector<int> sizes(shards, n / shards);
  for (int s = 0; s < n % shards; ++s) ++sizes[s];
  return sizes;
}

struct McResult {
  double mean = 0.0;
  double mean_sq = 0.0;
  Vector g_nu;
  Matrix g_l;
};

McResult monte_carlo(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                     int n, std::uint64_t seed, int shards, bool want_grad) {
  if (n < 2) throw Error(Errc::InvalidParameter, "Monte Carlo needs n >= 2");
  McResult out;
  out.g_nu = Vector::Zero(q.dim());
  out.g_l = Matrix::Zero(q.dim(), q.dim());
  const auto sizes = shard_sizes(n, shards);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    Rng rng = make_rng(seed, s);
    const Matrix zeta = sample_base(q.base, rng, sizes[s]);
    Vector log_q0(zeta.cols());
    for (Eigen::Index k = 0; k < zeta.cols(); ++k) log_q0[k] = q.base.log_density(zeta.col(k));
    Accumulator acc(phi, target, q, want_grad);
    acc.run(zeta, log_q0, Vector::Constant(zeta.cols(), 1.0 / n));
    out.mean += acc.value;
    out.mean_sq += acc.sum_sq;
    out.g_nu += acc.g_nu;
    out.g_l += acc.g_l;
  }
  return out;
}

}  // namespace

DivergenceEstimate estimate(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                            int n, std::uint64_t seed, int shards) {
  const McResult r = monte_carlo(phi, target, q, n, seed, shards, false);
  const double var = std::max(0.0, (r.mean_sq - r.mean * r.mean) * n / (n - 1.0));
  return {r.mean, std::sqrt(var / n), n, seed};
}

ParamGradient pathwise_grad(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                            int n, std::uint64_t seed, int shards) {
  McResult r = monte_carlo(phi, target, q, n, seed, shards, true);
  return {std::move(r.g_nu), std::move(r.g_l)};
}

GradientEstimate pathwise_grad_on(const PhiSpec& phi, const Target& target,
                                  const LocationScaleParams& q, const Matrix& zeta) {
  const auto n = zeta.cols();
  Vector log_q0(n);
  for (Eigen::Index k = 0; k < n; ++k) log_q0[k] = q.base.log_density(zeta.col(k));
  Accumulator acc(phi, target, q, true);
  acc.run(zeta, log_q0, Vector::Constant(n, 1.0 / static_cast<double>(n)));
  GradientEstimate out;
  out.grad = {acc.g_nu, acc.g_l};
  out.objective = acc.value;
  const double var = n > 1 ? std::max(0.0, (acc.sum_sq - acc.value * acc.value) * n / (n - 1.0))
                           : 0.0;
  out.objective_std_error = std::sqrt(var / static_cast<double>(n));
  return out;
}

DivergenceEstimate estimate_on(const PhiSpec& phi, const Target& target,
                               const LocationScaleParams& q, const Matrix& zeta) {
  const auto n = zeta.cols();
  if (n < 2) throw Error(Errc::InvalidParameter, "Monte Carlo needs n >= 2");
  Vector log_q0(n);
  for (Eigen::Index k = 0; k < n; ++k) log_q0[k] = q.base.log_density(zeta.col(k));
  Accumulator acc(phi, target, q, false);
  acc.run(zeta, log_q0, Vector::Constant(n, 1.0 / static_cast<double>(n)));
  const double var = std::max(0.0, (acc.sum_sq - acc.value * acc.value) * n / (n - 1.0));
  return {acc.value, std::sqrt(var / static_cast<double>(n)), static_cast<int>(n), 0};
}

int QuadratureGrid::resolved_points(int dim) const {
  if (points_per_axis > 0) return points_per_axis;
  return dim == 1 ? 16001 : 241;
}

QuadratureRule::QuadratureRule(const BaseDensity& base, const QuadratureGrid& grid) : base_(base) {
  const int d = base.dim;
  if (d > 2) {
    throw Error(Errc::DimensionTooLarge, "quadrature supports d <= 2, got " + std::to_string(d));
  }
  const int m = grid.resolved_points(d);
  if (m < 2 || !(grid.half_width > 0.0)) {
    throw Error(Errc::InvalidParameter, "quadrature grid needs >= 2 points and positive width");
  }
  const double h = grid.half_width * base.axis_sd();
  const Vector axis = Vector::LinSpaced(m, -h, h);
  const double step = axis[1] - axis[0];
  Vector axis_w = Vector::Constant(m, step);
  axis_w[0] *= 0.5;
  axis_w[m - 1] *= 0.5;
  const Eigen::Index total = d == 1 ? m : static_cast<Eigen::Index>(m) * m;
  nodes_.resize(d, total);
  weights_.resize(total);
  log_q0_.resize(total);
  for (Eigen::Index k = 0; k < total; ++k) {
    double w = 1.0;
    if (d == 1) {
      nodes_(0, k) = axis[k];
      w = axis_w[k];
    } else {
      const Eigen::Index a = k / m;
      const Eigen::Index b = k % m;
      nodes_(0, k) = axis[a];
      nodes_(1, k) = axis[b];
      w = axis_w[a] * axis_w[b];
    }
    log_q0_[k] = base.log_density(nodes_.col(k));
    weights_[k] = w * std::exp(log_q0_[k]);
  }
}

double estimate_quadrature(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                           const QuadratureGrid& grid) {
  return estimate_quadrature(phi, target, q, QuadratureRule(q.base, grid));
}

double estimate_quadrature(const PhiSpec& phi, const Target& target, const LocationScaleParams& q,
                           const QuadratureRule& rule) {
  if (rule.base().dim != q.dim() || rule.base().kind != q.base.kind) {
    throw Error(Errc::DimensionMismatch, "quadrature rule built for a different base density");
  }
  Accumulator acc(phi, target, q, false);
  acc.run(rule.nodes(), rule.log_q0(), rule.weights());
  return acc.value;
}

ParamGradient quadrature_grad(const PhiSpec& phi, const Target& target,
                              const LocationScaleParams& q, const QuadratureGrid& grid) {
  return quadrature_grad(phi, target, q, QuadratureRule(q.base, grid));
}

ParamGradient quadrature_grad(const PhiSpec& phi, const Target& target,
                              const LocationScaleParams& q, const QuadratureRule& rule) {
  if (rule.base().dim != q.dim() || rule.base().kind != q.base.kind) {
    throw Error(Errc::DimensionMismatch, "quadrature rule built for a different base density");
  }
  Accumulator acc(phi, target, q, true);
  acc.run(rule.nodes(), rule.log_q0(), rule.weights());
  return {acc.g_nu, acc.g_l};
}

}  // namespace symvi
