#include "symvi/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "symvi/error.hpp"

namespace symvi {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(Errc::EmptyInput, "quantile of an empty sequence");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::InvalidParameter, "quantile level must be in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return frac == 0.0 ? v[lo] : v[lo] + frac * (v[hi] - v[lo]);
}

Reflection parse_reflection(const std::string& name) {
  if (name == "point") return Reflection::Point;
  if (name == "literal") return Reflection::Literal;
  throw Error(Errc::Usage, "--reflection must be point or literal, got '" + name + "'");
}

const char* reflection_name(Reflection r) { return r == Reflection::Point ? "point" : "literal"; }

AsymmetryReport asymmetry(const Target& target, const Matrix& samples, const Vector& mean_hat,
                          Reflection reflection) {
  if (samples.rows() != target.dim() || mean_hat.size() != target.dim()) {
    throw Error(Errc::DimensionMismatch, "samples, mean_hat and target differ in dimension");
  }
  if (samples.cols() < 100) {
    throw Error(Errc::InvalidParameter, "asymmetry needs at least 100 samples");
  }
  AsymmetryReport out;
  out.n = static_cast<int>(samples.cols());
  out.mean_hat = mean_hat;
  out.reflection = reflection;
  out.alpha_values.reserve(samples.cols());
  const Vector center = reflection == Reflection::Point ? Vector(2.0 * mean_hat) : mean_hat;
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    const Vector z = samples.col(k);
    const Vector zr = center - z;
    const double a = target.log_density(z);
    const double b = target.log_density(zr);
    const double alpha = std::abs(a - b);
    if (std::isfinite(alpha)) {
      out.alpha_values.push_back(alpha);
    } else {
      ++out.n_excluded;
    }
  }
  if (out.alpha_values.empty()) {
    throw Error(Errc::NonFiniteLogDensity, "log-density not finite at any reflected sample");
  }
  out.q90 = quantile(out.alpha_values, 0.9);
  return out;
}

const char* coord_group_name(CoordGroup g) {
  switch (g) {
    case CoordGroup::Sigma: return "sigma";
    case CoordGroup::SigmaBar: return "sigma_bar";
    case CoordGroup::Cross: return "cross";
  }
  return "?";
}

double AccuracyReport::max_mean_error(CoordGroup g) const {
  double m = 0.0;
  for (const auto& e : means) {
    if (e.group == g) m = std::max(m, e.scaled_error);
  }
  return m;
}

double AccuracyReport::max_correlation_error(CoordGroup g) const {
  double m = 0.0;
  for (const auto& e : correlations) {
    if (e.group == g) m = std::max(m, e.error);
  }
  return m;
}

AccuracyReport accuracy(const LocationScaleParams& q, const Target& target) {
  const auto& bench = target.benchmark();
  if (!bench) throw Error(Errc::MissingBenchmark, "target '" + target.name() + "' has no benchmark");
  const int d = target.dim();
  if (q.dim() != d) throw Error(Errc::DimensionMismatch, "fit and target differ in dimension");
  std::vector<bool> in_sigma(d, false);
  for (int i : target.symmetry().sigma_indices) in_sigma[i] = true;
  auto group_of = [&](int i) { return in_sigma[i] ? CoordGroup::Sigma : CoordGroup::SigmaBar; };

  AccuracyReport out;
  const Matrix& cov = bench->cov.entries();
  for (int i = 0; i < d; ++i) {
    MeanError e;
    e.index = i;
    e.group = group_of(i);
    e.fitted = q.nu[i];
    e.benchmark = bench->mean[i];
    e.benchmark_sd = std::sqrt(cov(i, i));
    e.scaled_error = std::abs(e.fitted - e.benchmark) / e.benchmark_sd;
    out.means.push_back(e);
  }
  const Matrix fitted_corr = correlation_of(PDMatrix(q.scale())).entries();
  const Matrix bench_corr = correlation_of(bench->cov).entries();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      CorrelationError e;
      e.i = i;
      e.j = j;
      e.group = group_of(i) == group_of(j) ? group_of(i) : CoordGroup::Cross;
      e.fitted = fitted_corr(i, j);
      e.benchmark = bench_corr(i, j);
      e.error = std::abs(e.fitted - e.benchmark);
      out.correlations.push_back(e);
    }
  }
  return out;
}

AccuracyReport accuracy(const FitResult& fit, const Target& target) {
  return accuracy(fit.params, target);
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_accuracy_csv(std::ostream& os, const AccuracyReport& r) {
  os << "kind,i,j,group,fitted,benchmark,benchmark_sd,error\n";
  for (const auto& e : r.means) {
    os << "mean," << e.index << ',' << e.index << ',' << coord_group_name(e.group) << ','
       << format_double(e.fitted) << ',' << format_double(e.benchmark) << ','
       << format_double(e.benchmark_sd) << ',' << format_double(e.scaled_error) << '\n';
  }
  for (const auto& e : r.correlations) {
    os << "corr," << e.i << ',' << e.j << ',' << coord_group_name(e.group) << ','
       << format_double(e.fitted) << ',' << format_double(e.benchmark) << ",,"
       << format_double(e.error) << '\n';
  }
}

void write_alpha_csv(std::ostream& os, const AsymmetryReport& r) {
  os << "sample,alpha\n";
  for (std::size_t k = 0; k < r.alpha_values.size(); ++k) {
    os << k << ',' << format_double(r.alpha_values[k]) << '\n';
  }
}

nlohmann::json to_json(const AsymmetryReport& r) {
  return {{"q90", r.q90},
          {"n", r.n},
          {"n_excluded", r.n_excluded},
          {"mean_hat", std::vector<double>(r.mean_hat.data(), r.mean_hat.data() + r.mean_hat.size())},
          {"reflection", reflection_name(r.reflection)}};
}

nlohmann::json to_json(const AccuracyReport& r) {
  nlohmann::json j;
  for (auto g : {CoordGroup::Sigma, CoordGroup::SigmaBar, CoordGroup::Cross}) {
    j["max_scaled_mean_error"][coord_group_name(g)] = r.max_mean_error(g);
    j["max_correlation_error"][coord_group_name(g)] = r.max_correlation_error(g);
  }
  return j;
}

}  // namespace symvi
