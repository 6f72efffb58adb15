#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "symvi/error.hpp"
#include "symvi/special.hpp"
#include "symvi/targets.hpp"

namespace symvi {

using special::kLog2Pi;

namespace {

constexpr double kMuPriorMean = 5.0;
constexpr double kMuPriorSd = 3.0;
constexpr double kTauPriorSd = 5.0;

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// log p(mu) + log p(tau) + log |d tau / d u| with tau = e^u.
double log_hyperprior(double mu, double u) {
  const double tau = std::exp(u);
  return log_normal_pdf(mu, kMuPriorMean, kMuPriorSd * kMuPriorSd) + std::numbers::ln2 +
         log_normal_pdf(tau, 0.0, kTauPriorSd * kTauPriorSd) + u;
}

// Gradient of log_hyperprior in (mu, u).
void grad_hyperprior(double mu, double u, double& gmu, double& gu) {
  const double tau = std::exp(u);
  gmu = -(mu - kMuPriorMean) / (kMuPriorSd * kMuPriorSd);
  gu = -tau * tau / (kTauPriorSd * kTauPriorSd) + 1.0;
}

void validate(const SchoolsData& data) {
  if (data.size() == 0) throw Error(Errc::InvalidData, "schools data has no rows");
  if (data.eta.size() != data.y.size()) {
    throw Error(Errc::InvalidData, "schools data: y and eta differ in length");
  }
  for (int i = 0; i < data.size(); ++i) {
    if (!(data.eta[i] > 0.0) || !std::isfinite(data.eta[i]) || !std::isfinite(data.y[i])) {
      throw Error(Errc::InvalidData, "schools data: eta must be positive and finite (row " +
                                         std::to_string(i + 1) + ")");
    }
  }
}

// log p(mu, u | y) up to a constant, with theta integrated out.
double log_marginal(const SchoolsData& data, double mu, double u) {
  const double tau2 = std::exp(2.0 * u);
  double lp = log_hyperprior(mu, u);
  for (int i = 0; i < data.size(); ++i) {
    lp += log_normal_pdf(data.y[i], mu, data.eta[i] * data.eta[i] + tau2);
  }
  return lp;
}

// Dense trapezoid grid over (mu, log tau) carrying normalized weights of the
// collapsed posterior.
struct HyperGrid {
  Vector mu_nodes;
  Vector u_nodes;
  Vector weights;  // row-major over (mu, u), sums to 1
  double mu_step = 0.0;
  double u_step = 0.0;

  double mu_at(Eigen::Index k) const { return mu_nodes[k / u_nodes.size()]; }
  double u_at(Eigen::Index k) const { return u_nodes[k % u_nodes.size()]; }
};

HyperGrid build_grid(const SchoolsData& data) {
  constexpr int kMuPoints = 401;
  constexpr int kUPoints = 401;
  HyperGrid g;
  g.mu_nodes = Vector::LinSpaced(kMuPoints, kMuPriorMean - 8.0 * kMuPriorSd,
                                 kMuPriorMean + 8.0 * kMuPriorSd);
  g.u_nodes = Vector::LinSpaced(kUPoints, -14.0, 4.0);
  g.mu_step = g.mu_nodes[1] - g.mu_nodes[0];
  g.u_step = g.u_nodes[1] - g.u_nodes[0];
  Vector logw(kMuPoints * kUPoints);
  for (int a = 0; a < kMuPoints; ++a) {
    const double ta = (a == 0 || a == kMuPoints - 1) ? 0.5 : 1.0;
    for (int b = 0; b < kUPoints; ++b) {
      const double tb = (b == 0 || b == kUPoints - 1) ? 0.5 : 1.0;
      logw[a * kUPoints + b] =
          log_marginal(data, g.mu_nodes[a], g.u_nodes[b]) + std::log(ta * tb);
    }
  }
  const double top = logw.maxCoeff();
  g.weights = (logw.array() - top).exp();
  g.weights /= g.weights.sum();
  return g;
}

// Conditional mean and variance of every coordinate given (mu, u).
void conditional_moments(const SchoolsData& data, SchoolsVariant variant, double mu, double u,
                         Vector& mean, Vector& var) {
  const int n = data.size();
  const int dim = variant == SchoolsVariant::Marginalized ? 2 : 2 + n;
  mean.resize(dim);
  var = Vector::Zero(dim);
  mean[0] = mu;
  mean[1] = u;
  if (variant == SchoolsVariant::Marginalized) return;
  const double tau = std::exp(u);
  for (int i = 0; i < n; ++i) {
    const ConditionalNormal c = schools_theta_conditional(data.y[i], data.eta[i], mu, tau);
    if (variant == SchoolsVariant::Centered) {
      mean[2 + i] = c.mean;
      var[2 + i] = c.var;
    } else {
      mean[2 + i] = (c.mean - mu) / tau;
      var[2 + i] = c.var / (tau * tau);
    }
  }
}

class SchoolsTarget final : public Target {
 public:
  SchoolsTarget(const SchoolsData& data, SchoolsVariant variant)
      : Target(std::string("schools_") + schools_variant_name(variant),
               variant == SchoolsVariant::Marginalized ? 2 : 2 + data.size(), false),
        data_(data),
        variant_(variant),
        grid_(build_grid(data)) {
    // A priori even along mu and the latent effects; the posterior is not.
    symmetry_.kind = SymmetryKind::Asymmetric;
    symmetry_.sigma_indices = {0};
    for (int i = 2; i < dim_; ++i) symmetry_.sigma_indices.push_back(i);

    Vector mean = Vector::Zero(dim_);
    Matrix second = Matrix::Zero(dim_, dim_);
    Vector cm, cv;
    for (Eigen::Index k = 0; k < grid_.weights.size(); ++k) {
      const double w = grid_.weights[k];
      if (w == 0.0) continue;
      conditional_moments(data_, variant_, grid_.mu_at(k), grid_.u_at(k), cm, cv);
      mean += w * cm;
      second.noalias() += w * (cm * cm.transpose());
      second.diagonal() += w * cv;
    }
    Matrix cov = second - mean * mean.transpose();
    cov = 0.5 * (cov + cov.transpose());
    benchmark_ = BenchmarkMoments{mean, PDMatrix(cov), BenchmarkSource::GridQuadrature};
  }

  double log_density(const Vector& z) const override {
    Vector g;
    return log_density_and_grad(z, g);
  }
  Vector grad_log_density(const Vector& z) const override {
    Vector g;
    log_density_and_grad(z, g);
    return g;
  }

  double log_density_and_grad(const Vector& z, Vector& grad) const override {
    if (z.size() != dim_) throw Error(Errc::DimensionMismatch, name_ + ": wrong dimension");
    const double mu = z[0];
    const double u = z[1];
    const double tau = std::exp(u);
    const double tau2 = tau * tau;
    const int n = data_.size();
    grad = Vector::Zero(dim_);
    double lp = log_hyperprior(mu, u);
    grad_hyperprior(mu, u, grad[0], grad[1]);
    switch (variant_) {
      case SchoolsVariant::Centered:
        for (int i = 0; i < n; ++i) {
          const double theta = z[2 + i];
          const double e2 = data_.eta[i] * data_.eta[i];
          const double dev = theta - mu;
          lp += log_normal_pdf(theta, mu, tau2) + log_normal_pdf(data_.y[i], theta, e2);
          grad[0] += dev / tau2;
          grad[1] += -1.0 + dev * dev / tau2;
          grad[2 + i] = -dev / tau2 + (data_.y[i] - theta) / e2;
        }
        break;
      case SchoolsVariant::Noncentered:
        for (int i = 0; i < n; ++i) {
          const double eps = z[2 + i];
          const double theta = mu + tau * eps;
          const double e2 = data_.eta[i] * data_.eta[i];
          const double resid = (data_.y[i] - theta) / e2;
          lp += -0.5 * (kLog2Pi + eps * eps) + log_normal_pdf(data_.y[i], theta, e2);
          grad[0] += resid;
          grad[1] += resid * tau * eps;
          grad[2 + i] = -eps + resid * tau;
        }
        break;
      case SchoolsVariant::Marginalized:
        for (int i = 0; i < n; ++i) {
          const double v = data_.eta[i] * data_.eta[i] + tau2;
          const double dev = data_.y[i] - mu;
          lp += log_normal_pdf(data_.y[i], mu, v);
          grad[0] += dev / v;
          // d/du of -0.5 (log v + dev^2 / v), dv/du = 2 tau^2.
          grad[1] += (-0.5 / v + 0.5 * dev * dev / (v * v)) * 2.0 * tau2;
        }
        break;
    }
    return lp;
  }

  bool has_sampler() const override { return true; }

  // Importance-resampled grid draws of (mu, log tau), jittered within the
  // cell, followed by exact conditional draws of the latent effects.
  Matrix sample(Rng& rng, int n_draws) const override {
    std::discrete_distribution<Eigen::Index> pick(grid_.weights.data(),
                                                  grid_.weights.data() + grid_.weights.size());
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    std::normal_distribution<double> normal;
    Matrix out(dim_, n_draws);
    Vector cm, cv;
    for (int k = 0; k < n_draws; ++k) {
      const Eigen::Index node = pick(rng);
      const double mu = grid_.mu_at(node) + grid_.mu_step * jitter(rng);
      const double u = grid_.u_at(node) + grid_.u_step * jitter(rng);
      conditional_moments(data_, variant_, mu, u, cm, cv);
      for (int i = 0; i < dim_; ++i) {
        out(i, k) = cv[i] > 0.0 ? cm[i] + std::sqrt(cv[i]) * normal(rng) : cm[i];
      }
    }
    return out;
  }

 private:
  SchoolsData data_;
  SchoolsVariant variant_;
  HyperGrid grid_;
};

}  // namespace

const char* schools_variant_name(SchoolsVariant variant) {
  switch (variant) {
    case SchoolsVariant::Centered: return "centered";
    case SchoolsVariant::Noncentered: return "noncentered";
    case SchoolsVariant::Marginalized: return "marginalized";
  }
  return "centered";
}

SchoolsData SchoolsData::canonical() {
  SchoolsData d;
  d.y.resize(8);
  d.eta.resize(8);
  d.y << 28, 8, -3, 7, -1, 1, 18, 12;
  d.eta << 15, 10, 16, 11, 9, 11, 10, 18;
  return d;
}

ConditionalNormal schools_theta_conditional(double y, double eta, double mu, double tau) {
  const double prec = 1.0 / (eta * eta) + 1.0 / (tau * tau);
  return {(y / (eta * eta) + mu / (tau * tau)) / prec, 1.0 / prec};
}

SchoolsData ingest_schools_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidData, "cannot open schools data file '" + path + "'");
  std::string line;
  int line_no = 0;
  std::vector<double> ys, etas;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!saw_header) {
      std::string compact;
      for (char ch : line) {
        if (ch != ' ' && ch != '\t') compact.push_back(ch);
      }
      if (compact != "y,eta") {
        throw Error(Errc::ParseError, path + ":" + std::to_string(line_no) +
                                          ": expected header 'y,eta', got '" + line + "'");
      }
      saw_header = true;
      continue;
    }
    std::stringstream row(line);
    std::string a, b, extra;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || std::getline(row, extra, ',')) {
      throw Error(Errc::ParseError, path + ":" + std::to_string(line_no) +
                                        ": expected two comma-separated fields: '" + line + "'");
    }
    try {
      std::size_t ua = 0, ub = 0;
      const double y = std::stod(a, &ua);
      const double eta = std::stod(b, &ub);
      if (a.find_first_not_of(" \t", ua) != std::string::npos ||
          b.find_first_not_of(" \t", ub) != std::string::npos) {
        throw std::invalid_argument(line);
      }
      ys.push_back(y);
      etas.push_back(eta);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, path + ":" + std::to_string(line_no) +
                                        ": non-numeric field in row '" + line + "'");
    }
  }
  if (ys.empty()) throw Error(Errc::InvalidData, "schools data file '" + path + "' has no rows");
  SchoolsData d;
  d.y = Eigen::Map<Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.eta = Eigen::Map<Vector>(etas.data(), static_cast<Eigen::Index>(etas.size()));
  validate(d);
  return d;
}

TargetPtr make_schools(const SchoolsData& data, SchoolsVariant variant) {
  validate(data);
  return std::make_shared<SchoolsTarget>(data, variant);
}

}  // namespace symvi
