#include "symvi/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "symvi/diagnostics.hpp"
#include "symvi/error.hpp"
#include "symvi/experiments.hpp"
#include "symvi/io.hpp"

namespace symvi {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string target;
  std::string config_path;
  std::string out_dir = "symvi_out";
  std::string data_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> n;
  bool record_time = false;
};

struct FitArgs {
  CommonArgs common;
  std::optional<std::string> divergence;
  std::optional<std::string> method;
  std::optional<std::string> family;
  std::optional<std::string> mode;
};

struct DiagnoseArgs {
  CommonArgs common;
  std::optional<std::string> reflection;
  std::optional<std::string> mean_hat;
};

struct ReproduceArgs {
  std::string figure;
  std::string out_dir = "symvi_out";
  std::uint64_t seed = 0;
  std::optional<int> seeds;
  std::optional<int> n;
  bool record_time = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_target) {
  auto* t = cmd->add_option("--target", a.target, "target spec, e.g. student:5:0.7");
  if (needs_target) t->required();
  cmd->add_option("--config", a.config_path, "flat key = value config file");
  cmd->add_option("--out", a.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--data", a.data_path, "schools CSV with header y,eta");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_option("--n", a.n, "sample count");
  cmd->add_flag("--record-time", a.record_time, "record wall-clock timestamps in the manifest");
}

std::string pick(const std::optional<std::string>& flag, const KeyValues& kv, const std::string& key,
                 const std::string& fallback) {
  if (flag) return *flag;
  if (auto it = kv.find(key); it != kv.end()) return it->second;
  return fallback;
}

template <class T>
T number_from(const KeyValues& kv, const std::string& key, T fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::istringstream in(it->second);
  T v{};
  if (!(in >> v) || !in.eof()) {
    throw Error(Errc::ParseError, "config key '" + key + "': cannot parse '" + it->second + "'");
  }
  return v;
}

GridAxis axis_from(const KeyValues& kv, const std::string& key, const std::string& name,
                   GridAxis fallback) {
  fallback.name = name;
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  GridAxis a{name, 0, 0, 0};
  char c1 = 0, c2 = 0;
  std::istringstream in(it->second);
  if (!(in >> a.lo >> c1 >> a.hi >> c2 >> a.n_points) || c1 != ',' || c2 != ',') {
    throw Error(Errc::ParseError, "config key '" + key + "': expected lo,hi,n");
  }
  return a;
}

const std::vector<std::string> kOptimizerKeys{"batch_size", "max_iters",      "step_size", "decay_scale",
                                              "smoothing_window", "rel_tol",  "min_iters", "average_window",
                                              "seed",       "warm_start_meanfield", "mode"};

void require_known_keys(const KeyValues& kv, std::vector<std::string> allowed, const std::string& path) {
  for (const auto& [k, v] : kv) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error(Errc::ParseError, path + ": unknown config key '" + k + "'");
    }
  }
}

std::optional<SchoolsData> load_data(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return ingest_schools_data(path);
}

TargetPtr target_from(const std::string& spec, const std::string& data_path) {
  if (spec.empty()) throw Error(Errc::Usage, "--target is required");
  try {
    return parse_target(spec, load_data(data_path));
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError || e.code() == Errc::InvalidData) throw;
    throw Error(e.code(), "--target: " + e.detail());
  }
}

class OutputDir {
 public:
  OutputDir(std::string dir, bool record_time) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(Errc::Usage, "--out: cannot create '" + dir_ + "': " + ec.message());
    if (record_time) manifest.started_at = utc_timestamp();
    record_time_ = record_time;
  }

  void write(const std::string& name, const std::string& content) {
    write_file_atomic((fs::path(dir_) / name).string(), content);
    manifest.outputs.push_back(name);
  }

  void finish() {
    if (record_time_) manifest.finished_at = utc_timestamp();
    manifest.outputs.push_back("manifest.json");
    write_file_atomic((fs::path(dir_) / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
  }

  RunManifest manifest;

 private:
  std::string dir_;
  bool record_time_ = false;
};

BaseDensity base_from(const std::string& family, double df, int dim) {
  try {
    const BaseKind kind = parse_base_kind(family);
    return {kind, dim, df};
  } catch (const Error&) {
    throw Error(Errc::Usage, "--family must be normal, laplace or student, got '" + family + "'");
  }
}

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const KeyValues kv = a.common.config_path.empty() ? KeyValues{} : read_key_values(a.common.config_path);
  std::vector<std::string> allowed = kOptimizerKeys;
  allowed.insert(allowed.end(), {"target", "divergence", "method", "family", "family_df", "grid_nu", "grid_sd",
                                 "grid_rho", "quad_points", "mc_samples"});
  require_known_keys(kv, allowed, a.common.config_path);
  const std::string target_spec = a.common.target.empty() ? pick({}, kv, "target", "") : a.common.target;
  const std::string div_spec = pick(a.divergence, kv, "divergence", "reverse_kl");
  const std::string method = pick(a.method, kv, "method", "sgd");
  const std::string family = pick(a.family, kv, "family", "normal");
  if (method != "sgd" && method != "grid") {
    throw Error(Errc::Usage, "--method must be sgd or grid, got '" + method + "'");
  }

  PhiSpec phi;
  try {
    phi = parse_divergence(div_spec);
  } catch (const Error& e) {
    throw Error(e.code(), "--divergence: " + e.detail());
  }
  const TargetPtr target = target_from(target_spec, a.common.data_path);
  const int d = target->dim();

  OptimizerConfig cfg;
  apply_optimizer_keys(cfg, kv);
  if (a.common.seed) cfg.seed = *a.common.seed;
  if (a.common.n) cfg.batch_size = *a.common.n;
  if (a.mode) {
    try {
      cfg.mode = parse_family_mode(*a.mode);
    } catch (const Error&) {
      throw Error(Errc::Usage, "--mode must be full, meanfield or location");
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(Errc::Usage, "config: " + e.detail());
  }
  const BaseDensity base = base_from(family, number_from<double>(kv, "family_df", 5.0), d);
  const LocationScaleParams init = LocationScaleParams::standard(base);

  nlohmann::json merged = {{"target", target_spec},
                           {"divergence", phi.label()},
                           {"method", method},
                           {"family", base.name()},
                           {"optimizer", to_json(cfg)}};
  if (base.kind == BaseKind::StandardStudentT) merged["family_df"] = base.df;

  OutputDir dir(a.common.out_dir, a.common.record_time);
  FitResult fit;
  std::string surface_csv;
  if (method == "sgd") {
    fit = fit_stochastic(phi, *target, init, cfg);
  } else {
    GridSpec grid;
    const GridAxis nu = axis_from(kv, "grid_nu", "nu", {"nu", -2.0, 2.0, 41});
    const GridAxis sd = axis_from(kv, "grid_sd", "sd", {"sd", 0.25, 3.0, 12});
    const GridAxis rho = axis_from(kv, "grid_rho", "rho", {"rho", -0.9, 0.9, 19});
    GridFamily fam;
    for (int i = 0; i < d; ++i) grid.axes.push_back({"nu" + std::to_string(i + 1), nu.lo, nu.hi, nu.n_points});
    if (cfg.mode == FamilyMode::LocationOnly) {
      fam = location_grid_family(init);
    } else {
      for (int i = 0; i < d; ++i) grid.axes.push_back({"sd" + std::to_string(i + 1), sd.lo, sd.hi, sd.n_points});
      if (cfg.mode == FamilyMode::Full && d == 2) {
        grid.axes.push_back(rho);
        fam = scale_corr_grid_family(base);
      } else if (cfg.mode == FamilyMode::Full && d > 1) {
        throw Error(Errc::Usage, "--method grid with full covariance needs a 2-D target; use --mode meanfield");
      } else {
        fam = meanfield_grid_family(base);
      }
    }
    GridObjective obj;
    obj.use_quadrature = d <= 2;
    obj.quadrature.points_per_axis = number_from<int>(kv, "quad_points", d == 1 ? 4001 : 33);
    obj.mc_samples = number_from<int>(kv, "mc_samples", 2000);
    obj.seed = cfg.seed;
    try {
      grid.validate();
    } catch (const Error& e) {
      throw Error(Errc::Usage, "grid: " + e.detail());
    }
    const GridFitResult g = fit_grid(phi, *target, fam, grid, obj);
    fit.params = g.best;
    fit.trace.push_back({static_cast<int>(g.surface.size()), g.best_value, 0.0, "grid"});
    fit.converged = true;
    fit.iterations = static_cast<int>(g.surface.size());
    fit.seed = cfg.seed;
    fit.config = cfg;
    fit.divergence = phi.label();
    fit.target = target->name();
    if (auto w = unnormalized_warning(phi, *target)) fit.warnings.push_back(*w);
    merged["grid"] = nlohmann::json::array();
    for (const auto& ax : grid.axes) merged["grid"].push_back({ax.name, ax.lo, ax.hi, ax.n_points});
    merged["quad_points"] = obj.quadrature.points_per_axis;

    std::ostringstream s;
    for (const auto& ax : grid.axes) s << ax.name << ',';
    s << "objective\n";
    std::vector<int> idx(grid.axes.size());
    for (std::size_t n = 0; n < g.surface.size(); ++n) {
      std::size_t rem = n;
      for (std::size_t k = grid.axes.size(); k-- > 0;) {
        idx[k] = static_cast<int>(rem % grid.axes[k].n_points);
        rem /= grid.axes[k].n_points;
      }
      for (std::size_t k = 0; k < grid.axes.size(); ++k) s << format_double(grid.axes[k].at(idx[k])) << ',';
      s << format_double(g.surface[n]) << '\n';
    }
    surface_csv = s.str();
  }

  nlohmann::json fit_json = to_json(fit);
  fit_json["method"] = method;
  dir.write("fit.json", fit_json.dump(2) + "\n");
  std::ostringstream trace;
  trace << "iteration,phase,objective,std_error\n";
  for (const auto& t : fit.trace) {
    trace << t.iteration << ',' << t.phase << ',' << format_double(t.objective) << ','
          << format_double(t.std_error) << '\n';
  }
  dir.write("trace.csv", trace.str());
  if (target->benchmark()) {
    std::ostringstream acc;
    write_accuracy_csv(acc, accuracy(fit, *target));
    dir.write("accuracy.csv", acc.str());
  } else {
    fit.warnings.push_back("target has no benchmark; accuracy.csv not written");
  }
  if (!surface_csv.empty()) dir.write("surface.csv", surface_csv);

  dir.manifest.argv = argv;
  dir.manifest.config = merged;
  dir.manifest.seed = cfg.seed;
  dir.manifest.target = target_spec;
  dir.manifest.divergence = phi.label();
  dir.manifest.warnings = fit.warnings;
  dir.finish();
  for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
  out << "fit " << target_spec << " " << phi.label() << ": converged=" << (fit.converged ? "true" : "false")
      << " -> " << a.common.out_dir << '\n';
  return kExitOk;
}

int cmd_diagnose(const DiagnoseArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const KeyValues kv = a.common.config_path.empty() ? KeyValues{} : read_key_values(a.common.config_path);
  require_known_keys(kv, {"target", "n", "seed", "reflection", "mean_hat"}, a.common.config_path);
  const std::string target_spec = a.common.target.empty() ? pick({}, kv, "target", "") : a.common.target;
  const int n = a.common.n ? *a.common.n : number_from<int>(kv, "n", 20000);
  if (n < 100) throw Error(Errc::Usage, "--n must be at least 100, got " + std::to_string(n));
  const std::uint64_t seed = a.common.seed ? *a.common.seed : number_from<std::uint64_t>(kv, "seed", 0);
  const Reflection reflection = parse_reflection(pick(a.reflection, kv, "reflection", "point"));
  const std::string mean_hat_mode = pick(a.mean_hat, kv, "mean_hat", "benchmark");
  if (mean_hat_mode != "benchmark" && mean_hat_mode != "sample") {
    throw Error(Errc::Usage, "--mean-hat must be benchmark or sample");
  }
  const TargetPtr target = target_from(target_spec, a.common.data_path);
  if (!target->has_sampler()) {
    throw Error(Errc::MissingSampler, "target '" + target_spec + "' has no benchmark sampler");
  }
  OutputDir dir(a.common.out_dir, a.common.record_time);
  Rng rng = make_rng(seed);
  const Matrix x = target->sample(rng, n);
  Vector mean_hat = x.rowwise().mean();
  if (mean_hat_mode == "benchmark") {
    if (!target->benchmark()) throw Error(Errc::MissingBenchmark, "target has no benchmark mean; use --mean-hat sample");
    mean_hat = target->benchmark()->mean;
  }
  const AsymmetryReport r = asymmetry(*target, x, mean_hat, reflection);
  std::ostringstream alpha;
  write_alpha_csv(alpha, r);
  dir.write("alpha.csv", alpha.str());
  nlohmann::json summary = to_json(r);
  summary["target"] = target_spec;
  summary["seed"] = seed;
  summary["mean_hat_source"] = mean_hat_mode;
  dir.write("asymmetry.json", summary.dump(2) + "\n");

  dir.manifest.argv = argv;
  dir.manifest.config = {{"target", target_spec},
                         {"n", n},
                         {"seed", seed},
                         {"reflection", reflection_name(reflection)},
                         {"mean_hat", mean_hat_mode}};
  dir.manifest.seed = seed;
  dir.manifest.target = target_spec;
  if (r.n_excluded > 0) {
    dir.manifest.warnings.push_back(std::to_string(r.n_excluded) + " samples excluded (non-finite log-density)");
  }
  dir.finish();
  out << "alpha90 " << target_spec << " = " << format_double(r.q90) << " (n=" << r.n
      << ", excluded=" << r.n_excluded << ")\n";
  return kExitOk;
}

int cmd_reproduce(const ReproduceArgs& a, const std::vector<std::string>& argv, std::ostream& out,
                  std::ostream& err) {
  if (a.figure.size() > 5 && a.figure.ends_with(".json")) {
    std::ifstream in(a.figure);
    if (!in) throw Error(Errc::Usage, "cannot open manifest '" + a.figure + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, a.figure + ": " + e.what());
    }
    const RunManifest m = RunManifest::from_json(j);
    if (!m.argv.empty() && m.argv.front() == "reproduce" && m.argv.size() > 1 && m.argv[1].ends_with(".json")) {
      throw Error(Errc::Usage, "manifest replays another manifest");
    }
    out << "replaying:";
    for (const auto& s : m.argv) out << ' ' << s;
    out << '\n';
    return run_cli(m.argv, out, err);
  }

  nlohmann::json config = {{"figure", a.figure}, {"seed", a.seed}};
  std::string csv;
  if (a.figure == "fig1" || a.figure == "fig4") {
    FitStudySettings s = a.figure == "fig1" ? fig1_settings() : fig4_settings();
    s.base_seed = a.seed;
    if (a.seeds) s.seeds = *a.seeds;
    config["targets"] = s.targets;
    config["seeds"] = s.seeds;
    config["optimizer"] = to_json(s.sgd);
    csv = fit_study_csv(run_fit_study(s));
  } else if (a.figure == "fig2") {
    Fig2Settings s;
    config["quadrature_points"] = s.quadrature_points;
    csv = fig2_csv(run_fig2(s));
  } else if (a.figure == "fig3") {
    Fig3Settings s;
    s.base_seed = a.seed;
    if (a.seeds) s.seeds = *a.seeds;
    config["seeds"] = s.seeds;
    config["kappas"] = s.kappas;
    config["optimizer"] = to_json(s.sgd);
    csv = fig3_csv(run_fig3(s));
  } else if (a.figure == "table2") {
    Table2Settings s;
    s.seed = a.seed;
    if (a.n) s.n = *a.n;
    if (s.n < 100) throw Error(Errc::Usage, "--n must be at least 100");
    config["n"] = s.n;
    config["targets"] = s.targets;
    csv = table2_csv(run_table2(s));
  } else {
    throw Error(Errc::UnknownFigure,
                "unknown figure '" + a.figure + "'; expected fig1, fig2, fig3, fig4 or table2");
  }
  OutputDir dir(a.out_dir, a.record_time);
  dir.write(a.figure + ".csv", csv);
  dir.manifest.argv = argv;
  dir.manifest.config = config;
  dir.manifest.seed = a.seed;
  dir.finish();
  out << "wrote " << (fs::path(a.out_dir) / (a.figure + ".csv")).string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"symvi: phi-divergence variational inference over location-scale families"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a variational approximation");
  add_common(fit_cmd, fit.common, false);
  fit_cmd->add_option("--divergence", fit.divergence,
                      "reverse_kl|renyi:<alpha>|forward_kl|hellinger_sq|total_variation");
  fit_cmd->add_option("--method", fit.method, "sgd|grid");
  fit_cmd->add_option("--family", fit.family, "base density: normal|laplace|student");
  fit_cmd->add_option("--mode", fit.mode, "full|meanfield|location");

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "reflection asymmetry statistic");
  add_common(diag_cmd, diag.common, false);
  diag_cmd->add_option("--reflection", diag.reflection, "point|literal");
  diag_cmd->add_option("--mean-hat", diag.mean_hat, "benchmark|sample");

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "regenerate figure/table data, or replay a manifest");
  rep_cmd->add_option("figure", rep.figure, "fig1|fig2|fig3|fig4|table2|<manifest.json>")->required();
  rep_cmd->add_option("--out", rep.out_dir, "output directory")->capture_default_str();
  rep_cmd->add_option("--seed", rep.seed, "base seed");
  rep_cmd->add_option("--seeds", rep.seeds, "number of seeds (fig1, fig3, fig4)");
  rep_cmd->add_option("--n", rep.n, "samples per target (table2)");
  rep_cmd->add_flag("--record-time", rep.record_time, "record wall-clock timestamps in the manifest");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, args, out);
    if (diag_cmd->parsed()) return cmd_diagnose(diag, args, out);
    return cmd_reproduce(rep, args, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_numeric() ? kExitNumeric : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace symvi
