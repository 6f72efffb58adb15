#include "symvi/io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "symvi/error.hpp"

namespace symvi {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(Errc::ParseError, "config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(Errc::ParseError, "config key '" + key + "': expected true or false, got '" + value + "'");
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ParseError, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error(Errc::ParseError, origin + ":" + std::to_string(lineno) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

void apply_optimizer_keys(OptimizerConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "batch_size") cfg.batch_size = parse_number<int>(k, v);
    else if (k == "max_iters") cfg.max_iters = parse_number<int>(k, v);
    else if (k == "step_size") cfg.step_size = parse_number<double>(k, v);
    else if (k == "decay_scale") cfg.decay_scale = parse_number<double>(k, v);
    else if (k == "smoothing_window") cfg.smoothing_window = parse_number<int>(k, v);
    else if (k == "rel_tol") cfg.rel_tol = parse_number<double>(k, v);
    else if (k == "min_iters") cfg.min_iters = parse_number<int>(k, v);
    else if (k == "average_window") cfg.average_window = parse_number<int>(k, v);
    else if (k == "seed") cfg.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "warm_start_meanfield") cfg.warm_start_meanfield = parse_bool(k, v);
    else if (k == "mode") {
      try {
        cfg.mode = parse_family_mode(v);
      } catch (const Error&) {
        throw Error(Errc::ParseError, "config key 'mode': expected full, meanfield or location");
      }
    }
  }
}

nlohmann::json to_json(const OptimizerConfig& cfg) {
  return {{"batch_size", cfg.batch_size},
          {"max_iters", cfg.max_iters},
          {"step_size", cfg.step_size},
          {"decay_scale", cfg.decay_scale},
          {"smoothing_window", cfg.smoothing_window},
          {"rel_tol", cfg.rel_tol},
          {"min_iters", cfg.min_iters},
          {"average_window", cfg.average_window},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"adam_eps", cfg.adam_eps},
          {"seed", cfg.seed},
          {"warm_start_meanfield", cfg.warm_start_meanfield},
          {"mode", family_mode_name(cfg.mode)}};
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::InvalidParameter, "cannot write '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw Error(Errc::InvalidParameter, "short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::InvalidParameter, "cannot rename '" + tmp + "': " + ec.message());
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["argv"] = argv;
  j["config"] = config;
  j["config_hash"] = fnv1a_hex(config.dump());
  j["seed"] = seed;
  j["target"] = target;
  j["divergence"] = divergence;
  j["warnings"] = warnings;
  j["outputs"] = outputs;
  if (started_at) j["started_at"] = *started_at;
  if (finished_at) j["finished_at"] = *finished_at;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.value("config", nlohmann::json::object());
    m.seed = j.value("seed", std::uint64_t{0});
    m.target = j.value("target", "");
    m.divergence = j.value("divergence", "");
    m.warnings = j.value("warnings", std::vector<std::string>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("bad manifest: ") + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const FitResult& fit) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : fit.trace) {
    trace.push_back({{"iteration", t.iteration},
                     {"objective", t.objective},
                     {"std_error", t.std_error},
                     {"phase", t.phase}});
  }
  return {{"target", fit.target},
          {"divergence", fit.divergence},
          {"params", to_json(fit.params)},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"seed", fit.seed},
          {"config", to_json(fit.config)},
          {"warnings", fit.warnings},
          {"objective_trace", trace}};
}

}  // namespace symvi
