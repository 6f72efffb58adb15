#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symvi/optimize.hpp"

namespace symvi {

// Flat "key = value" document; '#' starts a comment; blank lines ignored.
// Keys are kept sorted so echoes and hashes are stable.
using KeyValues = std::map<std::string, std::string>;

// Throws ParseError naming path:line.
KeyValues read_key_values(const std::string& path);
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<string>");

// Recognized optimizer keys:
//   batch_size, max_iters, step_size, decay_scale, smoothing_window, rel_tol,
//   min_iters, average_window, seed, warm_start_meanfield (true/false),
//   mode (full|meanfield|location).
// Other keys are left for the caller; bad values throw ParseError.
void apply_optimizer_keys(OptimizerConfig& cfg, const KeyValues& kv);
nlohmann::json to_json(const OptimizerConfig& cfg);

// Writes to "<path>.tmp" and renames over path.
void write_file_atomic(const std::string& path, const std::string& content);

// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

struct RunManifest {
  std::vector<std::string> argv;  // command echo, program name excluded
  nlohmann::json config;          // merged configuration
  std::uint64_t seed = 0;
  std::string target;
  std::string divergence;
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;  // file names relative to the output directory
  std::optional<std::string> started_at;   // only with --record-time
  std::optional<std::string> finished_at;

  nlohmann::json to_json() const;  // includes config_hash
  static RunManifest from_json(const nlohmann::json& j);
};

std::string utc_timestamp();

nlohmann::json to_json(const FitResult& fit);

}  // namespace symvi
