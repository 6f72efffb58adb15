#pragma once

#include <stdexcept>
#include <string>

namespace symvi {

enum class Errc {
  NotPositiveDefinite,
  DimensionMismatch,
  ScaleFrozen,
  UnknownDivergence,
  InvalidAlpha,
  NonFiniteLogDensity,
  NonFiniteGradient,
  DimensionTooLarge,
  InvalidParameter,
  InvalidData,
  ParseError,
  GridTooLarge,
  NoBracket,
  MissingBenchmark,
  MissingSampler,
  EmptyInput,
  UnknownTarget,
  UnknownFigure,
  Usage,
};

const char* errc_name(Errc code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

  // True for failures of the numerics (as opposed to bad input).
  bool is_numeric() const noexcept {
    return code_ == Errc::NonFiniteLogDensity || code_ == Errc::NonFiniteGradient ||
           code_ == Errc::NotPositiveDefinite || code_ == Errc::NoBracket;
  }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace symvi
