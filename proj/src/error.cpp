#include "symvi/error.hpp"

namespace symvi {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ScaleFrozen: return "ScaleFrozen";
    case Errc::UnknownDivergence: return "UnknownDivergence";
    case Errc::InvalidAlpha: return "InvalidAlpha";
    case Errc::NonFiniteLogDensity: return "NonFiniteLogDensity";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::InvalidData: return "InvalidData";
    case Errc::ParseError: return "ParseError";
    case Errc::GridTooLarge: return "GridTooLarge";
    case Errc::NoBracket: return "NoBracket";
    case Errc::MissingBenchmark: return "MissingBenchmark";
    case Errc::MissingSampler: return "MissingSampler";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::UnknownFigure: return "UnknownFigure";
    case Errc::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace symvi
