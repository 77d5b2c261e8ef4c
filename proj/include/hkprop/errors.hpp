#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hkprop {

enum class ErrorCode {
    NotSymmetric,
    RealPartNotPD,
    ConvergenceFailure,
    InconsistentSeed,
    ZeroCrossing,
    UnknownModel,
    NonFiniteState,
    BadShape,
    SingularFrame,
    BoxTooSmall,
    GridMismatch,
    BoundaryMass,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::RealPartNotPD: return "RealPartNotPD";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::InconsistentSeed: return "InconsistentSeed";
    case ErrorCode::ZeroCrossing: return "ZeroCrossing";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::SingularFrame: return "SingularFrame";
    case ErrorCode::BoxTooSmall: return "BoxTooSmall";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BoundaryMass: return "BoundaryMass";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map them onto exit codes.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace hkprop
