#pragma once

#include <stdexcept>
#include <string>

namespace pelical {

enum class ErrorCode {
    InvalidInput,
    DegenerateLine,
    NearSingularRotation,
    RankDeficient,
    WrongKind,
    EmptyInput,
    DegenerateProjection,
    DegenerateTranslation,
    NoRealSolution,
    ParallelPlanes,
    ParallelLines,
    InsufficientLines,
    TooFewSamples,
    InfeasibleSpec,
    IllConditionedPlane,
    Schema,
    Io,
};

const char *to_string(ErrorCode code);

// All recoverable failures in the library are reported through this type.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace pelical
