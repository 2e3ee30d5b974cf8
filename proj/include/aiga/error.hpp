#pragma once

#include <stdexcept>
#include <string>

namespace aiga {

enum class ErrorCode {
  InvalidArgument,
  InvalidKnots,
  NotARefinement,
  NotInMesh,
  NotInBasis,
  NonUniformMesh,
  NotAnalysisSuitable,
  NotHalfLevelMesh,
  DegenerateJacobian,
  SingularMatrix,
  SolverFailure,
  Overflow,
  Parse,
  Singularity,
};

/// Exception carrying a machine-checkable error category.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace aiga
