#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kprox {

enum class Errc {
  // casefile
  MissingMatrix,
  MalformedRow,
  DanglingBranch,
  ZeroReactance,
  Unsupported,
  MissingGenerator,
  NonPositive,
  InvalidCase,
  // network
  SingularBranch,
  SingularInterior,
  DegeneratePhase,
  UnknownBranch,
  AlreadyOut,
  DisconnectedNetwork,
  // dynamics / prox
  NonFinite,
  NonConvergence,
  NumericalUnderflow,
  // analysis
  DegenerateWeights,
  NotPSD,
  WeightMismatch,
  UnstableStep,
  MassLeak,
  // configuration
  Config,
};

std::string_view to_string(Errc code) noexcept;

/// Library-wide exception. Every failure carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Non-fatal outcome attached to a result (e.g. a line outage that islands the grid).
struct Diagnostic {
  Errc code;
  std::string message;
};

}  // namespace kprox
