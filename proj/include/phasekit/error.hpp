#pragma once

#include <stdexcept>
#include <string>

namespace phasekit {

enum class ErrorKind {
  ModelDomain,
  Precondition,
  Stiffness,
  Divergence,
  NoCrossing,
  NonConvergence,
  NonHyperbolic,
  Accuracy,
  BasinEscape,
  DegenerateSection,
  UndefinedRelative,
  NearTangency,
  Alignment,
  DegenerateNormalization,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ModelDomain: return "model_domain";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Stiffness: return "stiffness";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::NoCrossing: return "no_crossing";
    case ErrorKind::NonConvergence: return "non_convergence";
    case ErrorKind::NonHyperbolic: return "non_hyperbolic";
    case ErrorKind::Accuracy: return "accuracy";
    case ErrorKind::BasinEscape: return "basin_escape";
    case ErrorKind::DegenerateSection: return "degenerate_section";
    case ErrorKind::UndefinedRelative: return "undefined_relative";
    case ErrorKind::NearTangency: return "near_tangency";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::DegenerateNormalization: return "degenerate_normalization";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library. `module` names the component that
/// detected the problem (model, odeint, orbit, prc, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace phasekit
