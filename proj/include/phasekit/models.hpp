#pragma once

// Built-in model registry.

#include <string>
#include <vector>

#include "phasekit/model.hpp"

namespace phasekit::models {

/// Radial normal form with time scale tau and squared radius rho:
///   x' = tau * ((rho - r^2) x - y),  y' = tau * (x + (rho - r^2) y).
/// Orbit: circle of radius sqrt(rho), angular frequency tau.
struct Radial {
  std::vector<double> input{1.0, 0.0};

  template <class S>
  void f(std::span<const S> x, std::span<const S> p, std::span<S> out) const {
    const S& tau = p[0];
    const S& rho = p[1];
    S s = rho - (x[0] * x[0] + x[1] * x[1]);
    out[0] = tau * (s * x[0] - x[1]);
    out[1] = tau * (x[0] + s * x[1]);
  }
  template <class S>
  void g(std::span<const S>, std::span<const S>, std::span<S> out) const {
    out[0] = S(input[0]);
    out[1] = S(input[1]);
  }
  template <class S>
  S h(std::span<const S> x, std::span<const S>) const {
    return x[0];
  }
};

/// van der Pol: x1' = x2, x2' = mu (1 - x1^2) x2 - x1, additive input on x2.
struct VanDerPol {
  template <class S>
  void f(std::span<const S> x, std::span<const S> p, std::span<S> out) const {
    out[0] = x[1];
    out[1] = p[0] * (1.0 - x[0] * x[0]) * x[1] - x[0];
  }
  template <class S>
  void g(std::span<const S>, std::span<const S>, std::span<S> out) const {
    out[0] = S(0.0);
    out[1] = S(1.0);
  }
  template <class S>
  S h(std::span<const S> x, std::span<const S>) const {
    return x[0];
  }
};

/// Goodwin loop: mRNA X, protein Y, repressor Z.
///   X' = a / (K^n + Z^n) - b X,  Y' = c X - d Y,  Z' = e Y - g Z.
/// The input drives mRNA synthesis additively, g = (1, 0, 0).
struct Goodwin {
  template <class S>
  void f(std::span<const S> x, std::span<const S> p, std::span<S> out) const {
    using std::pow;
    const S& a = p[0];
    const S& b = p[1];
    const S& c = p[2];
    const S& d = p[3];
    const S& e = p[4];
    const S& g = p[5];
    const S& K = p[6];
    const S& n = p[7];
    out[0] = a / (pow(K, n) + pow(x[2], n)) - b * x[0];
    out[1] = c * x[0] - d * x[1];
    out[2] = e * x[1] - g * x[2];
  }
  template <class S>
  void g(std::span<const S>, std::span<const S>, std::span<S> out) const {
    out[0] = S(1.0);
    out[1] = S(0.0);
    out[2] = S(0.0);
  }
  template <class S>
  S h(std::span<const S> x, std::span<const S>) const {
    return x[0];
  }
};

inline ModelDefinition radial() {
  ModelInfo info{"radial",
                 "radial normal form; tau scales time, rho is the squared orbit radius",
                 {"x", "y"},
                 Section{1, 0.0, Direction::Increasing},
                 {1.0, 0.0},
                 6.283185307179586};
  return ModelDefinition::from(info, ParameterVector({"tau", "rho"}, {1.0, 1.0}), Radial{});
}

inline ModelDefinition van_der_pol() {
  ModelInfo info{"vdp", "van der Pol oscillator", {"x1", "x2"}, Section{0, 0.0, Direction::Increasing}, {2.0, 0.0}, 6.66};
  return ModelDefinition::from(info, ParameterVector({"mu"}, {1.0}), VanDerPol{});
}

inline ModelDefinition goodwin() {
  ModelInfo info{"goodwin",
                 "Goodwin three-state genetic loop (mRNA X, protein Y, repressor Z)",
                 {"X", "Y", "Z"},
                 Section{0, 0.1, Direction::Increasing},
                 {0.1, 0.45, 1.8},
                 21.0};
  return ModelDefinition::from(
      info, ParameterVector({"a", "b", "c", "d", "e", "g", "K", "n"}, {1.0, 0.15, 1.0, 0.2, 1.0, 0.25, 1.0, 12.0}),
      Goodwin{});
}

inline std::vector<std::string> builtin_names() { return {"radial", "vdp", "goodwin"}; }

inline ModelDefinition find(const std::string& name) {
  if (name == "radial") return radial();
  if (name == "vdp") return van_der_pol();
  if (name == "goodwin") return goodwin();
  throw Error(ErrorKind::Config, "model", "unknown model '" + name + "'");
}

}  // namespace phasekit::models
