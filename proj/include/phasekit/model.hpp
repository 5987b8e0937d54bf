#pragma once

// Parameterized open oscillator models  x' = f(x, p) + g(x, p) u,  y = h(x, p).
//
// A model is written once as a struct with member templates `f`, `g` and `h`
// over the scalar type; ModelDefinition instantiates them for double and for
// first- and second-order dual carriers so that every derivative the solvers
// need comes from forward-mode differentiation.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phasekit/dual.hpp"
#include "phasekit/error.hpp"

namespace phasekit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(std::vector<std::string> names, std::vector<double> values)
      : names_(std::move(names)), values_(std::move(values)) {
    if (names_.empty()) throw Error(ErrorKind::Precondition, "model", "parameter vector must be non-empty");
    if (names_.size() != values_.size())
      throw Error(ErrorKind::Precondition, "model", "parameter names and values differ in length");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j)
        if (names_[i] == names_[j])
          throw Error(ErrorKind::Precondition, "model", "duplicate parameter name '" + names_[i] + "'");
      check_finite(i, values_[i]);
    }
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  const std::string& name(std::size_t k) const { return names_[k]; }
  const std::vector<std::string>& names() const { return names_; }
  std::span<const double> values() const { return values_; }

  bool contains(const std::string& name) const {
    for (const auto& n : names_)
      if (n == name) return true;
    return false;
  }

  std::size_t index(const std::string& name) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
      if (names_[k] == name) return k;
    throw Error(ErrorKind::Config, "model", "unknown parameter '" + name + "'");
  }

  void set(std::size_t k, double value) {
    check_index(k);
    check_finite(k, value);
    values_[k] = value;
  }
  void set(const std::string& name, double value) { set(index(name), value); }

  /// Copy with entry k replaced.
  ParameterVector with(std::size_t k, double value) const {
    ParameterVector out = *this;
    out.set(k, value);
    return out;
  }

  void check_index(std::size_t k) const {
    if (k >= values_.size())
      throw Error(ErrorKind::Precondition, "model",
                  "parameter index " + std::to_string(k) + " out of range (q = " + std::to_string(size()) + ")");
  }

  friend bool operator==(const ParameterVector& a, const ParameterVector& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  void check_finite(std::size_t k, double v) const {
    if (!std::isfinite(v))
      throw Error(ErrorKind::Precondition, "model", "parameter '" + names_[k] + "' is not finite");
  }

  std::vector<std::string> names_;
  std::vector<double> values_;
};

enum class Direction { Increasing, Decreasing, Either };

/// Coordinate Poincare section x[index] = level, crossed in `direction`.
struct Section {
  std::size_t index = 0;
  double level = 0.0;
  Direction direction = Direction::Increasing;
};

struct ModelInfo {
  std::string name;
  std::string description;
  std::vector<std::string> state_names;
  Section section;
  std::vector<double> seed_state;
  double seed_period = 0.0;
};

/// A^{ij} = df_i/dx_j, b = df/dp_k, hess_xx[i](j, k) = d2 f_i / dx_j dx_k,
/// hess_xp(i, j) = d2 f_i / dx_j dp_k, input_x = dg/dx, input_p = dg/dp_k.
struct DerivativeBundle {
  Matrix A;
  Vector b;
  std::vector<Matrix> hess_xx;
  Matrix hess_xp;
  Matrix input_x;
  Vector input_p;
};

class ModelDefinition {
  template <class S>
  using Field = std::function<void(std::span<const S>, std::span<const S>, std::span<S>)>;

 public:
  /// Wrap a system struct exposing `template <class S> void f(x, p, out)`,
  /// `template <class S> void g(x, p, out)` and `template <class S> S h(x, p)`.
  template <class System>
  static ModelDefinition from(ModelInfo info, ParameterVector defaults, System sys) {
    ModelDefinition m;
    m.info_ = std::move(info);
    m.defaults_ = std::move(defaults);
    m.dim_ = m.info_.state_names.size();
    if (m.dim_ < 2) throw Error(ErrorKind::Precondition, "model", "state dimension must be at least 2");
    m.f_ = [sys](std::span<const double> x, std::span<const double> p, std::span<double> o) { sys.f(x, p, o); };
    m.f1_ = [sys](std::span<const D1> x, std::span<const D1> p, std::span<D1> o) { sys.f(x, p, o); };
    m.f2_ = [sys](std::span<const D2> x, std::span<const D2> p, std::span<D2> o) { sys.f(x, p, o); };
    m.g_ = [sys](std::span<const double> x, std::span<const double> p, std::span<double> o) { sys.g(x, p, o); };
    m.g1_ = [sys](std::span<const D1> x, std::span<const D1> p, std::span<D1> o) { sys.g(x, p, o); };
    m.h_ = [sys](std::span<const double> x, std::span<const double> p) { return sys.h(x, p); };
    return m;
  }

  std::size_t dim() const { return dim_; }
  const ModelInfo& info() const { return info_; }
  const std::string& name() const { return info_.name; }
  const ParameterVector& defaults() const { return defaults_; }
  std::size_t num_params() const { return defaults_.size(); }

  // Unchecked evaluators; the free functions below validate and differentiate.
  void raw_f(std::span<const double> x, std::span<const double> p, std::span<double> out) const { f_(x, p, out); }
  void raw_f(std::span<const D1> x, std::span<const D1> p, std::span<D1> out) const { f1_(x, p, out); }
  void raw_f(std::span<const D2> x, std::span<const D2> p, std::span<D2> out) const { f2_(x, p, out); }
  void raw_g(std::span<const double> x, std::span<const double> p, std::span<double> out) const { g_(x, p, out); }
  void raw_g(std::span<const D1> x, std::span<const D1> p, std::span<D1> out) const { g1_(x, p, out); }
  double raw_h(std::span<const double> x, std::span<const double> p) const { return h_(x, p); }

  void check_args(const Vector& x, const ParameterVector& p) const {
    if (static_cast<std::size_t>(x.size()) != dim_)
      throw Error(ErrorKind::Precondition, "model",
                  "state has dimension " + std::to_string(x.size()) + ", model '" + name() + "' expects " +
                      std::to_string(dim_));
    if (p.size() != defaults_.size())
      throw Error(ErrorKind::Precondition, "model", "parameter vector dimension does not match model '" + name() + "'");
  }

 private:
  ModelInfo info_;
  ParameterVector defaults_;
  std::size_t dim_ = 0;
  Field<double> f_, g_;
  Field<D1> f1_, g1_;
  Field<D2> f2_;
  std::function<double(std::span<const double>, std::span<const double>)> h_;
};

namespace detail {

inline void require_finite(const Vector& v, const char* what, const ModelDefinition& m) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      const auto& names = m.info().state_names;
      std::string comp = static_cast<std::size_t>(i) < names.size() ? names[i] : std::to_string(i);
      throw Error(ErrorKind::ModelDomain, "model",
                  std::string(what) + " of model '" + m.name() + "' is not finite in component " + comp);
    }
  }
}

template <class S>
std::vector<S> lift(std::span<const double> v) {
  return std::vector<S>(v.begin(), v.end());
}

}  // namespace detail

/// f(x, p) without validation; used in integrator inner loops.
inline void eval_f_into(const ModelDefinition& m, const double* x, const ParameterVector& p, double* out) {
  m.raw_f(std::span<const double>(x, m.dim()), p.values(), std::span<double>(out, m.dim()));
}

inline Vector eval_f(const ModelDefinition& m, const Vector& x, const ParameterVector& p) {
  m.check_args(x, p);
  Vector out(m.dim());
  m.raw_f(std::span<const double>(x.data(), m.dim()), p.values(), std::span<double>(out.data(), m.dim()));
  detail::require_finite(out, "vector field f", m);
  return out;
}

inline Vector eval_input_field(const ModelDefinition& m, const Vector& x, const ParameterVector& p) {
  m.check_args(x, p);
  Vector out(m.dim());
  m.raw_g(std::span<const double>(x.data(), m.dim()), p.values(), std::span<double>(out.data(), m.dim()));
  detail::require_finite(out, "input field g", m);
  return out;
}

inline double eval_output(const ModelDefinition& m, const Vector& x, const ParameterVector& p) {
  m.check_args(x, p);
  double y = m.raw_h(std::span<const double>(x.data(), m.dim()), p.values());
  if (!std::isfinite(y)) throw Error(ErrorKind::ModelDomain, "model", "output map h of model '" + m.name() + "' is not finite");
  return y;
}

/// df/dx at (x, p), one dual pass per column.
inline Matrix jacobian(const ModelDefinition& m, const Vector& x, const ParameterVector& p) {
  const std::size_t n = m.dim();
  std::vector<D1> xs(n), ps = detail::lift<D1>(p.values()), out(n);
  Matrix A(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) xs[i] = D1(x[i], i == j ? 1.0 : 0.0);
    m.raw_f(std::span<const D1>(xs), std::span<const D1>(ps), std::span<D1>(out));
    for (std::size_t i = 0; i < n; ++i) A(i, j) = out[i].d;
  }
  return A;
}

/// df/dp_k at (x, p), one dual pass.
inline Vector param_derivative(const ModelDefinition& m, const Vector& x, const ParameterVector& p, std::size_t k) {
  p.check_index(k);
  const std::size_t n = m.dim();
  std::vector<D1> xs(n), ps(p.size()), out(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = D1(x[i], 0.0);
  for (std::size_t l = 0; l < p.size(); ++l) ps[l] = D1(p[l], l == k ? 1.0 : 0.0);
  m.raw_f(std::span<const D1>(xs), std::span<const D1>(ps), std::span<D1>(out));
  Vector b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = out[i].d;
  return b;
}

inline DerivativeBundle derivatives(const ModelDefinition& m, const Vector& x, const ParameterVector& p,
                                    std::size_t k) {
  m.check_args(x, p);
  p.check_index(k);
  const std::size_t n = m.dim();
  const std::size_t q = p.size();
  DerivativeBundle d;
  d.A = jacobian(m, x, p);

  // First-order blocks in p_k, and the input field.
  {
    std::vector<D1> xs(n), ps(q), out(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = D1(x[i], 0.0);
    for (std::size_t l = 0; l < q; ++l) ps[l] = D1(p[l], l == k ? 1.0 : 0.0);
    m.raw_f(std::span<const D1>(xs), std::span<const D1>(ps), std::span<D1>(out));
    d.b.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.b[i] = out[i].d;
    m.raw_g(std::span<const D1>(xs), std::span<const D1>(ps), std::span<D1>(out));
    d.input_p.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.input_p[i] = out[i].d;

    d.input_x.resize(n, n);
    std::vector<D1> pc = detail::lift<D1>(p.values());
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) xs[i] = D1(x[i], i == j ? 1.0 : 0.0);
      m.raw_g(std::span<const D1>(xs), std::span<const D1>(pc), std::span<D1>(out));
      for (std::size_t i = 0; i < n; ++i) d.input_x(i, j) = out[i].d;
    }
  }

  // Second-order blocks: outer tangent seeds x_j, inner tangent seeds x_l or p_k.
  {
    std::vector<D2> xs(n), ps(q), out(n);
    d.hess_xx.assign(n, Matrix::Zero(n, n));
    d.hess_xp.resize(n, n);
    auto seed_x = [&](std::size_t j, long inner) {
      for (std::size_t i = 0; i < n; ++i)
        xs[i] = D2(D1(x[i], static_cast<long>(i) == inner ? 1.0 : 0.0), D1(i == j ? 1.0 : 0.0, 0.0));
    };
    for (std::size_t l = 0; l < q; ++l) ps[l] = D2(D1(p[l], 0.0), D1(0.0, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t l = j; l < n; ++l) {
        seed_x(j, static_cast<long>(l));
        m.raw_f(std::span<const D2>(xs), std::span<const D2>(ps), std::span<D2>(out));
        for (std::size_t i = 0; i < n; ++i) {
          d.hess_xx[i](j, l) = out[i].d.d;
          d.hess_xx[i](l, j) = out[i].d.d;
        }
      }
    }
    for (std::size_t l = 0; l < q; ++l) ps[l] = D2(D1(p[l], l == k ? 1.0 : 0.0), D1(0.0, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      seed_x(j, -1);
      m.raw_f(std::span<const D2>(xs), std::span<const D2>(ps), std::span<D2>(out));
      for (std::size_t i = 0; i < n; ++i) d.hess_xp(i, j) = out[i].d.d;
    }
  }

  auto check = [&](const Matrix& M, const char* what) {
    if (!M.allFinite()) throw Error(ErrorKind::ModelDomain, "model", std::string(what) + " of model '" + m.name() + "' is not finite");
  };
  check(d.A, "df/dx");
  check(d.b, "df/dp");
  for (const auto& H : d.hess_xx) check(H, "d2f/dx2");
  check(d.hess_xp, "d2f/dxdp");
  check(d.input_x, "dg/dx");
  check(d.input_p, "dg/dp");
  return d;
}

}  // namespace phasekit
