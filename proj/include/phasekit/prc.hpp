#pragma once

// Phase response: the adjoint iPRC (state q_x and input q), asymptotic phase
// read-out, and finite-amplitude PRCs by direct perturbation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "phasekit/model.hpp"
#include "phasekit/odeint.hpp"
#include "phasekit/orbit.hpp"
#include "phasekit/spectral.hpp"

namespace phasekit {

struct PhaseResponse {
  std::vector<double> phases;
  double omega = 0.0;
  Matrix state_prc;  // q_x, n x N
  Vector input_prc;  // q, N
  /// |<q_x, f> - omega| / omega before re-normalization, per grid point.
  Vector normalization_residual;
  /// || q_x transported once around the orbit - q_x(0) ||.
  double periodicity_error = 0.0;
  TrigInterpolant state_interpolant;
  TrigInterpolant input_interpolant;

  std::size_t grid_size() const { return phases.size(); }
  Vector state(std::size_t j) const { return state_prc.col(static_cast<Eigen::Index>(j)); }
  double q(double theta) const { return input_interpolant(wrap_2pi(theta))[0]; }
};

struct PrcOptions {
  double tol = 1e-12;
  double normalization_tol = 1e-6;
};

namespace detail {

// Left eigenvector of the monodromy for the multiplier closest to 1.
inline Vector adjoint_floquet_vector(const Matrix& monodromy) {
  Eigen::EigenSolver<Matrix> es(monodromy.transpose());
  Eigen::Index best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double d = std::abs(es.eigenvalues()[i] - 1.0);
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  Vector v = es.eigenvectors().col(best).real();
  if (v.norm() == 0.0) v = es.eigenvectors().col(best).imag();
  return v;
}

inline Vector input_field_on(const ModelDefinition& m, const Vector& x, const ParameterVector& p) {
  return eval_input_field(m, x, p);
}

}  // namespace detail

/// Adjoint iPRC: the unit-multiplier eigenvector of Phi(T)^T normalized by
/// <q_x, f> = omega, transported backward in time one grid segment at a
/// time (the stable direction for the adjoint of an attracting orbit).
inline PhaseResponse compute_iprc(const PeriodicOrbit& orbit, const ModelDefinition& model, const PrcOptions& opt = {}) {
  if (!orbit.hyperbolic) throw Error(ErrorKind::NonHyperbolic, "prc", "iPRC requires a hyperbolic orbit");
  const std::size_t n = model.dim();
  const std::size_t N = orbit.grid_size();
  const ParameterVector& p = orbit.params;
  const double omega = orbit.omega;
  const double T = orbit.period;

  Vector q0 = detail::adjoint_floquet_vector(orbit.monodromy);
  q0 *= omega / q0.dot(eval_f(model, orbit.state(0), p));

  PhaseResponse r;
  r.phases = orbit.phases;
  r.omega = omega;
  r.state_prc.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(N));
  r.input_prc.resize(static_cast<Eigen::Index>(N));
  r.normalization_residual = Vector::Zero(static_cast<Eigen::Index>(N));
  r.state_prc.col(0) = q0;

  Rhs rhs = [&](double, const Vector& y, Vector& dy) {
    Vector x = y.head(n);
    eval_f_into(model, x.data(), p, dy.data());
    dy.tail(n) = -jacobian(model, x, p).transpose() * y.tail(n);
  };
  IntegratorOptions iopt;
  iopt.tol = opt.tol;
  Vector y(2 * n);
  Vector q = q0;
  for (std::size_t step = 0; step < N; ++step) {
    const std::size_t hi = N - step;  // segment [t_{hi-1}, t_hi], t_N = T wraps to grid point 0
    const std::size_t lo = hi - 1;
    y.head(n) = orbit.state(hi % N);
    y.tail(n) = q;
    const double t_hi = T * static_cast<double>(hi) / static_cast<double>(N);
    const double t_lo = T * static_cast<double>(lo) / static_cast<double>(N);
    auto tr = integrate_rhs(rhs, y, t_hi, t_lo, iopt);
    q = tr.final_state().tail(n);
    const double proj = q.dot(eval_f(model, orbit.state(lo), p));
    r.normalization_residual[static_cast<Eigen::Index>(lo)] = std::abs(proj - omega) / omega;
    q *= omega / proj;
    if (lo > 0) r.state_prc.col(static_cast<Eigen::Index>(lo)) = q;
  }
  r.periodicity_error = (q - q0).norm();

  Eigen::Index worst = 0;
  r.normalization_residual.maxCoeff(&worst);
  if (r.normalization_residual[worst] > opt.normalization_tol)
    throw Error(ErrorKind::Accuracy, "prc",
                "normalization drift " + std::to_string(r.normalization_residual[worst]) + " at grid point " +
                    std::to_string(worst) + " (theta = " + std::to_string(r.phases[static_cast<std::size_t>(worst)]) +
                    ")");

  for (std::size_t j = 0; j < N; ++j)
    r.input_prc[static_cast<Eigen::Index>(j)] = r.state(j).dot(detail::input_field_on(model, orbit.state(j), p));
  r.state_interpolant = TrigInterpolant(r.state_prc);
  r.input_interpolant = TrigInterpolant(r.input_prc.transpose());
  return r;
}

struct OrbitProjection {
  double theta = 0.0;
  double distance = 0.0;
};

/// Closest orbit point: nearest grid sample (ties to the smallest phase), then
/// Newton on <x~(theta) - x, x~'(theta)> = 0 over the trigonometric interpolant.
inline OrbitProjection project_onto_orbit(const PeriodicOrbit& orbit, const Vector& x) {
  const std::size_t N = orbit.grid_size();
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < N; ++j) {
    double d = (orbit.states.col(static_cast<Eigen::Index>(j)) - x).squaredNorm();
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  double theta = orbit.phases[best];
  const double h = kTwoPi / static_cast<double>(N);
  const double lo = theta - h, hi = theta + h;
  for (int it = 0; it < 30; ++it) {
    Vector xt = orbit.interpolant(wrap_2pi(theta));
    Vector d1 = orbit.interpolant.derivative(wrap_2pi(theta));
    Vector d2 = orbit.interpolant.second_derivative(wrap_2pi(theta));
    Vector diff = xt - x;
    double g = diff.dot(d1);
    double dg = d1.squaredNorm() + diff.dot(d2);
    if (dg <= 0.0) break;
    double step = g / dg;
    double next = std::clamp(theta - step, lo, hi);
    if (std::abs(next - theta) <= 1e-15 * kTwoPi) {
      theta = next;
      break;
    }
    theta = next;
  }
  theta = wrap_2pi(theta);
  return {theta, (orbit.interpolant(theta) - x).norm()};
}

inline double orbit_diameter(const PeriodicOrbit& orbit) {
  return (orbit.states.rowwise().maxCoeff() - orbit.states.rowwise().minCoeff()).norm();
}

struct PhaseOptions {
  double tol = 1e-12;
  /// Convergence distance relative to the orbit diameter.
  double convergence = 1e-8;
  std::size_t max_periods = 200;
  /// Distance (in diameters) from the orbit beyond which the point is declared outside the basin.
  double escape_radius = 1e3;
};

struct AsymptoticPhase {
  double theta = 0.0;
  std::size_t periods = 0;
  double distance = 0.0;
};

namespace detail {

inline AsymptoticPhase asymptotic_phase_impl(const PeriodicOrbit& orbit, const ModelDefinition& model, Vector x,
                                             const PhaseOptions& opt, std::size_t min_periods,
                                             std::size_t exact_periods) {
  const double diam = orbit_diameter(orbit);
  const double delta = opt.convergence * diam;
  const Vector center = orbit.states.rowwise().mean();
  std::size_t k = 0;
  auto escaped = [&](const Vector& v) { return !v.allFinite() || (v - center).norm() > opt.escape_radius * diam; };
  if (escaped(x)) throw Error(ErrorKind::BasinEscape, "prc", "state lies far outside the orbit's neighborhood");
  while (true) {
    bool must_continue = k < min_periods || (exact_periods > 0 && k < exact_periods);
    if (!must_continue) {
      auto pr = project_onto_orbit(orbit, x);
      if (exact_periods > 0 || pr.distance <= delta) return {pr.theta, k, pr.distance};
    }
    if (k >= opt.max_periods)
      throw Error(ErrorKind::BasinEscape, "prc",
                  "no convergence to the orbit within " + std::to_string(opt.max_periods) + " periods");
    try {
      x = integrate(model, x, orbit.params, {}, 0.0, orbit.period, opt.tol).final_state();
    } catch (const Error& e) {
      throw Error(ErrorKind::BasinEscape, "prc", std::string("trajectory left the basin: ") + e.what());
    }
    ++k;
    if (escaped(x)) throw Error(ErrorKind::BasinEscape, "prc", "trajectory escaped from the orbit's neighborhood");
  }
}

}  // namespace detail

/// Asymptotic phase of x: integrate whole periods until the state is within
/// the convergence distance of the orbit, then project. Whole periods leave
/// the phase unchanged, so no unwinding correction is needed.
inline AsymptoticPhase asymptotic_phase(const PeriodicOrbit& orbit, const ModelDefinition& model, const Vector& x,
                                        const PhaseOptions& opt = {}) {
  model.check_args(x, orbit.params);
  return detail::asymptotic_phase_impl(orbit, model, x, opt, 0, 0);
}

struct FinitePrcSample {
  double theta = 0.0;
  double epsilon = 0.0;
  double shift = 0.0;  // wrapped to (-pi, pi]
  std::size_t periods = 0;
  double distance = 0.0;
};

/// Finite-amplitude PRC: impulse realized as the jump x -> x + eps g(x).
/// The unperturbed reference phase is read out with the same number of
/// periods so integrator drift cancels.
inline std::vector<FinitePrcSample> compute_finite_prc(const PeriodicOrbit& orbit, const ModelDefinition& model,
                                                       double epsilon, const std::vector<double>& thetas,
                                                       const PhaseOptions& opt = {}) {
  if (epsilon == 0.0 || !std::isfinite(epsilon))
    throw Error(ErrorKind::Precondition, "prc", "finite PRC amplitude must be nonzero and finite");
  std::vector<FinitePrcSample> out;
  out.reserve(thetas.size());
  for (double theta : thetas) {
    Vector x = orbit_point(orbit, theta);
    Vector xj = x + epsilon * eval_input_field(model, x, orbit.params);
    auto post = detail::asymptotic_phase_impl(orbit, model, xj, opt, 0, 0);
    auto pre = detail::asymptotic_phase_impl(orbit, model, x, opt, 0, post.periods);
    out.push_back({wrap_2pi(theta), epsilon, wrap_pi(post.theta - pre.theta), post.periods, post.distance});
  }
  return out;
}

}  // namespace phasekit
