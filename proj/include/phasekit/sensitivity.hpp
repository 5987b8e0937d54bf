#pragma once

// Parameter sensitivities of the orbit (S_omega, Z_x) and of the iPRC
// (Z_qx, Z_q). Both linear periodic BVPs are solved by shooting with
// superposition; spectral collocation on the phase grid is the fallback when
// the shooting system is ill-conditioned, and can be requested directly.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phasekit/model.hpp"
#include "phasekit/odeint.hpp"
#include "phasekit/orbit.hpp"
#include "phasekit/prc.hpp"
#include "phasekit/spectral.hpp"

namespace phasekit {

enum class BvpMethod { Auto, Shooting, Collocation };

struct SensitivityOptions {
  double tol = 1e-12;
  BvpMethod method = BvpMethod::Auto;
  double max_condition = 1e10;
};

struct OrbitSensitivity {
  std::size_t param = 0;
  double S_omega = 0.0;
  Matrix Z_x;  // n x N
  BvpMethod method = BvpMethod::Shooting;
  double condition = 0.0;
};

struct PrcSensitivity {
  Matrix Z_qx;  // n x N
  Vector Z_q;   // N
  BvpMethod method = BvpMethod::Shooting;
  double condition = 0.0;
};

struct SensitivityBundle {
  std::size_t param = 0;
  std::string name;
  double omega = 0.0;
  double period = 0.0;
  double S_omega = 0.0;
  Matrix Z_x;
  Matrix Z_qx;
  Vector Z_q;
  std::vector<double> phases;
  bool relative = false;

  /// Period sensitivity, always derived from S_omega: S_T / T = -S_omega / omega.
  double S_T() const { return -period * S_omega / omega; }
};

/// C = sum_k H_xx[.][.][k] Z_k + H_xp - A S_omega / omega.
inline Matrix c_matrix(const DerivativeBundle& d, const Vector& Z_x, double S_omega, double omega) {
  const auto n = d.A.rows();
  Matrix C = d.hess_xp - d.A * (S_omega / omega);
  for (Eigen::Index i = 0; i < n; ++i) C.row(i) += (d.hess_xx[static_cast<std::size_t>(i)] * Z_x).transpose();
  return C;
}

namespace detail {

inline double condition_number(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  if (s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

inline std::vector<double> phase_stops(std::size_t N) {
  std::vector<double> s(N - 1);
  for (std::size_t j = 1; j < N; ++j) s[j - 1] = kTwoPi * static_cast<double>(j) / static_cast<double>(N);
  return s;
}

inline OrbitSensitivity orbit_sensitivity_collocation(const PeriodicOrbit& orbit, const ModelDefinition& model,
                                                      std::size_t k) {
  const std::size_t n = model.dim(), N = orbit.grid_size();
  const double w = orbit.omega;
  const auto nn = static_cast<Eigen::Index>(n), NN = static_cast<Eigen::Index>(N);
  const Eigen::Index U = nn * NN;
  Matrix D = differentiation_matrix(N);
  Matrix M = Matrix::Zero(U + 1, U + 1);
  Vector rhs = Vector::Zero(U + 1);
  for (Eigen::Index j = 0; j < NN; ++j) {
    Vector x = orbit.states.col(j);
    Matrix A = jacobian(model, x, orbit.params);
    Vector b = param_derivative(model, x, orbit.params, k);
    Vector v = eval_f(model, x, orbit.params);
    for (Eigen::Index i = 0; i < nn; ++i) {
      const Eigen::Index row = j * nn + i;
      for (Eigen::Index m = 0; m < NN; ++m) M(row, m * nn + i) += D(j, m);
      for (Eigen::Index l = 0; l < nn; ++l) M(row, j * nn + l) -= A(i, l) / w;
      M(row, U) = v[i] / (w * w);
      rhs[row] = b[i] / w;
    }
  }
  M(U, static_cast<Eigen::Index>(orbit.section.index)) = 1.0;
  Eigen::PartialPivLU<Matrix> lu(M);
  Vector sol = lu.solve(rhs);
  OrbitSensitivity s;
  s.param = k;
  s.S_omega = sol[U];
  s.Z_x = Eigen::Map<const Matrix>(sol.data(), nn, NN);
  s.method = BvpMethod::Collocation;
  s.condition = 1.0 / lu.rcond();
  return s;
}

}  // namespace detail

/// Solves  Z' - A Z / omega + v S_omega / omega^2 - b / omega = 0, Z periodic,
/// Z_i(0) = 0 (the section coordinate is pinned).
inline OrbitSensitivity orbit_sensitivity(const PeriodicOrbit& orbit, const ModelDefinition& model, std::size_t k,
                                          const SensitivityOptions& opt = {}) {
  orbit.params.check_index(k);
  if (!orbit.hyperbolic) throw Error(ErrorKind::NonHyperbolic, "sensitivity", "orbit must be hyperbolic");
  if (opt.method == BvpMethod::Collocation) return detail::orbit_sensitivity_collocation(orbit, model, k);

  const std::size_t n = model.dim(), N = orbit.grid_size();
  const auto nn = static_cast<Eigen::Index>(n);
  const double w = orbit.omega;
  const ParameterVector& p = orbit.params;

  // y = [x; Psi (n x n); P; R] in the phase variable.
  Rhs rhs = [&](double, const Vector& y, Vector& dy) {
    Vector x = y.head(nn);
    Vector v(nn);
    eval_f_into(model, x.data(), p, v.data());
    Matrix A = jacobian(model, x, p);
    Vector b = param_derivative(model, x, p, k);
    dy.head(nn) = v / w;
    Eigen::Map<const Matrix> Psi(y.data() + nn, nn, nn);
    Eigen::Map<Matrix>(dy.data() + nn, nn, nn) = A * Psi / w;
    const Eigen::Index off = nn + nn * nn;
    dy.segment(off, nn) = (A * y.segment(off, nn) - v / w) / w;
    dy.segment(off + nn, nn) = (A * y.segment(off + nn, nn) + b) / w;
  };
  Vector y0 = Vector::Zero(2 * nn + nn * nn + nn);
  y0.head(nn) = orbit.initial_state();
  Eigen::Map<Matrix>(y0.data() + nn, nn, nn).setIdentity();
  IntegratorOptions iopt;
  iopt.tol = opt.tol;
  auto stops = detail::phase_stops(N);
  auto tr = integrate_rhs(rhs, y0, 0.0, kTwoPi, iopt, stops);

  auto unpack = [&](const Vector& y, Matrix& Psi, Vector& P, Vector& R) {
    Psi = Eigen::Map<const Matrix>(y.data() + nn, nn, nn);
    P = y.segment(nn + nn * nn, nn);
    R = y.segment(2 * nn + nn * nn, nn);
  };
  Matrix PsiT;
  Vector PT, RT;
  unpack(tr.final_state(), PsiT, PT, RT);
  Matrix J = Matrix::Zero(nn + 1, nn + 1);
  J.topLeftCorner(nn, nn) = PsiT - Matrix::Identity(nn, nn);
  J.topRightCorner(nn, 1) = PT;
  J(nn, static_cast<Eigen::Index>(orbit.section.index)) = 1.0;
  const double cond = detail::condition_number(J);
  if (!std::isfinite(cond) || cond > opt.max_condition) {
    if (opt.method == BvpMethod::Shooting || !std::isfinite(cond))
      throw Error(ErrorKind::DegenerateSection, "sensitivity",
                  "orbit sensitivity system is singular (condition " + std::to_string(cond) + ")");
    return detail::orbit_sensitivity_collocation(orbit, model, k);
  }
  Vector rhsv = Vector::Zero(nn + 1);
  rhsv.head(nn) = -RT;
  Vector sol = J.fullPivLu().solve(rhsv);
  Vector Z0 = sol.head(nn);

  OrbitSensitivity s;
  s.param = k;
  s.S_omega = sol[nn];
  s.method = BvpMethod::Shooting;
  s.condition = cond;
  s.Z_x.resize(nn, static_cast<Eigen::Index>(N));
  s.Z_x.col(0) = Z0;
  for (std::size_t j = 1; j < N; ++j) {
    Matrix Psi;
    Vector P, R;
    unpack(tr.at(stops[j - 1]), Psi, P, R);
    s.Z_x.col(static_cast<Eigen::Index>(j)) = Psi * Z0 + s.S_omega * P + R;
  }
  return s;
}

namespace detail {

inline Vector field_sensitivity(const DerivativeBundle& d, const Vector& Z) { return d.A * Z + d.b; }

inline PrcSensitivity prc_sensitivity_collocation(const PeriodicOrbit& orbit, const PhaseResponse& prc,
                                                  const OrbitSensitivity& os, const ModelDefinition& model) {
  const std::size_t n = model.dim(), N = orbit.grid_size();
  const auto nn = static_cast<Eigen::Index>(n), NN = static_cast<Eigen::Index>(N);
  const Eigen::Index U = nn * NN;
  const double w = orbit.omega;
  Matrix D = differentiation_matrix(N);
  Matrix M = Matrix::Zero(U + 1, U);
  Vector rhs = Vector::Zero(U + 1);
  for (Eigen::Index j = 0; j < NN; ++j) {
    auto d = derivatives(model, orbit.states.col(j), orbit.params, os.param);
    Matrix C = c_matrix(d, os.Z_x.col(j), os.S_omega, w);
    Vector forcing = C.transpose() * prc.state_prc.col(j) / w;
    for (Eigen::Index i = 0; i < nn; ++i) {
      const Eigen::Index row = j * nn + i;
      for (Eigen::Index m = 0; m < NN; ++m) M(row, m * nn + i) += D(j, m);
      for (Eigen::Index l = 0; l < nn; ++l) M(row, j * nn + l) += d.A(l, i) / w;
      rhs[row] = -forcing[i];
    }
  }
  auto d0 = derivatives(model, orbit.initial_state(), orbit.params, os.param);
  Vector v0 = eval_f(model, orbit.initial_state(), orbit.params);
  for (Eigen::Index i = 0; i < nn; ++i) M(U, i) = v0[i];
  rhs[U] = os.S_omega - prc.state_prc.col(0).dot(field_sensitivity(d0, os.Z_x.col(0)));
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  Vector sol = qr.solve(rhs);
  PrcSensitivity s;
  s.Z_qx = Eigen::Map<const Matrix>(sol.data(), nn, NN);
  s.method = BvpMethod::Collocation;
  s.condition = 0.0;
  return s;
}

}  // namespace detail

/// Solves  Z_qx' + A^T Z_qx / omega + C^T q_x / omega = 0, Z_qx periodic,
/// <Z_qx, v> + <q_x, A Z_x + b> = S_omega, then assembles
/// Z_q = <Z_qx, g> + <q_x, g_x Z_x + g_p>.
inline PrcSensitivity prc_sensitivity(const PeriodicOrbit& orbit, const PhaseResponse& prc, const OrbitSensitivity& os,
                                      const ModelDefinition& model, const SensitivityOptions& opt = {}) {
  const std::size_t n = model.dim(), N = orbit.grid_size();
  const auto nn = static_cast<Eigen::Index>(n);
  const double w = orbit.omega, S = os.S_omega;
  const ParameterVector& p = orbit.params;
  const std::size_t k = os.param;
  if (prc.grid_size() != N || static_cast<std::size_t>(os.Z_x.cols()) != N)
    throw Error(ErrorKind::Alignment, "sensitivity", "orbit, iPRC and orbit sensitivity grids differ");

  PrcSensitivity s;
  bool use_collocation = opt.method == BvpMethod::Collocation;
  if (!use_collocation) {
    // y = [x; Z_x; q_x; Y] in the phase variable, integrated backward one
    // segment at a time; x, Z_x, q_x restart from their grid values.
    Rhs rhs = [&](double, const Vector& y, Vector& dy) {
      Vector x = y.head(nn);
      auto d = derivatives(model, x, p, k);
      Vector v(nn);
      eval_f_into(model, x.data(), p, v.data());
      Vector Z = y.segment(nn, nn);
      Vector q = y.segment(2 * nn, nn);
      Matrix C = c_matrix(d, Z, S, w);
      dy.head(nn) = v / w;
      dy.segment(nn, nn) = (d.A * Z + d.b - v * (S / w)) / w;
      dy.segment(2 * nn, nn) = -d.A.transpose() * q / w;
      dy.segment(3 * nn, nn) = -(d.A.transpose() * y.segment(3 * nn, nn) + C.transpose() * q) / w;
    };
    IntegratorOptions iopt;
    iopt.tol = opt.tol;
    auto march = [&](const Vector& Y_end, Matrix* record) {
      Vector Y = Y_end;
      Vector y(4 * nn);
      for (std::size_t step = 0; step < N; ++step) {
        const std::size_t hi = N - step, lo = hi - 1;
        const auto g = static_cast<Eigen::Index>(hi % N);
        y.head(nn) = orbit.states.col(g);
        y.segment(nn, nn) = os.Z_x.col(g);
        y.segment(2 * nn, nn) = prc.state_prc.col(g);
        y.segment(3 * nn, nn) = Y;
        auto tr = integrate_rhs(rhs, y, kTwoPi * static_cast<double>(hi) / static_cast<double>(N),
                                kTwoPi * static_cast<double>(lo) / static_cast<double>(N), iopt);
        Y = tr.final_state().segment(3 * nn, nn);
        if (record && lo > 0) record->col(static_cast<Eigen::Index>(lo)) = Y;
      }
      return Y;
    };
    Vector W = march(Vector::Zero(nn), nullptr);
    auto d0 = derivatives(model, orbit.initial_state(), p, k);
    Vector v0 = eval_f(model, orbit.initial_state(), p);
    Matrix J(nn + 1, nn);
    J.topRows(nn) = orbit.monodromy.transpose() - Matrix::Identity(nn, nn);
    J.row(nn) = v0.transpose();
    Vector r(nn + 1);
    r.head(nn) = -W;
    r[nn] = S - prc.state_prc.col(0).dot(detail::field_sensitivity(d0, os.Z_x.col(0)));
    const double cond = detail::condition_number(J);
    if (!std::isfinite(cond) || cond > opt.max_condition) {
      if (opt.method == BvpMethod::Shooting)
        throw Error(ErrorKind::DegenerateSection, "sensitivity",
                    "iPRC sensitivity system is singular (condition " + std::to_string(cond) + ")");
      use_collocation = true;
    } else {
      Vector Y0 = J.colPivHouseholderQr().solve(r);
      s.Z_qx.resize(nn, static_cast<Eigen::Index>(N));
      s.Z_qx.col(0) = Y0;
      march(Y0, &s.Z_qx);
      s.method = BvpMethod::Shooting;
      s.condition = cond;
    }
  }
  if (use_collocation) s = detail::prc_sensitivity_collocation(orbit, prc, os, model);

  s.Z_q.resize(static_cast<Eigen::Index>(N));
  for (std::size_t j = 0; j < N; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    auto d = derivatives(model, orbit.states.col(jj), p, k);
    Vector g = eval_input_field(model, orbit.states.col(jj), p);
    s.Z_q[jj] = s.Z_qx.col(jj).dot(g) + prc.state_prc.col(jj).dot(d.input_x * os.Z_x.col(jj) + d.input_p);
  }
  return s;
}

inline SensitivityBundle sensitivity_bundle(const PeriodicOrbit& orbit, const PhaseResponse& prc,
                                            const ModelDefinition& model, std::size_t k,
                                            const SensitivityOptions& opt = {}) {
  auto os = orbit_sensitivity(orbit, model, k, opt);
  auto ps = prc_sensitivity(orbit, prc, os, model, opt);
  SensitivityBundle b;
  b.param = k;
  b.name = orbit.params.name(k);
  b.omega = orbit.omega;
  b.period = orbit.period;
  b.S_omega = os.S_omega;
  b.Z_x = std::move(os.Z_x);
  b.Z_qx = std::move(ps.Z_qx);
  b.Z_q = std::move(ps.Z_q);
  b.phases = orbit.phases;
  return b;
}

/// Sensitivities with respect to log(lambda_k): everything scaled by lambda_k.
inline SensitivityBundle relative_sensitivities(const SensitivityBundle& b, const ParameterVector& p) {
  p.check_index(b.param);
  const double lam = p[b.param];
  if (lam == 0.0)
    throw Error(ErrorKind::UndefinedRelative, "sensitivity",
                "relative sensitivity undefined for zero parameter '" + p.name(b.param) + "'");
  if (b.relative) return b;
  SensitivityBundle r = b;
  r.S_omega *= lam;
  r.Z_x *= lam;
  r.Z_qx *= lam;
  r.Z_q *= lam;
  r.relative = true;
  return r;
}

/// Grid residual of the orbit-sensitivity equation (spectral derivative).
inline double orbit_sensitivity_residual(const PeriodicOrbit& orbit, const ModelDefinition& model,
                                         const OrbitSensitivity& s) {
  Matrix dZ = spectral_derivative(s.Z_x);
  double worst = 0.0;
  for (std::size_t j = 0; j < orbit.grid_size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    Vector x = orbit.states.col(jj);
    Vector r = dZ.col(jj) - jacobian(model, x, orbit.params) * s.Z_x.col(jj) / orbit.omega +
               eval_f(model, x, orbit.params) * s.S_omega / (orbit.omega * orbit.omega) -
               param_derivative(model, x, orbit.params, s.param) / orbit.omega;
    worst = std::max(worst, r.norm());
  }
  return worst;
}

/// Grid residual of the iPRC-sensitivity equation (spectral derivative).
inline double prc_sensitivity_residual(const PeriodicOrbit& orbit, const PhaseResponse& prc,
                                       const OrbitSensitivity& os, const ModelDefinition& model,
                                       const PrcSensitivity& s) {
  Matrix dY = spectral_derivative(s.Z_qx);
  double worst = 0.0;
  for (std::size_t j = 0; j < orbit.grid_size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    auto d = derivatives(model, orbit.states.col(jj), orbit.params, os.param);
    Matrix C = c_matrix(d, os.Z_x.col(jj), os.S_omega, orbit.omega);
    Vector r = dY.col(jj) + (d.A.transpose() * s.Z_qx.col(jj) + C.transpose() * prc.state_prc.col(jj)) / orbit.omega;
    worst = std::max(worst, r.norm());
  }
  return worst;
}

/// max_j |<Z_qx, v> + <q_x, Z_v> - S_omega| / omega.
inline double differentiated_normalization_residual(const PeriodicOrbit& orbit, const PhaseResponse& prc,
                                                    const OrbitSensitivity& os, const ModelDefinition& model,
                                                    const PrcSensitivity& s) {
  double worst = 0.0;
  for (std::size_t j = 0; j < orbit.grid_size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    auto d = derivatives(model, orbit.states.col(jj), orbit.params, os.param);
    Vector v = eval_f(model, orbit.states.col(jj), orbit.params);
    double r = s.Z_qx.col(jj).dot(v) + prc.state_prc.col(jj).dot(d.A * os.Z_x.col(jj) + d.b) - os.S_omega;
    worst = std::max(worst, std::abs(r) / orbit.omega);
  }
  return worst;
}

struct FdSensitivity {
  double h = 0.0;
  double S_omega = 0.0;
  Matrix Z_x;
  Matrix Z_qx;
  Vector Z_q;
};

inline double default_fd_step(const ParameterVector& p, std::size_t k) { return 1e-4 * std::max(std::abs(p[k]), 1.0); }

/// Central differences of orbit and iPRC recomputed at p_k +- h. Both orbits
/// are anchored on the nominal section so grid phases are comparable.
inline FdSensitivity finite_difference_oracle(const ModelDefinition& model, const PeriodicOrbit& nominal,
                                              std::size_t k, double h = 0.0, const PrcOptions& prc_opt = {}) {
  nominal.params.check_index(k);
  if (h <= 0.0) h = default_fd_step(nominal.params, k);
  OrbitOptions oo;
  oo.grid = nominal.grid_size();
  oo.tol = nominal.tol;
  oo.section = nominal.section;
  oo.transient_periods = 1.0;
  OrbitSeed seed{nominal.initial_state(), nominal.period};
  auto solve = [&](double sign) {
    ParameterVector p = nominal.params.with(k, nominal.params[k] + sign * h);
    PeriodicOrbit o;
    try {
      o = find_periodic_orbit(model, p, seed, oo);
    } catch (const Error& e) {
      throw Error(e.kind(), "sensitivity",
                  std::string("orbit solve failed at perturbed parameter '") + p.name(k) + "': " + e.what());
    }
    return std::make_pair(o, compute_iprc(o, model, prc_opt));
  };
  auto [op, rp] = solve(+1.0);
  auto [om, rm] = solve(-1.0);
  FdSensitivity fd;
  fd.h = h;
  fd.S_omega = (op.omega - om.omega) / (2.0 * h);
  fd.Z_x = (op.states - om.states) / (2.0 * h);
  fd.Z_qx = (rp.state_prc - rm.state_prc) / (2.0 * h);
  fd.Z_q = (rp.input_prc - rm.input_prc) / (2.0 * h);
  return fd;
}

}  // namespace phasekit
