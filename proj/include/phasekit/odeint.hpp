#pragma once

// Dormand-Prince 5(4) integration with the free fourth-order dense output,
// plus Poincare-section crossing detection on the interpolant.
//
// Explicit only: the step-size underflow error tells users that stiff
// problems are outside what this integrator handles.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "phasekit/model.hpp"

namespace phasekit {

struct IntegratorOptions {
  double tol = 1e-10;  // used as both relative and absolute tolerance
  double initial_step = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 50'000'000;
  bool dense = true;
  /// When positive, take fixed steps of this size without error control.
  /// Only meant for order verification.
  double fixed_step = 0.0;
};

struct IntegrationStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

using Rhs = std::function<void(double, const Vector&, Vector&)>;

class Trajectory {
 public:
  struct Segment {
    double t0 = 0.0;
    double h = 0.0;
    std::array<Vector, 5> coeff;
  };

  std::size_t dim() const { return states_.empty() ? 0 : static_cast<std::size_t>(states_.front().size()); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vector>& states() const { return states_; }
  const IntegrationStats& stats() const { return stats_; }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  const Vector& final_state() const { return states_.back(); }
  bool has_dense() const { return !segments_.empty() || times_.size() == 1; }
  std::size_t num_steps() const { return times_.size() - 1; }

  /// State at t; exact at step endpoints, dense interpolant in between.
  Vector at(double t) const {
    std::size_t k = locate(t);
    if (t == times_[k]) return states_[k];
    if (t == times_[k + 1]) return states_[k + 1];
    require_dense();
    const Segment& s = segments_[k];
    double th = (t - s.t0) / s.h;
    double th1 = 1.0 - th;
    return s.coeff[0] + th * (s.coeff[1] + th1 * (s.coeff[2] + th * (s.coeff[3] + th1 * s.coeff[4])));
  }

  /// Time derivative of the dense interpolant.
  Vector derivative_at(double t) const {
    require_dense();
    std::size_t k = locate(t);
    const Segment& s = segments_[k];
    double th = (t - s.t0) / s.h;
    double th1 = 1.0 - th;
    Vector in3 = s.coeff[3] + th1 * s.coeff[4];
    Vector din3 = -s.coeff[4];
    Vector in2 = s.coeff[2] + th * in3;
    Vector din2 = in3 + th * din3;
    Vector in1 = s.coeff[1] + th1 * in2;
    Vector din1 = -in2 + th1 * din2;
    return (in1 + th * din1) / s.h;
  }

  /// Index k of the step [times[k], times[k+1]] containing t.
  std::size_t locate(double t) const {
    if (times_.size() < 2) {
      if (!times_.empty() && t == times_.front()) return 0;
      throw Error(ErrorKind::Precondition, "odeint", "trajectory has no steps");
    }
    const bool forward = times_.back() > times_.front();
    double lo = std::min(times_.front(), times_.back());
    double hi = std::max(times_.front(), times_.back());
    if (t < lo || t > hi) throw Error(ErrorKind::Precondition, "odeint", "time outside the integrated span");
    std::size_t k;
    if (forward) {
      auto it = std::upper_bound(times_.begin(), times_.end(), t);
      k = static_cast<std::size_t>(std::distance(times_.begin(), it));
    } else {
      auto it = std::upper_bound(times_.begin(), times_.end(), t, std::greater<double>());
      k = static_cast<std::size_t>(std::distance(times_.begin(), it));
    }
    k = k == 0 ? 0 : k - 1;
    return std::min(k, times_.size() - 2);
  }

  // Builders used by the integrator.
  void push_start(double t, Vector y) {
    times_.push_back(t);
    states_.push_back(std::move(y));
  }
  void push_step(double t, Vector y, Segment seg, bool dense) {
    times_.push_back(t);
    states_.push_back(std::move(y));
    if (dense) segments_.push_back(std::move(seg));
  }
  IntegrationStats& mutable_stats() { return stats_; }

 private:
  void require_dense() const {
    if (segments_.size() + 1 != times_.size())
      throw Error(ErrorKind::Precondition, "odeint", "trajectory was integrated without dense output");
  }

  std::vector<double> times_;
  std::vector<Vector> states_;
  std::vector<Segment> segments_;
  IntegrationStats stats_;
};

namespace detail {

// Dormand-Prince 5(4) tableau and Hairer's dense-output weights.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline void check_tolerance(double tol) {
  if (!(tol >= 1e-13 && tol <= 1e-3))
    throw Error(ErrorKind::Precondition, "odeint", "tolerance must lie in [1e-13, 1e-3]");
}

inline double error_norm(const Vector& err, const Vector& y0, const Vector& y1, double tol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    double sc = tol + tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    double r = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

/// Integrate y' = rhs(t, y) from t0 to t1 (either direction). Every time in
/// `stops` (ordered along the direction of integration) becomes a step
/// endpoint, so states there carry no interpolation error.
inline Trajectory integrate_rhs(const Rhs& rhs, const Vector& y0, double t0, double t1, const IntegratorOptions& opt,
                                std::span<const double> stops = {}) {
  using T = detail::Dopri5;
  if (opt.fixed_step <= 0.0) detail::check_tolerance(opt.tol);
  if (!y0.allFinite()) throw Error(ErrorKind::Divergence, "odeint", "initial state is not finite");
  Trajectory traj;
  traj.push_start(t0, y0);
  if (t0 == t1) return traj;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const Eigen::Index n = y0.size();
  auto& stats = traj.mutable_stats();

  Vector y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n), err(n);
  auto eval = [&](double t, const Vector& x, Vector& out) {
    rhs(t, x, out);
    ++stats.rhs_evals;
  };
  double t = t0;
  eval(t, y, k1);
  if (!k1.allFinite()) throw Error(ErrorKind::Divergence, "odeint", "vector field is not finite at the initial state");

  double h;
  if (opt.fixed_step > 0.0) {
    h = opt.fixed_step;
  } else if (opt.initial_step > 0.0) {
    h = opt.initial_step;
  } else {
    // Hairer's starting-step heuristic.
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc = opt.tol + opt.tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::abs(t1 - t0));
    ytmp = y + dir * h0 * k1;
    eval(t + dir * h0, ytmp, k2);
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc = opt.tol + opt.tol * std::abs(y[i]);
      d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / n) / h0;
    double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min(h, opt.max_step);

  std::size_t next_stop = 0;
  while (next_stop < stops.size() && dir * (stops[next_stop] - t0) <= 0.0) ++next_stop;

  bool last_rejected = false;
  while (dir * (t1 - t) > 0.0) {
    if (stats.steps + stats.rejected >= opt.max_steps)
      throw Error(ErrorKind::Stiffness, "odeint", "maximum number of steps exceeded");
    double target = t1;
    if (next_stop < stops.size() && dir * (stops[next_stop] - t1) < 0.0) target = stops[next_stop];
    bool hits_target = false;
    double step = h;
    if (step >= std::abs(target - t) * (1.0 - 1e-12)) {
      step = std::abs(target - t);
      hits_target = true;
    }
    if (step < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
      throw Error(ErrorKind::Stiffness, "odeint",
                  "step size underflow at t = " + std::to_string(t) +
                      "; the explicit integrator does not handle stiff problems");
    const double hs = dir * step;

    ytmp = y + hs * (T::a21 * k1);
    eval(t + T::c2 * hs, ytmp, k2);
    ytmp = y + hs * (T::a31 * k1 + T::a32 * k2);
    eval(t + T::c3 * hs, ytmp, k3);
    ytmp = y + hs * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
    eval(t + T::c4 * hs, ytmp, k4);
    ytmp = y + hs * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
    eval(t + T::c5 * hs, ytmp, k5);
    ytmp = y + hs * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
    const double tn = hits_target ? target : t + hs;
    eval(tn, ytmp, k6);
    y1 = y + hs * (T::a71 * k1 + T::a73 * k3 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6);
    eval(tn, y1, k7);

    double en = 0.0;
    if (opt.fixed_step <= 0.0) {
      err = hs * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
      en = detail::error_norm(err, y, y1, opt.tol);
      if (!std::isfinite(en)) en = 1e10;
    }

    if (en <= 1.0) {
      if (!y1.allFinite() || !k7.allFinite())
        throw Error(ErrorKind::Divergence, "odeint", "state became non-finite at t = " + std::to_string(tn));
      Trajectory::Segment seg;
      if (opt.dense) {
        Vector ydiff = y1 - y;
        Vector bspl = hs * k1 - ydiff;
        seg.t0 = t;
        seg.h = hs;
        seg.coeff[0] = y;
        seg.coeff[1] = ydiff;
        seg.coeff[2] = bspl;
        seg.coeff[3] = ydiff - hs * k7 - bspl;
        seg.coeff[4] = hs * (T::d1 * k1 + T::d3 * k3 + T::d4 * k4 + T::d5 * k5 + T::d6 * k6 + T::d7 * k7);
      }
      t = tn;
      y = y1;
      k1 = k7;
      ++stats.steps;
      traj.push_step(t, y, std::move(seg), opt.dense);
      if (hits_target && target != t1) ++next_stop;
      if (opt.fixed_step <= 0.0) {
        double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
        if (last_rejected) fac = std::min(fac, 1.0);
        double proposed = step * fac;
        // A shortened landing step must not shrink the next one.
        if (hits_target && step < h) proposed = std::max(proposed, h);
        h = std::min(proposed, opt.max_step);
      }
      last_rejected = false;
    } else {
      ++stats.rejected;
      h = step * std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
  }
  return traj;
}

using InputSignal = std::function<double(double)>;

/// Trajectory of x' = f(x, p) + g(x, p) u(t); `input` may be empty (u = 0).
inline Trajectory integrate(const ModelDefinition& model, const Vector& x0, const ParameterVector& p,
                            const InputSignal& input, double t0, double t1, double tol,
                            std::span<const double> stops = {}) {
  model.check_args(x0, p);
  const std::size_t n = model.dim();
  IntegratorOptions opt;
  opt.tol = tol;
  Vector gbuf(n);
  Rhs rhs = [&, gbuf](double t, const Vector& x, Vector& dx) mutable {
    eval_f_into(model, x.data(), p, dx.data());
    if (input) {
      double u = input(t);
      if (u != 0.0) {
        model.raw_g(std::span<const double>(x.data(), n), p.values(), std::span<double>(gbuf.data(), n));
        dx += u * gbuf;
      }
    }
  };
  return integrate_rhs(rhs, x0, t0, t1, opt, stops);
}

/// Joint integration of the state and the fundamental matrix Phi' = A(x) Phi,
/// Phi(t0) = I. The augmented state is [x; vec(Phi)] in column-major order.
class VariationalTrajectory {
 public:
  VariationalTrajectory(Trajectory traj, std::size_t n) : traj_(std::move(traj)), n_(n) {}

  const Trajectory& trajectory() const { return traj_; }
  Vector state(double t) const { return traj_.at(t).head(n_); }
  Matrix fundamental(double t) const {
    Vector a = traj_.at(t);
    return Eigen::Map<const Matrix>(a.data() + n_, n_, n_);
  }
  Vector final_state() const { return traj_.final_state().head(n_); }
  Matrix final_fundamental() const {
    return Eigen::Map<const Matrix>(traj_.final_state().data() + n_, n_, n_);
  }

 private:
  Trajectory traj_;
  std::size_t n_;
};

inline Rhs variational_rhs(const ModelDefinition& model, const ParameterVector& p) {
  const std::size_t n = model.dim();
  return [&model, &p, n](double, const Vector& y, Vector& dy) {
    Vector x = y.head(n);
    eval_f_into(model, x.data(), p, dy.data());
    Matrix A = jacobian(model, x, p);
    Eigen::Map<const Matrix> Phi(y.data() + n, n, n);
    Eigen::Map<Matrix>(dy.data() + n, n, n) = A * Phi;
  };
}

inline VariationalTrajectory integrate_variational(const ModelDefinition& model, const Vector& x0,
                                                   const ParameterVector& p, double t0, double t1, double tol,
                                                   std::span<const double> stops = {}) {
  model.check_args(x0, p);
  const std::size_t n = model.dim();
  Vector y0(n + n * n);
  y0.head(n) = x0;
  Eigen::Map<Matrix>(y0.data() + n, n, n).setIdentity();
  IntegratorOptions opt;
  opt.tol = tol;
  return VariationalTrajectory(integrate_rhs(variational_rhs(model, p), y0, t0, t1, opt, stops), n);
}

namespace detail {

inline bool crosses(double s0, double s1, Direction dir) {
  switch (dir) {
    case Direction::Increasing: return s0 < 0.0 && s1 >= 0.0;
    case Direction::Decreasing: return s0 > 0.0 && s1 <= 0.0;
    case Direction::Either: return (s0 < 0.0 && s1 >= 0.0) || (s0 > 0.0 && s1 <= 0.0);
  }
  return false;
}

// Safeguarded Newton on the dense interpolant inside [a, b].
inline double polish_crossing(const Trajectory& traj, std::size_t index, double level, double a, double b) {
  auto phi = [&](double t) { return traj.at(t)[static_cast<Eigen::Index>(index)] - level; };
  double fa = phi(a);
  double fb = phi(b);
  if (fb == 0.0) return b;
  double t = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    double ft = phi(t);
    if (std::abs(ft) <= 1e-14 * std::max(1.0, std::abs(level)) || std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(t)))
      return t;
    if ((ft < 0.0) == (fa < 0.0)) {
      a = t;
      fa = ft;
    } else {
      b = t;
    }
    double dft = traj.derivative_at(t)[static_cast<Eigen::Index>(index)];
    double tn = dft != 0.0 ? t - ft / dft : 0.5 * (a + b);
    if (!(tn > std::min(a, b) && tn < std::max(a, b))) tn = 0.5 * (a + b);
    t = tn;
  }
  return t;
}

}  // namespace detail

/// All crossings of x[index] = level in the requested direction, strictly
/// after the first sample time.
inline std::vector<double> find_section_crossings(const Trajectory& traj, const Section& section) {
  if (section.index >= traj.dim())
    throw Error(ErrorKind::Precondition, "odeint", "section index exceeds state dimension");
  std::vector<double> out;
  const auto& ts = traj.times();
  const auto& ys = traj.states();
  const auto i = static_cast<Eigen::Index>(section.index);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    double s0 = ys[k][i] - section.level;
    double s1 = ys[k + 1][i] - section.level;
    if (detail::crosses(s0, s1, section.direction))
      out.push_back(s1 == 0.0 ? ts[k + 1] : detail::polish_crossing(traj, section.index, section.level, ts[k], ts[k + 1]));
  }
  return out;
}

inline double find_section_crossing(const Trajectory& traj, const Section& section) {
  auto all = find_section_crossings(traj, section);
  if (all.empty())
    throw Error(ErrorKind::NoCrossing, "odeint",
                "trajectory does not cross section x[" + std::to_string(section.index) + "] = " +
                    std::to_string(section.level));
  return all.front();
}

}  // namespace phasekit
