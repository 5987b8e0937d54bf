#pragma once

// 1:1 entrainment of the oscillator by a periodic input u(t) = eps * h(omega_u t).
//
// Phase-difference dynamics chi = theta - omega_u t are averaged to
//   chi' = V(chi) = (omega - omega_u) + eps * Gamma(chi),
//   Gamma(chi) = (1/2pi) int q(s + chi) h(s) ds,
// i.e. eps is kept outside Gamma. Stable roots of V are the locking phases.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "phasekit/orbit.hpp"
#include "phasekit/prc.hpp"
#include "phasekit/sensitivity.hpp"
#include "phasekit/spectral.hpp"

namespace phasekit {

class InputWaveform {
 public:
  enum class Kind { Fourier, SmoothedSquare };

  /// h(s) = amplitude * sin(s).
  static InputWaveform sine(double omega_u, double amplitude = 1.0) {
    return fourier(omega_u, 0.0, {0.0}, {amplitude});
  }

  /// h(s) = mean + sum_k cos_k cos(k s) + sin_k sin(k s), k = 1..M.
  static InputWaveform fourier(double omega_u, double mean, std::vector<double> cos_coeff,
                               std::vector<double> sin_coeff) {
    InputWaveform w;
    w.kind_ = Kind::Fourier;
    w.omega_u_ = omega_u;
    w.mean_ = mean;
    const std::size_t M = std::max(cos_coeff.size(), sin_coeff.size());
    cos_coeff.resize(M, 0.0);
    sin_coeff.resize(M, 0.0);
    w.cos_ = std::move(cos_coeff);
    w.sin_ = std::move(sin_coeff);
    w.validate();
    return w;
  }

  /// Logistic-smoothed square wave: on for |s| < pi * duty (mod 2pi).
  static InputWaveform smoothed_square(double omega_u, double duty = 0.5, double steepness = 50.0,
                                       double amplitude = 1.0) {
    InputWaveform w;
    w.kind_ = Kind::SmoothedSquare;
    w.omega_u_ = omega_u;
    w.duty_ = duty;
    w.steepness_ = steepness;
    w.amplitude_ = amplitude;
    w.validate();
    w.mean_ = w.sampled_mean();
    return w;
  }

  /// Square wave truncated to M harmonics. Gibbs overshoot is removed by
  /// rescaling so that the waveform stays within [-amplitude, amplitude].
  static InputWaveform square_fourier(double omega_u, double duty = 0.5, std::size_t harmonics = 16,
                                      double amplitude = 1.0) {
    if (!(duty > 0.0 && duty < 1.0)) throw Error(ErrorKind::Precondition, "entrainment", "duty must lie in (0, 1)");
    std::vector<double> c(harmonics), s(harmonics, 0.0);
    for (std::size_t k = 1; k <= harmonics; ++k) {
      const double kk = static_cast<double>(k);
      c[k - 1] = 2.0 * amplitude * std::sin(kk * std::numbers::pi * duty) / (kk * std::numbers::pi);
    }
    InputWaveform raw;
    raw.kind_ = Kind::Fourier;
    raw.omega_u_ = omega_u;
    raw.mean_ = amplitude * duty;
    raw.cos_ = c;
    raw.sin_ = s;
    const double peak = raw.sup_norm();
    const double scale = peak > std::abs(amplitude) ? std::abs(amplitude) / peak : 1.0;
    for (auto& v : c) v *= scale;
    return fourier(omega_u, raw.mean_ * scale, std::move(c), std::move(s));
  }

  Kind kind() const { return kind_; }
  double omega_u() const { return omega_u_; }
  double period() const { return kTwoPi / omega_u_; }
  double mean() const { return mean_; }
  double duty() const { return duty_; }
  double steepness() const { return steepness_; }
  double amplitude() const { return amplitude_; }
  const std::vector<double>& cos_coefficients() const { return cos_; }
  const std::vector<double>& sin_coefficients() const { return sin_; }

  InputWaveform with_frequency(double omega_u) const {
    InputWaveform w = *this;
    w.omega_u_ = omega_u;
    w.validate();
    return w;
  }

  /// Value at input phase s.
  double operator()(double s) const {
    if (kind_ == Kind::SmoothedSquare) {
      const double z = steepness_ * (std::cos(s) - std::cos(std::numbers::pi * duty_));
      return amplitude_ / (1.0 + std::exp(-z));
    }
    double v = mean_;
    for (std::size_t k = 0; k < cos_.size(); ++k) {
      const double ks = static_cast<double>(k + 1) * s;
      v += cos_[k] * std::cos(ks) + sin_[k] * std::sin(ks);
    }
    return v;
  }

  double at_time(double t) const { return (*this)(omega_u_ * t); }

  std::vector<double> samples(std::size_t N) const {
    std::vector<double> out(N);
    for (std::size_t j = 0; j < N; ++j) out[j] = (*this)(kTwoPi * static_cast<double>(j) / static_cast<double>(N));
    return out;
  }

  double sup_norm(std::size_t N = 4096) const {
    double m = 0.0;
    for (double v : samples(N)) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  InputWaveform() = default;

  void validate() const {
    if (!(omega_u_ > 0.0) || !std::isfinite(omega_u_))
      throw Error(ErrorKind::Precondition, "entrainment", "input frequency must be positive and finite");
    if (kind_ == Kind::SmoothedSquare) {
      if (!(duty_ > 0.0 && duty_ < 1.0)) throw Error(ErrorKind::Precondition, "entrainment", "duty must lie in (0, 1)");
      if (!(steepness_ > 0.0) || !std::isfinite(steepness_))
        throw Error(ErrorKind::Precondition, "entrainment", "steepness must be positive");
    }
    if (sup_norm() > 1.0 + 1e-12)
      throw Error(ErrorKind::Precondition, "entrainment",
                  "input waveform must satisfy |h| <= 1; carry the amplitude in eps instead");
  }

  double sampled_mean() const {
    auto s = samples(4096);
    return periodic_integral(s) / kTwoPi;
  }

  Kind kind_ = Kind::Fourier;
  double omega_u_ = 1.0;
  double mean_ = 0.0;
  std::vector<double> cos_, sin_;
  double duty_ = 0.5, steepness_ = 50.0, amplitude_ = 1.0;
};

struct CouplingFunction {
  std::vector<double> chi;
  Vector values;
  Vector derivative;
  TrigInterpolant interpolant;  // rows: Gamma, Gamma'

  std::size_t grid_size() const { return chi.size(); }
  double operator()(double c) const { return interpolant(wrap_2pi(c))[0]; }
  double slope(double c) const { return interpolant(wrap_2pi(c))[1]; }
  double sup_norm() const { return values.cwiseAbs().maxCoeff(); }
};

namespace detail {

inline std::vector<double> resample_periodic(std::span<const double> x, std::size_t N) {
  if (x.size() == N) return {x.begin(), x.end()};
  Matrix m(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = x[j];
  TrigInterpolant it(m);
  std::vector<double> out(N);
  for (std::size_t j = 0; j < N; ++j) out[j] = it(kTwoPi * static_cast<double>(j) / static_cast<double>(N))[0];
  return out;
}

}  // namespace detail

/// Gamma from grid samples of q and h on uniform phase grids. Grids of
/// different sizes are brought to the larger one by trigonometric interpolation.
inline CouplingFunction coupling_function(std::span<const double> q, std::span<const double> h) {
  if (q.empty() || h.empty()) throw Error(ErrorKind::Precondition, "entrainment", "coupling function needs a non-empty grid");
  const std::size_t N = std::max(q.size(), h.size());
  auto qs = detail::resample_periodic(q, N);
  auto hs = detail::resample_periodic(h, N);
  auto g = circular_correlation(qs, hs);
  CouplingFunction cf;
  cf.chi = phase_grid(N);
  cf.values = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(N));
  Matrix row = cf.values.transpose();
  cf.derivative = spectral_derivative(row).row(0).transpose();
  Matrix both(2, static_cast<Eigen::Index>(N));
  both.row(0) = cf.values.transpose();
  both.row(1) = cf.derivative.transpose();
  cf.interpolant = TrigInterpolant(both);
  return cf;
}

inline CouplingFunction coupling_function(const PhaseResponse& prc, const InputWaveform& input) {
  auto h = input.samples(prc.grid_size());
  return coupling_function(std::span<const double>(prc.input_prc.data(), prc.grid_size()), h);
}

/// Coupling-function sensitivity S_Gamma: the same correlation applied to Z_q.
inline CouplingFunction coupling_sensitivity(const Vector& Z_q, const InputWaveform& input) {
  auto h = input.samples(static_cast<std::size_t>(Z_q.size()));
  return coupling_function(std::span<const double>(Z_q.data(), static_cast<std::size_t>(Z_q.size())), h);
}

struct LockingRoot {
  double chi = 0.0;
  double V = 0.0;
  double V_prime = 0.0;
  bool stable = false;
};

struct LockingSensitivity {
  std::size_t param = 0;
  std::string name;
  double S_chi = 0.0;
  double S_chi_omega = 0.0;
  double S_chi_gamma = 0.0;
};

struct LockingReport {
  double detuning = 0.0;  // omega - omega_u
  double epsilon = 0.0;
  std::vector<LockingRoot> roots;  // ascending in chi
  std::optional<std::size_t> selected;
  std::vector<LockingSensitivity> sensitivities;

  bool locked() const { return selected.has_value(); }
  const LockingRoot& chi_star() const {
    if (!selected) throw Error(ErrorKind::Precondition, "entrainment", "no stable locking phase (drift)");
    return roots[*selected];
  }
};

/// Locking phases of V(chi) = detuning + eps * Gamma(chi). Every sign change on
/// the grid is bracketed, bisected and then polished by Newton.
inline LockingReport locking_points(const CouplingFunction& gamma, double detuning, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorKind::Precondition, "entrainment", "coupling amplitude eps must be positive");
  const std::size_t N = gamma.grid_size();
  if (N == 0) throw Error(ErrorKind::Precondition, "entrainment", "empty coupling function");
  auto V = [&](double c) { return detuning + epsilon * gamma(c); };
  auto dV = [&](double c) { return epsilon * gamma.slope(c); };

  LockingReport rep;
  rep.detuning = detuning;
  rep.epsilon = epsilon;
  const double h = kTwoPi / static_cast<double>(N);
  for (std::size_t j = 0; j < N; ++j) {
    double a = static_cast<double>(j) * h, b = a + h;
    double va = detuning + epsilon * gamma.values[static_cast<Eigen::Index>(j)];
    double vb = detuning + epsilon * gamma.values[static_cast<Eigen::Index>((j + 1) % N)];
    if (va == 0.0) {
      rep.roots.push_back({a, 0.0, dV(a), false});
      continue;
    }
    if (vb == 0.0 || (va > 0.0) == (vb > 0.0)) continue;
    for (int it = 0; it < 30; ++it) {
      const double m = 0.5 * (a + b), vm = V(m);
      if ((vm > 0.0) == (va > 0.0)) {
        a = m;
        va = vm;
      } else {
        b = m;
      }
    }
    double c = 0.5 * (a + b);
    for (int it = 0; it < 20; ++it) {
      const double d = dV(c);
      if (d == 0.0) break;
      const double next = c - V(c) / d;
      if (!(next >= a - h && next <= b + h)) break;
      const bool done = std::abs(next - c) < 1e-15;
      c = next;
      if (done) break;
    }
    rep.roots.push_back({wrap_2pi(c), V(c), dV(c), false});
  }
  std::sort(rep.roots.begin(), rep.roots.end(), [](const auto& x, const auto& y) { return x.chi < y.chi; });
  double best = 0.0;
  for (std::size_t i = 0; i < rep.roots.size(); ++i) {
    auto& r = rep.roots[i];
    r.stable = r.V_prime < 0.0;
    if (r.stable && r.V_prime < best) {
      best = r.V_prime;
      rep.selected = i;
    }
  }
  return rep;
}

/// Re-select the stable root closest (on the circle) to an observed phase.
inline void select_root(LockingReport& rep, double chi) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.roots.size(); ++i) {
    if (!rep.roots[i].stable) continue;
    const double d = std::abs(wrap_pi(rep.roots[i].chi - chi));
    if (d < best) {
      best = d;
      rep.selected = i;
    }
  }
}

inline constexpr double kTangencyThreshold = 1e-8;

/// S_chi = -(S_omega + eps S_Gamma(chi*)) / V'(chi*), split into the
/// frequency part and the coupling part. The total is their sum by construction.
inline LockingSensitivity locking_sensitivity(const LockingReport& rep, double S_omega, const CouplingFunction& S_gamma,
                                              std::size_t param = 0, std::string name = {}) {
  const auto& root = rep.chi_star();
  if (std::abs(root.V_prime) < kTangencyThreshold)
    throw Error(ErrorKind::NearTangency, "entrainment", "V'(chi*) is numerically zero; locking sensitivity is unbounded");
  LockingSensitivity s;
  s.param = param;
  s.name = std::move(name);
  s.S_chi_omega = -S_omega / root.V_prime;
  s.S_chi_gamma = -rep.epsilon * S_gamma(root.chi) / root.V_prime;
  s.S_chi = s.S_chi_omega + s.S_chi_gamma;
  return s;
}

inline LockingSensitivity locking_sensitivity(const LockingReport& rep, const SensitivityBundle& b,
                                              const InputWaveform& input) {
  return locking_sensitivity(rep, b.S_omega, coupling_sensitivity(b.Z_q, input), b.param, b.name);
}

struct EntrainmentOptions {
  double tol = 1e-10;
  std::size_t forcing_periods = 200;
  /// Locked if chi varies by less than this over the final quarter.
  double lock_tolerance = 1e-3;
  PhaseOptions phase{};
};

struct EntrainmentResult {
  std::vector<double> times;     // forcing-period boundaries
  std::vector<double> chi;       // wrapped to [0, 2pi)
  std::vector<double> chi_unwrapped;
  Matrix states;                 // n x samples
  bool locked = false;
  double chi_final = 0.0;
  std::size_t slips = 0;
};

/// Integrates x' = f(x) + eps g(x) h(omega_u t) and reads chi = Theta(x(t_k))
/// at the input-period boundaries t_k, where the input phase is 0 mod 2pi.
inline EntrainmentResult simulate_entrainment(const ModelDefinition& model, const PeriodicOrbit& orbit,
                                              const InputWaveform& input, double epsilon, const Vector& x0,
                                              const EntrainmentOptions& opt = {}) {
  if (opt.forcing_periods < 50)
    throw Error(ErrorKind::Precondition, "entrainment", "simulation horizon must cover at least 50 input periods");
  if (!std::isfinite(epsilon)) throw Error(ErrorKind::Precondition, "entrainment", "eps must be finite");
  model.check_args(x0, orbit.params);
  const double Tu = input.period();
  const std::size_t K = opt.forcing_periods;
  InputSignal u = [&](double t) { return epsilon * input.at_time(t); };
  std::vector<double> stops(K - 1);
  for (std::size_t k = 1; k < K; ++k) stops[k - 1] = Tu * static_cast<double>(k);
  Trajectory tr;
  try {
    tr = integrate(model, x0, orbit.params, u, 0.0, Tu * static_cast<double>(K), opt.tol, stops);
  } catch (const Error& e) {
    throw Error(ErrorKind::BasinEscape, "entrainment", std::string("forced trajectory failed: ") + e.what());
  }
  EntrainmentResult res;
  res.states.resize(static_cast<Eigen::Index>(model.dim()), static_cast<Eigen::Index>(K + 1));
  for (std::size_t k = 0; k <= K; ++k) {
    const double t = Tu * static_cast<double>(k);
    Vector x = k == 0 ? x0 : (k == K ? tr.final_state() : tr.at(t));
    res.states.col(static_cast<Eigen::Index>(k)) = x;
    const double c = asymptotic_phase(orbit, model, x, opt.phase).theta;
    res.times.push_back(t);
    res.chi.push_back(wrap_2pi(c));
    res.chi_unwrapped.push_back(k == 0 ? c : res.chi_unwrapped.back() + wrap_pi(c - res.chi_unwrapped.back()));
  }
  const double total = res.chi_unwrapped.back() - res.chi_unwrapped.front();
  res.slips = static_cast<std::size_t>(std::floor(std::abs(total) / kTwoPi));
  const std::size_t tail = (3 * K) / 4;
  auto [lo, hi] = std::minmax_element(res.chi_unwrapped.begin() + static_cast<std::ptrdiff_t>(tail), res.chi_unwrapped.end());
  res.locked = (*hi - *lo) <= opt.lock_tolerance;
  res.chi_final = res.chi.back();
  return res;
}

/// Phase-locking setup shared by the analytic route and its oracle: the input
/// frequency is fixed and the detuning follows omega(lambda).
struct LockingProblem {
  InputWaveform input;
  double epsilon = 0.0;
};

/// Central-difference oracle for S_chi*: orbit, iPRC, Gamma and chi* are all
/// recomputed at lambda_k +- h with the input frequency held fixed.
inline double locking_fd_oracle(const ModelDefinition& model, const PeriodicOrbit& nominal, const LockingProblem& lp,
                                double chi_nominal, std::size_t k, double h = 0.0) {
  nominal.params.check_index(k);
  if (h <= 0.0) h = default_fd_step(nominal.params, k);
  OrbitOptions oo;
  oo.grid = nominal.grid_size();
  oo.tol = nominal.tol;
  oo.section = nominal.section;
  oo.transient_periods = 1.0;
  OrbitSeed seed{nominal.initial_state(), nominal.period};
  auto chi_at = [&](double sign) {
    ParameterVector p = nominal.params.with(k, nominal.params[k] + sign * h);
    auto o = find_periodic_orbit(model, p, seed, oo);
    auto r = compute_iprc(o, model);
    auto g = coupling_function(r, lp.input);
    auto rep = locking_points(g, o.omega - lp.input.omega_u(), lp.epsilon);
    select_root(rep, chi_nominal);
    return chi_nominal + wrap_pi(rep.chi_star().chi - chi_nominal);
  };
  return (chi_at(+1.0) - chi_at(-1.0)) / (2.0 * h);
}

}  // namespace phasekit
