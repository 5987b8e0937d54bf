#pragma once

// Periodic orbits by shooting: Newton on (x0, T) with a coordinate Poincare
// section as phase condition, then sampling on a uniform phase grid.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "phasekit/model.hpp"
#include "phasekit/odeint.hpp"
#include "phasekit/spectral.hpp"

namespace phasekit {

struct OrbitSeed {
  Vector state;
  double period = 0.0;
};

struct OrbitOptions {
  std::size_t grid = 256;
  double tol = 1e-12;
  double newton_tol = 1e-11;
  int max_newton = 40;
  /// Periods of free run before the first section crossing is used.
  double transient_periods = 5.0;
  /// Return flagged non-hyperbolic orbits instead of throwing.
  bool allow_non_hyperbolic = false;
  std::optional<Section> section;
};

inline constexpr double kHyperbolicMargin = 1e-6;
/// A genuine cycle has a Floquet multiplier at 1; anything farther off means
/// Newton settled on an equilibrium that trivially satisfies phi(T, x0) = x0.
inline constexpr double kTrivialMultiplierTolerance = 1e-6;

struct PeriodicOrbit {
  ParameterVector params;
  Section section;
  double omega = 0.0;
  double period = 0.0;
  std::vector<double> phases;
  Matrix states;  // n x N, column j at theta_j
  Matrix monodromy;
  std::complex<double> trivial_multiplier;
  std::vector<std::complex<double>> multipliers;  // nontrivial, by decreasing modulus
  bool hyperbolic = false;
  double periodicity_residual = 0.0;
  double tol = 1e-12;
  TrigInterpolant interpolant;

  std::size_t dim() const { return static_cast<std::size_t>(states.rows()); }
  std::size_t grid_size() const { return phases.size(); }
  Vector state(std::size_t j) const { return states.col(static_cast<Eigen::Index>(j)); }
  Vector initial_state() const { return states.col(0); }
};

class NonHyperbolicOrbit : public Error {
 public:
  explicit NonHyperbolicOrbit(PeriodicOrbit orbit)
      : Error(ErrorKind::NonHyperbolic, "orbit", describe(orbit)), orbit_(std::move(orbit)) {}
  const PeriodicOrbit& orbit() const { return orbit_; }

 private:
  static std::string describe(const PeriodicOrbit& o) {
    double worst = 0.0;
    for (auto m : o.multipliers) worst = std::max(worst, std::abs(m));
    return "orbit is not hyperbolic: nontrivial Floquet multiplier of modulus " + std::to_string(worst);
  }
  PeriodicOrbit orbit_;
};

namespace detail {

inline void classify_multipliers(PeriodicOrbit& o) {
  Eigen::EigenSolver<Matrix> es(o.monodromy, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  auto trivial = std::min_element(ev.begin(), ev.end(), [](auto a, auto b) {
    return std::abs(a - 1.0) < std::abs(b - 1.0);
  });
  o.trivial_multiplier = *trivial;
  ev.erase(trivial);
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
  o.multipliers = ev;
  o.hyperbolic = true;
  for (auto m : ev)
    if (std::abs(m) > 1.0 - kHyperbolicMargin) o.hyperbolic = false;
}

inline std::vector<double> grid_times(double T, std::size_t N) {
  std::vector<double> ts(N - 1);
  for (std::size_t j = 1; j < N; ++j) ts[j - 1] = T * static_cast<double>(j) / static_cast<double>(N);
  return ts;
}

}  // namespace detail

/// Sample x(t) on t_j = j T / N from x0 and assemble the orbit record.
inline PeriodicOrbit sample_orbit(const ModelDefinition& model, const ParameterVector& p, const Vector& x0, double T,
                                  const Section& section, std::size_t N, double tol) {
  if (N < 4) throw Error(ErrorKind::Precondition, "orbit", "grid must have at least 4 points");
  const std::size_t n = model.dim();
  auto stops = detail::grid_times(T, N);
  auto vt = integrate_variational(model, x0, p, 0.0, T, tol, stops);
  PeriodicOrbit o;
  o.params = p;
  o.section = section;
  o.period = T;
  o.omega = kTwoPi / T;
  o.tol = tol;
  o.phases = phase_grid(N);
  o.states.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(N));
  o.states.col(0) = x0;
  for (std::size_t j = 1; j < N; ++j) o.states.col(static_cast<Eigen::Index>(j)) = vt.state(stops[j - 1]);
  o.monodromy = vt.final_fundamental();
  o.periodicity_residual = (vt.final_state() - x0).norm();
  o.interpolant = TrigInterpolant(o.states);
  detail::classify_multipliers(o);
  return o;
}

inline double scale_of(const Vector& x) { return std::max(1.0, x.cwiseAbs().maxCoeff()); }

inline OrbitSeed default_seed(const ModelDefinition& model) {
  const auto& s = model.info().seed_state;
  return {Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size())), model.info().seed_period};
}

inline PeriodicOrbit find_periodic_orbit(const ModelDefinition& model, const ParameterVector& p, const OrbitSeed& seed,
                                         const OrbitOptions& opt = {}) {
  model.check_args(seed.state, p);
  if (!(seed.period > 0.0)) throw Error(ErrorKind::Precondition, "orbit", "seed period must be positive");
  const Section section = opt.section.value_or(model.info().section);
  const std::size_t n = model.dim();
  if (section.index >= n) throw Error(ErrorKind::Precondition, "orbit", "section index exceeds state dimension");
  const auto si = static_cast<Eigen::Index>(section.index);

  // Free run to the section: last two crossings give x0 and a period guess.
  double span = (opt.transient_periods + 2.5) * seed.period;
  auto run = integrate(model, seed.state, p, {}, 0.0, span, std::max(opt.tol, 1e-10));
  auto crossings = find_section_crossings(run, section);
  if (crossings.size() < 2)
    throw Error(ErrorKind::NonConvergence, "orbit",
                "seed does not settle onto an oscillation crossing the section; check the seed or basin");
  double T = crossings.back() - crossings[crossings.size() - 2];
  Vector x0 = run.at(crossings.back());
  x0[si] = section.level;

  // Newton on F(x0, T) = [phi(T, x0) - x0; x0_i - c].
  bool converged = false;
  for (int it = 0; it <= opt.max_newton; ++it) {
    auto vt = integrate_variational(model, x0, p, 0.0, T, opt.tol);
    Vector xT = vt.final_state();
    Vector F(n + 1);
    F.head(n) = xT - x0;
    F[static_cast<Eigen::Index>(n)] = x0[si] - section.level;
    double scale = std::max(1.0, x0.cwiseAbs().maxCoeff());
    if (F.cwiseAbs().maxCoeff() <= opt.newton_tol * scale) {
      converged = true;
      break;
    }
    if (it == opt.max_newton) break;
    Matrix J = Matrix::Zero(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(n + 1));
    J.topLeftCorner(n, n) = vt.final_fundamental() - Matrix::Identity(n, n);
    J.topRightCorner(n, 1) = eval_f(model, xT, p);
    J(static_cast<Eigen::Index>(n), si) = 1.0;
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible())
      throw Error(ErrorKind::DegenerateSection, "orbit", "shooting Jacobian is singular; the section may be tangent to the flow");
    Vector dy = lu.solve(-F);
    // Damp steps that would flip the period sign.
    double lam = 1.0;
    while (T + lam * dy[static_cast<Eigen::Index>(n)] <= 0.0 && lam > 1e-6) lam *= 0.5;
    x0 += lam * dy.head(n);
    T += lam * dy[static_cast<Eigen::Index>(n)];
    if (!x0.allFinite() || !std::isfinite(T))
      throw Error(ErrorKind::NonConvergence, "orbit", "Newton iterate diverged; seed outside the basin?");
  }
  if (!converged)
    throw Error(ErrorKind::NonConvergence, "orbit",
                "Newton did not converge in " + std::to_string(opt.max_newton) + " iterations; seed outside the basin?");

  PeriodicOrbit o = sample_orbit(model, p, x0, T, section, opt.grid, opt.tol);
  const double extent = (o.states.rowwise().maxCoeff() - o.states.rowwise().minCoeff()).norm();
  if (std::abs(o.trivial_multiplier - 1.0) > kTrivialMultiplierTolerance || !(extent > 1e-8 * scale_of(x0)))
    throw Error(ErrorKind::NonConvergence, "orbit",
                "shooting collapsed onto an equilibrium (trivial multiplier off by " +
                    std::to_string(std::abs(o.trivial_multiplier - 1.0)) + "); no stable oscillation from this seed");
  if (!o.hyperbolic && !opt.allow_non_hyperbolic) throw NonHyperbolicOrbit(o);
  return o;
}

inline PeriodicOrbit find_periodic_orbit(const ModelDefinition& model, const ParameterVector& p,
                                         const OrbitOptions& opt = {}) {
  return find_periodic_orbit(model, p, default_seed(model), opt);
}

/// Phi(T) recomputed around the orbit from its anchor point.
inline Matrix monodromy(const PeriodicOrbit& orbit, const ModelDefinition& model) {
  auto vt = integrate_variational(model, orbit.initial_state(), orbit.params, 0.0, orbit.period, orbit.tol);
  return vt.final_fundamental();
}

/// x~(theta); exact sample at grid phases, trigonometric interpolation elsewhere.
inline Vector orbit_point(const PeriodicOrbit& orbit, double theta) {
  if (!(theta >= 0.0 && theta < kTwoPi)) theta = wrap_2pi(theta);
  const double s = theta / kTwoPi * static_cast<double>(orbit.grid_size());
  if (std::floor(s) == s) {
    auto j = static_cast<std::size_t>(s);
    if (j < orbit.grid_size() && orbit.phases[j] == theta) return orbit.state(j);
  }
  return orbit.interpolant(theta);
}

inline PeriodicOrbit resample(const PeriodicOrbit& orbit, std::size_t N) {
  if (N < 4) throw Error(ErrorKind::Precondition, "orbit", "grid must have at least 4 points");
  PeriodicOrbit o = orbit;
  o.phases = phase_grid(N);
  o.states.resize(orbit.states.rows(), static_cast<Eigen::Index>(N));
  for (std::size_t j = 0; j < N; ++j) o.states.col(static_cast<Eigen::Index>(j)) = orbit_point(orbit, o.phases[j]);
  o.interpolant = TrigInterpolant(o.states);
  return o;
}

/// max_j || omega x~'(theta_j) - f(x~(theta_j)) || with spectral differentiation.
inline double grid_residual(const PeriodicOrbit& orbit, const ModelDefinition& model) {
  Matrix d = spectral_derivative(orbit.states);
  double worst = 0.0;
  for (std::size_t j = 0; j < orbit.grid_size(); ++j) {
    Vector r = orbit.omega * d.col(static_cast<Eigen::Index>(j)) - eval_f(model, orbit.state(j), orbit.params);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

/// Vector field along the orbit, one column per grid point.
inline Matrix vector_field_on_grid(const PeriodicOrbit& orbit, const ModelDefinition& model) {
  Matrix v(orbit.states.rows(), orbit.states.cols());
  for (std::size_t j = 0; j < orbit.grid_size(); ++j)
    v.col(static_cast<Eigen::Index>(j)) = eval_f(model, orbit.state(j), orbit.params);
  return v;
}

}  // namespace phasekit
