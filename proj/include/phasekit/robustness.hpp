#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "phasekit/entrainment.hpp"
#include "phasekit/sensitivity.hpp"
#include "phasekit/spectral.hpp"

namespace phasekit {

/// Squared norm of a periodic curve sampled on the uniform grid.
using CurveMetric = std::function<double(const Vector&)>;

/// int_0^{2pi} z(theta)^2 dtheta by the trapezoid rule.
inline double l2_squared(const Vector& z) {
  std::vector<double> sq(static_cast<std::size_t>(z.size()));
  for (Eigen::Index j = 0; j < z.size(); ++j) sq[static_cast<std::size_t>(j)] = z[j] * z[j];
  return periodic_integral(sq);
}

struct RobustnessRow {
  std::string name;
  std::string group;
  double R_omega = 0.0;
  double R_T = 0.0;
  double R_q = 0.0;
  double R_chi = 0.0;
  double S_chi = 0.0;
  double S_chi_omega = 0.0;
  double S_chi_gamma = 0.0;

  double Rn_omega = 0.0;
  double Rn_T = 0.0;
  double Rn_q = 0.0;
  double Rn_chi = 0.0;
  // Entrainment bars, all divided by max |S_chi|.
  double bar_chi = 0.0;
  double bar_omega = 0.0;
  double bar_gamma = 0.0;

  /// Below the bisector of the (R_q, R_omega) scatter: mostly affects the period.
  bool period_dominant() const { return Rn_omega > Rn_q; }
};

/// Largest |R_bar_T - R_bar_omega| over the rows; zero up to rounding since
/// S_T / T = -S_omega / omega row by row.
inline double period_frequency_mismatch(const std::vector<RobustnessRow>& rows) {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, std::abs(r.Rn_T - r.Rn_omega));
  return m;
}

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  bool relative = false;
  bool normalized = false;
  bool has_entrainment = false;
};

/// Raw measures, one row per bundle in input order. `locking` may be null
/// (no entrainment columns) or hold one sensitivity per bundle.
inline RobustnessReport measure(const std::vector<SensitivityBundle>& bundles, const LockingReport* locking = nullptr,
                                const std::vector<std::string>& groups = {}, const CurveMetric& metric = l2_squared) {
  RobustnessReport rep;
  if (bundles.empty()) return rep;
  const auto N = bundles.front().Z_q.size();
  rep.relative = bundles.front().relative;
  for (const auto& b : bundles) {
    if (b.Z_q.size() != N || b.relative != rep.relative || b.omega != bundles.front().omega)
      throw Error(ErrorKind::Alignment, "robustness", "sensitivity bundles do not share grid, scaling and orbit");
  }
  if (locking && locking->sensitivities.size() != bundles.size())
    throw Error(ErrorKind::Alignment, "robustness", "locking sensitivities do not match the bundles");
  rep.has_entrainment = locking != nullptr;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto& b = bundles[i];
    RobustnessRow r;
    r.name = b.name;
    r.group = i < groups.size() ? groups[i] : std::string{};
    r.R_omega = std::abs(b.S_omega);
    r.R_T = std::abs(b.S_T());
    r.R_q = std::sqrt(metric(b.Z_q));
    if (locking) {
      const auto& s = locking->sensitivities[i];
      if (s.name != b.name)
        throw Error(ErrorKind::Alignment, "robustness", "locking sensitivity order differs from bundle order");
      if (s.S_chi != s.S_chi_omega + s.S_chi_gamma)
        throw Error(ErrorKind::Precondition, "robustness", "locking decomposition does not sum for '" + s.name + "'");
      r.S_chi = s.S_chi;
      r.S_chi_omega = s.S_chi_omega;
      r.S_chi_gamma = s.S_chi_gamma;
      r.R_chi = std::abs(s.S_chi);
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

namespace detail {

inline double column_max(const RobustnessReport& rep, double RobustnessRow::*col, const char* label) {
  double m = 0.0;
  for (const auto& r : rep.rows) m = std::max(m, std::abs(r.*col));
  if (!(m > 0.0))
    throw Error(ErrorKind::DegenerateNormalization, "robustness", std::string("column ") + label + " is identically zero");
  return m;
}

}  // namespace detail

/// R_bar = R / max R per column.
inline RobustnessReport normalize(RobustnessReport rep) {
  if (rep.rows.empty()) return rep;
  const double mw = detail::column_max(rep, &RobustnessRow::R_omega, "R_omega");
  const double mt = detail::column_max(rep, &RobustnessRow::R_T, "R_T");
  const double mq = detail::column_max(rep, &RobustnessRow::R_q, "R_q");
  for (auto& r : rep.rows) {
    r.Rn_omega = r.R_omega / mw;
    r.Rn_T = r.R_T / mt;
    r.Rn_q = r.R_q / mq;
  }
  if (rep.has_entrainment) {
    const double mc = detail::column_max(rep, &RobustnessRow::R_chi, "R_chi");
    for (auto& r : rep.rows) {
      r.Rn_chi = r.R_chi / mc;
      r.bar_chi = r.S_chi / mc;
      r.bar_omega = r.S_chi_omega / mc;
      r.bar_gamma = r.S_chi_gamma / mc;
    }
  }
  rep.normalized = true;
  return rep;
}

struct Ranking {
  std::vector<RobustnessRow> ordered;
  std::vector<RobustnessRow> above;
  double threshold = 0.1;
};

/// Sort by the normalized entrainment measure (frequency measure when the
/// report has no entrainment columns), descending, ties by name.
inline Ranking rank_and_partition(const RobustnessReport& rep, double threshold = 0.1) {
  if (!rep.normalized) throw Error(ErrorKind::Precondition, "robustness", "ranking requires a normalized report");
  auto key = [&](const RobustnessRow& r) { return rep.has_entrainment ? r.Rn_chi : r.Rn_omega; };
  Ranking out;
  out.threshold = threshold;
  out.ordered = rep.rows;
  std::stable_sort(out.ordered.begin(), out.ordered.end(), [&](const auto& a, const auto& b) {
    if (key(a) != key(b)) return key(a) > key(b);
    return a.name < b.name;
  });
  for (const auto& r : out.ordered)
    if (key(r) > threshold || threshold <= 0.0) out.above.push_back(r);
  return out;
}

}  // namespace phasekit
