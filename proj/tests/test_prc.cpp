#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace phasekit;
using namespace phasekit::testing;

namespace {

struct Solved {
  ModelDefinition model;
  PeriodicOrbit orbit;
  PhaseResponse prc;
};

Solved solve(ModelDefinition m) {
  auto o = find_periodic_orbit(m, m.defaults());
  auto r = compute_iprc(o, m);
  return {std::move(m), std::move(o), std::move(r)};
}

}  // namespace

TEST(Iprc, NormalizationHoldsOnEveryBuiltin) {
  for (const auto& name : models::builtin_names()) {
    auto s = solve(models::find(name));
    ASSERT_EQ(s.prc.grid_size(), 256u);
    EXPECT_LT(s.prc.normalization_residual.maxCoeff(), 1e-6) << name;
    for (std::size_t j = 0; j < 256; ++j) {
      const double dot = s.prc.state(j).dot(eval_f(s.model, s.orbit.state(j), s.orbit.params));
      EXPECT_NEAR(dot, s.orbit.omega, 1e-9 * s.orbit.omega) << name << " j=" << j;
    }
    EXPECT_LT(s.prc.periodicity_error, 1e-8) << name;
  }
}

TEST(Iprc, RadialClosedForms) {
  // Horizontal input: q = -sin(theta); diagonal input: q = cos - sin.
  auto h = solve(models::radial());
  auto d = solve(radial_diagonal_input());
  for (std::size_t j = 0; j < 256; ++j) {
    const double th = h.prc.phases[j];
    EXPECT_NEAR(h.prc.input_prc[static_cast<Eigen::Index>(j)], -std::sin(th), 1e-9);
    EXPECT_NEAR(d.prc.input_prc[static_cast<Eigen::Index>(j)], std::cos(th) - std::sin(th), 1e-9);
  }
  EXPECT_NEAR(h.prc.q(0.3), -std::sin(0.3), 1e-9);
}

TEST(Iprc, SatisfiesAdjointEquationSpectrally) {
  // dq_x/dtheta = -A^T q_x / omega, checked with a spectral derivative.
  auto s = solve(models::goodwin());
  Matrix dq = spectral_derivative(s.prc.state_prc);
  double worst = 0.0;
  for (std::size_t j = 0; j < 256; ++j) {
    Matrix A = jacobian(s.model, s.orbit.state(j), s.orbit.params);
    Vector r = dq.col(static_cast<Eigen::Index>(j)) + A.transpose() * s.prc.state(j) / s.orbit.omega;
    worst = std::max(worst, r.norm());
  }
  EXPECT_LT(worst / max_abs(s.prc.state_prc), 1e-8);
}

TEST(Iprc, TangentInputOnlyAdvancesPhase) {
  // With g = f / |f| the response is omega / |f| along the whole orbit.
  auto s = solve(tangent_input_goodwin());
  for (std::size_t j = 0; j < 256; j += 7) {
    const double expect = s.orbit.omega / eval_f(s.model, s.orbit.state(j), s.orbit.params).norm();
    EXPECT_NEAR(s.prc.input_prc[static_cast<Eigen::Index>(j)] / expect, 1.0, 1e-9);
  }
  const double eps = 1e-4, th = 2.0;
  auto fin = compute_finite_prc(s.orbit, s.model, eps, {th});
  const double expect = s.orbit.omega / eval_f(s.model, orbit_point(s.orbit, th), s.orbit.params).norm();
  EXPECT_NEAR(fin[0].shift / (eps * expect), 1.0, 1e-3);
}

TEST(AsymptoticPhase, RadialIsochronsAreRays) {
  auto s = solve(models::radial());
  for (double phi : {0.0, 0.9, 2.5, 4.0, 5.9}) {
    for (double r : {0.3, 1.0, 1.7}) {
      Vector x(2);
      x << r * std::cos(phi), r * std::sin(phi);
      auto a = asymptotic_phase(s.orbit, s.model, x);
      EXPECT_NEAR(wrap_pi(a.theta - phi), 0.0, 1e-8) << "r=" << r << " phi=" << phi;
    }
  }
}

TEST(AsymptoticPhase, OrbitPointsNeedNoIntegration) {
  auto s = solve(models::goodwin());
  auto a = asymptotic_phase(s.orbit, s.model, s.orbit.state(77));
  EXPECT_EQ(a.periods, 0u);
  EXPECT_NEAR(wrap_pi(a.theta - s.orbit.phases[77]), 0.0, 1e-10);
}

TEST(AsymptoticPhase, FarAwayOrUnstableStatesEscape) {
  auto s = solve(models::radial());
  auto expect_escape = [&](const Vector& x) {
    try {
      asymptotic_phase(s.orbit, s.model, x);
      FAIL() << "expected basin escape";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::BasinEscape);
    }
  };
  expect_escape((Vector(2) << 1e5, 0.0).finished());
  expect_escape(Vector::Zero(2));  // unstable focus never reaches the orbit
}

TEST(FinitePrc, ConvergesToIprcAtFirstOrder) {
  for (auto m : {models::radial(), models::goodwin()}) {
    auto s = solve(m);
    std::vector<double> th;
    for (int i = 0; i < 8; ++i) th.push_back(kTwoPi * i / 8.0 + 0.1);
    auto err = [&](double eps) {
      double e = 0.0;
      for (const auto& smp : compute_finite_prc(s.orbit, s.model, eps, th))
        e = std::max(e, std::abs(smp.shift / eps - s.prc.q(smp.theta)));
      return e;
    };
    const double ratio = err(1e-3) / err(5e-4);
    EXPECT_NEAR(ratio, 2.0, 0.3) << s.model.name();
  }
}

TEST(FinitePrc, ZeroAmplitudeIsRejected) {
  auto s = solve(models::radial());
  try {
    compute_finite_prc(s.orbit, s.model, 0.0, {1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
}

TEST(OrbitProjectionTest, RecoversPhaseOfOrbitPoints) {
  auto s = solve(models::van_der_pol());
  for (double th : {0.05, 1.0, 3.3, 6.2}) {
    auto pr = project_onto_orbit(s.orbit, orbit_point(s.orbit, th));
    EXPECT_NEAR(wrap_pi(pr.theta - th), 0.0, 1e-9);
    EXPECT_LT(pr.distance, 1e-9);
  }
}
