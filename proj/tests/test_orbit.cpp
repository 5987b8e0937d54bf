#include <gtest/gtest.h>

#include <chrono>

#include "test_support.hpp"

using namespace phasekit;
using namespace phasekit::testing;

TEST(Orbit, RadialCircleHasUnitFrequency) {
  auto m = models::radial();
  auto o = find_periodic_orbit(m, m.defaults());
  EXPECT_NEAR(o.omega, 1.0, 1e-8);
  for (std::size_t j = 0; j < o.grid_size(); ++j) EXPECT_NEAR(o.state(j).norm(), 1.0, 1e-8);
  // Section is y = 0 upward, so theta = 0 sits at (1, 0).
  EXPECT_NEAR(o.initial_state()[0], 1.0, 1e-10);
  EXPECT_NEAR(o.initial_state()[1], 0.0, 1e-12);
  ASSERT_EQ(o.multipliers.size(), 1u);
  // Radial contraction rate 2 tau rho: nontrivial multiplier exp(-4 pi).
  EXPECT_NEAR(std::abs(o.multipliers[0]), std::exp(-4.0 * std::numbers::pi), 1e-9);
  EXPECT_TRUE(o.hyperbolic);
}

TEST(Orbit, RadialParametersScaleFrequencyAndRadius) {
  auto m = models::radial();
  auto p = m.defaults().with(0, 2.5).with(1, 0.64);
  OrbitSeed seed{(Vector(2) << 0.8, 0.0).finished(), kTwoPi / 2.5};
  auto o = find_periodic_orbit(m, p, seed);
  EXPECT_NEAR(o.omega, 2.5, 1e-8);
  EXPECT_NEAR(o.state(17).norm(), 0.8, 1e-8);
}

TEST(Orbit, VanDerPolMatchesLongIntegrationOracle) {
  auto m = models::van_der_pol();
  auto t0 = std::chrono::steady_clock::now();
  auto o = find_periodic_orbit(m, m.defaults());
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 5.0);
  EXPECT_NEAR(o.period / kVdpPeriod, 1.0, 1e-9);
  EXPECT_TRUE(o.hyperbolic);
}

TEST(Orbit, GoodwinMatchesLongIntegrationOracle) {
  auto m = models::goodwin();
  auto o = find_periodic_orbit(m, m.defaults());
  EXPECT_NEAR(o.period / kGoodwinPeriod, 1.0, 1e-9);
  EXPECT_TRUE(o.hyperbolic);
  EXPECT_NEAR(o.initial_state()[0], 0.1, 1e-12);
}

TEST(Orbit, EveryBuiltinIsHyperbolicAtDefaults) {
  for (const auto& name : models::builtin_names()) {
    auto m = models::find(name);
    auto o = find_periodic_orbit(m, m.defaults());
    EXPECT_TRUE(o.hyperbolic) << name;
    EXPECT_LT(std::abs(o.trivial_multiplier - 1.0), 1e-8) << name;
    EXPECT_LT(grid_residual(o, m), 1e-8) << name;
    EXPECT_LT(o.periodicity_residual, 1e-9) << name;
    for (const auto& mu : o.multipliers) EXPECT_LT(std::abs(mu), 1.0 - kHyperbolicMargin) << name;
  }
}

TEST(Orbit, MonodromyHasDeterminantFromTraceIntegral) {
  // Liouville along the orbit: det M = prod of multipliers.
  auto m = models::goodwin();
  auto o = find_periodic_orbit(m, m.defaults());
  std::complex<double> prod = o.trivial_multiplier;
  for (auto mu : o.multipliers) prod *= mu;
  EXPECT_NEAR(prod.real(), o.monodromy.determinant(), 1e-12);
  EXPECT_LT((monodromy(o, m) - o.monodromy).norm(), 1e-8);
}

TEST(Orbit, LinearCenterIsNotHyperbolic) {
  auto m = linear_center();
  try {
    find_periodic_orbit(m, m.defaults());
    FAIL() << "expected a non-hyperbolic orbit error";
  } catch (const NonHyperbolicOrbit& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonHyperbolic);
    EXPECT_FALSE(e.orbit().hyperbolic);
  }
  OrbitOptions opt;
  opt.allow_non_hyperbolic = true;
  auto o = find_periodic_orbit(m, m.defaults(), opt);
  EXPECT_FALSE(o.hyperbolic);
  EXPECT_NEAR(o.period, kTwoPi, 1e-8);
}

TEST(Orbit, SectionThatIsNeverCrossedFails) {
  auto m = models::radial();
  OrbitOptions opt;
  opt.section = Section{1, 5.0, Direction::Increasing};
  try {
    find_periodic_orbit(m, m.defaults(), opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
  }
}

TEST(Orbit, DecayToStableFocusIsNotAnOrbit) {
  // mu < 0: the origin is a stable focus and the cycle is repelling, so the
  // free run spirals in and shooting must not report the collapsed state.
  auto m = models::van_der_pol();
  try {
    find_periodic_orbit(m, m.defaults().with(0, -1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
  }
}

TEST(Orbit, OrbitPointIsExactOnGridAndSmoothBetween) {
  auto m = models::radial();
  auto o = find_periodic_orbit(m, m.defaults());
  EXPECT_EQ((orbit_point(o, o.phases[40]) - o.state(40)).norm(), 0.0);
  const double th = 1.2345;
  Vector x = orbit_point(o, th);
  EXPECT_NEAR(x[0], std::cos(th), 1e-10);
  EXPECT_NEAR(x[1], std::sin(th), 1e-10);
  auto r = resample(o, 64);
  EXPECT_EQ(r.grid_size(), 64u);
  EXPECT_NEAR((r.state(16) - orbit_point(o, r.phases[16])).norm(), 0.0, 1e-12);
}

TEST(Orbit, InvalidOptionsAreRejected) {
  auto m = models::radial();
  OrbitOptions opt;
  opt.grid = 2;
  EXPECT_THROW(find_periodic_orbit(m, m.defaults(), opt), Error);
  OrbitSeed bad{Vector::Zero(3), 1.0};
  EXPECT_THROW(find_periodic_orbit(m, m.defaults(), bad), Error);
}
