#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace phasekit;
using namespace phasekit::testing;

namespace {

std::vector<double> samples(std::size_t N, auto fn) {
  auto th = phase_grid(N);
  std::vector<double> v(N);
  for (std::size_t j = 0; j < N; ++j) v[j] = fn(th[j]);
  return v;
}

CouplingFunction half_cos() {
  auto s = samples(256, [](double t) { return std::sin(t); });
  return coupling_function(s, s);
}

}  // namespace

TEST(Coupling, SineAgainstSineIsHalfCosine) {
  auto g = half_cos();
  for (std::size_t j = 0; j < g.grid_size(); ++j) {
    EXPECT_NEAR(g.values[static_cast<Eigen::Index>(j)], 0.5 * std::cos(g.chi[j]), 1e-10);
    EXPECT_NEAR(g.derivative[static_cast<Eigen::Index>(j)], -0.5 * std::sin(g.chi[j]), 1e-10);
  }
  EXPECT_NEAR(g(1.0), 0.5 * std::cos(1.0), 1e-12);
  EXPECT_NEAR(g.slope(1.0), -0.5 * std::sin(1.0), 1e-12);
}

TEST(Coupling, ZeroInputGivesZero) {
  auto q = samples(128, [](double t) { return std::sin(t) + 0.2 * std::cos(3 * t); });
  std::vector<double> h(128, 0.0);
  EXPECT_EQ(coupling_function(q, h).sup_norm(), 0.0);
}

TEST(Coupling, OrthogonalHarmonicsCancel) {
  auto q = samples(256, [](double t) { return std::sin(t); });
  auto h = samples(256, [](double t) { return std::cos(2 * t); });
  EXPECT_LE(coupling_function(q, h).sup_norm(), 1e-10);
}

TEST(Coupling, HarmonicSelectionMatchesSymbolicExpansion) {
  // q = sum a_k cos + b_k sin, h = sum c_k cos + d_k sin (k <= 3) gives
  // Gamma = a_0 c_0 + sum_k [(a c + b d) cos(k chi) + (b c - a d) sin(k chi)] / 2.
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    double a[4], b[4], c[4], d[4];
    for (int k = 0; k < 4; ++k) {
      a[k] = u(rng);
      b[k] = k ? u(rng) : 0.0;
      c[k] = u(rng);
      d[k] = k ? u(rng) : 0.0;
    }
    // Drop a random harmonic from h so that one shared harmonic vanishes.
    const int drop = 1 + trial % 3;
    c[drop] = d[drop] = 0.0;
    auto series = [](const double* cs, const double* ss) {
      return [=](double t) {
        double v = cs[0];
        for (int k = 1; k < 4; ++k) v += cs[k] * std::cos(k * t) + ss[k] * std::sin(k * t);
        return v;
      };
    };
    auto g = coupling_function(samples(64, series(a, b)), samples(64, series(c, d)));
    for (std::size_t j = 0; j < g.grid_size(); ++j) {
      const double chi = g.chi[j];
      double expect = a[0] * c[0];
      for (int k = 1; k < 4; ++k)
        expect += 0.5 * ((a[k] * c[k] + b[k] * d[k]) * std::cos(k * chi) + (b[k] * c[k] - a[k] * d[k]) * std::sin(k * chi));
      ASSERT_NEAR(g.values[static_cast<Eigen::Index>(j)], expect, 1e-13);
    }
    const auto& it = g.interpolant;
    EXPECT_NEAR(it.cos_coefficients()(0, drop), 0.0, 1e-14);
    EXPECT_NEAR(it.sin_coefficients()(0, drop), 0.0, 1e-14);
  }
}

TEST(Coupling, MismatchedGridsAreResampled) {
  auto q = samples(64, [](double t) { return std::sin(t); });
  auto h = samples(256, [](double t) { return std::sin(t); });
  auto g = coupling_function(q, h);
  EXPECT_EQ(g.grid_size(), 256u);
  EXPECT_NEAR(g(0.7), 0.5 * std::cos(0.7), 1e-12);
  EXPECT_THROW(coupling_function(std::vector<double>{}, h), Error);
}

TEST(Locking, HalfCosineRoots) {
  auto rep = locking_points(half_cos(), 0.0, 1.0);
  ASSERT_EQ(rep.roots.size(), 2u);
  EXPECT_NEAR(rep.roots[0].chi, std::numbers::pi / 2, 1e-10);
  EXPECT_TRUE(rep.roots[0].stable);
  EXPECT_NEAR(rep.roots[0].V_prime, -0.5, 1e-10);
  EXPECT_NEAR(rep.roots[1].chi, 3 * std::numbers::pi / 2, 1e-10);
  EXPECT_FALSE(rep.roots[1].stable);
  ASSERT_TRUE(rep.locked());
  EXPECT_NEAR(rep.chi_star().chi, std::numbers::pi / 2, 1e-10);
  for (const auto& r : rep.roots) EXPECT_LE(std::abs(r.V), 1e-10);
}

TEST(Locking, LargeDetuningDrifts) {
  auto rep = locking_points(half_cos(), 0.6, 1.0);
  EXPECT_TRUE(rep.roots.empty());
  EXPECT_FALSE(rep.locked());
  EXPECT_THROW(rep.chi_star(), Error);
}

TEST(Locking, ConstructedRootIsRecovered) {
  auto g = half_cos();
  for (double chi0 : {0.3, 1.0, 2.0, 2.9}) {  // Gamma' < 0 on (0, pi)
    for (double eps : {1.0, 0.05}) {
      auto rep = locking_points(g, -eps * g(chi0), eps);
      ASSERT_TRUE(rep.locked());
      EXPECT_NEAR(rep.chi_star().chi, chi0, 1e-8);
    }
  }
}

TEST(Locking, LockingRangeIsSymmetric) {
  // Gamma = a cos: roots exist iff |detune| <= |eps a|.
  const double a = 0.5, eps = 0.2, edge = eps * a;
  auto g = half_cos();
  for (double det : {-0.999 * edge, -0.5 * edge, 0.0, 0.5 * edge, 0.999 * edge})
    EXPECT_TRUE(locking_points(g, det, eps).locked()) << det;
  for (double det : {-1.001 * edge, 1.001 * edge, 3.0 * edge})
    EXPECT_FALSE(locking_points(g, det, eps).locked()) << det;
}

TEST(Locking, RequiresPositiveEps) {
  EXPECT_THROW(locking_points(half_cos(), 0.0, 0.0), Error);
  EXPECT_THROW(locking_points(half_cos(), 0.0, -1.0), Error);
}

TEST(LockingSensitivityTest, FrequencyOnlyParameter) {
  auto rep = locking_points(half_cos(), 0.0, 1.0);
  auto zero = coupling_function(std::vector<double>(256, 0.0), std::vector<double>(256, 0.0));
  auto s = locking_sensitivity(rep, 0.1, zero);
  EXPECT_NEAR(s.S_chi, 0.2, 1e-12);
  EXPECT_EQ(s.S_chi_gamma, 0.0);
  EXPECT_EQ(s.S_chi, s.S_chi_omega + s.S_chi_gamma);
}

TEST(LockingSensitivityTest, CouplingOnlyParameterCollapses) {
  auto rep = locking_points(half_cos(), 0.0, 0.3);
  auto sg = coupling_function(samples(256, [](double t) { return std::cos(t); }),
                              samples(256, [](double t) { return std::sin(t); }));
  auto s = locking_sensitivity(rep, 0.0, sg);
  EXPECT_EQ(s.S_chi_omega, 0.0);
  EXPECT_EQ(s.S_chi, s.S_chi_gamma);
  // -eps S_Gamma(chi*) / (eps Gamma'(chi*)) with S_Gamma = -sin/2 at pi/2.
  EXPECT_NEAR(s.S_chi, -1.0, 1e-10);
}

TEST(LockingSensitivityTest, NearTangencyIsAnError) {
  auto g = half_cos();
  auto rep = locking_points(g, 0.0, 1.0);
  rep.roots[*rep.selected].V_prime = -1e-12;
  try {
    locking_sensitivity(rep, 0.1, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NearTangency);
  }
}

TEST(LockingSensitivityTest, DecompositionIsExactOnGoodwin) {
  auto m = models::goodwin();
  auto o = find_periodic_orbit(m, m.defaults());
  auto r = compute_iprc(o, m);
  auto in = InputWaveform::sine(o.omega);
  auto rep = locking_points(coupling_function(r, in), 0.0, 1e-3);
  ASSERT_TRUE(rep.locked());
  for (std::size_t k = 0; k < o.params.size(); ++k) {
    auto s = locking_sensitivity(rep, sensitivity_bundle(o, r, m, k), in);
    EXPECT_EQ(s.S_chi, s.S_chi_omega + s.S_chi_gamma) << s.name;
    const double fd = locking_fd_oracle(m, o, {in, 1e-3}, rep.chi_star().chi, k);
    EXPECT_LT(std::abs(s.S_chi - fd) / std::abs(fd), 2e-3) << s.name;
  }
}

TEST(Waveform, SineAndSmoothedSquare) {
  auto s = InputWaveform::sine(2.0);
  EXPECT_DOUBLE_EQ(s.period(), std::numbers::pi);
  EXPECT_NEAR(s.at_time(std::numbers::pi / 4), 1.0, 1e-15);
  auto sq = InputWaveform::smoothed_square(1.0, 0.25, 50.0);
  // Logistic in cos(s): the plateau is 1 up to exp(-steepness (1 - cos(pi duty))).
  EXPECT_NEAR(sq(0.0), 1.0, 2.0 * std::exp(-50.0 * (1.0 - std::cos(std::numbers::pi * 0.25))));
  EXPECT_NEAR(sq(std::numbers::pi), 0.0, 1e-10);
  EXPECT_NEAR(sq(std::numbers::pi * 0.25), 0.5, 1e-12);  // edge of the on-window
  EXPECT_NEAR(sq.mean(), 0.25, 1e-3);
  EXPECT_LE(sq.sup_norm(), 1.0);
}

TEST(Waveform, TruncatedSquareStaysBounded) {
  auto w = InputWaveform::square_fourier(1.0, 0.5, 16);
  EXPECT_LE(w.sup_norm(), 1.0 + 1e-12);
  EXPECT_EQ(w.cos_coefficients().size(), 16u);
  // Mid-plateau sits below the rescaled Gibbs peak by the overshoot factor.
  EXPECT_GT(w(0.0), 0.85);
  EXPECT_LT(w(0.0), w.sup_norm());
}

TEST(Waveform, InvalidSpecsAreRejected) {
  EXPECT_THROW(InputWaveform::sine(0.0), Error);
  EXPECT_THROW(InputWaveform::sine(1.0, 2.0), Error);
  EXPECT_THROW(InputWaveform::smoothed_square(1.0, 1.5), Error);
  EXPECT_THROW(InputWaveform::smoothed_square(1.0, 0.5, -1.0), Error);
  EXPECT_THROW(InputWaveform::fourier(1.0, 0.5, {0.8}, {}), Error);
}

TEST(Simulation, UnforcedMatchedOscillatorKeepsItsPhase) {
  auto m = models::radial();
  auto o = find_periodic_orbit(m, m.defaults());
  auto sim = simulate_entrainment(m, o, InputWaveform::sine(o.omega), 0.0, orbit_point(o, 1.0),
                                  EntrainmentOptions{1e-10, 60, 1e-6, {}});
  for (double c : sim.chi_unwrapped) EXPECT_NEAR(c, 1.0, 1e-7);
  EXPECT_TRUE(sim.locked);
  EXPECT_EQ(sim.slips, 0u);
}

TEST(Simulation, LocksNearAveragedPrediction) {
  auto m = models::radial();
  auto o = find_periodic_orbit(m, m.defaults());
  auto r = compute_iprc(o, m);
  const double eps = 0.05, detune = 0.01;
  auto in = InputWaveform::sine(o.omega - detune);
  auto rep = locking_points(coupling_function(r, in), detune, eps);
  ASSERT_TRUE(rep.locked());
  EntrainmentOptions opt;
  opt.forcing_periods = 300;
  auto sim = simulate_entrainment(m, o, in, eps, o.initial_state(), opt);
  EXPECT_TRUE(sim.locked);
  EXPECT_LT(std::abs(wrap_pi(sim.chi_final - rep.chi_star().chi)), 10.0 * eps);
}

TEST(Simulation, OutsideLockingRangeSlips) {
  auto m = models::radial();
  auto o = find_periodic_orbit(m, m.defaults());
  auto sim = simulate_entrainment(m, o, InputWaveform::sine(o.omega - 0.2), 0.05, o.initial_state(),
                                  EntrainmentOptions{1e-10, 100, 1e-3, {}});
  EXPECT_FALSE(sim.locked);
  EXPECT_GT(sim.slips, 0u);
  // Drift is monotone: the oscillator runs ahead of the slower input.
  for (std::size_t k = 1; k < sim.chi_unwrapped.size(); ++k) EXPECT_GT(sim.chi_unwrapped[k], sim.chi_unwrapped[k - 1]);
}

TEST(Simulation, ShortHorizonIsRejected) {
  auto m = models::radial();
  auto o = find_periodic_orbit(m, m.defaults());
  EXPECT_THROW(simulate_entrainment(m, o, InputWaveform::sine(1.0), 0.1, o.initial_state(),
                                    EntrainmentOptions{1e-10, 10, 1e-3, {}}),
               Error);
}
