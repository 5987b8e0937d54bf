#include <gtest/gtest.h>

#include <cmath>

#include "phasekit/spectral.hpp"

using namespace phasekit;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

Matrix sampled(std::size_t N, auto fn) {
  auto th = phase_grid(N);
  Matrix m(1, static_cast<Eigen::Index>(N));
  for (std::size_t j = 0; j < N; ++j) m(0, static_cast<Eigen::Index>(j)) = fn(th[j]);
  return m;
}

}  // namespace

TEST(Spectral, PhaseGridIsUniformAndHalfOpen) {
  auto th = phase_grid(8);
  ASSERT_EQ(th.size(), 8u);
  EXPECT_EQ(th[0], 0.0);
  EXPECT_NEAR(th[7], kTwoPi * 7.0 / 8.0, 1e-15);
}

TEST(Spectral, WrapRanges) {
  EXPECT_NEAR(wrap_pi(3.0 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(wrap_2pi(-0.5), kTwoPi - 0.5, 1e-15);
  EXPECT_EQ(wrap_2pi(0.0), 0.0);
  EXPECT_LT(wrap_2pi(kTwoPi), kTwoPi);
}

TEST(Spectral, InterpolantReproducesTrigPolynomial) {
  auto fn = [](double t) { return 0.3 + std::cos(t) - 0.5 * std::sin(3.0 * t) + 0.1 * std::cos(7.0 * t); };
  TrigInterpolant it(sampled(32, fn));
  for (double t : {0.11, 1.7, 4.2, 6.0}) {
    EXPECT_NEAR(it(t)[0], fn(t), 1e-13);
    EXPECT_NEAR(it.derivative(t)[0], -std::sin(t) - 1.5 * std::cos(3.0 * t) - 0.7 * std::sin(7.0 * t), 1e-12);
  }
  EXPECT_NEAR(it.cos_coefficients()(0, 0), 0.3, 1e-15);
  EXPECT_NEAR(it.sin_coefficients()(0, 3), -0.5, 1e-15);
}

TEST(Spectral, DerivativeOfSmoothPeriodicFunction) {
  auto fn = [](double t) { return std::exp(std::sin(t)); };
  Matrix d = spectral_derivative(sampled(64, fn));
  auto th = phase_grid(64);
  for (std::size_t j = 0; j < 64; ++j)
    EXPECT_NEAR(d(0, static_cast<Eigen::Index>(j)), std::cos(th[j]) * fn(th[j]), 1e-12);
}

TEST(Spectral, DifferentiationMatrixAgreesWithFftDerivative) {
  for (std::size_t N : {16u, 17u}) {
    auto fn = [](double t) { return std::sin(2.0 * t) + std::cos(t); };
    Matrix s = sampled(N, fn);
    Matrix D = differentiation_matrix(N);
    Vector viaD = D * s.row(0).transpose();
    Matrix viaFft = spectral_derivative(s);
    EXPECT_LT((viaD - viaFft.row(0).transpose()).cwiseAbs().maxCoeff(), 1e-12) << N;
  }
}

TEST(Spectral, CircularCorrelationOfSines) {
  // (1/2pi) int sin(s + chi) sin s ds = cos(chi) / 2.
  const std::size_t N = 128;
  auto th = phase_grid(N);
  std::vector<double> a(N), b(N);
  for (std::size_t j = 0; j < N; ++j) a[j] = b[j] = std::sin(th[j]);
  auto c = circular_correlation(a, b);
  for (std::size_t j = 0; j < N; ++j) EXPECT_NEAR(c[j], 0.5 * std::cos(th[j]), 1e-15);
  std::vector<double> shorter(N - 1);
  EXPECT_THROW(circular_correlation(a, shorter), Error);
  EXPECT_THROW(circular_correlation(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(Spectral, TrapezoidIntegralIsSpectrallyAccurate) {
  const std::size_t N = 64;
  auto th = phase_grid(N);
  std::vector<double> v(N);
  for (std::size_t j = 0; j < N; ++j) v[j] = std::sin(th[j]) * std::sin(th[j]);
  EXPECT_NEAR(periodic_integral(v), std::numbers::pi, 1e-14);
}
