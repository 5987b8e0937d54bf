#pragma once

// Fourier tools on uniform periodic grids theta_j = 2 pi j / N.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "phasekit/error.hpp"

namespace phasekit {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline std::vector<double> phase_grid(std::size_t N) {
  std::vector<double> th(N);
  for (std::size_t j = 0; j < N; ++j) th[j] = kTwoPi * static_cast<double>(j) / static_cast<double>(N);
  return th;
}

/// Wrap to (-pi, pi].
inline double wrap_pi(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

/// Wrap to [0, 2 pi).
inline double wrap_2pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w -= kTwoPi;
  return w;
}

namespace detail {

inline std::vector<std::complex<double>> dft(std::span<const double> x) {
  Eigen::FFT<double> fft;
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  return out;
}

inline std::vector<double> idft_real(const std::vector<std::complex<double>>& X) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec = X;
  std::vector<std::complex<double>> out;
  fft.inv(out, spec);
  std::vector<double> re(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) re[i] = out[i].real();
  return re;
}

}  // namespace detail

/// Trigonometric interpolant of periodic samples (one row per component).
class TrigInterpolant {
 public:
  TrigInterpolant() = default;

  explicit TrigInterpolant(const Eigen::MatrixXd& samples) : rows_(samples.rows()), N_(samples.cols()) {
    if (N_ < 2) throw Error(ErrorKind::Precondition, "spectral", "interpolation needs at least two samples");
    const std::size_t K = static_cast<std::size_t>(N_) / 2;
    a_ = Eigen::MatrixXd::Zero(rows_, static_cast<Eigen::Index>(K) + 1);
    b_ = Eigen::MatrixXd::Zero(rows_, static_cast<Eigen::Index>(K) + 1);
    const double invN = 1.0 / static_cast<double>(N_);
    for (Eigen::Index r = 0; r < rows_; ++r) {
      std::vector<double> row(static_cast<std::size_t>(N_));
      for (Eigen::Index j = 0; j < N_; ++j) row[static_cast<std::size_t>(j)] = samples(r, j);
      auto X = detail::dft(row);
      a_(r, 0) = X[0].real() * invN;
      for (std::size_t k = 1; k <= K; ++k) {
        double w = (N_ % 2 == 0 && k == K) ? invN : 2.0 * invN;
        a_(r, static_cast<Eigen::Index>(k)) = w * X[k].real();
        b_(r, static_cast<Eigen::Index>(k)) = (N_ % 2 == 0 && k == K) ? 0.0 : -w * X[k].imag();
      }
    }
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index samples() const { return N_; }

  /// Cosine / sine coefficients: x(theta) = sum_k a_k cos(k theta) + b_k sin(k theta).
  const Eigen::MatrixXd& cos_coefficients() const { return a_; }
  const Eigen::MatrixXd& sin_coefficients() const { return b_; }

  Eigen::VectorXd operator()(double theta) const { return eval(theta, 0); }
  Eigen::VectorXd derivative(double theta) const { return eval(theta, 1); }
  Eigen::VectorXd second_derivative(double theta) const { return eval(theta, 2); }

 private:
  Eigen::VectorXd eval(double theta, int order) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
    if (order == 0) out = a_.col(0);
    const Eigen::Index K = a_.cols() - 1;
    std::complex<double> rot(std::cos(theta), std::sin(theta)), z(1.0, 0.0);
    for (Eigen::Index k = 1; k <= K; ++k) {
      if (k % 32 == 0) z = std::polar(1.0, static_cast<double>(k - 1) * theta);
      z *= rot;
      const double c = z.real(), s = z.imag(), kk = static_cast<double>(k);
      switch (order) {
        case 0: out += a_.col(k) * c + b_.col(k) * s; break;
        case 1: out += kk * (-a_.col(k) * s + b_.col(k) * c); break;
        default: out += -kk * kk * (a_.col(k) * c + b_.col(k) * s); break;
      }
    }
    return out;
  }

  Eigen::Index rows_ = 0;
  Eigen::Index N_ = 0;
  Eigen::MatrixXd a_, b_;
};

/// d/dtheta of periodic samples, row by row. The Nyquist mode is dropped.
inline Eigen::MatrixXd spectral_derivative(const Eigen::MatrixXd& samples) {
  const Eigen::Index N = samples.cols();
  Eigen::MatrixXd out(samples.rows(), N);
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(N));
    for (Eigen::Index j = 0; j < N; ++j) row[static_cast<std::size_t>(j)] = samples(r, j);
    auto X = detail::dft(row);
    for (Eigen::Index k = 0; k < N; ++k) {
      Eigen::Index kk = k <= N / 2 ? k : k - N;
      if (N % 2 == 0 && k == N / 2) kk = 0;
      X[static_cast<std::size_t>(k)] *= std::complex<double>(0.0, static_cast<double>(kk));
    }
    auto d = detail::idft_real(X);
    for (Eigen::Index j = 0; j < N; ++j) out(r, j) = d[static_cast<std::size_t>(j)];
  }
  return out;
}

/// Fourier differentiation matrix on the uniform periodic grid.
inline Eigen::MatrixXd differentiation_matrix(std::size_t N) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  const double h = kTwoPi / static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      if (i == j) continue;
      const double d = static_cast<double>(static_cast<long>(i) - static_cast<long>(j));
      const double sgn = ((static_cast<long>(i) - static_cast<long>(j)) % 2 == 0) ? 1.0 : -1.0;
      D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          N % 2 == 0 ? 0.5 * sgn / std::tan(0.5 * d * h) : 0.5 * sgn / std::sin(0.5 * d * h);
    }
  return D;
}

/// c_j = (1/N) sum_m a_{(m + j) mod N} b_m, the discrete form of
/// (1/2pi) int a(s + chi) b(s) ds, evaluated through the spectral product.
inline std::vector<double> circular_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::Alignment, "spectral", "correlated sequences have different lengths");
  if (a.empty()) throw Error(ErrorKind::Precondition, "spectral", "empty grid");
  auto A = detail::dft(a);
  auto B = detail::dft(b);
  const double invN = 1.0 / static_cast<double>(a.size());
  for (std::size_t k = 0; k < A.size(); ++k) A[k] = A[k] * std::conj(B[k]) * invN;
  return detail::idft_real(A);
}

/// Trapezoid rule over one period; spectrally accurate for smooth periodic data.
inline double periodic_integral(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s * kTwoPi / static_cast<double>(values.size());
}

}  // namespace phasekit
