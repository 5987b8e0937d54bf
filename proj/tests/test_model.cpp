#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace phasekit;
using namespace phasekit::testing;

namespace {

struct Case {
  ModelDefinition model;
  Vector lo, hi;  // sampling box for states
};

std::vector<Case> cases() {
  auto box = [](std::initializer_list<double> l, std::initializer_list<double> h) {
    Vector a(static_cast<Eigen::Index>(l.size())), b(static_cast<Eigen::Index>(h.size()));
    Eigen::Index i = 0;
    for (double v : l) a[i++] = v;
    i = 0;
    for (double v : h) b[i++] = v;
    return std::make_pair(a, b);
  };
  std::vector<Case> out;
  auto [rl, rh] = box({-1.5, -1.5}, {1.5, 1.5});
  out.push_back({models::radial(), rl, rh});
  out.push_back({models::van_der_pol(), rl * 2.0, rh * 2.0});
  auto [gl, gh] = box({0.05, 0.2, 0.5}, {1.0, 3.0, 2.5});
  out.push_back({models::goodwin(), gl, gh});
  out.push_back({coupled_input_radial(), rl, rh});
  return out;
}

Vector random_point(std::mt19937& rng, const Vector& lo, const Vector& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * u(rng);
  return x;
}

double scale_tol(double fd_value) { return 1e-6 * std::max(1.0, std::abs(fd_value)); }

}  // namespace

// Every AD block is compared with central differences of the block one order
// lower, at 100 random states per model and for every parameter.
TEST(ModelDerivatives, AgreeWithCentralDifferencesAtRandomStates) {
  std::mt19937 rng(20240611);
  for (const auto& c : cases()) {
    const auto& m = c.model;
    const ParameterVector p = m.defaults();
    const std::size_t n = m.dim();
    for (int trial = 0; trial < 100; ++trial) {
      Vector x = random_point(rng, c.lo, c.hi);
      for (std::size_t k = 0; k < p.size(); ++k) {
        auto d = derivatives(m, x, p, k);
        const double hp = 1e-6 * std::max(1.0, std::abs(p[k]));
        auto pp = p.with(k, p[k] + hp), pm = p.with(k, p[k] - hp);
        Vector b_fd = (eval_f(m, x, pp) - eval_f(m, x, pm)) / (2.0 * hp);
        Matrix Axp_fd = (jacobian(m, x, pp) - jacobian(m, x, pm)) / (2.0 * hp);
        Vector gp_fd = (eval_input_field(m, x, pp) - eval_input_field(m, x, pm)) / (2.0 * hp);
        for (std::size_t i = 0; i < n; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          ASSERT_NEAR(d.b[ii], b_fd[ii], scale_tol(b_fd[ii])) << m.name() << " b, p=" << p.name(k);
          ASSERT_NEAR(d.input_p[ii], gp_fd[ii], scale_tol(gp_fd[ii])) << m.name() << " g_p";
          for (std::size_t j = 0; j < n; ++j)
            ASSERT_NEAR(d.hess_xp(ii, static_cast<Eigen::Index>(j)), Axp_fd(ii, static_cast<Eigen::Index>(j)),
                        scale_tol(Axp_fd(ii, static_cast<Eigen::Index>(j))))
                << m.name() << " H_xp";
        }
        if (k > 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          const double hx = 1e-6 * std::max(1.0, std::abs(x[jj]));
          Vector xp = x, xm = x;
          xp[jj] += hx;
          xm[jj] -= hx;
          Vector A_fd = (eval_f(m, xp, p) - eval_f(m, xm, p)) / (2.0 * hx);
          Vector gx_fd = (eval_input_field(m, xp, p) - eval_input_field(m, xm, p)) / (2.0 * hx);
          Matrix H_fd = (jacobian(m, xp, p) - jacobian(m, xm, p)) / (2.0 * hx);
          for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            ASSERT_NEAR(d.A(ii, jj), A_fd[ii], scale_tol(A_fd[ii])) << m.name() << " A";
            ASSERT_NEAR(d.input_x(ii, jj), gx_fd[ii], scale_tol(gx_fd[ii])) << m.name() << " g_x";
            for (std::size_t l = 0; l < n; ++l) {
              const auto ll = static_cast<Eigen::Index>(l);
              // H_fd(i, l) = d/dx_j (df_i/dx_l)
              ASSERT_NEAR(d.hess_xx[i](jj, ll), H_fd(ii, ll), scale_tol(H_fd(ii, ll))) << m.name() << " H_xx";
            }
          }
        }
      }
    }
  }
}

TEST(ModelDerivatives, HessianIsExactlySymmetric) {
  auto m = models::goodwin();
  Vector x(3);
  x << 0.3, 1.2, 1.7;
  auto d = derivatives(m, x, m.defaults(), 7);
  for (const auto& H : d.hess_xx) EXPECT_EQ((H - H.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModelDerivatives, ParamDerivativeMatchesBundle) {
  auto m = models::goodwin();
  Vector x(3);
  x << 0.2, 0.8, 2.1;
  for (std::size_t k = 0; k < m.num_params(); ++k)
    EXPECT_EQ((param_derivative(m, x, m.defaults(), k) - derivatives(m, x, m.defaults(), k).b).norm(), 0.0);
}

TEST(ModelRegistry, BuiltinsResolveByName) {
  for (const auto& name : models::builtin_names()) {
    auto m = models::find(name);
    EXPECT_EQ(m.name(), name);
    EXPECT_EQ(m.info().seed_state.size(), m.dim());
    EXPECT_GT(m.info().seed_period, 0.0);
  }
  try {
    models::find("lorenz");
    FAIL() << "expected a configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(ModelRegistry, GoodwinDefaults) {
  auto m = models::goodwin();
  const auto& p = m.defaults();
  ASSERT_EQ(p.size(), 8u);
  EXPECT_EQ(p.index("n"), 7u);
  EXPECT_DOUBLE_EQ(p[p.index("b")], 0.15);
  // Input drives mRNA synthesis only.
  Vector g = eval_input_field(m, Vector::Ones(3), p);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 0.0);
}

TEST(ParameterVectorTest, RejectsBadInput) {
  EXPECT_THROW(ParameterVector({"a", "a"}, {1.0, 2.0}), Error);
  EXPECT_THROW(ParameterVector({"a"}, {1.0, 2.0}), Error);
  EXPECT_THROW(ParameterVector({"a"}, {std::nan("")}), Error);
  ParameterVector p({"a", "b"}, {1.0, 2.0});
  EXPECT_THROW(p.index("c"), Error);
  EXPECT_THROW(p.check_index(2), Error);
  EXPECT_THROW(p.with(0, std::numeric_limits<double>::infinity()), Error);
  EXPECT_EQ(p.with(1, 5.0)[1], 5.0);
  EXPECT_EQ(p[1], 2.0);
}

TEST(ModelEvaluation, NonFiniteFieldNamesTheComponent) {
  auto m = models::goodwin();
  Vector x(3);
  x << 0.1, 0.1, -1.0;
  ParameterVector p = m.defaults().with(7, 12.5);  // non-integer power of a negative repressor level
  try {
    eval_f(m, x, p);
    FAIL() << "expected a domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ModelDomain);
    EXPECT_NE(std::string(e.what()).find("X"), std::string::npos);
  }
}

TEST(ModelEvaluation, DimensionMismatchIsRejected) {
  auto m = models::radial();
  EXPECT_THROW(eval_f(m, Vector::Zero(3), m.defaults()), Error);
  EXPECT_THROW(eval_f(m, Vector::Zero(2), ParameterVector({"tau"}, {1.0})), Error);
}
