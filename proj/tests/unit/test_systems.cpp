#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "iiss/random.hpp"
#include "iiss/systems.hpp"

using namespace iiss;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat M(2, 2);
  M << a, b, c, d;
  return M;
}

}  // namespace

TEST(Lyapunov, SolvesContinuousEquation) {
  const Mat A = mat2(-1.0, -100.0, 10.0, -1.0);
  const Mat P = lyapunov_matrix(A, Mat::Identity(2, 2));
  EXPECT_LT((A.transpose() * P + P * A + Mat::Identity(2, 2)).norm(), 1e-9 * P.norm());
  EXPECT_LT((P - P.transpose()).norm(), 1e-12 * P.norm());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(P).eigenvalues().minCoeff(), 0.0);

  // Scalar: 2 a p = -q.
  EXPECT_NEAR(lyapunov_matrix(Mat::Constant(1, 1, -2.0), Mat::Constant(1, 1, 1.0))(0, 0), 0.25, 1e-15);
}

TEST(Lyapunov, SingularThrows) {
  // Eigenvalues 1 and -1 sum to zero.
  EXPECT_THROW(lyapunov_matrix(mat2(1.0, 0.0, 0.0, -1.0), Mat::Identity(2, 2)), std::domain_error);
}

TEST(SwitchedLinear, DynamicsAndDeclaredGain) {
  const SwitchedSystem sys =
      make_switched_linear({mat2(0.0, 1.0, -1.0, 0.0), mat2(-1.0, 0.0, 0.0, -2.0)}, {Mat::Ones(2, 1), Mat::Zero(2, 1)});
  EXPECT_EQ(sys.state_dim(), 2);
  EXPECT_EQ(sys.input_dim(), 1);
  ASSERT_EQ(sys.modes().size(), 2u);
  const Vec x = Vec::Ones(2);
  const Vec u = Vec::Constant(1, 3.0);
  EXPECT_TRUE(sys.f(0.0, x, u, 1).isApprox(Vec::Constant(2, 3.0) + Eigen::Vector2d(1.0, -1.0)));
  EXPECT_TRUE(sys.f(0.0, x, u, 2).isApprox(Eigen::Vector2d(-1.0, -2.0)));
  EXPECT_THROW(sys.f(0.0, x, u, 3), std::out_of_range);
  ASSERT_TRUE(sys.declared().gamma.has_value());
  EXPECT_DOUBLE_EQ((*sys.declared().gamma)(2.5), 2.5);
  EXPECT_TRUE(sys.h(0.0, x, u, 1).isApprox(x));
}

TEST(Prop4Pair, ModesAreHurwitzTransposes) {
  const SwitchedSystem sys = make_prop4_pair();
  ASSERT_EQ(sys.linear_A().size(), 2u);
  const Mat& A1 = sys.linear_A()[0];
  const Mat& A2 = sys.linear_A()[1];
  EXPECT_TRUE(A1.isApprox(mat2(-1.0, -100.0, 10.0, -1.0)));
  EXPECT_TRUE(A2.isApprox(A1.transpose()));
  for (const Mat& A : sys.linear_A()) {
    // Eigenvalues -1 +- i sqrt(1000).
    const auto ev = A.eigenvalues();
    for (Eigen::Index k = 0; k < 2; ++k) {
      EXPECT_NEAR(ev(k).real(), -1.0, 1e-12);
      EXPECT_NEAR(std::abs(ev(k).imag()), std::sqrt(1000.0), 1e-9);
    }
  }
  EXPECT_TRUE(sys.linear_B()[0].isApprox(Eigen::Vector2d(1.0, 0.0)));
}

TEST(Inverter, StorageConstants) {
  const InverterParams p;
  EXPECT_DOUBLE_EQ(p.lambda_min(), 0.5);
  EXPECT_DOUBLE_EQ(p.kappa(), std::sqrt(2.0));
  InverterParams q;
  q.L1 = 2.0;
  q.C1 = 0.4;
  EXPECT_DOUBLE_EQ(q.lambda_min(), 0.2);
  EXPECT_THROW(
      [] {
        InverterParams bad;
        bad.a_min = 3.0;
        bad.validate();
      }(),
      std::invalid_argument);
}

TEST(Inverter, EnergyBalance) {
  // d/dt (x'Px / 2) = -C2 x4 a sat(x4 / r) + x'P b_i u: the switching network is lossless.
  InverterParams p;
  p.L1 = 2.0;
  p.L2 = 0.5;
  p.C1 = 3.0;
  p.C2 = 1.5;
  const SwitchedSystem sys = make_inverter(p);
  const Mat P = p.P();
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const Vec x = random_in_ball(rng, 4, 5.0);
    const double t = uniform(rng, 0.0, 30.0);
    const Vec u = Vec::Constant(1, uniform(rng, -3.0, 3.0));
    for (Mode i : {1, 2}) {
      const double dV = x.dot(P * sys.f(t, x, u, i));
      const double expected = -inverter_load_power(p, t, x, i) + x.dot(P * p.b(i)) * u(0);
      EXPECT_NEAR(dV, expected, 1e-12 * (1.0 + x.squaredNorm()));
      EXPECT_GE(inverter_load_power(p, t, x, i), 0.0);
    }
  }
  EXPECT_TRUE(sys.f(0.0, Vec::Zero(4), Vec::Zero(1), 1).isZero());
}

TEST(Inverter, ParametersStayInRange) {
  const InverterParams p;
  for (double t = 0.0; t < 20.0; t += 0.173)
    for (Mode i : {1, 2}) {
      EXPECT_GE(p.a(t, i), p.a_min);
      EXPECT_LE(p.a(t, i), p.a_max);
      EXPECT_GE(p.r(t, i), p.r_min);
      EXPECT_LE(p.r(t, i), p.r_max);
    }
  InverterParams c;
  c.profile = LoadProfile::Constant;
  EXPECT_DOUBLE_EQ(c.a(3.7, 2), c.a_const);
  EXPECT_DOUBLE_EQ(c.r(3.7, 1), c.r_const);
}

TEST(RadialTable, NeverUndercuts) {
  const RadialTable tab{{1.0, 2.0}, {3.0, 5.0}};
  EXPECT_DOUBLE_EQ(tab(0.5), 3.0);
  EXPECT_DOUBLE_EQ(tab(1.0), 3.0);
  EXPECT_DOUBLE_EQ(tab(1.5), 5.0);
  EXPECT_TRUE(std::isinf(tab(2.5)));
}

TEST(Estimators, LipschitzOfLinearSystem) {
  // Sampled difference quotients of diag(-1, -2) lie in [1, 2] up to cancellation in
  // close pairs; the estimate adds 10 %.
  const SwitchedSystem sys = make_switched_linear({mat2(-1.0, 0.0, 0.0, -2.0)}, {Mat::Zero(2, 1)});
  const double L = estimate_lipschitz(sys, 3.0, {.budget = 4000, .seed = 2});
  EXPECT_LE(L, kLipschitzSafety * 2.0 * (1.0 + 1e-6));
  EXPECT_GE(L, kLipschitzSafety * 1.9);
}

TEST(Estimators, C1BoundsAreMonotone) {
  const SwitchedSystem sys = make_inverter();
  const std::vector<double> radii{0.5, 1.0, 2.0, 4.0};
  const C1Bounds b = estimate_c1_bounds(sys, radii, {.budget = 4000, .seed = 3});
  EXPECT_TRUE(b.bounded);
  for (std::size_t k = 1; k < radii.size(); ++k) EXPECT_GE(b.gamma_tilde.values[k], b.gamma_tilde.values[k - 1]);
  for (std::size_t k = 0; k < radii.size(); ++k) EXPECT_GE(b.gamma(radii[k]), b.gamma_tilde.values[k] - 1e-12);
}

TEST(Estimators, KappaOnLinearInput) {
  // For f = A x + B u, |f(x, u) - f(x, 0)| = |B u| <= |B| |u|; with chi = gamma = s that is kappa <= |B|.
  const SwitchedSystem sys = make_switched_linear({mat2(-1.0, 0.0, 0.0, -1.0)}, {Mat::Constant(2, 1, 2.0)});
  const KappaEstimate ke = estimate_kappa(sys, 1.0, 0.1, MonotoneFn::identity(), {.budget = 4000, .seed = 4});
  EXPECT_LE(ke.kappa, std::sqrt(8.0) + 1e-9);
  EXPECT_GT(ke.kappa, 0.0);
  EXPECT_THROW(estimate_kappa(sys, 1.0, 0.0, MonotoneFn::identity()), std::invalid_argument);
}
