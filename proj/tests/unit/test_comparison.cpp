#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "iiss/comparison.hpp"

using namespace iiss;

TEST(MonotoneFn, InterpolatesBetweenKnots) {
  // s^2 sampled at 2 and 4: the chord through (2, 4) and (4, 16) gives 10 at 3.
  const std::vector<double> grid{2.0, 4.0};
  const MonotoneFn sq = MonotoneFn::sample([](double s) { return s * s; }, grid);
  EXPECT_DOUBLE_EQ(sq(0.0), 0.0);
  EXPECT_DOUBLE_EQ(sq(1.0), 2.0);
  EXPECT_DOUBLE_EQ(sq(3.0), 10.0);
  EXPECT_DOUBLE_EQ(sq(4.0), 16.0);
  // Tail keeps the last slope, 6.
  EXPECT_DOUBLE_EQ(sq(5.0), 22.0);
  EXPECT_DOUBLE_EQ(sq.slope_at(4.0), 6.0);
}

TEST(MonotoneFn, RejectsNonIncreasingData) {
  EXPECT_THROW(MonotoneFn({0.0, 1.0, 1.0}, {0.0, 1.0, 2.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(MonotoneFn({0.0, 1.0}, {0.0, -1.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(MonotoneFn({0.0, 1.0}, {0.0, 1.0}, 0.0), std::invalid_argument);
}

TEST(MonotoneFn, InverseRoundTrip) {
  const MonotoneFn f = MonotoneFn::sample([](double s) { return s * s + s; }, MonotoneFn::default_grid());
  const MonotoneFn g = inverse(f);
  for (double s : {1e-5, 0.3, 2.0, 17.0, 900.0, 5000.0}) {
    EXPECT_NEAR(g(f(s)), s, 1e-9 * (1.0 + s));
    EXPECT_NEAR(f(g(s)), s, 1e-9 * (1.0 + s));
  }
}

TEST(MonotoneFn, ComposeAndMax) {
  const MonotoneFn two = MonotoneFn::linear(2.0);
  const MonotoneFn three = MonotoneFn::linear(3.0);
  const MonotoneFn c = compose(two, three);
  EXPECT_NEAR(c(1.5), 9.0, 1e-12);

  // max(s, s^2) is s below 1 and s^2 above.
  const MonotoneFn sq = MonotoneFn::sample([](double s) { return s * s; }, MonotoneFn::default_grid());
  const MonotoneFn m = pointwise_max(MonotoneFn::identity(), sq);
  for (double s : {0.01, 0.5, 0.99, 1.0, 2.0, 10.0}) EXPECT_GE(m(s), std::max(s, sq(s)) - 1e-12);
  EXPECT_NEAR(m(0.5), 0.5, 1e-9);
  EXPECT_NEAR(m(10.0), sq(10.0), 1e-9);
}

TEST(MonotoneFn, ScaledMultipliesValues) {
  const MonotoneFn f = MonotoneFn::linear(2.0).scaled(1.5);
  EXPECT_DOUBLE_EQ(f(4.0), 12.0);
}

TEST(RepairStrict, FlatRunsBecomeIncreasing) {
  std::vector<double> v{0.0, 1.0, 1.0, 1.0, 2.0};
  repair_strict(v);
  for (std::size_t k = 1; k < v.size(); ++k) EXPECT_GT(v[k], v[k - 1]);
  EXPECT_DOUBLE_EQ(v[1], 1.0);
  EXPECT_LT(v[3] - 1.0, 1e-10);
}

TEST(KEnvelope, UpperMajorantIsMinimal) {
  // Running max of (1, 2), (2, 1) is (2, 2); the flat run gains a tiny slack.
  const std::vector<GainSample> pts{{1.0, 2.0}, {2.0, 1.0}};
  const MonotoneFn f = fit_k_envelope(pts, EnvelopeMode::UpperMajorant);
  EXPECT_DOUBLE_EQ(f(0.0), 0.0);
  EXPECT_DOUBLE_EQ(f(1.0), 2.0);
  EXPECT_GT(f(2.0), 2.0);
  EXPECT_LT(f(2.0), 2.0 + 1e-10);
  // Largest gap sits at (2, 1): 2 + slack - 1.
  EXPECT_NEAR(envelope_tightness(f, pts, EnvelopeMode::UpperMajorant), 1.0, 1e-10);
}

TEST(KEnvelope, LowerMinorantStaysBelowData) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<GainSample> pts;
  for (int k = 0; k < 200; ++k) {
    const double s = 10.0 * U(rng) + 1e-3;
    pts.push_back({s, s * s * (0.5 + U(rng))});
  }
  const MonotoneFn lo = fit_k_envelope(pts, EnvelopeMode::LowerMinorant);
  const MonotoneFn hi = fit_k_envelope(pts, EnvelopeMode::UpperMajorant);
  for (const auto& p : pts) {
    EXPECT_LE(lo(p.s), p.y + 1e-9 * (1.0 + p.y));
    EXPECT_GE(hi(p.s), p.y);
  }
}

TEST(KLFn, BilinearMatchesSmoothFunction) {
  // r e^{-t} is linear in r; in t the chord error is at most h^2 / 8 * max f''.
  std::vector<double> r_grid{1.0, 2.0, 3.0};
  std::vector<double> t_grid;
  for (int k = 1; k <= 500; ++k) t_grid.push_back(0.01 * k);
  const KLFn beta = KLFn::sample([](double r, double t) { return r * std::exp(-t); }, r_grid, t_grid);
  const double bound = 0.01 * 0.01 / 8.0 * 2.0;
  EXPECT_NEAR(beta(2.0, std::log(2.0)), 1.0, bound);
  EXPECT_NEAR(beta(1.5, 1.234), 1.5 * std::exp(-1.234), bound);
  EXPECT_DOUBLE_EQ(beta(0.0, 1.0), 0.0);
  // Past the grid in t the value keeps decaying.
  EXPECT_LT(beta(2.0, 8.0), beta(2.0, 5.0));
  EXPECT_GT(beta(2.0, 8.0), 0.0);
  // Past the grid in r it keeps growing.
  EXPECT_GT(beta(6.0, 1.0), beta(3.0, 1.0));
}

TEST(KLFn, ScaledMultipliesValues) {
  const std::vector<double> r_grid{1.0, 2.0};
  const std::vector<double> t_grid{1.0, 2.0};
  const KLFn beta = KLFn::sample([](double r, double t) { return r / (1.0 + t); }, r_grid, t_grid);
  EXPECT_DOUBLE_EQ(beta.scaled(3.0)(1.5, 1.5), 3.0 * beta(1.5, 1.5));
}

TEST(KLEnvelope, DominatesAndIsMonotone) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<KLSample> samples;
  for (int k = 0; k < 2000; ++k) {
    const double r = std::exp(std::log(1e-2) + U(rng) * std::log(1e3));
    const double t = 10.0 * U(rng);
    samples.push_back({r, t, r * std::exp(-t) * (0.5 + U(rng))});
  }
  const KLFn beta = fit_kl_envelope(samples);
  for (const auto& s : samples) EXPECT_GE(beta(s.r, s.t), s.y - 1e-12 * (1.0 + s.y));
  for (double r : {0.05, 0.5, 5.0})
    for (double t = 0.0; t < 12.0; t += 0.37) {
      EXPECT_LE(beta(r, t + 0.37), beta(r, t) + 1e-12);
      EXPECT_GE(beta(2.0 * r, t), beta(r, t) - 1e-12);
    }
}

TEST(KLEnvelope, PooledRatiosTransferAcrossRadii) {
  // Relative decay 0.5 seen at r = 1 must also cover r = 2 at the same time.
  const std::vector<KLSample> samples{{1.0, 1.0, 0.5}, {2.0, 1.0, 0.2}, {1.0, 0.0, 1.0}, {2.0, 0.0, 2.0}};
  const KLFn plain = fit_kl_envelope(samples);
  const KLFn pooled = fit_kl_envelope(samples, {.pool_ratios = true});
  EXPECT_GE(plain(2.0, 1.0), 0.2);
  EXPECT_LT(plain(2.0, 1.0), 1.0);
  EXPECT_GE(pooled(2.0, 1.0), 1.0 - 1e-12);
}
