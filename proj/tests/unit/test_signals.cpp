#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "iiss/signals.hpp"

using namespace iiss;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

}  // namespace

TEST(SwitchingSignal, RightContinuousAndCanonical) {
  const SwitchingSignal s({1.0, 2.0, 3.0}, {1, 2, 2, 1});
  EXPECT_EQ(s(0.0), 1);
  EXPECT_EQ(s(0.999), 1);
  EXPECT_EQ(s(1.0), 2);
  EXPECT_EQ(s(2.5), 2);
  EXPECT_EQ(s(3.0), 1);
  EXPECT_EQ(s(1e6), 1);
  // The repeated mode 2 is merged away.
  EXPECT_EQ(s.switch_count(), 2u);
  EXPECT_TRUE(s.same_function(SwitchingSignal({1.0, 3.0}, {1, 2, 1})));
  EXPECT_FALSE(s.same_function(SwitchingSignal({1.0, 3.5}, {1, 2, 1})));
}

TEST(SwitchingSignal, RejectsMalformed) {
  EXPECT_THROW(SwitchingSignal({2.0, 1.0}, {1, 2, 1}), std::invalid_argument);
  EXPECT_THROW(SwitchingSignal({1.0}, {1}), std::invalid_argument);
  EXPECT_THROW(SwitchingSignal({-1.0}, {1, 2}), std::invalid_argument);
}

TEST(SwitchingSignal, Concatenate) {
  const SwitchingSignal a = SwitchingSignal::constant(1);
  const SwitchingSignal b({0.5}, {2, 1});
  const std::vector<SwitchingSignal> parts{a, b};
  const std::vector<double> times{1.0};
  const SwitchingSignal c = concatenate(parts, times);
  // a on [0, 1), then b read at absolute time.
  EXPECT_EQ(c(0.7), 1);
  EXPECT_EQ(c(1.0), b(1.0));
  EXPECT_EQ(c(0.99), 1);
  EXPECT_EQ(c(5.0), 1);
}

TEST(SignalSet, DwellTimeMembership) {
  const SignalSetSpec set = SignalSetSpec::dwell_time(0.1, 1.0, {1, 2});
  EXPECT_TRUE(validate_membership(SwitchingSignal({0.5, 1.0, 1.8}, {1, 2, 1, 2}, 2.0), set).member);
  // Dwell 0.05 < d_min.
  const Membership short_dwell = validate_membership(SwitchingSignal({0.5, 0.55}, {1, 2, 1}, 1.0), set);
  EXPECT_FALSE(short_dwell.member);
  EXPECT_FALSE(short_dwell.reason.empty());
  // Dwell 1.5 > d_max.
  EXPECT_FALSE(validate_membership(SwitchingSignal({1.5}, {1, 2}, 2.0), set).member);
  // Mode outside the set.
  EXPECT_FALSE(validate_membership(SwitchingSignal({0.5}, {1, 3}, 1.0), set).member);
}

TEST(SignalSet, FiniteFamilyAndClosure) {
  const SwitchingSignal s1 = SwitchingSignal::constant(1);
  const SwitchingSignal s2 = SwitchingSignal::constant(2);
  const SignalSetSpec fam = SignalSetSpec::finite_family({s1, s2});
  EXPECT_TRUE(validate_membership(s1, fam).member);
  const SwitchingSignal mixed({1.0}, {1, 2});
  EXPECT_FALSE(validate_membership(mixed, fam).member);
  EXPECT_TRUE(validate_membership(mixed, SignalSetSpec::concat_closure(fam, 2)).member);
  EXPECT_FALSE(validate_membership(SwitchingSignal({1.0, 2.0}, {1, 2, 1}), SignalSetSpec::concat_closure(fam, 2)).member);
  // Depth 1 is the base set itself.
  EXPECT_FALSE(validate_membership(mixed, SignalSetSpec::concat_closure(fam, 1)).member);
}

TEST(SignalSet, SamplesAreMembers) {
  const SignalSetSpec dwell = SignalSetSpec::dwell_time(0.1, 1.0, {1, 2});
  const SignalSetSpec fam =
      SignalSetSpec::finite_family({SwitchingSignal::constant(1), SwitchingSignal({0.3}, {2, 1})});
  const std::vector<SignalSetSpec> sets{dwell, fam, SignalSetSpec::concat_closure(fam, 3),
                                        SignalSetSpec::arbitrary({1, 2, 3})};
  for (const auto& set : sets)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const SwitchingSignal s = sample_signal_set(set, 10.0, seed);
      const Membership m = validate_membership(s, set);
      EXPECT_TRUE(m.member) << set.describe() << " seed " << seed << ": " << m.reason;
      EXPECT_GE(s.horizon(), 10.0);
    }
}

TEST(SignalSet, SamplingIsDeterministic) {
  const SignalSetSpec dwell = SignalSetSpec::dwell_time(0.1, 1.0, {1, 2});
  EXPECT_EQ(sample_signal_set(dwell, 20.0, 7), sample_signal_set(dwell, 20.0, 7));
  EXPECT_FALSE(sample_signal_set(dwell, 20.0, 7).same_function(sample_signal_set(dwell, 20.0, 8)));
}

TEST(InputSignal, PiecewiseConstantValues) {
  const InputSignal u = InputSignal::piecewise_constant({0.0, 1.0}, {v1(2.0), v1(-3.0)});
  EXPECT_DOUBLE_EQ(u(0.5)(0), 2.0);
  EXPECT_DOUBLE_EQ(u(1.0)(0), -3.0);
  EXPECT_DOUBLE_EQ(u.left_limit(1.0)(0), 2.0);
  EXPECT_DOUBLE_EQ(u.magnitude(7.0), 3.0);
  EXPECT_DOUBLE_EQ(u.sup_norm(), 3.0);
  const auto bp = u.breakpoints_in(0.0, 2.0);
  ASSERT_EQ(bp.size(), 1u);
  EXPECT_DOUBLE_EQ(bp[0], 1.0);
}

TEST(Energy, PiecewiseConstantIsExact) {
  // |u| = 2 on [0, 1), 3 afterwards: int_0^2 = 2 + 3; with chi = 2 s it doubles.
  const InputSignal u = InputSignal::piecewise_constant({0.0, 1.0}, {v1(2.0), v1(-3.0)});
  EXPECT_DOUBLE_EQ(energy_norm(u, MonotoneFn::identity(), 0.0, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(energy_norm(u, MonotoneFn::linear(2.0), 0.0, 2.0), 10.0);
  EXPECT_DOUBLE_EQ(energy_norm(u, MonotoneFn::identity(), 0.5, 1.5), 2.5);
  EXPECT_DOUBLE_EQ(energy_norm(InputSignal::zero(1), MonotoneFn::identity(), 0.0, 100.0), 0.0);
}

TEST(Energy, AnalyticInputs) {
  // int_0^inf 5 e^{-t} dt = 5
  const InputSignal e = InputSignal::exp_decay(v1(5.0), 1.0);
  EXPECT_NEAR(energy_norm(e, MonotoneFn::identity(), 0.0, 3.0), 5.0 * (1.0 - std::exp(-3.0)), 1e-9);
  const EnergyTail tail = energy_norm_infinite(e, MonotoneFn::identity(), 20.0);
  EXPECT_NEAR(tail.truncated + tail.tail_bound, 5.0, 1e-6);
  EXPECT_GE(tail.truncated + tail.tail_bound, 5.0 - 1e-9);
  EXPECT_TRUE(has_finite_energy(e, MonotoneFn::identity(), 40.0));

  // int_0^pi |sin t| dt = 2
  const InputSignal s = InputSignal::sinusoid(v1(1.0), 1.0);
  EXPECT_NEAR(energy_norm(s, MonotoneFn::identity(), 0.0, M_PI), 2.0, 1e-8);

  const InputSignal p = InputSignal::pulse(v1(4.0), 1.0, 1.5);
  EXPECT_DOUBLE_EQ(energy_norm(p, MonotoneFn::identity(), 0.0, 10.0), 2.0);
  EXPECT_TRUE(has_finite_energy(p, MonotoneFn::identity(), 10.0));
}

TEST(Energy, ConstantInputHasInfiniteEnergy) {
  const InputSignal one = InputSignal::piecewise_constant({0.0}, {v1(1.0)});
  EXPECT_FALSE(has_finite_energy(one, MonotoneFn::identity(), 100.0));
  EXPECT_TRUE(std::isinf(energy_norm_infinite(one, MonotoneFn::identity(), 100.0).tail_bound));
}
