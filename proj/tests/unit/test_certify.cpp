#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "iiss/certify.hpp"

using namespace iiss;

namespace {

// xdot = -a_i x + u with a = 1, 3: |x(t)| <= |x0| e^{-t} + int |u|.
SwitchedSystem scalar() {
  return make_switched_linear({Mat::Constant(1, 1, -1.0), Mat::Constant(1, 1, -3.0)}, {Mat::Ones(1, 1), Mat::Ones(1, 1)});
}

SignalSetSpec dwell() { return SignalSetSpec::dwell_time(0.1, 1.0, {1, 2}); }

std::vector<double> lin_grid(double step, double end) {
  std::vector<double> g;
  for (double t = step; t <= end + 1e-12; t += step) g.push_back(t);
  return g;
}

// Chords of the convex e^{-t} lie above it, so the sampled beta dominates r e^{-t}.
KLFn exp_beta() {
  const std::vector<double> r_grid{1.0, 10.0};
  return KLFn::sample([](double r, double t) { return r * std::exp(-t); }, r_grid, lin_grid(0.05, 25.0));
}

MonotoneFn square(double c) {
  return MonotoneFn::sample([c](double s) { return c * s * s; }, MonotoneFn::default_grid());
}

Ensemble ensemble(InputFamily input, std::size_t count, double horizon, std::uint64_t seed = 1) {
  EnsembleSpec es;
  es.count = count;
  es.horizon = horizon;
  es.input = input;
  es.seed = seed;
  return make_ensemble(scalar(), dwell(), es);
}

}  // namespace

TEST(Ensemble, DeterministicAndLogSpaced) {
  const Ensemble a = ensemble(InputFamily::Mixed, 10, 2.0, 3);
  const Ensemble b = ensemble(InputFamily::Mixed, 10, 2.0, 3);
  ASSERT_EQ(a.runs.size(), 10u);
  EXPECT_NEAR(a.runs.front().x0.norm(), 1e-2, 1e-15);
  EXPECT_NEAR(a.runs.back().x0.norm(), 10.0, 1e-12);
  for (std::size_t j = 0; j < a.runs.size(); ++j) {
    EXPECT_EQ(a.runs[j].x0, b.runs[j].x0);
    EXPECT_EQ(a.runs[j].sigma, b.runs[j].sigma);
    EXPECT_TRUE(validate_membership(a.runs[j].sigma, dwell()).member);
  }
}

TEST(EnergyPrefix, EndsAtEnergyNorm) {
  const Ensemble ens = ensemble(InputFamily::PiecewiseConstant, 3, 4.0);
  for (const RunSpec& run : ens.runs) {
    const Trajectory tr = simulate_run(scalar(), run, ens.sim);
    const std::vector<double> E = energy_prefix(tr, run.u, MonotoneFn::identity());
    ASSERT_EQ(E.size(), tr.size());
    EXPECT_EQ(E.front(), 0.0);
    for (std::size_t k = 1; k < E.size(); ++k) EXPECT_GE(E[k], E[k - 1]);
    EXPECT_NEAR(E.back(), energy_norm(run.u, MonotoneFn::identity(), run.t0, tr.t_end()), 1e-9);
  }
}

TEST(ZeroGuas, ExactDecayHolds) {
  const CheckReport rep = check_0guas(scalar(), ensemble(InputFamily::Zero, 20, 10.0), exp_beta());
  EXPECT_TRUE(rep.holds());
  EXPECT_GE(rep.worst_margin, 0.0);
  EXPECT_EQ(rep.runs, 20u);
}

TEST(ZeroGuas, HalvedBetaIsViolatedAtTheStart) {
  // At t = t0, |x0| > |x0| / 2; the gap r / 2 is largest for the largest radius.
  const Ensemble ens = ensemble(InputFamily::Zero, 20, 10.0);
  const CheckReport rep = check_0guas(scalar(), ens, exp_beta().scaled(0.5));
  ASSERT_TRUE(rep.violated());
  ASSERT_TRUE(rep.witness.has_value());
  EXPECT_EQ(rep.witness->t, rep.witness->t0);
  EXPECT_EQ(rep.witness->run, ens.runs.size() - 1);
  EXPECT_NEAR(rep.worst_margin, -5.0 + check_tolerance(5.0, {}), 1e-9);
  // The witness replays to the recorded state.
  EXPECT_NEAR(replay_state(scalar(), *rep.witness, ens.sim).norm(), rep.witness->lhs, 1e-12);
}

TEST(ZeroGuas, RejectsNonzeroInputs) {
  EXPECT_THROW(check_0guas(scalar(), ensemble(InputFamily::PiecewiseConstant, 2, 1.0), exp_beta()),
               std::invalid_argument);
}

TEST(Iiss, AnalyticCertificateHolds) {
  const IissCertificate cert{exp_beta(), MonotoneFn::identity(), MonotoneFn::identity()};
  const CheckReport rep = check_iiss(scalar(), ensemble(InputFamily::Mixed, 30, 10.0), cert);
  EXPECT_TRUE(rep.holds()) << rep.worst_margin;
}

TEST(Iiss, ShrunkGainIsViolated) {
  // A constant input drives x to u / a; rho(s) = s / 100 cannot cover it.
  const IissCertificate cert{exp_beta(), MonotoneFn::linear(0.01), MonotoneFn::identity()};
  EXPECT_TRUE(check_iiss(scalar(), ensemble(InputFamily::PiecewiseConstant, 10, 10.0), cert).violated());
}

TEST(Ubebs, IdentityGainsHold) {
  const UbebsCertificate cert{MonotoneFn::identity(), MonotoneFn::identity(), MonotoneFn::identity(), 0.0};
  const CheckReport rep = check_ubebs(scalar(), ensemble(InputFamily::Mixed, 20, 10.0), cert);
  EXPECT_TRUE(rep.holds());
  EXPECT_FALSE(rep.vacuous);
}

TEST(Ubebs, HugeConstantIsFlaggedVacuous) {
  const UbebsCertificate cert{MonotoneFn::linear(1e-3), MonotoneFn::linear(1e-3), MonotoneFn::identity(), 1e6};
  const CheckReport rep = check_ubebs(scalar(), ensemble(InputFamily::Mixed, 10, 5.0), cert);
  EXPECT_TRUE(rep.holds());
  EXPECT_TRUE(rep.vacuous);
  EXPECT_THROW(check_ubebs(scalar(), ensemble(InputFamily::Zero, 2, 1.0), {cert.alpha1, cert.alpha2, cert.alpha, -1.0}),
               std::invalid_argument);
}

TEST(Beics, DecayingInputsConverge) {
  const SwitchedSystem sys = scalar();
  const Ensemble ens = ensemble(InputFamily::ExpDecay, 20, 20.0);
  BeicsOptions bo;
  bo.T_conv = pilot_t_conv(sys, ens, bo.eps_conv);
  const CheckReport rep = check_beics(sys, ens, MonotoneFn::identity(), bo);
  EXPECT_TRUE(rep.holds());
}

TEST(Beics, InfiniteEnergyInputThrows) {
  EnsembleSpec es;
  es.count = 2;
  es.input = InputFamily::Fixed;
  es.fixed_inputs = {InputSignal::piecewise_constant({0.0}, {Vec::Constant(1, 1.0)})};
  const Ensemble ens = make_ensemble(scalar(), dwell(), es);
  BeicsOptions bo;
  bo.T_conv = 5.0;
  EXPECT_THROW(check_beics(scalar(), ens, MonotoneFn::identity(), bo), std::invalid_argument);
}

TEST(Beics, PilotTimeMatchesSlowestDecay) {
  // Slowest run: |x0| = 1 in mode 1 throughout, settling at ln(1 / eps); mode 3 halves that.
  EnsembleSpec es;
  es.count = 20;
  es.r_min = 0.5;
  es.r_max = 1.0;
  es.horizon = 20.0;
  const SwitchedSystem sys = scalar();
  const double t = pilot_t_conv(sys, make_ensemble(sys, dwell(), es), 0.05);
  EXPECT_LE(t, 1.25 * std::log(20.0) + 1e-2);
  EXPECT_GE(t, 1.25 * std::log(20.0) / 3.0);
}

TEST(Dissipation, QuadraticStorageHolds) {
  // V = x^2 / 2: Vdot = -a x^2 + x u <= -x^2 / 2 + u^2 / 2, output y = x.
  DissipationCertificate cert{[](double, const Vec& x, Mode) { return 0.5 * x.squaredNorm(); }, "half_norm_sq",
                              square(0.25), square(1.0), square(0.5), square(0.25)};
  const CheckReport rep = check_dissipation(scalar(), ensemble(InputFamily::Mixed, 20, 5.0), cert);
  EXPECT_TRUE(rep.holds()) << rep.worst_margin;

  // Without the input supply rate the inequality fails on forced runs.
  cert.alpha = MonotoneFn::linear(1e-6);
  EXPECT_TRUE(check_dissipation(scalar(), ensemble(InputFamily::PiecewiseConstant, 10, 5.0), cert).violated());
}

TEST(OutputPe, RotationKeepsConstantEnergy) {
  // |x| stays at |x0| under a rotation, so the least window energy is r_min^2 T.
  Mat R(2, 2);
  R << 0.0, 1.0, -1.0, 0.0;
  const SwitchedSystem rot = make_switched_linear({R}, {Mat::Zero(2, 1)});
  EnsembleSpec es;
  es.count = 8;
  es.r_min = 0.5;
  es.r_max = 2.0;
  es.horizon = 6.0;
  const Ensemble ens = make_ensemble(rot, SignalSetSpec::arbitrary({1}), es);
  const double e = measure_output_pe(rot, ens, 0.5, 2.0);
  EXPECT_NEAR(e, 0.25 * 2.0, 1e-8);
  EXPECT_TRUE(check_output_pe(rot, ens, 0.5, 2.0, 0.49).holds());
  EXPECT_TRUE(check_output_pe(rot, ens, 0.5, 2.0, 0.51).violated());
  // Radii are 0.5 * 4^{k/7}; [0.99, 1/0.99] falls between k = 3 and k = 4.
  EXPECT_TRUE(std::isinf(measure_output_pe(rot, ens, 0.99, 2.0)));
}

TEST(Gronwall, LinearPerturbationBound) {
  // |x(t)| <= |x0| e^{-t} + int |u| <= beta + kappa int |u| e^{L t} with kappa = 1.
  GronwallCertificate cert{exp_beta(), 1e-6, 1.0, 1.0, MonotoneFn::identity(), 100.0};
  EXPECT_TRUE(check_gronwall(scalar(), ensemble(InputFamily::PiecewiseConstant, 10, 3.0), cert).holds());
  cert.kappa = 0.0;
  EnsembleSpec es;
  es.count = 5;
  es.horizon = 3.0;
  es.r_min = 0.01;
  es.r_max = 0.1;
  es.input = InputFamily::Fixed;
  es.fixed_inputs = {InputSignal::piecewise_constant({0.0}, {Vec::Constant(1, 5.0)})};
  EXPECT_TRUE(check_gronwall(scalar(), make_ensemble(scalar(), dwell(), es), cert).violated());
  cert.eta = 0.0;
  EXPECT_THROW(validate(cert), std::invalid_argument);
}

TEST(Fitting, EnvelopesDominateTrainingData) {
  const SwitchedSystem sys = scalar();
  const Ensemble zero = ensemble(InputFamily::Zero, 20, 10.0);
  EXPECT_TRUE(check_0guas(sys, zero, fit_0guas_beta(sys, zero)).holds());

  const Ensemble mixed = ensemble(InputFamily::Mixed, 20, 10.0);
  const UbebsCertificate ub = fit_ubebs_gains(sys, mixed, MonotoneFn::identity());
  EXPECT_TRUE(check_ubebs(sys, mixed, ub).holds());
  EXPECT_EQ(ub.c, 0.0);

  const IissCertificate ic = fit_iiss_certificate(sys, mixed, MonotoneFn::identity(), ub.alpha1);
  EXPECT_TRUE(check_iiss(sys, mixed, ic).holds());
}

TEST(Fitting, DerivedGainIsPointwiseMax) {
  const MonotoneFn chi = derive_iiss_gain(MonotoneFn::linear(0.5), MonotoneFn::identity());
  EXPECT_NEAR(chi(3.0), 3.0, 1e-12);
  const MonotoneFn chi2 = derive_iiss_gain(MonotoneFn::linear(2.0), MonotoneFn::identity());
  EXPECT_NEAR(chi2(3.0), 6.0, 1e-12);
}
