// Acceptance suite: one PASS/FAIL line per criterion. Exit status is zero
// iff every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "iiss/certify.hpp"
#include "iiss/comparison.hpp"
#include "iiss/falsify.hpp"
#include "iiss/integrator.hpp"
#include "iiss/random.hpp"
#include "iiss/signals.hpp"
#include "iiss/systems.hpp"

using namespace iiss;

namespace {

// Pinned tolerances.
constexpr double kDecaySlack = 1e-4;          // 1: additive slack on sqrt(10) e^{-t} |x0|
constexpr double kGrowthTarget = 10.0;        // 2
constexpr double kGrowthHorizon = 5.0;        // 2
constexpr double kReplayRel = 1e-6;           // 2, 3
constexpr double kDissipationRel = 1e-6;      // 4: slack <= 1e-6 (1 + rhs)
constexpr double kEnergyStepRel = 1e-8;       // 5: V(x_{k+1}) - V(x_k) <= 1e-8 V(x0)
constexpr double kBeicsEps = 0.05;            // 6
constexpr double kInverseRoundTrip = 1e-9;    // 9
constexpr double kMaxExact = 1e-12;           // 9
constexpr double kOrderLo = 12.0;             // 10
constexpr double kOrderHi = 20.0;             // 10
constexpr double kRestartRel = 1e-9;          // 12

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double inverter_energy(const InverterParams& p, const Vec& x) { return 0.5 * x.dot(p.P() * x); }

SignalSetSpec inverter_dwell() { return SignalSetSpec::dwell_time(0.1, 1.0, {1, 2}); }

// ---------------------------------------------------------------------------

Outcome per_mode_decay() {
  const SwitchedSystem sys = make_prop4_pair();
  const InputSignal u0 = InputSignal::zero(1);
  double worst = -1e300;
  std::size_t runs = 0;
  for (Mode m : {1, 2}) {
    for (const Vec& x0 : unit_sphere_grid(2, 16)) {
      const Trajectory tr = simulate(sys, x0, 0.0, u0, SwitchingSignal::constant(m), 10.0);
      for (std::size_t k = 0; k < tr.size(); ++k) {
        const double bound = std::sqrt(10.0) * std::exp(-tr.times[k]) * x0.norm() + kDecaySlack;
        worst = std::max(worst, tr.norm_at(k) - bound);
      }
      ++runs;
    }
  }
  return {worst <= 0.0, std::to_string(runs) + " runs, max(|x| - bound) = " + fmt(worst)};
}

Outcome destabilizing_switching() {
  const SwitchedSystem sys = make_prop4_pair();
  DestabilizeSpec spec;
  spec.growth_target = kGrowthTarget;
  spec.T_max = kGrowthHorizon;
  const auto w = find_destabilizing(sys, spec);
  if (!w) return {false, "no witness"};
  // Independent replay of the open-loop signal.
  const Trajectory tr = simulate(sys, w->x0, w->t0, InputSignal::zero(1), w->sigma, w->T);
  const double growth = tr.x_end().norm() / w->x0.norm();
  const double rel = std::abs(growth - w->growth) / w->growth;
  const bool ok = w->growth >= kGrowthTarget && w->T <= kGrowthHorizon && rel <= kReplayRel;
  return {ok, w->policy.describe() + ": growth " + fmt(w->growth) + " at T=" + fmt(w->T) + ", " +
                  std::to_string(w->sigma.switch_count()) + " switches, replay rel err " + fmt(rel)};
}

Outcome concat_closure_failure() {
  const SwitchedSystem sys = make_prop4_pair();
  const StorageFn V = [](double, const Vec& x, Mode) { return 0.5 * x.squaredNorm(); };
  const SignalSetSpec base =
      SignalSetSpec::finite_family({SwitchingSignal::constant(1), SwitchingSignal::constant(2)});
  ConcatProbeSpec spec;
  spec.k = 2;
  spec.budget = 200;
  const ConcatProbeResult res = probe_concat_closure(sys, V, base, spec);
  if (!res.report.violated() || !res.prefix_witness) return {false, "verdict " + to_string(res.report.verdict)};
  const Witness& w = *res.prefix_witness;
  const SignalSetSpec closure = SignalSetSpec::concat_closure(base, 2);
  const bool member = static_cast<bool>(validate_membership(w.sigma, closure));
  const Vec xt = replay_state(sys, w, {});
  const double Vt = 0.5 * xt.squaredNorm();
  const double V0 = 0.5 * w.x0.squaredNorm();
  const double rel = std::abs(Vt - w.lhs) / w.lhs;
  const bool ok = member && Vt > V0 && rel <= kReplayRel && w.sigma.switch_count() >= 1;
  return {ok, std::to_string(res.prefix_violations) + "/" + std::to_string(res.prefix_candidates) +
                  " prefix candidates violate; witness V(t)/V(t0) = " + fmt(Vt / V0) + " at t=" + fmt(w.t) +
                  ", switch at " + fmt(w.sigma.switch_times().front()) + ", member of closure: " + (member ? "yes" : "no")};
}

Outcome inverter_dissipation() {
  const InverterParams p;
  const SwitchedSystem sys = make_inverter(p);
  EnsembleSpec es;
  es.count = 100;
  es.seed = 401;
  es.input = InputFamily::PiecewiseConstant;
  es.input_bound = 5.0;
  es.horizon = 20.0;
  const Ensemble ens = make_ensemble(sys, inverter_dwell(), es);
  const double kappa = 1.0 / std::sqrt(p.lambda_min());
  DissipationCertificate cert{
      [p](double, const Vec& x, Mode) { return std::sqrt(inverter_energy(p, x)); },
      "sqrt_energy",
      MonotoneFn::linear(std::sqrt(p.lambda_min())),
      MonotoneFn::linear(std::sqrt(0.5 * std::max({p.L1, p.L2, p.C1, p.C2}))),
      MonotoneFn::linear(kappa / 2.0),
      std::nullopt};
  const CheckReport rep = check_dissipation(sys, ens, cert, {kDissipationRel});
  return {rep.holds(), "kappa=" + fmt(kappa) + ", " + std::to_string(rep.points) + " points, worst margin " +
                           fmt(rep.worst_margin)};
}

Outcome inverter_energy_decay() {
  const InverterParams p;
  const SwitchedSystem sys = make_inverter(p);
  EnsembleSpec es;
  es.count = 100;
  es.seed = 501;
  const Ensemble ens = make_ensemble(sys, inverter_dwell(), es);
  double worst = -1e300;
  for (const RunSpec& run : ens.runs) {
    const Trajectory tr = simulate_run(sys, run, ens.sim);
    const double V0 = inverter_energy(p, tr.state(0));
    double prev = V0;
    for (std::size_t k = 1; k < tr.size(); ++k) {
      const double V = inverter_energy(p, tr.state(k));
      worst = std::max(worst, (V - prev) - kEnergyStepRel * V0);
      prev = V;
    }
  }
  return {worst <= 0.0, "max step excess " + fmt(worst)};
}

Outcome inverter_beics() {
  const SwitchedSystem sys = make_inverter();
  const MonotoneFn chi = MonotoneFn::identity();
  EnsembleSpec es;
  es.input = InputFamily::Fixed;
  es.fixed_inputs = {InputSignal::exp_decay(Vec::Constant(1, 5.0), 1.0)};
  es.horizon = 100.0;
  es.count = 10;
  es.seed = 601;
  const Ensemble pilot = make_ensemble(sys, inverter_dwell(), es);
  const double T_conv = pilot_t_conv(sys, pilot, kBeicsEps);
  es.count = 50;
  es.seed = 602;
  const Ensemble ens = make_ensemble(sys, inverter_dwell(), es);
  BeicsOptions bo;
  bo.eps_conv = kBeicsEps;
  bo.T_conv = T_conv;
  const CheckReport a = check_beics(sys, ens, chi, bo);
  const CheckReport b = check_beics(sys, make_ensemble(sys, inverter_dwell(), es), chi, bo);
  const bool deterministic = a.worst_margin == b.worst_margin && a.points == b.points;
  return {a.holds() && deterministic && T_conv < es.horizon,
          "T_conv=" + fmt(T_conv) + " from 10 pilot runs, worst margin " + fmt(a.worst_margin) +
              (deterministic ? ", repeat identical" : ", repeat differs")};
}

// Shared by the closure and Gronwall criteria.
KLFn inverter_zero_input_beta(const SwitchedSystem& sys, std::uint64_t seed, double horizon) {
  EnsembleSpec es;
  es.count = 100;
  es.seed = seed;
  es.horizon = horizon;
  return fit_0guas_beta(sys, make_ensemble(sys, inverter_dwell(), es));
}

Outcome iiss_closure() {
  const InverterParams p;
  const SwitchedSystem sys = make_inverter(p);
  const double kappa = p.kappa();
  const MonotoneFn alpha = MonotoneFn::linear(kappa / 2.0);
  const MonotoneFn chi = derive_iiss_gain(alpha, *sys.declared().gamma);

  EnsembleSpec zs;
  zs.count = 100;
  zs.seed = 701;
  const Ensemble zero = make_ensemble(sys, inverter_dwell(), zs);
  const KLFn beta0 = fit_0guas_beta(sys, zero);
  const CheckReport guas = check_0guas(sys, zero, beta0);

  EnsembleSpec ts = zs;
  ts.seed = 702;
  ts.count = 200;
  ts.input = InputFamily::Mixed;
  const Ensemble training = make_ensemble(sys, inverter_dwell(), ts);
  const UbebsCertificate ub = fit_ubebs_gains(sys, training, chi);
  const CheckReport ubr = check_ubebs(sys, training, ub);

  const IissCertificate cert = fit_iiss_certificate(sys, training, chi, ub.alpha1);
  EnsembleSpec fs = ts;
  fs.seed = 703;
  fs.count = 100;
  const Ensemble fresh = make_ensemble(sys, inverter_dwell(), fs);
  const CheckReport rep = check_iiss(sys, fresh, cert);
  const bool chi_is_id = std::abs(chi(1.0) - 1.0) < 1e-12 && std::abs(chi(7.0) - 7.0) < 1e-12;
  return {guas.holds() && ubr.holds() && !ubr.vacuous && rep.holds() && chi_is_id,
          "chi(s)=" + std::string(chi_is_id ? "s" : "?") + ", 0-GUAS " + to_string(guas.verdict) + ", UBEBS " +
              to_string(ubr.verdict) + ", fresh iISS " + to_string(rep.verdict) + " margin " + fmt(rep.worst_margin)};
}

Outcome gronwall_bound() {
  const InverterParams p;
  const SwitchedSystem sys = make_inverter(p);
  const MonotoneFn chi = MonotoneFn::identity();
  const double eta = 0.1;
  const double r = 12.0;
  const KLFn beta = inverter_zero_input_beta(sys, 801, 20.0);
  SampleSpec ss;
  ss.seed = 802;
  const double L = estimate_lipschitz(sys, r, ss);
  const KappaEstimate ke = estimate_kappa(sys, r, eta, chi, ss);
  GronwallCertificate cert{beta, eta, ke.kappa, L, chi, r};
  EnsembleSpec es;
  es.count = 20;
  es.seed = 803;
  es.horizon = 1.0;
  es.input = InputFamily::PiecewiseConstant;
  const Ensemble ens = make_ensemble(sys, inverter_dwell(), es);
  const CheckReport rep = check_gronwall(sys, ens, cert);
  return {rep.holds() && rep.points > 0 && rep.notes.size() < 3,
          "L=" + fmt(L) + ", kappa=" + fmt(ke.kappa) + ", " + std::to_string(rep.points) + " points, worst margin " +
              fmt(rep.worst_margin)};
}

Outcome comparison_suite() {
  Rng rng(901);
  std::size_t failures = 0;
  std::string first;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first = what;
  };
  auto random_fn = [&]() {
    const int n = 2 + static_cast<int>(uniform(rng, 0, 12));
    std::vector<double> knots{0.0};
    std::vector<double> values{0.0};
    for (int k = 0; k < n; ++k) {
      knots.push_back(knots.back() + uniform(rng, 1e-3, 5.0));
      values.push_back(values.back() + uniform(rng, 1e-3, 5.0));
    }
    return MonotoneFn(knots, values, uniform(rng, 1e-2, 5.0));
  };
  for (int i = 0; i < 1000; ++i) {
    const MonotoneFn f = random_fn();
    const MonotoneFn g = random_fn();
    if (f(0.0) != 0.0) fail("zero-at-zero");
    for (std::size_t k = 1; k < f.knots().size(); ++k)
      if (!(f.values()[k] > f.values()[k - 1])) fail("strict monotonicity");
    double prev = 0.0;
    for (int s = 1; s <= 50; ++s) {
      const double v = f(0.5 * s);
      if (!(v > prev)) fail("strict monotonicity between knots");
      prev = v;
    }
    const MonotoneFn fi = inverse(f);
    for (std::size_t k = 0; k < f.knots().size(); ++k) {
      const double s = f.knots()[k];
      if (std::abs(fi(f(s)) - s) > kInverseRoundTrip) fail("inverse round trip");
    }
    const MonotoneFn m = pointwise_max(f, g);
    std::vector<double> probes = f.knots();
    probes.insert(probes.end(), g.knots().begin(), g.knots().end());
    for (int s = 0; s < 20; ++s) probes.push_back(uniform(rng, 0.0, 80.0));
    for (double s : probes) {
      const double want = std::max(f(s), g(s));
      if (std::abs(m(s) - want) > kMaxExact * (1.0 + want)) fail("pointwise max");
    }
  }
  std::size_t energy_fail = 0;
  double worst_split = 0.0;
  for (int i = 0; i < 1000; ++i) {
    InputSignal u = InputSignal::zero(1);
    switch (i % 3) {
      case 0: {
        std::vector<double> times{0.0};
        std::vector<Vec> vals{Vec::Constant(1, uniform(rng, -5, 5))};
        for (int k = 0; k < 5; ++k) {
          times.push_back(times.back() + uniform(rng, 0.1, 3.0));
          vals.push_back(Vec::Constant(1, uniform(rng, -5, 5)));
        }
        u = InputSignal::piecewise_constant(times, vals);
        break;
      }
      case 1:
        u = InputSignal::exp_decay(Vec::Constant(1, uniform(rng, 0.1, 5)), uniform(rng, 0.1, 3));
        break;
      default:
        u = InputSignal::sinusoid(Vec::Constant(1, uniform(rng, 0.1, 5)), uniform(rng, 0.1, 10), uniform(rng, 0, 6));
    }
    const MonotoneFn chi = random_fn();
    const double a = uniform(rng, 0.0, 5.0);
    const double b = a + uniform(rng, 0.1, 10.0);
    const double s = uniform(rng, a, b);
    const double whole = energy_norm(u, chi, a, b);
    const double split = energy_norm(u, chi, a, s) + energy_norm(u, chi, s, b);
    const double err = std::abs(whole - split);
    worst_split = std::max(worst_split, err);
    if (err > 2.0 * kDefaultQuadTol) ++energy_fail;
  }
  return {failures == 0 && energy_fail == 0,
          "1000 gain pairs: " + std::to_string(failures) + " failures" + (first.empty() ? "" : " (" + first + ")") +
              "; energy splits: " + std::to_string(energy_fail) + " failures, worst " + fmt(worst_split)};
}

Outcome integrator_order() {
  Mat A(2, 2);
  A << -1.0, -100.0, 10.0, -1.0;
  const SwitchedSystem sys = make_switched_linear({A}, {Mat::Zero(2, 1)});
  Vec x0(2);
  x0 << 1.0, 0.5;
  const double T = 1.0;
  const Vec exact = (A * T).exp() * x0;
  auto err = [&](double h) {
    SimOptions so;
    so.h_step = h;
    return (simulate(sys, x0, 0.0, InputSignal::zero(1), SwitchingSignal::constant(1), T, so).x_end() - exact).norm();
  };
  const double e1 = err(1e-3);
  const double e2 = err(5e-4);
  const double ratio = e1 / e2;
  return {ratio >= kOrderLo && ratio <= kOrderHi, "err(1e-3)=" + fmt(e1) + ", err(5e-4)=" + fmt(e2) + ", ratio " + fmt(ratio)};
}

Outcome output_pe_trivial() {
  const SwitchedSystem inverter = make_inverter();
  EnsembleSpec es;
  es.count = 30;
  es.seed = 1101;
  es.r_min = 0.1;
  es.r_max = 9.0;
  const Ensemble inv = make_ensemble(inverter, inverter_dwell(), es);

  // |x| stays on the unit circle, so eps = 1 has qualifying windows.
  Mat R(2, 2);
  R << 0.0, 1.0, -1.0, 0.0;
  const SwitchedSystem rot = make_switched_linear({R, 2.0 * R}, {Mat::Zero(2, 1), Mat::Zero(2, 1)});
  es.r_min = es.r_max = 1.0;
  es.count = 10;
  const Ensemble circ = make_ensemble(rot, SignalSetSpec::dwell_time(0.1, 1.0, {1, 2}), es);

  const double T = 5.0;
  bool ok = true;
  std::ostringstream os;
  for (double eps : {0.1, 0.5, 1.0}) {
    const double r = eps * eps * T;
    const CheckReport a = check_output_pe(inverter, inv, eps, T, r);
    const CheckReport b = check_output_pe(rot, circ, eps, T, r);
    const bool some = a.holds() || b.holds();
    ok = ok && some && !a.violated() && !b.violated();
    os << "eps=" << eps << ": " << to_string(a.verdict) << "/" << to_string(b.verdict) << "; ";
  }
  return {ok, os.str()};
}

Outcome causality() {
  const SwitchedSystem sys = make_inverter();
  const SignalSetSpec set = inverter_dwell();
  Rng rng(1201);
  std::size_t bitwise_fail = 0;
  double worst_restart = 0.0;
  for (int c = 0; c < 50; ++c) {
    const double T = 6.0;
    const SwitchingSignal s1 = sample_signal_set(set, T, derive_seed(1201, 2 * c));
    const SwitchingSignal s2 = sample_signal_set(set, T, derive_seed(1201, 2 * c + 1));
    const double t = uniform(rng, 0.5, 5.5);
    const std::vector<SwitchingSignal> parts{s1, s2};
    const std::vector<double> at{t};
    const SwitchingSignal sig = concatenate(parts, at);
    const Vec x0 = random_in_ball(rng, 4, 5.0);
    std::vector<double> times{0.0};
    std::vector<Vec> vals{Vec::Constant(1, uniform(rng, -5, 5))};
    for (int k = 0; k < 4; ++k) {
      times.push_back(times.back() + uniform(rng, 0.3, 2.0));
      vals.push_back(Vec::Constant(1, uniform(rng, -5, 5)));
    }
    const InputSignal u = InputSignal::piecewise_constant(times, vals);

    SimOptions so;
    so.extra_breakpoints = {t};
    const Trajectory full = simulate(sys, x0, 0.0, u, sig, T, so);
    const Trajectory first = simulate(sys, x0, 0.0, u, s1, t);
    for (std::size_t k = 0; k < first.size(); ++k) {
      if (full.times[k] != first.times[k] || full.state(k) != first.state(k) ||
          (k + 1 < first.size() && full.modes[k] != first.modes[k])) {
        ++bitwise_fail;
        break;
      }
    }
    const Trajectory second = simulate(sys, first.x_end(), t, u, s2, T);
    const std::size_t off = first.size() - 1;
    for (std::size_t k = 0; k < second.size(); ++k) {
      const double d = (full.state(off + k) - second.state(k)).norm() / (1.0 + second.state(k).norm());
      worst_restart = std::max(worst_restart, d);
    }
  }
  return {bitwise_fail == 0 && worst_restart <= kRestartRel,
          "50 cases: " + std::to_string(bitwise_fail) + " prefix mismatches, worst restart deviation " + fmt(worst_restart)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"per-mode decay of the Hurwitz pair", per_mode_decay},
      {"destabilizing switching exists", destabilizing_switching},
      {"concatenation closure breaks 0-OD", concat_closure_failure},
      {"inverter dissipation inequality", inverter_dissipation},
      {"inverter zero-input energy decay", inverter_energy_decay},
      {"inverter BEICS", inverter_beics},
      {"fitted iISS certificate passes on fresh runs", iiss_closure},
      {"Gronwall perturbation bound", gronwall_bound},
      {"comparison-function suite", comparison_suite},
      {"integrator order", integrator_order},
      {"output-PE trivial certificate", output_pe_trivial},
      {"causality under concatenation", causality},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s AC%-2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
