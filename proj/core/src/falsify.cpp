#include "iiss/falsify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "check_detail.hpp"
#include "iiss/parallel.hpp"
#include "iiss/random.hpp"

namespace iiss {

namespace {

using namespace detail;

Mode other_mode(const std::vector<Mode>& modes, Mode cur) {
  auto it = std::find(modes.begin(), modes.end(), cur);
  if (it == modes.end() || modes.size() == 1) return modes.front();
  ++it;
  return it == modes.end() ? modes.front() : *it;
}

// argmax_i x' W f(t, x, u, i) over modes != skip; ties to the lower mode.
Mode greedy_choice(const SwitchedSystem& sys, const Mat& W, double t, const Vec& x, const Vec& u,
                   std::optional<Mode> skip) {
  Mode best = 0;
  double best_val = -kInf;
  std::vector<Mode> modes = sys.modes();
  std::sort(modes.begin(), modes.end());
  for (Mode i : modes) {
    if (skip && i == *skip) continue;
    const Vec d = sys.f(t, x, u, i);
    const double v = W.size() ? x.dot(W * d) : x.dot(d);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best == 0 ? modes.front() : best;
}

Mode quadrant_choice(const SwitchPolicy& p, const Vec& x) {
  const int idx = (x(0) >= 0.0 ? 1 : 0) + (x(1) >= 0.0 ? 2 : 0);
  return p.quadrant[static_cast<std::size_t>(idx)];
}

}  // namespace

SwitchPolicy SwitchPolicy::constant(Mode mode) {
  SwitchPolicy p;
  p.kind = PolicyKind::Constant;
  p.mode = mode;
  return p;
}

SwitchPolicy SwitchPolicy::quadrant_rule(std::array<Mode, 4> modes, double delta_guard) {
  SwitchPolicy p;
  p.kind = PolicyKind::QuadrantRule;
  p.quadrant = modes;
  p.delta_guard = delta_guard;
  return p;
}

SwitchPolicy SwitchPolicy::growth_greedy(double delta_guard, Mat weight) {
  SwitchPolicy p;
  p.kind = PolicyKind::GrowthGreedy;
  p.delta_guard = delta_guard;
  p.weight = std::move(weight);
  return p;
}

SwitchPolicy SwitchPolicy::dwell_greedy(double d_min, double d_max, Mat weight) {
  SwitchPolicy p = growth_greedy(d_min, std::move(weight));
  p.d_min = d_min;
  p.d_max = d_max;
  p.max_dwell = d_max;
  return p;
}

SwitchPolicy SwitchPolicy::random_dwell(double d_min, double d_max, std::uint64_t seed) {
  SwitchPolicy p;
  p.kind = PolicyKind::RandomDwell;
  p.d_min = d_min;
  p.d_max = d_max;
  p.seed = seed;
  return p;
}

void SwitchPolicy::validate() const {
  if (!(delta_guard > 0.0)) throw std::invalid_argument("policy delta_guard must be positive");
  if (!(max_dwell > 0.0)) throw std::invalid_argument("policy max_dwell must be positive");
  if (max_dwell < delta_guard) throw std::invalid_argument("policy max_dwell must be at least delta_guard");
  if (kind == PolicyKind::RandomDwell && !(d_min > 0.0 && d_min <= d_max))
    throw std::invalid_argument("random_dwell needs 0 < d_min <= d_max");
}

std::string SwitchPolicy::describe() const {
  std::ostringstream os;
  switch (kind) {
    case PolicyKind::Constant:
      os << "constant(" << mode << ")";
      break;
    case PolicyKind::QuadrantRule:
      os << "quadrant(" << quadrant[0] << quadrant[1] << quadrant[2] << quadrant[3] << ", guard=" << delta_guard << ")";
      break;
    case PolicyKind::GrowthGreedy:
      os << "greedy(guard=" << delta_guard;
      if (std::isfinite(max_dwell)) os << ", max_dwell=" << max_dwell;
      if (weight.size()) os << ", weighted";
      os << ")";
      break;
    case PolicyKind::RandomDwell:
      os << "random_dwell(" << d_min << ", " << d_max << ", seed=" << seed << ")";
      break;
  }
  return os.str();
}

UnrolledPolicy unroll_policy(const SwitchPolicy& policy, const SwitchedSystem& sys, const Vec& x0, double t0, double T,
                             const InputSignal& u, const SimOptions& sim) {
  policy.validate();
  if (!(T > t0)) throw std::invalid_argument("unroll_policy: need T > t0");
  if (policy.kind == PolicyKind::QuadrantRule && sys.state_dim() < 2)
    throw std::invalid_argument("quadrant rule needs at least two states");

  if (policy.kind == PolicyKind::RandomDwell) {
    std::vector<Mode> modes = sys.modes();
    SwitchingSignal sigma =
        sample_signal_set(SignalSetSpec::dwell_time(policy.d_min, policy.d_max, modes), T, policy.seed);
    Trajectory traj = simulate(sys, x0, t0, u, sigma, T, sim);
    return {std::move(sigma), std::move(traj), 0.0, false};
  }
  if (policy.kind == PolicyKind::Constant) {
    if (!sys.has_mode(policy.mode)) throw std::invalid_argument("constant policy mode is not a system mode");
    SwitchingSignal sigma = SwitchingSignal::constant(policy.mode, T);
    Trajectory traj = simulate(sys, x0, t0, u, sigma, T, sim);
    return {std::move(sigma), std::move(traj), 0.0, false};
  }

  const double h = sim.h_step;
  // Switch at the first grid point past these; the tolerances absorb the
  // rounding of grid times.
  const double guard = policy.delta_guard * (1.0 - 1e-13);
  const double forced = std::isfinite(policy.max_dwell) ? policy.max_dwell - h + 1e-12 : kInf;

  auto rule = [&](double t, const Vec& x, std::optional<Mode> skip) {
    if (policy.kind == PolicyKind::QuadrantRule && !skip) return quadrant_choice(policy, x);
    if (policy.kind == PolicyKind::QuadrantRule) return other_mode(sys.modes(), *skip);
    return greedy_choice(sys, policy.weight, t, x, u(t), skip);
  };

  bool first = true;
  double held_since = t0;
  double prev_t = t0;
  bool prev_blocked = false;
  double blocked = 0.0;
  ModeHook hook = [&](double t, const Vec& x, Mode cur) -> Mode {
    if (prev_blocked) blocked += t - prev_t;
    prev_t = t;
    prev_blocked = false;
    if (first) {
      first = false;
      held_since = t;
      return rule(t, x, std::nullopt);
    }
    const double since = t - held_since;
    if (since >= forced) {
      held_since = t;
      return rule(t, x, cur);
    }
    const Mode want = rule(t, x, std::nullopt);
    if (want == cur) return cur;
    if (since >= guard) {
      held_since = t;
      return want;
    }
    prev_blocked = true;
    return cur;
  };
  const Mode initial = policy.kind == PolicyKind::QuadrantRule ? quadrant_choice(policy, x0)
                                                               : greedy_choice(sys, policy.weight, t0, x0, u(t0), {});
  FeedbackRun fr = simulate_feedback(sys, x0, t0, u, initial, hook, T, sim);
  UnrolledPolicy out{std::move(fr.sigma), std::move(fr.trajectory), blocked, false};
  out.degenerate = blocked > 0.5 * (out.trajectory.t_end() - t0);
  return out;
}

UnrolledPolicy unroll_policy(const SwitchPolicy& policy, const SwitchedSystem& sys, const Vec& x0, double t0, double T,
                             const SimOptions& sim) {
  return unroll_policy(policy, sys, x0, t0, T, InputSignal::zero(sys.input_dim()), sim);
}

std::vector<SwitchPolicy> default_policy_family(const SwitchedSystem& sys, std::uint64_t seed) {
  std::vector<SwitchPolicy> out;
  std::vector<Mode> modes = sys.modes();
  std::sort(modes.begin(), modes.end());
  for (Mode m : modes) out.push_back(SwitchPolicy::constant(m));
  out.push_back(SwitchPolicy::growth_greedy());
  if (sys.state_dim() == 2 && modes.size() <= 3) {
    const std::size_t k = modes.size();
    std::size_t total = k * k * k * k;
    for (std::size_t c = 0; c < total; ++c) {
      std::array<Mode, 4> q{};
      std::size_t r = c;
      for (auto& v : q) {
        v = modes[r % k];
        r /= k;
      }
      // Constant assignments repeat the constant policies.
      if (q[0] == q[1] && q[1] == q[2] && q[2] == q[3]) continue;
      out.push_back(SwitchPolicy::quadrant_rule(q));
    }
  }
  if (modes.size() > 1)
    for (std::uint64_t s = 0; s < 4; ++s) out.push_back(SwitchPolicy::random_dwell(0.05, 0.5, derive_seed(seed, s)));
  return out;
}

std::vector<Vec> unit_sphere_grid(Eigen::Index n, std::size_t count, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(count);
  if (n == 2) {
    for (std::size_t j = 0; j < count; ++j) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
      Vec v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  for (std::size_t j = 0; j < count; ++j) {
    Rng rng(derive_seed(seed, j));
    out.push_back(random_direction(rng, n));
  }
  return out;
}

std::optional<DestabilizingWitness> find_destabilizing(const SwitchedSystem& sys, const DestabilizeSpec& spec) {
  if (!(spec.growth_target > 1.0)) throw std::invalid_argument("growth target must exceed 1");
  if (!(spec.T_max > 0.0)) throw std::invalid_argument("T_max must be positive");
  const std::vector<SwitchPolicy> policies =
      spec.policies.empty() ? default_policy_family(sys, spec.seed) : spec.policies;
  const std::vector<Vec> x0s = spec.x0s.empty() ? unit_sphere_grid(sys.state_dim(), 16, spec.seed) : spec.x0s;
  const InputSignal u0 = InputSignal::zero(sys.input_dim());
  const double T_end = spec.t0 + spec.T_max;

  const std::size_t cells = policies.size() * x0s.size();
  std::vector<std::optional<DestabilizingWitness>> found(cells);
  parallel_for(cells, [&](std::size_t c) {
    const std::size_t pi = c / x0s.size();
    const std::size_t xi = c % x0s.size();
    const Vec& x0 = x0s[xi];
    const double r0 = x0.norm();
    if (r0 == 0.0) return;
    const UnrolledPolicy run = unroll_policy(policies[pi], sys, x0, spec.t0, T_end, u0, spec.sim);
    const Trajectory& tr = run.trajectory;
    for (std::size_t k = 1; k < tr.size(); ++k) {
      const double g = tr.norm_at(k) / r0;
      if (g < spec.growth_target) continue;
      DestabilizingWitness w;
      w.policy_index = pi;
      w.x0_index = xi;
      w.policy = policies[pi];
      w.x0 = x0;
      w.t0 = spec.t0;
      w.T = tr.times[k];
      w.growth = g;
      std::vector<double> sw;
      std::vector<Mode> md{run.sigma.modes().front()};
      for (std::size_t s = 0; s < run.sigma.switch_count(); ++s) {
        if (run.sigma.switch_times()[s] >= w.T) break;
        sw.push_back(run.sigma.switch_times()[s]);
        md.push_back(run.sigma.modes()[s + 1]);
      }
      w.sigma = SwitchingSignal(std::move(sw), std::move(md), w.T);
      const Trajectory replay = simulate(sys, x0, spec.t0, u0, w.sigma, w.T, spec.sim);
      w.replay_growth = replay.x_end().norm() / r0;
      w.replay_rel_error = std::abs(w.replay_growth - g) / g;
      found[c] = std::move(w);
      return;
    }
  });
  for (auto& f : found)
    if (f) return f;
  return std::nullopt;
}

ConcatProbeResult probe_concat_closure(const SwitchedSystem& sys, const StorageFn& V, const SignalSetSpec& base,
                                       const ConcatProbeSpec& spec) {
  if (!V) throw std::invalid_argument("probe_concat_closure needs a storage function");
  if (spec.k < 1) throw std::invalid_argument("closure depth must be at least 1");
  if (spec.budget == 0) throw std::invalid_argument("probe budget must be positive");
  if (!sys.has_mode(spec.tail_mode)) throw std::invalid_argument("tail mode is not a system mode");
  const SignalSetSpec set = SignalSetSpec::concat_closure(base, spec.k);
  const InputSignal u0 = InputSignal::zero(sys.input_dim());
  const double T = spec.horizon;

  const std::size_t n_prefix = spec.budget / 2;
  const std::vector<Vec> dirs = unit_sphere_grid(sys.state_dim(), std::max<std::size_t>(n_prefix, 1), spec.seed);
  // nullopt marks a candidate outside the closure.
  std::vector<std::optional<RunSpec>> cand(spec.budget);
  parallel_for(spec.budget, [&](std::size_t j) {
    RunSpec run;
    run.index = j;
    run.seed = derive_seed(spec.seed, j);
    run.t0 = 0.0;
    run.T = T;
    run.u = u0;
    if (j < n_prefix) {
      run.x0 = dirs[j];
      // sigma_xi0 restricted to its first k-1 pieces, then a constant.
      const UnrolledPolicy greedy = unroll_policy(SwitchPolicy::growth_greedy(), sys, run.x0, 0.0, T, u0, spec.sim);
      const SwitchingSignal& s = greedy.sigma;
      const std::size_t keep = static_cast<std::size_t>(spec.k - 1);
      if (keep == 0) {
        run.sigma = SwitchingSignal::constant(spec.tail_mode, T);
      } else {
        const double cut = keep - 1 < s.switch_count() ? s.switch_times()[keep - 1] : T;
        const std::vector<SwitchingSignal> parts{s, SwitchingSignal::constant(spec.tail_mode, T)};
        const std::vector<double> at{cut};
        run.sigma = cut < T ? concatenate(parts, at).with_horizon(T) : s.with_horizon(T);
      }
    } else {
      Rng rng(derive_seed(run.seed, 0));
      run.x0 = random_direction(rng, sys.state_dim());
      run.sigma = sample_signal_set(set, T, derive_seed(run.seed, 1));
    }
    if (!validate_membership(run.sigma, set)) return;
    cand[j] = std::move(run);
  });

  ConcatProbeResult out;
  Ensemble ens;
  ens.sim = spec.sim;
  std::vector<bool> from_prefix;
  for (std::size_t j = 0; j < cand.size(); ++j) {
    if (!cand[j]) {
      ++out.rejected;
      continue;
    }
    from_prefix.push_back(j < n_prefix);
    out.prefix_candidates += j < n_prefix ? 1 : 0;
    ens.runs.push_back(std::move(*cand[j]));
  }
  {
    std::ostringstream os;
    os << "concat probe k=" << spec.k << " budget=" << spec.budget << " seed=" << spec.seed << " horizon=" << T
       << " set=" << set.describe();
    ens.description = os.str();
  }
  if (ens.runs.empty()) {
    out.report.check = "concat_probe";
    out.report.ensemble = ens.description;
    out.report.notes.push_back("no candidate signal belongs to the closure");
    return out;
  }

  const CheckOptions opts;
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    const std::vector<double> E = energy_prefix(traj, run.u, spec.alpha);
    const double V0 = V(traj.times[0], traj.state(0), traj.modes[0]);
    for (std::size_t k = 1; k < traj.size(); ++k)
      tr.add(traj.times[k], V(traj.times[k], traj.state(k), traj.modes[k]), V0 + E[k], run.t0);
  });
  const std::string ineq = "V(t, x(t)) <= V(t0, x(t0)) + int alpha(|u|)";
  out.report = aggregate("concat_probe", ens, outcomes, ineq);
  out.report.values["k"] = spec.k;
  out.report.values["rejected"] = static_cast<double>(out.rejected);

  std::vector<RunOutcome> prefix_only;
  Ensemble prefix_ens;
  prefix_ens.description = ens.description;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    if (!from_prefix[j]) continue;
    if (outcomes[j].points > 0 && outcomes[j].worst.margin < 0.0) ++out.prefix_violations;
    prefix_only.push_back(outcomes[j]);
    prefix_ens.runs.push_back(ens.runs[j]);
  }
  if (!prefix_only.empty()) {
    CheckReport pr = aggregate("concat_probe", prefix_ens, prefix_only, ineq);
    if (pr.violated()) out.prefix_witness = pr.witness;
  }
  out.report.values["prefix_candidates"] = static_cast<double>(out.prefix_candidates);
  out.report.values["prefix_violations"] = static_cast<double>(out.prefix_violations);
  return out;
}

CheckReport search_certificate_violation(const SwitchedSystem& sys, const SignalSetSpec& set,
                                         const EstimateCertificate& cert, const SearchSpec& spec,
                                         const CheckOptions& opts) {
  if (!(spec.policy_share >= 0.0 && spec.policy_share <= 1.0)) throw std::invalid_argument("policy_share must lie in [0, 1]");
  const bool zero_only = std::holds_alternative<ZeroGuasCertificate>(cert);
  EnsembleSpec es;
  es.count = spec.budget;
  es.seed = spec.seed;
  es.r_min = spec.r_min;
  es.r_max = spec.r_max;
  es.horizon = spec.horizon;
  es.input = zero_only ? InputFamily::Zero : spec.input;
  es.input_bound = spec.input_bound;
  es.sim = spec.sim;
  Ensemble ens = make_ensemble(sys, set, es);

  // Replace a share of the random signals with greedy ones the set admits.
  SwitchPolicy greedy = SwitchPolicy::growth_greedy();
  if (const auto* dw = std::get_if<DwellTime>(&set.kind())) greedy = SwitchPolicy::dwell_greedy(dw->d_min, dw->d_max);
  const std::size_t stride =
      spec.policy_share > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / spec.policy_share))) : 0;
  std::vector<char> guided(ens.runs.size(), 0);
  if (stride > 0) {
    parallel_for(ens.runs.size(), [&](std::size_t j) {
      if (j % stride != 0) return;
      RunSpec& run = ens.runs[j];
      UnrolledPolicy up = unroll_policy(greedy, sys, run.x0, run.t0, run.T, run.u, ens.sim);
      if (up.trajectory.blew_up()) return;
      if (!validate_membership(up.sigma, set)) return;
      run.sigma = up.sigma;
      guided[j] = 1;
    });
  }
  std::size_t n_guided = 0;
  for (char g : guided) n_guided += g ? 1 : 0;
  ens.description += " guided=" + std::to_string(n_guided);

  CheckReport rep = std::visit(
      [&](const auto& c) -> CheckReport {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, IissCertificate>) return check_iiss(sys, ens, c, opts);
        if constexpr (std::is_same_v<C, UbebsCertificate>) return check_ubebs(sys, ens, c, opts);
        if constexpr (std::is_same_v<C, ZeroGuasCertificate>) return check_0guas(sys, ens, c.beta, opts);
        if constexpr (std::is_same_v<C, DissipationCertificate>) return check_dissipation(sys, ens, c, opts);
        if constexpr (std::is_same_v<C, GronwallCertificate>) return check_gronwall(sys, ens, c, opts);
      },
      cert);
  rep.values["guided_runs"] = static_cast<double>(n_guided);
  rep.notes.push_back("search over " + std::to_string(spec.budget) + " runs; absence of a witness is not a proof");
  return rep;
}

IssProbeResult probe_iss(const SwitchedSystem& sys, const SwitchPolicy& policy, const Vec& x0, const InputSignal& u,
                         double T, const SimOptions& sim) {
  if (!(T > 0.0)) throw std::invalid_argument("probe_iss: need T > 0");
  IssProbeResult out{unroll_policy(policy, sys, x0, 0.0, T, u, sim), {}, {}, u.sup_norm(), false};
  const Trajectory& tr = out.run.trajectory;
  for (int q = 1; q <= 4; ++q) {
    const double t = std::min(T * q / 4.0, tr.t_end());
    out.checkpoints.push_back(t);
    out.norms.push_back(dense_eval(tr, t).norm());
  }
  bool increasing = true;
  for (std::size_t q = 1; q < out.norms.size(); ++q) increasing = increasing && out.norms[q] > out.norms[q - 1];
  out.divergent = tr.blew_up() || (increasing && out.norms.back() >= 2.0 * out.norms.front());
  return out;
}

}  // namespace iiss
