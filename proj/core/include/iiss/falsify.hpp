#pragma once

// Search for switching signals and inputs that break a candidate
// certificate. State-feedback switching rules are unrolled into open-loop
// signals so every witness replays with plain simulate().

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "iiss/certify.hpp"
#include "iiss/integrator.hpp"
#include "iiss/signals.hpp"
#include "iiss/systems.hpp"

namespace iiss {

inline constexpr double kDefaultGuard = 1e-3;

enum class PolicyKind { Constant, QuadrantRule, GrowthGreedy, RandomDwell };

struct SwitchPolicy {
  PolicyKind kind = PolicyKind::Constant;
  Mode mode = 1;  ///< Constant
  /// QuadrantRule: mode for sign pattern (x1 >= 0) + 2 (x2 >= 0).
  std::array<Mode, 4> quadrant{1, 1, 1, 1};
  /// GrowthGreedy: argmax_i x' W f(t, x, u(t), i); identity when empty.
  Mat weight;
  /// RandomDwell: draws from dwell_time(d_min, d_max, system modes).
  double d_min = 0.1;
  double d_max = 1.0;
  std::uint64_t seed = 1;
  /// Minimum time between switches of the unrolled signal (> 0).
  double delta_guard = kDefaultGuard;
  /// A mode held this long is left for the next mode; inf disables it.
  double max_dwell = std::numeric_limits<double>::infinity();

  static SwitchPolicy constant(Mode mode);
  static SwitchPolicy quadrant_rule(std::array<Mode, 4> modes, double delta_guard = kDefaultGuard);
  static SwitchPolicy growth_greedy(double delta_guard = kDefaultGuard, Mat weight = {});
  /// Greedy rule whose unrolled signal lies in dwell_time(d_min, d_max).
  static SwitchPolicy dwell_greedy(double d_min, double d_max, Mat weight = {});
  static SwitchPolicy random_dwell(double d_min, double d_max, std::uint64_t seed);

  void validate() const;
  std::string describe() const;
};

struct UnrolledPolicy {
  SwitchingSignal sigma;
  Trajectory trajectory;
  /// Time the guard held a mode the rule did not want.
  double guard_blocked_time = 0.0;
  /// The guard overrode the rule for more than half the horizon.
  bool degenerate = false;
};

/// Co-simulates the policy; ties go to the lower mode.
UnrolledPolicy unroll_policy(const SwitchPolicy& policy, const SwitchedSystem& sys, const Vec& x0, double t0, double T,
                             const InputSignal& u, const SimOptions& sim = {});
UnrolledPolicy unroll_policy(const SwitchPolicy& policy, const SwitchedSystem& sys, const Vec& x0, double t0, double T,
                             const SimOptions& sim = {});

/// Constants per mode, the greedy rule, every non-constant quadrant
/// assignment for planar systems, and a few random-dwell seeds when there
/// is more than one mode.
std::vector<SwitchPolicy> default_policy_family(const SwitchedSystem& sys, std::uint64_t seed = 1);

/// `count` evenly spaced points on the unit circle (planar) or seeded unit
/// directions otherwise.
std::vector<Vec> unit_sphere_grid(Eigen::Index n, std::size_t count, std::uint64_t seed = 1);

struct DestabilizeSpec {
  std::vector<SwitchPolicy> policies;  ///< empty means default_policy_family
  std::vector<Vec> x0s;                ///< empty means 16 unit directions
  double growth_target = 10.0;
  double T_max = 5.0;
  double t0 = 0.0;
  std::uint64_t seed = 1;
  SimOptions sim;
};

struct DestabilizingWitness {
  std::size_t policy_index = 0;
  std::size_t x0_index = 0;
  SwitchPolicy policy;
  Vec x0;
  double t0 = 0.0;
  double T = 0.0;  ///< first grid time with |x(T)| >= G |x0|
  double growth = 0.0;
  SwitchingSignal sigma = SwitchingSignal::constant(1);
  double replay_growth = 0.0;
  double replay_rel_error = 0.0;
};

/// Lexicographically smallest (policy, x0) cell reaching the growth target.
std::optional<DestabilizingWitness> find_destabilizing(const SwitchedSystem& sys, const DestabilizeSpec& spec);

struct ConcatProbeSpec {
  int k = 2;
  std::size_t budget = 200;
  std::uint64_t seed = 1;
  double horizon = 5.0;
  Mode tail_mode = 1;  ///< the constant appended after a destabilizing prefix
  MonotoneFn alpha = MonotoneFn::identity();
  SimOptions sim;
};

struct ConcatProbeResult {
  CheckReport report;
  std::size_t prefix_candidates = 0;
  std::size_t prefix_violations = 0;
  std::size_t rejected = 0;  ///< candidates outside the closure
  /// Worst violation among destabilizing-prefix candidates.
  std::optional<Witness> prefix_witness;
};

/// Checks V(t, x(t)) <= V(t0, x(t0)) + int alpha(|u|) along signals from the
/// k-fold concatenation closure of `base`, half of them built as a greedy
/// destabilizing prefix followed by a constant. Zero input.
ConcatProbeResult probe_concat_closure(const SwitchedSystem& sys, const StorageFn& V, const SignalSetSpec& base,
                                       const ConcatProbeSpec& spec = {});

struct SearchSpec {
  std::size_t budget = 200;
  std::uint64_t seed = 1;
  double horizon = 20.0;
  double r_min = 1e-2;
  double r_max = 10.0;
  InputFamily input = InputFamily::Mixed;
  double input_bound = 5.0;
  /// Share of the budget given to greedy-policy signals that lie in the set.
  double policy_share = 0.25;
  SimOptions sim;
};

/// Random and policy-guided runs fed to the matching checker; the report
/// carries the worst point found.
CheckReport search_certificate_violation(const SwitchedSystem& sys, const SignalSetSpec& set,
                                         const EstimateCertificate& cert, const SearchSpec& spec = {},
                                         const CheckOptions& opts = {});

struct IssProbeResult {
  UnrolledPolicy run;
  std::vector<double> checkpoints;
  std::vector<double> norms;
  double input_sup = 0.0;
  /// Norms strictly increase across checkpoints and at least double.
  bool divergent = false;
};

/// Bounded input with infinite energy; growth of |x| shows the system is
/// not ISS. Says nothing about iISS.
IssProbeResult probe_iss(const SwitchedSystem& sys, const SwitchPolicy& policy, const Vec& x0, const InputSignal& u,
                         double T, const SimOptions& sim = {});

}  // namespace iiss
