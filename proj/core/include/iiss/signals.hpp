#pragma once

// Switching signals, admissible signal sets, inputs and chi-weighted input
// energy.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "iiss/comparison.hpp"

namespace iiss {

using Mode = int;

/// Right-continuous piecewise-constant mode selector on [0, inf).
///
/// modes[k] holds on [switch_times[k-1], switch_times[k]) with
/// switch_times[-1] := 0. Stored in canonical form: consecutive equal modes
/// are merged, so two signals that agree as functions compare equal.
/// `horizon` marks the end of the last admissible dwell; the last mode keeps
/// holding past it.
class SwitchingSignal {
 public:
  SwitchingSignal(std::vector<double> switch_times, std::vector<Mode> modes, double horizon = 0.0);

  static SwitchingSignal constant(Mode mode, double horizon = 0.0);

  Mode operator()(double t) const;

  const std::vector<double>& switch_times() const { return switch_times_; }
  const std::vector<Mode>& modes() const { return modes_; }
  double horizon() const { return horizon_; }
  std::size_t switch_count() const { return switch_times_.size(); }

  SwitchingSignal with_horizon(double horizon) const;

  /// Same function of time; horizons are not compared.
  bool same_function(const SwitchingSignal& other) const;

  bool operator==(const SwitchingSignal& other) const = default;

 private:
  std::vector<double> switch_times_;
  std::vector<Mode> modes_;
  double horizon_;
};

Mode eval_sigma(const SwitchingSignal& sigma, double t);

/// signals[0] on [0, times[0]), signals[1] on [times[0], times[1]), ...
SwitchingSignal concatenate(std::span<const SwitchingSignal> signals, std::span<const double> times);

class SignalSetSpec;

struct FiniteFamily {
  std::vector<SwitchingSignal> members;
};

struct DwellTime {
  double d_min;
  double d_max;
  std::vector<Mode> modes;
};

struct ConcatClosure {
  std::shared_ptr<const SignalSetSpec> base;
  int depth;
};

struct Arbitrary {
  std::vector<Mode> modes;
};

/// A set S of admissible switching signals.
class SignalSetSpec {
 public:
  using Kind = std::variant<FiniteFamily, DwellTime, ConcatClosure, Arbitrary>;

  static SignalSetSpec finite_family(std::vector<SwitchingSignal> members);
  static SignalSetSpec dwell_time(double d_min, double d_max, std::vector<Mode> modes);
  static SignalSetSpec concat_closure(SignalSetSpec base, int depth);
  static SignalSetSpec arbitrary(std::vector<Mode> modes);

  const Kind& kind() const { return kind_; }

  /// Modes any member may use.
  std::vector<Mode> mode_set() const;

  std::string describe() const;

 private:
  explicit SignalSetSpec(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

struct Membership {
  bool member = false;
  std::string reason;
  explicit operator bool() const { return member; }
};

Membership validate_membership(const SwitchingSignal& sigma, const SignalSetSpec& set);

/// Deterministic draw from the set; the result passes validate_membership
/// and its horizon is at least `horizon`.
SwitchingSignal sample_signal_set(const SignalSetSpec& set, double horizon, std::uint64_t seed);

/// Inputs restricted to piecewise-constant signals and a few analytic
/// presets.
class InputSignal {
 public:
  enum class Kind { Zero, PiecewiseConstant, ExpDecay, Sinusoid, Pulse };

  static InputSignal zero(Eigen::Index dimension);
  /// values[k] holds on [times[k], times[k+1]); the last value holds forever.
  /// Before times[0] the input is zero.
  static InputSignal piecewise_constant(std::vector<double> times, std::vector<Eigen::VectorXd> values);
  /// u(t) = amplitude * exp(-rate t)
  static InputSignal exp_decay(Eigen::VectorXd amplitude, double rate);
  /// u(t) = amplitude * sin(omega t + phase)
  static InputSignal sinusoid(Eigen::VectorXd amplitude, double omega, double phase = 0.0);
  /// u(t) = amplitude on [t_on, t_off), zero elsewhere.
  static InputSignal pulse(Eigen::VectorXd amplitude, double t_on, double t_off);

  Eigen::VectorXd operator()(double t) const;
  Eigen::VectorXd left_limit(double t) const;

  /// |u(t)|
  double magnitude(double t) const;

  Kind kind() const { return kind_; }
  Eigen::Index dimension() const { return amplitude_.size(); }
  bool is_zero() const { return kind_ == Kind::Zero; }

  /// Jump times strictly inside (a, b).
  std::vector<double> breakpoints_in(double a, double b) const;

  /// Upper bound on sup |u| over [0, inf).
  double sup_norm() const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::VectorXd>& values() const { return values_; }
  const Eigen::VectorXd& amplitude() const { return amplitude_; }
  double rate() const { return rate_; }
  double phase() const { return phase_; }
  double t_on() const { return t_on_; }
  double t_off() const { return t_off_; }

  std::string describe() const;

 private:
  InputSignal() = default;

  Kind kind_ = Kind::Zero;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> values_;
  Eigen::VectorXd amplitude_;
  double rate_ = 0.0;
  double phase_ = 0.0;
  double t_on_ = 0.0;
  double t_off_ = 0.0;
};

inline constexpr double kDefaultQuadTol = 1e-10;
inline constexpr double kDefaultEnergyTailTol = 1e-6;

/// Integral of chi(|u(tau)|) over [t0, t1]. Exact for piecewise-constant
/// inputs, adaptive Simpson with absolute tolerance `tol_quad` otherwise.
double energy_norm(const InputSignal& u, const MonotoneFn& chi, double t0, double t1,
                   double tol_quad = kDefaultQuadTol);

struct EnergyTail {
  double truncated = 0.0;  ///< integral over [0, horizon]
  double tail_bound = 0.0; ///< bound on the integral over [horizon, inf); may be inf
};

EnergyTail energy_norm_infinite(const InputSignal& u, const MonotoneFn& chi, double horizon,
                                double tol_quad = kDefaultQuadTol);

/// True when the tail bound past `horizon` is below `tol_tail`.
bool has_finite_energy(const InputSignal& u, const MonotoneFn& chi, double horizon,
                       double tol_tail = kDefaultEnergyTailTol);

}  // namespace iiss
