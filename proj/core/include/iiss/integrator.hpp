#pragma once

// Fixed-step RK4 that never steps across a switch or an input breakpoint.

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iiss/signals.hpp"
#include "iiss/systems.hpp"

namespace iiss {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimOptions {
  double h_step = 1e-3;
  double blow_up_bound = 1e9;
  /// Additional times the grid must contain.
  std::vector<double> extra_breakpoints;
};

/// x(.) on a grid, stored flat. The step [times[k], times[k+1]] ran in
/// modes[k] with slopes d_start(k) and d_end(k) at its ends; the last entry
/// of modes and of the input samples describes the final grid point.
struct Trajectory {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  std::vector<double> times;
  std::vector<Mode> modes;
  std::vector<double> state_data;
  std::vector<double> input_data;
  std::vector<double> d_start_data;
  std::vector<double> d_end_data;
  std::optional<double> blow_up;
  double h_step = 0.0;
  int order = 4;

  using ConstMap = Eigen::Map<const Vec>;

  ConstMap state(std::size_t k) const { return ConstMap(state_data.data() + k * static_cast<std::size_t>(n), n); }
  ConstMap input(std::size_t k) const { return ConstMap(input_data.data() + k * static_cast<std::size_t>(m), m); }
  ConstMap d_start(std::size_t k) const { return ConstMap(d_start_data.data() + k * static_cast<std::size_t>(n), n); }
  ConstMap d_end(std::size_t k) const { return ConstMap(d_end_data.data() + k * static_cast<std::size_t>(n), n); }
  bool has_slopes() const {
    return n > 0 && d_start_data.size() + static_cast<std::size_t>(n) == state_data.size();
  }

  double t0() const { return times.front(); }
  double t_end() const { return times.back(); }
  std::size_t size() const { return times.size(); }
  Vec x0() const { return state(0); }
  Vec x_end() const { return state(size() - 1); }
  double norm_at(std::size_t k) const { return state(k).norm(); }
  bool blew_up() const { return blow_up.has_value(); }
  double max_norm() const;

  void push(double t, const Vec& x, Mode mode, const Vec& u);
};

/// Decides the mode at a grid point from (t, x, current mode); used for
/// state-feedback switching. Called once per grid point before the step.
using ModeHook = std::function<Mode(double t, const Vec& x, Mode current)>;

/// Integrates on [t0, T]; T is an absolute time.
Trajectory simulate(const SwitchedSystem& sys, const Vec& x0, double t0, const InputSignal& u,
                    const SwitchingSignal& sigma, double T, const SimOptions& opts = {});

struct FeedbackRun {
  Trajectory trajectory;
  SwitchingSignal sigma;  ///< realized switching signal; replays bitwise with simulate
};

/// Co-simulation under a feedback rule. `initial_mode` is used when the hook
/// is first called at t0.
FeedbackRun simulate_feedback(const SwitchedSystem& sys, const Vec& x0, double t0, const InputSignal& u,
                              Mode initial_mode, const ModeHook& hook, double T, const SimOptions& opts = {});

/// Cubic Hermite interpolation inside a step; stored state at grid points.
Vec dense_eval(const Trajectory& traj, double t);

void write_csv(std::ostream& os, const Trajectory& traj);
void write_csv(const std::string& path, const Trajectory& traj);
/// Reads `t,x1..xn,mode,u1..um`. Slopes are not stored in the file, so the
/// result interpolates linearly.
Trajectory read_csv(std::istream& is, Eigen::Index state_dim);
Trajectory read_csv(const std::string& path, Eigen::Index state_dim);

}  // namespace iiss
