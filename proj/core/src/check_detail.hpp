#pragma once

// Shared plumbing for the ensemble checkers: per-run margin tracking and the
// order-independent merge into a CheckReport.

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "iiss/certify.hpp"
#include "iiss/parallel.hpp"

namespace iiss::detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Worst {
  double margin = kInf;
  double t = 0.0;
  double t_ref = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Per-run accumulator of lhs <= rhs + tol checks.
class Tracker {
 public:
  explicit Tracker(const CheckOptions& opts) : opts_(opts) {}

  void add(double t, double lhs, double rhs, double t_ref = 0.0) {
    const double margin = rhs + check_tolerance(rhs, opts_) - lhs;
    ++points_;
    max_lhs_ = std::max(max_lhs_, lhs);
    if (margin < worst_.margin || points_ == 1) worst_ = {margin, t, t_ref, lhs, rhs};
  }

  std::size_t points() const { return points_; }
  const Worst& worst() const { return worst_; }
  double max_lhs() const { return max_lhs_; }

 private:
  const CheckOptions& opts_;
  std::size_t points_ = 0;
  Worst worst_;
  double max_lhs_ = 0.0;
};

struct RunOutcome {
  std::size_t points = 0;
  Worst worst;
  double max_lhs = 0.0;
  bool blew_up = false;
};

template <class Body>
std::vector<RunOutcome> for_each_run(const SwitchedSystem& sys, const Ensemble& ens, const CheckOptions& opts,
                                     Body&& body) {
  if (ens.runs.empty()) throw std::invalid_argument("ensemble is empty");
  std::vector<RunOutcome> out(ens.runs.size());
  parallel_for(ens.runs.size(), [&](std::size_t j) {
    const RunSpec& run = ens.runs[j];
    const Trajectory traj = simulate_run(sys, run, ens.sim);
    Tracker tracker(opts);
    body(run, traj, tracker);
    out[j] = {tracker.points(), tracker.worst(), tracker.max_lhs(), traj.blew_up()};
  });
  return out;
}

inline CheckReport aggregate(std::string name, const Ensemble& ens, const std::vector<RunOutcome>& outcomes,
                      const std::string& inequality) {
  CheckReport rep;
  rep.check = std::move(name);
  rep.ensemble = ens.description;
  rep.runs = outcomes.size();
  std::size_t worst_run = outcomes.size();
  std::size_t blowups = 0;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    rep.points += outcomes[j].points;
    blowups += outcomes[j].blew_up ? 1 : 0;
    if (outcomes[j].points > 0 && (worst_run == outcomes.size() || outcomes[j].worst.margin < rep.worst_margin)) {
      rep.worst_margin = outcomes[j].worst.margin;
      worst_run = j;
    }
  }
  if (blowups > 0) rep.notes.push_back(std::to_string(blowups) + " run(s) hit the blow-up bound");
  if (rep.points == 0) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("no grid point was subject to the inequality");
    return rep;
  }
  rep.verdict = rep.worst_margin < 0.0 ? Verdict::Violated : Verdict::HoldsOnEnsemble;
  const RunSpec& run = ens.runs[worst_run];
  const Worst& w = outcomes[worst_run].worst;
  Witness wit;
  wit.run = run.index;
  wit.seed = run.seed;
  wit.x0 = run.x0;
  wit.t0 = run.t0;
  wit.T = run.T;
  wit.u = run.u;
  wit.sigma = run.sigma;
  wit.t = w.t;
  wit.t_ref = w.t_ref;
  wit.lhs = w.lhs;
  wit.rhs = w.rhs;
  wit.inequality = inequality;
  rep.witness = std::move(wit);
  rep.notes.push_back("verdicts cover the computed solutions on the tested inputs and signals only");
  return rep;
}

}  // namespace iiss::detail
