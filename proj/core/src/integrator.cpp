#include "iiss/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace iiss {

namespace {

long step_count(double a, double b, double h) {
  return std::max(1L, static_cast<long>(std::ceil((b - a) / h - 1e-9)));
}

std::string describe_state(double t, const Vec& x, Mode i) {
  std::ostringstream os;
  os << std::setprecision(17) << "t=" << t << ", x=(";
  for (Eigen::Index k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x(k);
  os << "), mode=" << i;
  return os.str();
}

Vec checked_f(const SwitchedSystem& sys, double t, const Vec& x, const Vec& u, Mode i) {
  Vec d = sys.f(t, x, u, i);
  if (!d.allFinite()) throw SolverError("non-finite dynamics at " + describe_state(t, x, i));
  return d;
}

class Engine {
 public:
  Engine(const SwitchedSystem& sys, const InputSignal& u, const SimOptions& opts)
      : sys_(sys), u_(u), opts_(opts) {
    if (!(opts.h_step > 0.0) || !std::isfinite(opts.h_step)) throw std::invalid_argument("h_step must be positive");
    if (!(opts.blow_up_bound > 0.0)) throw std::invalid_argument("blow_up_bound must be positive");
    if (u.dimension() != sys.input_dim())
      throw std::invalid_argument("input dimension " + std::to_string(u.dimension()) + " does not match system input dimension " +
                                  std::to_string(sys.input_dim()));
  }

  // `sigma` drives the mode unless `hook` is set.
  Trajectory run(const Vec& x0, double t0, double T, const SwitchingSignal* sigma, Mode initial_mode,
                 const ModeHook* hook, std::vector<double>* switches, std::vector<Mode>* switch_modes) {
    if (!(T > t0)) throw std::invalid_argument("simulate: need T > t0");
    if (t0 < 0.0) throw std::invalid_argument("simulate: t0 must be >= 0");
    if (x0.size() != sys_.state_dim()) throw std::invalid_argument("initial state has the wrong dimension");
    if (!x0.allFinite()) throw std::invalid_argument("initial state must be finite");

    std::vector<double> bounds = u_.breakpoints_in(t0, T);
    for (double t : opts_.extra_breakpoints)
      if (t > t0 && t < T) bounds.push_back(t);
    if (sigma) {
      for (double t : sigma->switch_times())
        if (t > t0 && t < T) bounds.push_back(t);
    }
    bounds.push_back(T);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    const double h = opts_.h_step;
    Trajectory tr;
    tr.n = sys_.state_dim();
    tr.m = sys_.input_dim();
    tr.h_step = h;
    const std::size_t expected = static_cast<std::size_t>((T - t0) / h) + bounds.size() + 2;
    const auto un = static_cast<std::size_t>(tr.n);
    tr.times.reserve(expected);
    tr.modes.reserve(expected);
    tr.state_data.reserve(expected * un);
    tr.input_data.reserve(expected * static_cast<std::size_t>(tr.m));
    tr.d_start_data.reserve(expected * un);
    tr.d_end_data.reserve(expected * un);

    double t = t0;
    Vec x = x0;
    Mode mode = sigma ? (*sigma)(t0) : initial_mode;
    if (!sys_.has_mode(mode)) throw std::invalid_argument("mode " + std::to_string(mode) + " is not a system mode");

    std::size_t next_bound = 0;
    double seg_start = t0;
    double seg_end = bounds[0];
    long n = step_count(seg_start, seg_end, h);
    long k = 0;

    Vec k1;
    bool k1_valid = false;
    while (t < T) {
      if (hook) {
        const Mode m = (*hook)(t, x, mode);
        if (m != mode) {
          if (!sys_.has_mode(m)) throw std::invalid_argument("policy chose unknown mode " + std::to_string(m));
          if (switches && t > t0) {
            switches->push_back(t);
            switch_modes->push_back(m);
          } else if (switch_modes && t == t0) {
            switch_modes->front() = m;
          }
          mode = m;
          seg_start = t;
          k = 0;
          n = step_count(seg_start, seg_end, h);
          k1_valid = false;
        }
      }
      const bool at_boundary = k + 1 == n;
      const double t_next = at_boundary ? seg_end : seg_start + static_cast<double>(k + 1) * h;
      const double dt = t_next - t;
      const double tm = t + 0.5 * dt;

      const Vec ut = u_(t);
      const Vec um = u_(tm);
      const Vec ue = u_.left_limit(t_next);
      if (!k1_valid) k1 = checked_f(sys_, t, x, ut, mode);
      const Vec k2 = checked_f(sys_, tm, x + 0.5 * dt * k1, um, mode);
      const Vec k3 = checked_f(sys_, tm, x + 0.5 * dt * k2, um, mode);
      const Vec k4 = checked_f(sys_, t_next, x + dt * k3, ue, mode);
      Vec x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x_next.allFinite()) throw SolverError("non-finite state after step from " + describe_state(t, x, mode));
      Vec d_end = checked_f(sys_, t_next, x_next, ue, mode);

      tr.push(t, x, mode, ut);
      tr.d_start_data.insert(tr.d_start_data.end(), k1.data(), k1.data() + k1.size());
      tr.d_end_data.insert(tr.d_end_data.end(), d_end.data(), d_end.data() + d_end.size());

      t = t_next;
      x = std::move(x_next);
      ++k;
      // Same mode and a continuous input: the end slope is the next k1.
      k1 = std::move(d_end);
      k1_valid = !at_boundary;

      if (x.norm() > opts_.blow_up_bound) {
        tr.blow_up = t;
        break;
      }
      if (at_boundary && t < T) {
        ++next_bound;
        seg_start = t;
        seg_end = bounds[next_bound];
        n = step_count(seg_start, seg_end, h);
        k = 0;
        if (sigma) mode = (*sigma)(t);
      }
    }
    tr.push(t, x, mode, u_(t));
    return tr;
  }

 private:
  const SwitchedSystem& sys_;
  const InputSignal& u_;
  const SimOptions& opts_;
};

}  // namespace

double Trajectory::max_norm() const {
  double best = 0.0;
  for (std::size_t k = 0; k < size(); ++k) best = std::max(best, norm_at(k));
  return best;
}

void Trajectory::push(double t, const Vec& x, Mode mode, const Vec& u) {
  times.push_back(t);
  modes.push_back(mode);
  state_data.insert(state_data.end(), x.data(), x.data() + x.size());
  input_data.insert(input_data.end(), u.data(), u.data() + u.size());
}

Trajectory simulate(const SwitchedSystem& sys, const Vec& x0, double t0, const InputSignal& u,
                    const SwitchingSignal& sigma, double T, const SimOptions& opts) {
  Engine engine(sys, u, opts);
  return engine.run(x0, t0, T, &sigma, 0, nullptr, nullptr, nullptr);
}

FeedbackRun simulate_feedback(const SwitchedSystem& sys, const Vec& x0, double t0, const InputSignal& u,
                              Mode initial_mode, const ModeHook& hook, double T, const SimOptions& opts) {
  if (!hook) throw std::invalid_argument("simulate_feedback needs a mode hook");
  Engine engine(sys, u, opts);
  std::vector<double> switches;
  std::vector<Mode> modes{initial_mode};
  Trajectory tr = engine.run(x0, t0, T, nullptr, initial_mode, &hook, &switches, &modes);
  // Switches at t0 only change the initial mode; a signal starting before
  // t0 keeps that mode on [0, t0].
  return {std::move(tr), SwitchingSignal(std::move(switches), std::move(modes), T)};
}

Vec dense_eval(const Trajectory& traj, double t) {
  if (traj.times.empty()) throw std::domain_error("dense_eval on an empty trajectory");
  if (t < traj.t0() || t > traj.t_end() || std::isnan(t)) {
    std::ostringstream os;
    os << "dense_eval: t=" << t << " outside [" << traj.t0() << ", " << traj.t_end() << "]";
    if (traj.blow_up) os << " (trajectory blew up at " << *traj.blow_up << ")";
    throw std::domain_error(os.str());
  }
  const auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  std::size_t k = static_cast<std::size_t>(it - traj.times.begin());
  if (k == 0) return traj.state(0);
  --k;
  if (traj.times[k] == t || k + 1 >= traj.times.size()) return traj.state(k);
  const double a = traj.times[k];
  const double b = traj.times[k + 1];
  const double dt = b - a;
  const double s = (t - a) / dt;
  const Vec x0 = traj.state(k);
  const Vec x1 = traj.state(k + 1);
  if (!traj.has_slopes()) return (1.0 - s) * x0 + s * x1;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * x0 + h10 * dt * traj.d_start(k) + h01 * x1 + h11 * dt * traj.d_end(k);
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.n;
  const Eigen::Index m = traj.m;
  os << "t";
  for (Eigen::Index k = 1; k <= n; ++k) os << ",x" << k;
  os << ",mode";
  for (Eigen::Index k = 1; k <= m; ++k) os << ",u" << k;
  os << "\n";
  os << std::setprecision(17);
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    os << traj.times[r];
    for (Eigen::Index k = 0; k < n; ++k) os << "," << traj.state(r)(k);
    os << "," << traj.modes[r];
    for (Eigen::Index k = 0; k < m; ++k) os << "," << traj.input(r)(k);
    os << "\n";
  }
}

void write_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(os, traj);
}

Trajectory read_csv(std::istream& is, Eigen::Index state_dim) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory CSV is empty");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  const Eigen::Index m = cols - state_dim - 2;
  if (m < 0) throw std::runtime_error("trajectory CSV has too few columns for state dimension " + std::to_string(state_dim));
  Trajectory tr;
  tr.n = state_dim;
  tr.m = m;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(v.size()) != cols) throw std::runtime_error("ragged trajectory CSV row: " + line);
    tr.push(v[0], Eigen::Map<const Vec>(v.data() + 1, state_dim), static_cast<Mode>(v[static_cast<std::size_t>(state_dim) + 1]),
            Eigen::Map<const Vec>(v.data() + state_dim + 2, m));
  }
  if (tr.times.empty()) throw std::runtime_error("trajectory CSV has no rows");
  if (tr.times.size() > 1) tr.h_step = tr.times[1] - tr.times[0];
  return tr;
}

Trajectory read_csv(const std::string& path, Eigen::Index state_dim) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_csv(is, state_dim);
}

}  // namespace iiss
