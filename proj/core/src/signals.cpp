#include "iiss/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "iiss/random.hpp"

namespace iiss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTimeEps = 1e-12;

bool contains(const std::vector<Mode>& set, Mode m) {
  return std::find(set.begin(), set.end(), m) != set.end();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// SwitchingSignal

SwitchingSignal::SwitchingSignal(std::vector<double> switch_times, std::vector<Mode> modes, double horizon) {
  if (modes.empty()) throw std::invalid_argument("switching signal needs at least one mode");
  if (modes.size() != switch_times.size() + 1)
    throw std::invalid_argument("switching signal: modes must have one more entry than switch_times");
  for (std::size_t k = 0; k < switch_times.size(); ++k) {
    if (!std::isfinite(switch_times[k]) || switch_times[k] <= 0.0)
      throw std::invalid_argument("switch times must be finite and positive");
    if (k > 0 && switch_times[k] <= switch_times[k - 1])
      throw std::invalid_argument("switch times must be strictly increasing");
  }
  if (!std::isfinite(horizon) || horizon < 0.0) throw std::invalid_argument("horizon must be finite and >= 0");

  modes_.push_back(modes[0]);
  for (std::size_t k = 0; k < switch_times.size(); ++k) {
    if (modes[k + 1] == modes_.back()) continue;
    switch_times_.push_back(switch_times[k]);
    modes_.push_back(modes[k + 1]);
  }
  horizon_ = switch_times_.empty() ? horizon : std::max(horizon, switch_times_.back());
}

SwitchingSignal SwitchingSignal::constant(Mode mode, double horizon) { return SwitchingSignal({}, {mode}, horizon); }

Mode SwitchingSignal::operator()(double t) const {
  const auto it = std::upper_bound(switch_times_.begin(), switch_times_.end(), t);
  return modes_[static_cast<std::size_t>(it - switch_times_.begin())];
}

SwitchingSignal SwitchingSignal::with_horizon(double horizon) const {
  return SwitchingSignal(switch_times_, modes_, horizon);
}

bool SwitchingSignal::same_function(const SwitchingSignal& other) const {
  return switch_times_ == other.switch_times_ && modes_ == other.modes_;
}

Mode eval_sigma(const SwitchingSignal& sigma, double t) { return sigma(t); }

SwitchingSignal concatenate(std::span<const SwitchingSignal> signals, std::span<const double> times) {
  if (signals.empty()) throw std::invalid_argument("concatenate: no signals");
  if (times.size() + 1 != signals.size())
    throw std::invalid_argument("concatenate: need exactly one breakpoint between consecutive signals");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] > 0.0) || !std::isfinite(times[k]))
      throw std::invalid_argument("concatenate: breakpoints must be finite and positive");
    if (k > 0 && times[k] <= times[k - 1])
      throw std::invalid_argument("concatenate: breakpoints must be strictly increasing");
  }

  std::vector<double> st;
  std::vector<Mode> modes;
  for (std::size_t j = 0; j < signals.size(); ++j) {
    const double a = j == 0 ? 0.0 : times[j - 1];
    const double b = j < times.size() ? times[j] : kInf;
    const SwitchingSignal& s = signals[j];
    if (j == 0) {
      modes.push_back(s(0.0));
    } else {
      st.push_back(a);
      modes.push_back(s(a));
    }
    for (std::size_t k = 0; k < s.switch_times().size(); ++k) {
      const double tk = s.switch_times()[k];
      if (tk > a && tk < b) {
        st.push_back(tk);
        modes.push_back(s.modes()[k + 1]);
      }
    }
  }
  double horizon = signals.back().horizon();
  if (!times.empty()) horizon = std::max(horizon, times.back());
  return SwitchingSignal(std::move(st), std::move(modes), horizon);
}

// ---------------------------------------------------------------------------
// SignalSetSpec

SignalSetSpec SignalSetSpec::finite_family(std::vector<SwitchingSignal> members) {
  if (members.empty()) throw std::invalid_argument("finite family must be nonempty");
  return SignalSetSpec(FiniteFamily{std::move(members)});
}

SignalSetSpec SignalSetSpec::dwell_time(double d_min, double d_max, std::vector<Mode> modes) {
  if (!(d_min > 0.0) || !(d_max >= d_min) || !std::isfinite(d_max))
    throw std::invalid_argument("dwell time bounds must satisfy 0 < d_min <= d_max < inf");
  if (modes.empty()) throw std::invalid_argument("dwell-time set needs at least one mode");
  return SignalSetSpec(DwellTime{d_min, d_max, std::move(modes)});
}

SignalSetSpec SignalSetSpec::concat_closure(SignalSetSpec base, int depth) {
  if (depth < 1) throw std::invalid_argument("concatenation depth must be >= 1");
  return SignalSetSpec(ConcatClosure{std::make_shared<const SignalSetSpec>(std::move(base)), depth});
}

SignalSetSpec SignalSetSpec::arbitrary(std::vector<Mode> modes) {
  if (modes.empty()) throw std::invalid_argument("arbitrary switching needs at least one mode");
  return SignalSetSpec(Arbitrary{std::move(modes)});
}

std::vector<Mode> SignalSetSpec::mode_set() const {
  std::vector<Mode> out;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, FiniteFamily>) {
          for (const auto& m : k.members) out.insert(out.end(), m.modes().begin(), m.modes().end());
        } else if constexpr (std::is_same_v<T, ConcatClosure>) {
          out = k.base->mode_set();
        } else {
          out = k.modes;
        }
      },
      kind_);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string SignalSetSpec::describe() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, FiniteFamily>) {
          return "finite_family(" + std::to_string(k.members.size()) + ")";
        } else if constexpr (std::is_same_v<T, DwellTime>) {
          return "dwell_time(" + fmt(k.d_min) + ", " + fmt(k.d_max) + ")";
        } else if constexpr (std::is_same_v<T, ConcatClosure>) {
          return "concat_closure(" + k.base->describe() + ", " + std::to_string(k.depth) + ")";
        } else {
          return "arbitrary";
        }
      },
      kind_);
}

// ---------------------------------------------------------------------------
// Membership

namespace {

// Flattened view of a set: a non-closure base and the number of pieces
// allowed (1 for the base set itself).
struct FlatSet {
  const SignalSetSpec* base;
  long depth;
};

FlatSet flatten(const SignalSetSpec& set) {
  long depth = 1;
  const SignalSetSpec* cur = &set;
  while (const auto* cc = std::get_if<ConcatClosure>(&cur->kind())) {
    depth *= cc->depth;
    depth = std::min<long>(depth, 1L << 30);
    cur = cc->base.get();
  }
  return {cur, depth};
}

// Does sigma restricted to [a, b) agree with some member of the base set?
// b == inf means the piece runs to the end (the signal's horizon counts as
// the end of the last dwell).
bool restriction_ok(const SwitchingSignal& sigma, const SignalSetSpec& base, double a, double b, std::string* why) {
  const auto& st = sigma.switch_times();
  const auto& md = sigma.modes();
  const std::size_t lo = static_cast<std::size_t>(std::upper_bound(st.begin(), st.end(), a) - st.begin());
  const std::size_t hi = static_cast<std::size_t>(std::lower_bound(st.begin(), st.end(), b) - st.begin());

  if (const auto* ff = std::get_if<FiniteFamily>(&base.kind())) {
    for (const auto& m : ff->members) {
      if (m(a) != sigma(a)) continue;
      const auto& mst = m.switch_times();
      const std::size_t mlo = static_cast<std::size_t>(std::upper_bound(mst.begin(), mst.end(), a) - mst.begin());
      const std::size_t mhi = static_cast<std::size_t>(std::lower_bound(mst.begin(), mst.end(), b) - mst.begin());
      if (mhi - mlo != hi - lo) continue;
      bool same = true;
      for (std::size_t k = 0; k < hi - lo && same; ++k) {
        same = mst[mlo + k] == st[lo + k] && m.modes()[mlo + k + 1] == md[lo + k + 1];
      }
      if (same) return true;
    }
    if (why) *why = "no family member agrees with the signal on [" + fmt(a) + ", " + fmt(b) + ")";
    return false;
  }

  if (const auto* ar = std::get_if<Arbitrary>(&base.kind())) {
    for (std::size_t k = lo; k <= hi; ++k) {
      if (!contains(ar->modes, md[k])) {
        if (why) *why = "mode " + std::to_string(md[k]) + " is not admissible";
        return false;
      }
    }
    return true;
  }

  const auto& dw = std::get<DwellTime>(base.kind());
  for (std::size_t k = lo; k <= hi; ++k) {
    if (!contains(dw.modes, md[k])) {
      if (why) *why = "mode " + std::to_string(md[k]) + " is not admissible";
      return false;
    }
  }
  const double end = std::isinf(b) ? sigma.horizon() : b;
  // Runs: [a, st[lo]), [st[lo], st[lo+1]), ..., [st[hi-1], end).
  for (std::size_t r = lo; r <= hi; ++r) {
    const double s0 = r == lo ? a : st[r - 1];
    const double s1 = r == hi ? end : st[r];
    const bool start_full = r != lo || a == 0.0;
    const bool end_full = r != hi || std::isinf(b);
    const double len = s1 - s0;
    if (len > dw.d_max * (1.0 + 1e-12) + kTimeEps) {
      if (why) *why = "dwell of " + fmt(len) + " at t=" + fmt(s0) + " exceeds d_max=" + fmt(dw.d_max);
      return false;
    }
    if (start_full && end_full && len < dw.d_min * (1.0 - 1e-12) - kTimeEps) {
      if (why) *why = "dwell of " + fmt(len) + " at t=" + fmt(s0) + " is below d_min=" + fmt(dw.d_min);
      return false;
    }
  }
  return true;
}

// Points at which a concatenation may cut sigma.
std::vector<double> candidate_cuts(const SwitchingSignal& sigma, const SignalSetSpec& base) {
  std::vector<double> c{0.0};
  c.insert(c.end(), sigma.switch_times().begin(), sigma.switch_times().end());
  if (const auto* ff = std::get_if<FiniteFamily>(&base.kind())) {
    for (const auto& m : ff->members)
      for (double t : m.switch_times())
        if (t <= sigma.horizon()) c.push_back(t);
  } else if (const auto* dw = std::get_if<DwellTime>(&base.kind())) {
    const auto& st = sigma.switch_times();
    for (std::size_t r = 0; r <= st.size(); ++r) {
      const double s0 = r == 0 ? 0.0 : st[r - 1];
      const double s1 = r == st.size() ? sigma.horizon() : st[r];
      const double len = s1 - s0;
      if (len <= dw->d_max) continue;
      const long parts = static_cast<long>(std::ceil(len / dw->d_max - 1e-12));
      for (long p = 1; p < parts; ++p) c.push_back(s0 + len * static_cast<double>(p) / static_cast<double>(parts));
    }
  }
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

}  // namespace

Membership validate_membership(const SwitchingSignal& sigma, const SignalSetSpec& set) {
  const FlatSet flat = flatten(set);
  const SignalSetSpec& base = *flat.base;
  std::string why;

  if (flat.depth == 1 || std::holds_alternative<Arbitrary>(base.kind())) {
    if (restriction_ok(sigma, base, 0.0, kInf, &why)) return {true, {}};
    return {false, why};
  }

  // Breadth-first search over cut points: reach[p] holds the fewest pieces
  // needed to cover [0, cuts[p]).
  const std::vector<double> cuts = candidate_cuts(sigma, base);
  const std::size_t n = cuts.size();
  constexpr long kUnreached = std::numeric_limits<long>::max();
  std::vector<long> reach(n, kUnreached);
  reach[0] = 0;
  std::vector<std::size_t> frontier{0};
  for (long used = 0; used < flat.depth && !frontier.empty(); ++used) {
    std::vector<std::size_t> next;
    for (std::size_t p : frontier) {
      if (restriction_ok(sigma, base, cuts[p], kInf, nullptr)) return {true, {}};
      for (std::size_t q = p + 1; q < n; ++q) {
        // Extending a piece only adds constraints, so stop at the first
        // failure.
        if (!restriction_ok(sigma, base, cuts[p], cuts[q], nullptr)) break;
        if (reach[q] == kUnreached) {
          reach[q] = used + 1;
          next.push_back(q);
        }
      }
    }
    frontier = std::move(next);
  }
  restriction_ok(sigma, base, 0.0, kInf, &why);
  return {false, "not a concatenation of at most " + std::to_string(flat.depth) + " admissible pieces (" + why + ")"};
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

Mode other_mode(Rng& rng, const std::vector<Mode>& modes, Mode current) {
  std::vector<Mode> choices;
  for (Mode m : modes)
    if (m != current) choices.push_back(m);
  if (choices.empty()) return current;
  return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
}

SwitchingSignal sample_dwell(const DwellTime& dw, double horizon, Rng& rng) {
  std::vector<Mode> modes(dw.modes);
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
  if (modes.size() == 1) {
    if (horizon > dw.d_max)
      throw std::domain_error("dwell-time set with one mode has no member with horizon " + fmt(horizon));
    return SwitchingSignal::constant(modes[0], std::max(horizon, dw.d_min));
  }
  std::vector<double> st;
  std::vector<Mode> md{modes[std::uniform_int_distribution<std::size_t>(0, modes.size() - 1)(rng)]};
  double t = 0.0;
  while (true) {
    t += uniform(rng, dw.d_min, dw.d_max);
    if (t >= horizon) break;
    st.push_back(t);
    md.push_back(other_mode(rng, modes, md.back()));
  }
  return SwitchingSignal(std::move(st), std::move(md), t);
}

SwitchingSignal sample_impl(const SignalSetSpec& set, double horizon, std::uint64_t seed) {
  Rng rng(seed);
  if (const auto* ff = std::get_if<FiniteFamily>(&set.kind())) {
    const auto& m = ff->members[std::uniform_int_distribution<std::size_t>(0, ff->members.size() - 1)(rng)];
    return m.with_horizon(std::max(m.horizon(), horizon));
  }
  if (const auto* ar = std::get_if<Arbitrary>(&set.kind())) {
    std::vector<double> st;
    std::vector<Mode> md{ar->modes[std::uniform_int_distribution<std::size_t>(0, ar->modes.size() - 1)(rng)]};
    double t = 0.0;
    while (true) {
      t += uniform(rng, 0.01, 1.0);
      if (t >= horizon) break;
      st.push_back(t);
      md.push_back(other_mode(rng, ar->modes, md.back()));
    }
    return SwitchingSignal(std::move(st), std::move(md), horizon);
  }
  if (const auto* dw = std::get_if<DwellTime>(&set.kind())) return sample_dwell(*dw, horizon, rng);

  const auto& cc = std::get<ConcatClosure>(set.kind());
  const int pieces = std::uniform_int_distribution<int>(1, cc.depth)(rng);
  std::vector<SwitchingSignal> sigs;
  for (int j = 0; j < pieces; ++j) sigs.push_back(sample_impl(*cc.base, horizon, derive_seed(seed, j + 1)));
  std::vector<double> cuts;
  for (int j = 1; j < pieces; ++j) cuts.push_back(uniform(rng, 0.0, horizon));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double c) { return c <= 0.0; }), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  sigs.erase(sigs.begin() + static_cast<std::ptrdiff_t>(cuts.size() + 1), sigs.end());
  return concatenate(sigs, cuts);
}

}  // namespace

SwitchingSignal sample_signal_set(const SignalSetSpec& set, double horizon, std::uint64_t seed) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("sampling horizon must be positive");
  return sample_impl(set, horizon, seed);
}

// ---------------------------------------------------------------------------
// InputSignal

InputSignal InputSignal::zero(Eigen::Index dimension) {
  if (dimension < 0) throw std::invalid_argument("input dimension must be >= 0");
  InputSignal u;
  u.kind_ = Kind::Zero;
  u.amplitude_ = Eigen::VectorXd::Zero(dimension);
  return u;
}

InputSignal InputSignal::piecewise_constant(std::vector<double> times, std::vector<Eigen::VectorXd> values) {
  if (times.empty() || times.size() != values.size())
    throw std::invalid_argument("piecewise-constant input needs matching nonempty times and values");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || times[k] < 0.0) throw std::invalid_argument("input times must be finite and >= 0");
    if (k > 0 && times[k] <= times[k - 1]) throw std::invalid_argument("input times must be strictly increasing");
    if (values[k].size() != values[0].size()) throw std::invalid_argument("input values must share one dimension");
    if (!values[k].allFinite()) throw std::invalid_argument("input values must be finite");
  }
  InputSignal u;
  u.kind_ = Kind::PiecewiseConstant;
  u.amplitude_ = Eigen::VectorXd::Zero(values[0].size());
  u.times_ = std::move(times);
  u.values_ = std::move(values);
  return u;
}

InputSignal InputSignal::exp_decay(Eigen::VectorXd amplitude, double rate) {
  if (!amplitude.allFinite() || !std::isfinite(rate)) throw std::invalid_argument("exp_decay parameters must be finite");
  InputSignal u;
  u.kind_ = Kind::ExpDecay;
  u.amplitude_ = std::move(amplitude);
  u.rate_ = rate;
  return u;
}

InputSignal InputSignal::sinusoid(Eigen::VectorXd amplitude, double omega, double phase) {
  if (!amplitude.allFinite() || !std::isfinite(omega) || !std::isfinite(phase))
    throw std::invalid_argument("sinusoid parameters must be finite");
  InputSignal u;
  u.kind_ = Kind::Sinusoid;
  u.amplitude_ = std::move(amplitude);
  u.rate_ = omega;
  u.phase_ = phase;
  return u;
}

InputSignal InputSignal::pulse(Eigen::VectorXd amplitude, double t_on, double t_off) {
  if (!amplitude.allFinite() || !(t_on >= 0.0) || !(t_off > t_on) || !std::isfinite(t_off))
    throw std::invalid_argument("pulse needs finite amplitude and 0 <= t_on < t_off < inf");
  InputSignal u;
  u.kind_ = Kind::Pulse;
  u.amplitude_ = std::move(amplitude);
  u.t_on_ = t_on;
  u.t_off_ = t_off;
  return u;
}

Eigen::VectorXd InputSignal::operator()(double t) const {
  switch (kind_) {
    case Kind::Zero:
      return amplitude_;
    case Kind::PiecewiseConstant: {
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      if (it == times_.begin()) return Eigen::VectorXd::Zero(amplitude_.size());
      return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }
    case Kind::ExpDecay:
      return amplitude_ * std::exp(-rate_ * t);
    case Kind::Sinusoid:
      return amplitude_ * std::sin(rate_ * t + phase_);
    case Kind::Pulse:
      return (t >= t_on_ && t < t_off_) ? amplitude_ : Eigen::VectorXd::Zero(amplitude_.size());
  }
  return amplitude_;
}

Eigen::VectorXd InputSignal::left_limit(double t) const {
  switch (kind_) {
    case Kind::PiecewiseConstant: {
      const auto it = std::lower_bound(times_.begin(), times_.end(), t);
      if (it == times_.begin()) return Eigen::VectorXd::Zero(amplitude_.size());
      return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }
    case Kind::Pulse:
      return (t > t_on_ && t <= t_off_) ? amplitude_ : Eigen::VectorXd::Zero(amplitude_.size());
    default:
      return (*this)(t);
  }
}

double InputSignal::magnitude(double t) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::ExpDecay:
      return amplitude_.norm() * std::exp(-rate_ * t);
    case Kind::Sinusoid:
      return amplitude_.norm() * std::abs(std::sin(rate_ * t + phase_));
    default:
      return (*this)(t).norm();
  }
}

std::vector<double> InputSignal::breakpoints_in(double a, double b) const {
  std::vector<double> out;
  if (kind_ == Kind::PiecewiseConstant) {
    for (double t : times_)
      if (t > a && t < b) out.push_back(t);
  } else if (kind_ == Kind::Pulse) {
    if (t_on_ > a && t_on_ < b) out.push_back(t_on_);
    if (t_off_ > a && t_off_ < b) out.push_back(t_off_);
  }
  return out;
}

double InputSignal::sup_norm() const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::PiecewiseConstant: {
      double m = 0.0;
      for (const auto& v : values_) m = std::max(m, v.norm());
      return m;
    }
    case Kind::ExpDecay:
      return rate_ >= 0.0 ? amplitude_.norm() : kInf;
    default:
      return amplitude_.norm();
  }
}

std::string InputSignal::describe() const {
  switch (kind_) {
    case Kind::Zero:
      return "zero";
    case Kind::PiecewiseConstant:
      return "piecewise_constant(" + std::to_string(times_.size()) + " pieces)";
    case Kind::ExpDecay:
      return "exp_decay(|a|=" + fmt(amplitude_.norm()) + ", rate=" + fmt(rate_) + ")";
    case Kind::Sinusoid:
      return "sinusoid(|a|=" + fmt(amplitude_.norm()) + ", omega=" + fmt(rate_) + ")";
    case Kind::Pulse:
      return "pulse(|a|=" + fmt(amplitude_.norm()) + ", [" + fmt(t_on_) + ", " + fmt(t_off_) + "))";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Energy

namespace {

template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson with an absolute tolerance, on unit-length chunks so the
// initial sampling sees every oscillation of moderate frequency.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, double chunk = 0.5) {
  if (b <= a) return 0.0;
  const long n = std::max(1L, static_cast<long>(std::ceil((b - a) / chunk)));
  const double h = (b - a) / static_cast<double>(n);
  double total = 0.0;
  for (long k = 0; k < n; ++k) {
    const double x0 = a + h * static_cast<double>(k);
    const double x1 = k + 1 == n ? b : x0 + h;
    const double f0 = f(x0);
    const double f1 = f(x1);
    const double fm = f(0.5 * (x0 + x1));
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    total += simpson_rec(f, x0, x1, f0, fm, f1, whole, tol / static_cast<double>(n), 40);
  }
  return total;
}

}  // namespace

double energy_norm(const InputSignal& u, const MonotoneFn& chi, double t0, double t1, double tol_quad) {
  if (t1 < t0) throw std::invalid_argument("energy_norm: t1 < t0");
  if (t1 == t0) return 0.0;
  if (!std::isfinite(t1)) return energy_norm_infinite(u, chi, t0).tail_bound;
  switch (u.kind()) {
    case InputSignal::Kind::Zero:
      return 0.0;
    case InputSignal::Kind::PiecewiseConstant: {
      const auto& ts = u.times();
      double total = 0.0;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const double a = std::max(t0, ts[k]);
        const double b = std::min(t1, k + 1 < ts.size() ? ts[k + 1] : kInf);
        if (b > a) total += chi(u.values()[k].norm()) * (b - a);
      }
      return total;
    }
    case InputSignal::Kind::Pulse: {
      const double a = std::max(t0, u.t_on());
      const double b = std::min(t1, u.t_off());
      return b > a ? chi(u.amplitude().norm()) * (b - a) : 0.0;
    }
    case InputSignal::Kind::Sinusoid: {
      const double chunk = u.rate() == 0.0 ? 1.0 : std::min(1.0, 0.25 * M_PI / std::abs(u.rate()));
      return adaptive_simpson([&](double t) { return chi(u.magnitude(t)); }, t0, t1, tol_quad, chunk);
    }
    case InputSignal::Kind::ExpDecay:
      return adaptive_simpson([&](double t) { return chi(u.magnitude(t)); }, t0, t1, tol_quad, 1.0);
  }
  return 0.0;
}

EnergyTail energy_norm_infinite(const InputSignal& u, const MonotoneFn& chi, double horizon, double tol_quad) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("energy horizon must be finite");
  EnergyTail out;
  out.truncated = energy_norm(u, chi, 0.0, horizon, tol_quad);
  switch (u.kind()) {
    case InputSignal::Kind::Zero:
      out.tail_bound = 0.0;
      break;
    case InputSignal::Kind::PiecewiseConstant: {
      const double last = chi(u.values().back().norm());
      out.tail_bound = last > 0.0 ? kInf : 0.0;
      break;
    }
    case InputSignal::Kind::Pulse:
      out.tail_bound = u.t_off() > horizon ? chi(u.amplitude().norm()) * (u.t_off() - std::max(horizon, u.t_on())) : 0.0;
      break;
    case InputSignal::Kind::Sinusoid:
      out.tail_bound = u.amplitude().norm() > 0.0 ? kInf : 0.0;
      break;
    case InputSignal::Kind::ExpDecay: {
      const double a = u.amplitude().norm();
      if (a == 0.0) {
        out.tail_bound = 0.0;
      } else if (u.rate() <= 0.0) {
        out.tail_bound = kInf;
      } else {
        // chi(s) <= L s on [0, m] with L the largest chord slope from the
        // origin, so the tail is at most L m / rate.
        const double m = u.magnitude(horizon);
        double lip = chi.slope_at(0.0);
        for (std::size_t k = 1; k < chi.knots().size(); ++k) {
          if (chi.knots()[k] > m) break;
          lip = std::max(lip, chi.values()[k] / chi.knots()[k]);
        }
        if (m > 0.0) lip = std::max(lip, chi(m) / m);
        out.tail_bound = lip * m / u.rate();
      }
      break;
    }
  }
  return out;
}

bool has_finite_energy(const InputSignal& u, const MonotoneFn& chi, double horizon, double tol_tail) {
  return energy_norm_infinite(u, chi, horizon).tail_bound <= tol_tail;
}

}  // namespace iiss
