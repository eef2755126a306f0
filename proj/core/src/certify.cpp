#include "iiss/certify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iiss/parallel.hpp"
#include "iiss/random.hpp"
#include "check_detail.hpp"

namespace iiss {

namespace {

using namespace detail;

void require_zero_input(const Ensemble& ens, const char* check) {
  for (const auto& run : ens.runs) {
    if (!run.u.is_zero() && run.u.sup_norm() != 0.0)
      throw std::invalid_argument(std::string(check) + " needs zero-input runs; run " + std::to_string(run.index) +
                                  " has input " + run.u.describe());
  }
}

InputSignal draw_input(const EnsembleSpec& spec, Eigen::Index m, std::size_t j, Rng& rng) {
  InputFamily fam = spec.input;
  if (fam == InputFamily::Mixed) {
    static constexpr InputFamily cycle[] = {InputFamily::Zero, InputFamily::PiecewiseConstant, InputFamily::ExpDecay};
    fam = cycle[j % 3];
  }
  if (m == 0) return InputSignal::zero(0);
  switch (fam) {
    case InputFamily::Zero:
      return InputSignal::zero(m);
    case InputFamily::PiecewiseConstant: {
      std::vector<double> times;
      std::vector<Eigen::VectorXd> values;
      const double end = spec.t0 + spec.horizon;
      for (double t = 0.0; t < end; t += uniform(rng, spec.piece_min, spec.piece_max)) {
        times.push_back(t);
        values.push_back(random_in_ball(rng, m, spec.input_bound));
      }
      return InputSignal::piecewise_constant(std::move(times), std::move(values));
    }
    case InputFamily::ExpDecay:
      return InputSignal::exp_decay(random_direction(rng, m) * spec.input_bound, spec.input_rate);
    case InputFamily::Fixed:
      if (spec.fixed_inputs.empty()) throw std::invalid_argument("fixed input family needs at least one input");
      return spec.fixed_inputs[j % spec.fixed_inputs.size()];
    case InputFamily::Mixed:
      break;
  }
  return InputSignal::zero(m);
}

const char* family_name(InputFamily f) {
  switch (f) {
    case InputFamily::Zero:
      return "zero";
    case InputFamily::PiecewiseConstant:
      return "piecewise_constant";
    case InputFamily::ExpDecay:
      return "exp_decay";
    case InputFamily::Mixed:
      return "mixed";
    case InputFamily::Fixed:
      return "fixed";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------------------

void validate(const UbebsCertificate& cert) {
  if (!(cert.c >= 0.0) || !std::isfinite(cert.c)) throw std::invalid_argument("UBEBS constant c must be finite and >= 0");
}

void validate(const GronwallCertificate& cert) {
  if (!(cert.eta > 0.0)) throw std::invalid_argument("Gronwall eta must be positive");
  if (!(cert.L > 0.0)) throw std::invalid_argument("Gronwall L must be positive");
  if (!(cert.kappa >= 0.0)) throw std::invalid_argument("Gronwall kappa must be >= 0");
  if (!(cert.r > 0.0)) throw std::invalid_argument("Gronwall radius must be positive");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::HoldsOnEnsemble:
      return "holds_on_ensemble";
    case Verdict::Violated:
      return "violated";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

Ensemble make_ensemble(const SwitchedSystem& sys, const SignalSetSpec& set, const EnsembleSpec& spec) {
  if (spec.count == 0) throw std::invalid_argument("ensemble count must be positive");
  if (!(spec.horizon > 0.0)) throw std::invalid_argument("ensemble horizon must be positive");
  if (!(spec.r_min >= 0.0) || spec.r_max < spec.r_min) throw std::invalid_argument("need 0 <= r_min <= r_max");
  if (spec.r_min == 0.0 && spec.r_max > 0.0) throw std::invalid_argument("log-spaced radii need r_min > 0");
  Ensemble ens;
  ens.sim = spec.sim;
  ens.runs.reserve(spec.count);
  for (std::size_t j = 0; j < spec.count; ++j) {
    RunSpec run;
    run.index = j;
    run.seed = derive_seed(spec.seed, j);
    const double frac = spec.count == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(spec.count - 1);
    const double r = spec.r_max == 0.0 ? 0.0 : spec.r_min * std::pow(spec.r_max / spec.r_min, frac);
    Rng rng_x(derive_seed(run.seed, 0));
    run.x0 = random_direction(rng_x, sys.state_dim()) * r;
    run.t0 = spec.t0;
    run.T = spec.t0 + spec.horizon;
    run.sigma = sample_signal_set(set, run.T, derive_seed(run.seed, 1));
    Rng rng_u(derive_seed(run.seed, 2));
    run.u = draw_input(spec, sys.input_dim(), j, rng_u);
    ens.runs.push_back(std::move(run));
  }
  std::ostringstream os;
  os << "count=" << spec.count << " seed=" << spec.seed << " radii=[" << spec.r_min << ", " << spec.r_max
     << "] horizon=" << spec.horizon << " input=" << family_name(spec.input) << " set=" << set.describe()
     << " h_step=" << spec.sim.h_step;
  ens.description = os.str();
  return ens;
}

Trajectory simulate_run(const SwitchedSystem& sys, const RunSpec& run, const SimOptions& sim) {
  return simulate(sys, run.x0, run.t0, run.u, run.sigma, run.T, sim);
}

std::vector<double> energy_prefix(const Trajectory& traj, const InputSignal& u, const MonotoneFn& chi) {
  std::vector<double> E(traj.size(), 0.0);
  if (u.is_zero()) return E;
  for (std::size_t k = 1; k < traj.size(); ++k) E[k] = E[k - 1] + energy_norm(u, chi, traj.times[k - 1], traj.times[k]);
  return E;
}

// ---------------------------------------------------------------------------
// Checkers

CheckReport check_iiss(const SwitchedSystem& sys, const Ensemble& ens, const IissCertificate& cert,
                       const CheckOptions& opts) {
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    const std::vector<double> E = energy_prefix(traj, run.u, cert.chi);
    const double r0 = run.x0.norm();
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double rhs = cert.beta(r0, traj.times[k] - run.t0) + cert.rho(E[k]);
      tr.add(traj.times[k], traj.norm_at(k), rhs);
    }
  });
  return aggregate("iiss", ens, outcomes, "|x(t)| <= beta(|x0|, t - t0) + rho(int chi(|u|))");
}

CheckReport check_ubebs(const SwitchedSystem& sys, const Ensemble& ens, const UbebsCertificate& cert,
                        const CheckOptions& opts) {
  validate(cert);
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    const std::vector<double> E = energy_prefix(traj, run.u, cert.alpha);
    const double a1 = cert.alpha1(run.x0.norm());
    for (std::size_t k = 0; k < traj.size(); ++k) tr.add(traj.times[k], traj.norm_at(k), a1 + cert.alpha2(E[k]) + cert.c);
  });
  CheckReport rep = aggregate("ubebs", ens, outcomes, "|x(t)| <= alpha1(|x0|) + alpha2(int alpha(|u|)) + c");
  double max_lhs = 0.0;
  for (const auto& o : outcomes) max_lhs = std::max(max_lhs, o.max_lhs);
  rep.values["max_state_norm"] = max_lhs;
  if (cert.c > 0.0 && cert.c >= max_lhs) {
    rep.vacuous = true;
    rep.notes.push_back("vacuous margin: c alone bounds every sampled state");
  }
  return rep;
}

CheckReport check_0guas(const SwitchedSystem& sys, const Ensemble& ens, const KLFn& beta, const CheckOptions& opts) {
  require_zero_input(ens, "check_0guas");
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    const double r0 = run.x0.norm();
    for (std::size_t k = 0; k < traj.size(); ++k) tr.add(traj.times[k], traj.norm_at(k), beta(r0, traj.times[k] - run.t0));
  });
  return aggregate("0guas", ens, outcomes, "|x(t)| <= beta(|x0|, t - t0)");
}

CheckReport check_beics(const SwitchedSystem& sys, const Ensemble& ens, const MonotoneFn& chi,
                        const BeicsOptions& beics, const CheckOptions& opts) {
  if (!(beics.eps_conv > 0.0)) throw std::invalid_argument("eps_conv must be positive");
  for (const auto& run : ens.runs) {
    if (!has_finite_energy(run.u, chi, run.T, beics.tol_energy_tail))
      throw std::invalid_argument("run " + std::to_string(run.index) + ": input " + run.u.describe() +
                                  " does not have finite chi-energy");
  }
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    for (std::size_t k = 0; k < traj.size(); ++k) {
      if (traj.times[k] - run.t0 >= beics.T_conv) tr.add(traj.times[k], traj.norm_at(k), beics.eps_conv);
    }
  });
  CheckReport rep = aggregate("beics", ens, outcomes, "|x(t)| <= eps_conv for t - t0 >= T_conv");
  rep.values["eps_conv"] = beics.eps_conv;
  rep.values["T_conv"] = beics.T_conv;
  rep.notes.push_back("convergence is asymptotic; checked on a finite horizon only");
  return rep;
}

double pilot_t_conv(const SwitchedSystem& sys, const Ensemble& pilot, double eps_conv, double factor) {
  if (pilot.runs.empty()) throw std::invalid_argument("pilot ensemble is empty");
  std::vector<double> last(pilot.runs.size(), 0.0);
  parallel_for(pilot.runs.size(), [&](std::size_t j) {
    const RunSpec& run = pilot.runs[j];
    const Trajectory traj = simulate_run(sys, run, pilot.sim);
    if (traj.blew_up() || traj.norm_at(traj.size() - 1) > eps_conv)
      throw std::domain_error("pilot run " + std::to_string(run.index) + " does not settle below " + fmt(eps_conv) +
                              " by t=" + fmt(traj.t_end()));
    for (std::size_t k = traj.size(); k-- > 0;) {
      if (traj.norm_at(k) > eps_conv) {
        last[j] = traj.times[k + 1] - run.t0;
        break;
      }
    }
  });
  return factor * *std::max_element(last.begin(), last.end());
}

CheckReport check_dissipation(const SwitchedSystem& sys, const Ensemble& ens, const DissipationCertificate& cert,
                              const CheckOptions& opts) {
  if (!cert.V) throw std::invalid_argument("dissipation certificate needs a storage function");
  std::vector<Worst> sandwich(ens.runs.size());
  std::vector<std::size_t> sandwich_points(ens.runs.size(), 0);
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    const std::size_t n = traj.size();
    std::vector<double> V(n);
    std::vector<double> A3(n, 0.0);
    const std::vector<double> Aa = energy_prefix(traj, run.u, cert.alpha);
    Tracker bounds(opts);
    double prev_rate = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Vec x = traj.state(k);
      V[k] = cert.V(traj.times[k], x, traj.modes[k]);
      const double nx = x.norm();
      bounds.add(traj.times[k], cert.phi1(nx), V[k]);
      bounds.add(traj.times[k], V[k], cert.phi2(nx));
      if (cert.alpha3) {
        const double rate = (*cert.alpha3)(sys.h(traj.times[k], x, traj.input(k), traj.modes[k]).norm());
        if (k > 0) A3[k] = A3[k - 1] + 0.5 * (traj.times[k] - traj.times[k - 1]) * (prev_rate + rate);
        prev_rate = rate;
      }
    }
    // W = V + A3 - Aa must be nonincreasing; compare each point against the
    // earlier point with the smallest W.
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      const double rhs = V[best] + (Aa[k] - Aa[best]) - (A3[k] - A3[best]);
      tr.add(traj.times[k], V[k], rhs, traj.times[best]);
      const double wk = V[k] + A3[k] - Aa[k];
      if (wk < V[best] + A3[best] - Aa[best]) best = k;
    }
    sandwich[run.index < sandwich.size() ? run.index : 0] = bounds.worst();
    sandwich_points[run.index < sandwich.size() ? run.index : 0] = bounds.points();
  });
  CheckReport rep = aggregate("dissipation", ens, outcomes,
                              "V(t, x(t)) <= V(s, x(s)) + int_s^t alpha(|u|) - int_s^t alpha3(|y|)");
  double sandwich_margin = kInf;
  for (std::size_t j = 0; j < sandwich.size(); ++j)
    if (sandwich_points[j] > 0) sandwich_margin = std::min(sandwich_margin, sandwich[j].margin);
  rep.values["sandwich_margin"] = sandwich_margin;
  if (sandwich_margin < 0.0) {
    rep.verdict = Verdict::Violated;
    rep.notes.push_back("phi1(|x|) <= V <= phi2(|x|) fails on the ensemble");
  }
  rep.values["storage_bounds_ok"] = sandwich_margin >= 0.0 ? 1.0 : 0.0;
  rep.notes.push_back("storage: " + (cert.storage.empty() ? std::string("unnamed") : cert.storage));
  return rep;
}

namespace {

struct PeWindowStats {
  double min_energy = kInf;
  std::size_t windows = 0;
  double t = 0.0;
};

// Sliding windows of length T over one zero-input trajectory.
template <class OnWindow>
void scan_windows(const SwitchedSystem& sys, const Trajectory& traj, double eps, double T, OnWindow&& on_window) {
  const std::size_t n = traj.size();
  std::vector<double> g(n);
  std::vector<double> P(n, 0.0);
  std::vector<std::size_t> bad(n + 1, 0);
  // Relative slack so states on the boundary (|x| = 1 at eps = 1) count.
  const double lo = eps * (1.0 - 1e-9);
  const double hi = (1.0 / eps) * (1.0 + 1e-9);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec x = traj.state(k);
    g[k] = sys.h(traj.times[k], x, traj.input(k), traj.modes[k]).squaredNorm();
    if (k > 0) P[k] = P[k - 1] + 0.5 * (traj.times[k] - traj.times[k - 1]) * (g[k - 1] + g[k]);
    const double nx = x.norm();
    bad[k + 1] = bad[k] + ((nx < lo || nx > hi) ? 1 : 0);
  }
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double end = traj.times[k] + T;
    if (end > traj.t_end() * (1.0 + 1e-15)) break;
    if (j < k) j = k;
    while (j < n && traj.times[j] < end) ++j;
    if (j >= n) j = n - 1;
    if (bad[j + 1] - bad[k] != 0) continue;
    double energy = P[j] - P[k];
    if (traj.times[j] > end) {
      // Drop the part of the last step past the window end (linear g).
      const double a = traj.times[j - 1];
      const double b = traj.times[j];
      const double s = (end - a) / (b - a);
      const double g_end = g[j - 1] + s * (g[j] - g[j - 1]);
      energy -= 0.5 * (b - end) * (g_end + g[j]);
    }
    on_window(traj.times[k], energy);
  }
}

}  // namespace

CheckReport check_output_pe(const SwitchedSystem& sys, const Ensemble& ens, double eps, double T, double r,
                            const CheckOptions& opts) {
  if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("output-PE eps must lie in (0, 1]");
  if (!(T > 0.0)) throw std::invalid_argument("output-PE window must be positive");
  require_zero_input(ens, "check_output_pe");
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec&, const Trajectory& traj, Tracker& tr) {
    // lhs = r, rhs = window energy: violated when the energy falls short.
    scan_windows(sys, traj, eps, T, [&](double t, double energy) { tr.add(t, r, energy, t); });
  });
  CheckReport rep = aggregate("output_pe", ens, outcomes, "int_t^{t+T} |h0|^2 >= r on annulus windows");
  rep.values["eps"] = eps;
  rep.values["T"] = T;
  rep.values["r"] = r;
  if (rep.verdict == Verdict::Inconclusive) rep.notes.push_back("no window stayed inside the annulus");
  return rep;
}

double measure_output_pe(const SwitchedSystem& sys, const Ensemble& ens, double eps, double T) {
  require_zero_input(ens, "measure_output_pe");
  std::vector<double> best(ens.runs.size(), kInf);
  parallel_for(ens.runs.size(), [&](std::size_t j) {
    const Trajectory traj = simulate_run(sys, ens.runs[j], ens.sim);
    scan_windows(sys, traj, eps, T, [&](double, double energy) { best[j] = std::min(best[j], energy); });
  });
  return *std::min_element(best.begin(), best.end());
}

CheckReport check_gronwall(const Trajectory& traj, const InputSignal& u, const GronwallCertificate& cert,
                           const CheckOptions& opts) {
  validate(cert);
  Ensemble one;
  RunSpec run;
  run.x0 = traj.x0();
  run.t0 = traj.t0();
  run.T = traj.t_end();
  run.u = u;
  one.runs.push_back(run);
  one.description = "single trajectory";
  Tracker tr(opts);
  if (traj.max_norm() <= cert.r) {
    const std::vector<double> E = energy_prefix(traj, u, cert.chi);
    const double r0 = traj.norm_at(0);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double dt = traj.times[k] - traj.t0();
      const double rhs = cert.beta(r0, dt) + (cert.eta * dt + cert.kappa * E[k]) * std::exp(cert.L * dt);
      tr.add(traj.times[k], traj.norm_at(k), rhs);
    }
  }
  CheckReport rep = aggregate("gronwall", one, {{tr.points(), tr.worst(), tr.max_lhs(), traj.blew_up()}},
                              "|x(t)| <= beta(|x0|, t - t0) + (eta (t - t0) + kappa int chi(|u|)) e^{L (t - t0)}");
  if (traj.max_norm() > cert.r) rep.notes.push_back("trajectory leaves the ball of radius " + fmt(cert.r));
  return rep;
}

CheckReport check_gronwall(const SwitchedSystem& sys, const Ensemble& ens, const GronwallCertificate& cert,
                           const CheckOptions& opts) {
  validate(cert);
  std::size_t outside = 0;
  std::vector<char> left(ens.runs.size(), 0);
  auto outcomes = for_each_run(sys, ens, opts, [&](const RunSpec& run, const Trajectory& traj, Tracker& tr) {
    if (traj.max_norm() > cert.r) {
      left[run.index < left.size() ? run.index : 0] = 1;
      return;
    }
    const std::vector<double> E = energy_prefix(traj, run.u, cert.chi);
    const double r0 = run.x0.norm();
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double dt = traj.times[k] - run.t0;
      const double rhs = cert.beta(r0, dt) + (cert.eta * dt + cert.kappa * E[k]) * std::exp(cert.L * dt);
      tr.add(traj.times[k], traj.norm_at(k), rhs);
    }
  });
  for (char c : left) outside += c ? 1 : 0;
  CheckReport rep = aggregate("gronwall", ens, outcomes,
                              "|x(t)| <= beta(|x0|, t - t0) + (eta (t - t0) + kappa int chi(|u|)) e^{L (t - t0)}");
  if (outside > 0) rep.notes.push_back(std::to_string(outside) + " run(s) left the ball of radius " + fmt(cert.r) + " and were skipped");
  rep.values["eta"] = cert.eta;
  rep.values["kappa"] = cert.kappa;
  rep.values["L"] = cert.L;
  return rep;
}

Vec replay_state(const SwitchedSystem& sys, const Witness& w, const SimOptions& sim) {
  if (w.t <= w.t0) return w.x0;
  const Trajectory traj = simulate(sys, w.x0, w.t0, w.u, w.sigma, w.t, sim);
  return traj.x_end();
}

// ---------------------------------------------------------------------------
// Fitting

UbebsCertificate fit_ubebs_gains(const SwitchedSystem& sys, const Ensemble& ens, const MonotoneFn& chi) {
  if (ens.runs.empty()) throw std::invalid_argument("ensemble is empty");
  std::vector<std::vector<GainSample>> per_run(ens.runs.size());
  parallel_for(ens.runs.size(), [&](std::size_t j) {
    const RunSpec& run = ens.runs[j];
    const Trajectory traj = simulate_run(sys, run, ens.sim);
    const std::vector<double> E = energy_prefix(traj, run.u, chi);
    const double r0 = run.x0.norm();
    // s = max{|x0|, E(t)} is nondecreasing along the run, so the running
    // maximum of |x| is the only part of the run the envelope needs.
    double best = -1.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double y = traj.norm_at(k);
      if (y <= best) continue;
      best = y;
      per_run[j].push_back({std::max(r0, E[k]), y});
    }
  });
  std::vector<GainSample> pts;
  for (auto& v : per_run) pts.insert(pts.end(), v.begin(), v.end());
  const MonotoneFn env = fit_k_envelope(pts, EnvelopeMode::UpperMajorant);
  return {env, env, chi, 0.0};
}

KLFn fit_0guas_beta(const SwitchedSystem& sys, const Ensemble& zero_input, const KLFitOptions& kl) {
  require_zero_input(zero_input, "fit_0guas_beta");
  if (zero_input.runs.empty()) throw std::invalid_argument("ensemble is empty");
  std::vector<std::vector<KLSample>> per_run(zero_input.runs.size());
  parallel_for(zero_input.runs.size(), [&](std::size_t j) {
    const RunSpec& run = zero_input.runs[j];
    const Trajectory traj = simulate_run(sys, run, zero_input.sim);
    const double r0 = run.x0.norm();
    per_run[j].reserve(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) per_run[j].push_back({r0, traj.times[k] - run.t0, traj.norm_at(k)});
  });
  std::vector<KLSample> samples;
  for (auto& v : per_run) samples.insert(samples.end(), v.begin(), v.end());
  return fit_kl_envelope(samples, kl);
}

MonotoneFn derive_iiss_gain(const MonotoneFn& alpha, const MonotoneFn& gamma) { return pointwise_max(alpha, gamma); }

IissCertificate fit_iiss_certificate(const SwitchedSystem& sys, const Ensemble& training, const MonotoneFn& chi,
                                     const MonotoneFn& alpha_tilde, const IissFitOptions& fit) {
  if (!(fit.rho_factor > 0.0) || !(fit.inflation >= 1.0)) throw std::invalid_argument("need rho_factor > 0 and inflation >= 1");
  if (training.runs.empty()) throw std::invalid_argument("ensemble is empty");
  const MonotoneFn rho = alpha_tilde.scaled(fit.rho_factor);
  std::vector<std::vector<KLSample>> per_run(training.runs.size());
  parallel_for(training.runs.size(), [&](std::size_t j) {
    const RunSpec& run = training.runs[j];
    const Trajectory traj = simulate_run(sys, run, training.sim);
    const std::vector<double> E = energy_prefix(traj, run.u, chi);
    const double r0 = run.x0.norm();
    per_run[j].reserve(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double resid = std::max(0.0, traj.norm_at(k) - rho(E[k]));
      if (r0 == 0.0 && resid > 0.0) continue;  // beta(0, .) = 0 cannot absorb these
      per_run[j].push_back({r0, traj.times[k] - run.t0, resid});
    }
  });
  std::vector<KLSample> samples;
  for (auto& v : per_run) samples.insert(samples.end(), v.begin(), v.end());
  const KLFn beta = fit_kl_envelope(samples, fit.kl).scaled(fit.inflation);
  return {beta, rho, chi};
}

// ---------------------------------------------------------------------------
// Pipeline

PipelineResult theorem2_pipeline(const SwitchedSystem& sys, PipelineMode mode, const PipelineComponents& comp,
                                 const PipelineEnsembles& ens, const CheckOptions& opts) {
  PipelineResult out;
  auto fail = [&](std::string hypothesis) {
    out.verdict = Verdict::Violated;
    out.failed_hypothesis = std::move(hypothesis);
    return out;
  };

  if (mode == PipelineMode::ZeroGuasAndZeroOd) {
    const KLFn beta0 = fit_0guas_beta(sys, ens.zero_input);
    CheckReport guas = check_0guas(sys, ens.zero_input, beta0, opts);
    // A fitted envelope always dominates its own data; the content of the
    // check is that the runs actually decay.
    double worst_ratio = 0.0;
    std::vector<double> ratio(ens.zero_input.runs.size(), 0.0);
    parallel_for(ens.zero_input.runs.size(), [&](std::size_t j) {
      const RunSpec& run = ens.zero_input.runs[j];
      const double r0 = run.x0.norm();
      if (r0 == 0.0) return;
      const Trajectory traj = simulate_run(sys, run, ens.zero_input.sim);
      ratio[j] = traj.blew_up() ? kInf : traj.norm_at(traj.size() - 1) / r0;
    });
    for (double r : ratio) worst_ratio = std::max(worst_ratio, r);
    guas.values["worst_final_ratio"] = worst_ratio;
    if (worst_ratio > comp.decay_fraction) {
      guas.verdict = Verdict::Violated;
      guas.notes.push_back("zero-input runs do not decay below " + fmt(comp.decay_fraction) + " of |x0|");
    }
    out.steps.push_back(guas);
    if (!guas.holds()) return fail("0-GUAS");
  }

  for (const Ensemble* e : {&ens.zero_input, &ens.training}) {
    CheckReport diss = check_dissipation(sys, *e, comp.dissipation, opts);
    const bool holds = diss.holds();
    out.steps.push_back(std::move(diss));
    if (!holds) return fail(mode == PipelineMode::ZeroGuasAndZeroOd ? "0-OD" : "h-OD");
  }

  if (mode == PipelineMode::OutputDissipativeAndPe) {
    double r = 0.0;
    if (comp.pe_r) {
      r = *comp.pe_r;
    } else {
      const double measured = measure_output_pe(sys, ens.zero_input, comp.pe_eps, comp.pe_T);
      if (!std::isfinite(measured)) {
        out.verdict = Verdict::Inconclusive;
        out.failed_hypothesis = "output-PE";
        return out;
      }
      r = 0.5 * measured;
    }
    CheckReport pe = check_output_pe(sys, ens.zero_input, comp.pe_eps, comp.pe_T, r, opts);
    const bool holds = pe.holds();
    out.steps.push_back(std::move(pe));
    if (!holds) return fail("output-PE");
  }

  const MonotoneFn gamma = comp.gamma ? *comp.gamma
                                      : (sys.declared().gamma ? *sys.declared().gamma : MonotoneFn::identity());
  const MonotoneFn chi = derive_iiss_gain(comp.dissipation.alpha, gamma);
  out.chi = chi;

  UbebsCertificate ubebs = fit_ubebs_gains(sys, ens.training, chi);
  CheckReport ub = check_ubebs(sys, ens.training, ubebs, opts);
  const bool ub_holds = ub.holds();
  out.steps.push_back(std::move(ub));
  out.ubebs = ubebs;
  if (!ub_holds) return fail("UBEBS");

  IissCertificate cert = fit_iiss_certificate(sys, ens.training, chi, ubebs.alpha1, comp.fit);
  CheckReport closure = check_iiss(sys, ens.fresh, cert, opts);
  const bool closed = closure.holds();
  out.steps.push_back(std::move(closure));
  out.certificate = std::move(cert);
  if (!closed) return fail("iISS re-check");
  out.verdict = Verdict::HoldsOnEnsemble;
  return out;
}

}  // namespace iiss
