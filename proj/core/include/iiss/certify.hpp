#pragma once

// Ensemble checkers for the stability estimates, gain fitters, and the
// sufficient-condition pipeline that assembles an iISS certificate.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "iiss/comparison.hpp"
#include "iiss/integrator.hpp"
#include "iiss/signals.hpp"
#include "iiss/systems.hpp"

namespace iiss {

// ---------------------------------------------------------------------------
// Certificates

/// Storage function V(t, x, i). The mode argument allows per-mode storage.
using StorageFn = std::function<double(double t, const Vec& x, Mode i)>;

struct IissCertificate {
  KLFn beta;
  MonotoneFn rho;
  MonotoneFn chi;
};

struct UbebsCertificate {
  MonotoneFn alpha1;
  MonotoneFn alpha2;
  MonotoneFn alpha;
  double c = 0.0;
};

struct ZeroGuasCertificate {
  KLFn beta;
};

struct DissipationCertificate {
  StorageFn V;
  std::string storage;  ///< human-readable name of V
  MonotoneFn phi1;
  MonotoneFn phi2;
  MonotoneFn alpha;
  std::optional<MonotoneFn> alpha3;  ///< none means zero dissipation rate
};

struct GronwallCertificate {
  KLFn beta;
  double eta = 0.0;
  double kappa = 0.0;
  double L = 0.0;
  MonotoneFn chi;
  double r = 0.0;  ///< the bound holds while |x(t)| <= r
};

using EstimateCertificate =
    std::variant<IissCertificate, UbebsCertificate, ZeroGuasCertificate, DissipationCertificate, GronwallCertificate>;

void validate(const UbebsCertificate& cert);
void validate(const GronwallCertificate& cert);

// ---------------------------------------------------------------------------
// Ensembles

enum class InputFamily { Zero, PiecewiseConstant, ExpDecay, Mixed, Fixed };

/// Runs are indexed j = 0..count-1. Initial radii are log-spaced over
/// [r_min, r_max] by index; directions, switching signals and inputs are
/// drawn from seeds derived from (seed, j).
struct EnsembleSpec {
  std::size_t count = 100;
  std::uint64_t seed = 1;
  double r_min = 1e-2;
  double r_max = 10.0;
  double horizon = 20.0;
  double t0 = 0.0;
  InputFamily input = InputFamily::Zero;
  double input_bound = 5.0;  ///< sup-norm bound (piecewise constant) or amplitude (exp decay)
  double input_rate = 1.0;   ///< decay rate for exp-decay inputs
  double piece_min = 0.2;
  double piece_max = 2.0;
  std::vector<InputSignal> fixed_inputs;  ///< cycled through for InputFamily::Fixed
  SimOptions sim;
};

struct RunSpec {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Vec x0;
  double t0 = 0.0;
  double T = 0.0;
  InputSignal u = InputSignal::zero(0);
  SwitchingSignal sigma = SwitchingSignal::constant(1);
};

struct Ensemble {
  std::vector<RunSpec> runs;
  SimOptions sim;
  std::string description;
};

Ensemble make_ensemble(const SwitchedSystem& sys, const SignalSetSpec& set, const EnsembleSpec& spec);

Trajectory simulate_run(const SwitchedSystem& sys, const RunSpec& run, const SimOptions& sim);

/// Running integral of chi(|u|) on the trajectory grid, starting at 0.
std::vector<double> energy_prefix(const Trajectory& traj, const InputSignal& u, const MonotoneFn& chi);

// ---------------------------------------------------------------------------
// Reports

enum class Verdict { HoldsOnEnsemble, Violated, Inconclusive };

std::string to_string(Verdict v);

/// A point where an inequality lhs <= rhs + tol was evaluated. For pair
/// inequalities t_ref is the earlier time.
struct Witness {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  Vec x0;
  double t0 = 0.0;
  double T = 0.0;
  InputSignal u = InputSignal::zero(0);
  SwitchingSignal sigma = SwitchingSignal::constant(1);
  double t = 0.0;
  double t_ref = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string inequality;
};

struct CheckReport {
  std::string check;
  Verdict verdict = Verdict::Inconclusive;
  std::string ensemble;
  std::size_t runs = 0;
  std::size_t points = 0;
  /// min over evaluated points of rhs + tol - lhs; negative iff violated.
  double worst_margin = std::numeric_limits<double>::infinity();
  /// The worst point; a violation witness when verdict is Violated.
  std::optional<Witness> witness;
  bool vacuous = false;
  std::vector<std::string> notes;
  std::map<std::string, double> values;

  bool holds() const { return verdict == Verdict::HoldsOnEnsemble; }
  bool violated() const { return verdict == Verdict::Violated; }
};

struct CheckOptions {
  /// Points pass when lhs <= rhs + tol_rel * (1 + |rhs|).
  double tol_rel = 1e-6;
};

inline double check_tolerance(double rhs, const CheckOptions& opts) {
  return opts.tol_rel * (1.0 + (rhs < 0 ? -rhs : rhs));
}

// ---------------------------------------------------------------------------
// Checkers

CheckReport check_iiss(const SwitchedSystem& sys, const Ensemble& ens, const IissCertificate& cert,
                       const CheckOptions& opts = {});

CheckReport check_ubebs(const SwitchedSystem& sys, const Ensemble& ens, const UbebsCertificate& cert,
                        const CheckOptions& opts = {});

/// Requires zero inputs on every run.
CheckReport check_0guas(const SwitchedSystem& sys, const Ensemble& ens, const KLFn& beta,
                        const CheckOptions& opts = {});

struct BeicsOptions {
  double eps_conv = 0.05;
  double T_conv = 0.0;  ///< relative to each run's t0
  double tol_energy_tail = kDefaultEnergyTailTol;
};

/// |x(t)| <= eps_conv for t - t0 >= T_conv. Every input must have finite
/// chi-energy; otherwise std::invalid_argument.
CheckReport check_beics(const SwitchedSystem& sys, const Ensemble& ens, const MonotoneFn& chi,
                        const BeicsOptions& beics, const CheckOptions& opts = {});

/// factor * (latest time, relative to t0, at which some pilot run has
/// |x| > eps_conv). Throws std::domain_error if a run never settles.
double pilot_t_conv(const SwitchedSystem& sys, const Ensemble& pilot, double eps_conv, double factor = 1.25);

/// Sandwich bounds phi1(|x|) <= V <= phi2(|x|) at grid states and
/// V(t) - V(s) <= int_s^t alpha(|u|) - int_s^t alpha3(|y|) for all grid s <= t.
CheckReport check_dissipation(const SwitchedSystem& sys, const Ensemble& ens, const DissipationCertificate& cert,
                              const CheckOptions& opts = {});

/// Over windows [t, t + T] on which eps <= |x| <= 1/eps, the zero-input
/// output energy is at least r. Requires zero inputs.
CheckReport check_output_pe(const SwitchedSystem& sys, const Ensemble& ens, double eps, double T, double r,
                            const CheckOptions& opts = {});

/// Smallest output energy over qualifying windows (inf if none).
double measure_output_pe(const SwitchedSystem& sys, const Ensemble& ens, double eps, double T);

/// Perturbation bound against the zero-input decay; inconclusive when the
/// trajectory leaves the r-ball.
CheckReport check_gronwall(const Trajectory& traj, const InputSignal& u, const GronwallCertificate& cert,
                           const CheckOptions& opts = {});

CheckReport check_gronwall(const SwitchedSystem& sys, const Ensemble& ens, const GronwallCertificate& cert,
                           const CheckOptions& opts = {});

/// Re-simulates a witness run up to the witness time; returns x(t).
Vec replay_state(const SwitchedSystem& sys, const Witness& w, const SimOptions& sim);

// ---------------------------------------------------------------------------
// Fitting

/// Envelope of sup |x(t)| against max{|x(t0)|, int chi(|u|)}; both UBEBS
/// gains are this envelope and c = 0.
UbebsCertificate fit_ubebs_gains(const SwitchedSystem& sys, const Ensemble& ens, const MonotoneFn& chi);

/// KL envelope of |x(t)| against (|x(t0)|, t - t0) on zero-input runs.
KLFn fit_0guas_beta(const SwitchedSystem& sys, const Ensemble& zero_input,
                    const KLFitOptions& kl = {.pool_ratios = true});

/// chi = max{alpha, gamma}
MonotoneFn derive_iiss_gain(const MonotoneFn& alpha, const MonotoneFn& gamma);

struct IissFitOptions {
  double rho_factor = 2.0;  ///< rho = rho_factor * alpha_tilde
  double inflation = 1.5;   ///< beta = inflation * envelope of the residuals
  KLFitOptions kl{.pool_ratios = true};
};

/// rho from the UBEBS envelope and beta from the residuals
/// max{0, |x(t)| - rho(int chi(|u|))} on the training runs.
IissCertificate fit_iiss_certificate(const SwitchedSystem& sys, const Ensemble& training, const MonotoneFn& chi,
                                     const MonotoneFn& alpha_tilde, const IissFitOptions& fit = {});

// ---------------------------------------------------------------------------
// Pipeline

enum class PipelineMode {
  ZeroGuasAndZeroOd,       ///< 0-GUAS plus dissipation with zero output
  OutputDissipativeAndPe,  ///< h-dissipation plus zero-input output-PE
};

struct PipelineComponents {
  DissipationCertificate dissipation;
  std::optional<MonotoneFn> gamma{};  ///< defaults to the system's declared gain
  double pe_eps = 0.1;
  double pe_T = 5.0;
  std::optional<double> pe_r{};  ///< defaults to half the smallest measured window energy
  /// Zero-input runs must end below this fraction of their initial norm.
  double decay_fraction = 0.5;
  IissFitOptions fit{};
};

struct PipelineEnsembles {
  Ensemble zero_input;
  Ensemble training;
  Ensemble fresh;
};

struct PipelineResult {
  Verdict verdict = Verdict::Inconclusive;
  std::string failed_hypothesis;
  std::vector<CheckReport> steps;
  std::optional<MonotoneFn> chi;
  std::optional<UbebsCertificate> ubebs;
  std::optional<IissCertificate> certificate;
};

PipelineResult theorem2_pipeline(const SwitchedSystem& sys, PipelineMode mode, const PipelineComponents& components,
                                 const PipelineEnsembles& ensembles, const CheckOptions& opts = {});

}  // namespace iiss
