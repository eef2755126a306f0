#include "scenarios.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iiss/falsify.hpp"
#include "iiss/random.hpp"

namespace iiss::cli {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

SignalSetSpec inverter_dwell() { return SignalSetSpec::dwell_time(0.1, 1.0, {1, 2}); }

StorageFn sqrt_energy(const InverterParams& p) {
  const Mat P = p.P();
  return [P](double, const Vec& x, Mode) { return std::sqrt(0.5 * x.dot(P * x)); };
}

DissipationCertificate inverter_dissipation(const InverterParams& p) {
  const double lmax = 0.5 * std::max({p.L1, p.L2, p.C1, p.C2});
  return {sqrt_energy(p),
          "inverter_sqrt_energy",
          MonotoneFn::linear(std::sqrt(p.lambda_min())),
          MonotoneFn::linear(std::sqrt(lmax)),
          MonotoneFn::linear(p.kappa() / 2.0),
          std::nullopt};
}

// sqrt(x' P_i x) with A_i' P_i + P_i A_i = -I.
DissipationCertificate prop4_dissipation(const SwitchedSystem& sys) {
  std::vector<Mat> Ps;
  double c = 0.0;
  double lo = 1e300;
  double hi = 0.0;
  for (std::size_t i = 0; i < sys.linear_A().size(); ++i) {
    const Mat P = lyapunov_matrix(sys.linear_A()[i], Mat::Identity(2, 2));
    const Eigen::SelfAdjointEigenSolver<Mat> es(P);
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
    c = std::max(c, (P * sys.linear_B()[i]).norm() / std::sqrt(es.eigenvalues().minCoeff()));
    Ps.push_back(P);
  }
  StorageFn V = [Ps](double, const Vec& x, Mode i) { return std::sqrt(x.dot(Ps.at(static_cast<std::size_t>(i - 1)) * x)); };
  return {V, "prop4_sqrt_lyapunov", MonotoneFn::linear(std::sqrt(lo)), MonotoneFn::linear(std::sqrt(hi)),
          MonotoneFn::linear(c), std::nullopt};
}

KLFn sqrt10_decay() {
  std::vector<double> rg;
  for (int k = 0; k <= 40; ++k) rg.push_back(0.5 * k + 0.01);
  std::vector<double> tg;
  for (int k = 1; k <= 400; ++k) tg.push_back(0.05 * k);
  return KLFn::sample([](double r, double t) { return std::sqrt(10.0) * r * std::exp(-t); }, rg, tg);
}

Assertion expect(const std::string& name, bool pass, const std::string& detail) { return {name, pass, detail}; }

std::string verdict_detail(const CheckReport& rep) {
  return to_string(rep.verdict) + ", " + std::to_string(rep.runs) + " runs, worst margin " + fmt(rep.worst_margin);
}

json pipeline_json(const PipelineResult& pr) {
  json steps = json::array();
  for (const auto& s : pr.steps) steps.push_back(to_json(s));
  json j = {{"verdict", to_string(pr.verdict)}, {"failed_hypothesis", pr.failed_hypothesis}, {"steps", steps}};
  if (pr.chi) j["chi"] = to_json(*pr.chi);
  if (pr.certificate) j["certificate"] = to_json(EstimateCertificate{*pr.certificate});
  return j;
}

void put_witness(Bundle& out, const std::string& stem, const SwitchedSystem& sys, const Witness& w, const SimOptions& sim,
                 const StorageFn& V = {}) {
  const Trajectory tr = simulate(sys, w.x0, w.t0, w.u, w.sigma, w.T, sim);
  out.put_json(stem + "_signal.json", to_json(w.sigma));
  out.put_trajectory(stem + "_trajectory.csv", tr);
  out.put(stem + "_plot.tsv", trajectory_plot_tsv(tr, V));
}

// ---------------------------------------------------------------------------

ScenarioResult prop4_counterexample(const Config& cfg, Bundle& out) {
  ScenarioResult res{"prop4_counterexample", {}, json::object()};
  const SwitchedSystem sys = make_prop4_pair();
  const std::uint64_t seed = cfg.seed();
  const SimOptions sim = cfg.sim();
  const CheckOptions opts = cfg.check();
  const json& fz = cfg.doc["falsify"];

  // Each mode alone decays like sqrt(10) e^{-t}.
  {
    const KLFn beta = sqrt10_decay();
    bool ok = true;
    std::string detail;
    for (Mode m : {1, 2}) {
      EnsembleSpec es;
      es.count = 16;
      es.seed = derive_seed(seed, 10 + m);
      es.input = InputFamily::Zero;
      es.horizon = 10.0;
      es.sim = sim;
      const CheckReport rep =
          check_0guas(sys, make_ensemble(sys, SignalSetSpec::finite_family({SwitchingSignal::constant(m)}), es), beta, opts);
      ok = ok && rep.holds();
      detail += "mode " + std::to_string(m) + ": " + verdict_detail(rep) + "; ";
      res.reports["decay_mode" + std::to_string(m)] = to_json(rep);
    }
    res.assertions.push_back(expect("per-mode decay PASS", ok, detail));
  }

  {
    DestabilizeSpec ds;
    ds.growth_target = fz["growth_target"];
    ds.T_max = fz["T_max"];
    ds.seed = seed;
    ds.sim = sim;
    const auto w = find_destabilizing(sys, ds);
    if (w) {
      res.reports["destabilizing"] = to_json(*w);
      const Trajectory tr = simulate(sys, w->x0, w->t0, InputSignal::zero(1), w->sigma, w->T, sim);
      out.put_json("destabilizing_signal.json", to_json(w->sigma));
      out.put_trajectory("destabilizing_trajectory.csv", tr);
      out.put("destabilizing_plot.tsv", trajectory_plot_tsv(tr));
    }
    res.assertions.push_back(expect("destabilizing witness FOUND", w && w->replay_rel_error <= 1e-6,
                                    w ? w->policy.describe() + " growth " + fmt(w->growth) + " at T=" + fmt(w->T)
                                      : "none within budget"));
  }

  const SignalSetSpec base = SignalSetSpec::finite_family({SwitchingSignal::constant(1), SwitchingSignal::constant(2)});
  {
    ConcatProbeSpec ps;
    ps.k = fz["k"];
    ps.budget = fz["budget"];
    ps.seed = seed;
    ps.sim = sim;
    const StorageFn V = [](double, const Vec& x, Mode) { return 0.5 * x.squaredNorm(); };
    const ConcatProbeResult pr = probe_concat_closure(sys, V, base, ps);
    res.reports["concat_probe"] = to_json(pr.report);
    if (pr.prefix_witness) put_witness(out, "concat_witness", sys, *pr.prefix_witness, sim, V);
    res.assertions.push_back(expect("concat-closure dissipation VIOLATED", pr.report.violated() && pr.prefix_witness,
                                    std::to_string(pr.prefix_violations) + "/" + std::to_string(pr.prefix_candidates) +
                                        " destabilizing-prefix candidates violate"));
  }

  // Per-mode Lyapunov storage certifies the finite family, not its closure.
  const PipelineComponents comp{.dissipation = prop4_dissipation(sys)};
  auto ensembles = [&](const SignalSetSpec& set, std::uint64_t s) {
    EnsembleSpec es;
    es.sim = sim;
    es.horizon = 10.0;
    es.count = 60;
    es.seed = derive_seed(s, 1);
    es.input = InputFamily::Zero;
    PipelineEnsembles pe;
    pe.zero_input = make_ensemble(sys, set, es);
    es.count = 150;
    es.seed = derive_seed(s, 2);
    es.input = InputFamily::Mixed;
    pe.training = make_ensemble(sys, set, es);
    es.count = 100;
    es.seed = derive_seed(s, 3);
    pe.fresh = make_ensemble(sys, set, es);
    return pe;
  };
  {
    const PipelineResult pr = theorem2_pipeline(sys, PipelineMode::ZeroGuasAndZeroOd, comp, ensembles(base, seed), opts);
    res.reports["pipeline_finite_family"] = pipeline_json(pr);
    res.assertions.push_back(expect("pipeline on {sigma1, sigma2} PASS", pr.verdict == Verdict::HoldsOnEnsemble,
                                    to_string(pr.verdict) + (pr.failed_hypothesis.empty() ? "" : " at " + pr.failed_hypothesis)));
  }
  {
    const SignalSetSpec closure = SignalSetSpec::concat_closure(base, 2);
    const PipelineResult pr =
        theorem2_pipeline(sys, PipelineMode::ZeroGuasAndZeroOd, comp, ensembles(closure, derive_seed(seed, 99)), opts);
    res.reports["pipeline_concat_closure"] = pipeline_json(pr);
    res.assertions.push_back(expect("pipeline on the concatenation closure fails at 0-OD",
                                    pr.verdict == Verdict::Violated && pr.failed_hypothesis == "0-OD",
                                    to_string(pr.verdict) + " at " + pr.failed_hypothesis));
  }
  return res;
}

ScenarioResult inverter_iiss(const Config& cfg, Bundle& out) {
  ScenarioResult res{"inverter_iiss", {}, json::object()};
  const InverterParams p = cfg.inverter();
  const SwitchedSystem sys = make_inverter(p);
  const std::uint64_t seed = cfg.seed();
  const SimOptions sim = cfg.sim();
  const CheckOptions opts = cfg.check();
  const SignalSetSpec set = inverter_dwell();
  const DissipationCertificate diss = inverter_dissipation(p);

  EnsembleSpec es;
  es.sim = sim;
  es.seed = derive_seed(seed, 1);
  es.input = InputFamily::PiecewiseConstant;
  const Ensemble pc = make_ensemble(sys, set, es);
  const CheckReport drep = check_dissipation(sys, pc, diss, opts);
  res.reports["dissipation"] = to_json(drep);
  res.assertions.push_back(expect("dissipation PASS", drep.holds(), "kappa=" + fmt(p.kappa()) + ", " + verdict_detail(drep)));

  PipelineEnsembles pe;
  es.input = InputFamily::Zero;
  es.seed = derive_seed(seed, 2);
  es.horizon = 40.0;
  pe.zero_input = make_ensemble(sys, set, es);
  es.horizon = 20.0;
  es.input = InputFamily::Mixed;
  es.count = 200;
  es.seed = derive_seed(seed, 3);
  pe.training = make_ensemble(sys, set, es);
  es.count = 100;
  es.seed = derive_seed(seed, 4);
  pe.fresh = make_ensemble(sys, set, es);

  // 0-GUAS: fit on one zero-input ensemble, check on a disjoint one.
  const KLFn beta0 = fit_0guas_beta(sys, pe.zero_input);
  EnsembleSpec zs = es;
  zs.input = InputFamily::Zero;
  zs.seed = derive_seed(seed, 5);
  const CheckReport grep = check_0guas(sys, make_ensemble(sys, set, zs), beta0.scaled(1.5), opts);
  res.reports["0guas"] = to_json(grep);
  res.assertions.push_back(expect("0-GUAS PASS", grep.holds(), verdict_detail(grep)));

  const PipelineComponents comp{.dissipation = diss};
  const PipelineResult pr = theorem2_pipeline(sys, PipelineMode::ZeroGuasAndZeroOd, comp, pe, opts);
  res.reports["pipeline"] = pipeline_json(pr);
  const bool chi_id = pr.chi && std::abs((*pr.chi)(1.0) - 1.0) < 1e-12 && std::abs((*pr.chi)(10.0) - 10.0) < 1e-12;
  if (pr.certificate) {
    out.put_json("iiss_certificate.json", to_json(EstimateCertificate{*pr.certificate}));
    out.put("gain_rho.tsv", gain_plot_tsv(pr.certificate->rho, 20.0));
    out.put("gain_chi.tsv", gain_plot_tsv(pr.certificate->chi, 20.0));
  }
  res.assertions.push_back(expect("derived chi(s)=s certificate PASS", pr.verdict == Verdict::HoldsOnEnsemble && chi_id,
                                  to_string(pr.verdict) + (pr.failed_hypothesis.empty() ? "" : " at " + pr.failed_hypothesis) +
                                      (chi_id ? ", chi(s)=s" : ", chi differs from identity")));

  const RunSpec& r0 = pe.zero_input.runs.back();
  const Trajectory tr = simulate_run(sys, r0, sim);
  out.put_trajectory("zero_input_trajectory.csv", tr);
  out.put("zero_input_plot.tsv", trajectory_plot_tsv(tr, diss.V));
  return res;
}

ScenarioResult inverter_beics(const Config& cfg, Bundle& out) {
  ScenarioResult res{"inverter_beics", {}, json::object()};
  const SwitchedSystem sys = make_inverter(cfg.inverter());
  const std::uint64_t seed = cfg.seed();
  const MonotoneFn chi = MonotoneFn::identity();
  EnsembleSpec es;
  es.sim = cfg.sim();
  es.input = InputFamily::Fixed;
  es.fixed_inputs = {InputSignal::exp_decay(Vec::Constant(1, 5.0), 1.0)};
  es.horizon = 100.0;
  es.count = 10;
  es.seed = derive_seed(seed, 1);
  const double eps = 0.05;
  const double T_conv = pilot_t_conv(sys, make_ensemble(sys, inverter_dwell(), es), eps);
  es.count = 50;
  es.seed = derive_seed(seed, 2);
  const Ensemble ens = make_ensemble(sys, inverter_dwell(), es);
  BeicsOptions bo;
  bo.eps_conv = eps;
  bo.T_conv = T_conv;
  const CheckReport rep = check_beics(sys, ens, chi, bo, cfg.check());
  res.reports["beics"] = to_json(rep);
  res.reports["T_conv"] = T_conv;
  res.assertions.push_back(expect("BEICS with u=5exp(-t) PASS", rep.holds(), "T_conv=" + fmt(T_conv) + ", " + verdict_detail(rep)));

  es.fixed_inputs = {InputSignal::piecewise_constant({0.0}, {Vec::Constant(1, 1.0)})};
  es.count = 2;
  bool rejected = false;
  std::string why;
  try {
    check_beics(sys, make_ensemble(sys, inverter_dwell(), es), chi, bo, cfg.check());
  } catch (const std::invalid_argument& e) {
    rejected = true;
    why = e.what();
  }
  res.assertions.push_back(expect("infinite-energy input u=1 rejected", rejected, rejected ? why : "accepted"));

  const Trajectory tr = simulate_run(sys, ens.runs.back(), es.sim);
  out.put_trajectory("beics_trajectory.csv", tr);
  out.put("beics_plot.tsv", trajectory_plot_tsv(tr));
  return res;
}

ScenarioResult inverter_not_iss_probe(const Config& cfg, Bundle& out) {
  ScenarioResult res{"inverter_not_iss_probe", {}, json::object()};
  InverterParams p = cfg.inverter();
  p.profile = LoadProfile::Constant;
  const SwitchedSystem sys = make_inverter(p);
  const SwitchPolicy policy = SwitchPolicy::dwell_greedy(0.1, 1.0, p.P());
  Vec x0 = Vec::Zero(4);
  x0(0) = 0.1;
  const InputSignal u = InputSignal::piecewise_constant({0.0}, {Vec::Constant(1, 1.0)});
  const double T = 200.0;
  const IssProbeResult pr = probe_iss(sys, policy, x0, u, T, cfg.sim());
  const bool member = static_cast<bool>(validate_membership(pr.run.sigma, inverter_dwell()));
  json norms = json::array();
  for (std::size_t q = 0; q < pr.norms.size(); ++q) norms.push_back({{"t", pr.checkpoints[q]}, {"norm", pr.norms[q]}});
  res.reports["probe"] = {{"policy", to_json(policy)},
                          {"checkpoints", norms},
                          {"input_sup", pr.input_sup},
                          {"divergent", pr.divergent},
                          {"switches", pr.run.sigma.switch_count()},
                          {"classification", "ISS violation only; the input has infinite energy, so iISS is not contradicted"}};
  out.put_json("probe_signal.json", to_json(pr.run.sigma));
  out.put_trajectory("probe_trajectory.csv", pr.run.trajectory);
  out.put("probe_plot.tsv", trajectory_plot_tsv(pr.run.trajectory, sqrt_energy(p)));
  std::string detail = "|x| at";
  for (std::size_t q = 0; q < pr.norms.size(); ++q) detail += " t=" + fmt(pr.checkpoints[q]) + ": " + fmt(pr.norms[q]);
  res.assertions.push_back(expect("bounded input u=1 drives |x| up (not ISS)", pr.divergent, detail));
  res.assertions.push_back(expect("probing signal lies in the dwell-time set", member,
                                  std::to_string(pr.run.sigma.switch_count()) + " switches"));
  return res;
}

ScenarioResult gronwall_demo(const Config& cfg, Bundle& out) {
  ScenarioResult res{"gronwall_demo", {}, json::object()};
  const SwitchedSystem sys = make_inverter(cfg.inverter());
  const std::uint64_t seed = cfg.seed();
  const MonotoneFn chi = MonotoneFn::identity();
  const double eta = 0.1;
  const double r = 12.0;
  EnsembleSpec es;
  es.sim = cfg.sim();
  es.count = 100;
  es.input = InputFamily::Zero;
  es.seed = derive_seed(seed, 1);
  const KLFn beta = fit_0guas_beta(sys, make_ensemble(sys, inverter_dwell(), es));
  SampleSpec ss;
  ss.seed = derive_seed(seed, 2);
  const double L = estimate_lipschitz(sys, r, ss);
  const KappaEstimate ke = estimate_kappa(sys, r, eta, chi, ss);
  const GronwallCertificate cert{beta, eta, ke.kappa, L, chi, r};

  es.count = 20;
  es.horizon = 1.0;
  es.input = InputFamily::PiecewiseConstant;
  es.seed = derive_seed(seed, 3);
  const Ensemble ens = make_ensemble(sys, inverter_dwell(), es);
  const CheckReport rep = check_gronwall(sys, ens, cert, cfg.check());
  res.reports["gronwall"] = to_json(rep);
  res.reports["constants"] = {{"L", L}, {"kappa", ke.kappa}, {"eta", eta}, {"r", r}, {"kappa_formula", ke.kappa_formula}};
  res.assertions.push_back(expect("Gronwall bound with estimated (L, kappa) PASS", rep.holds(),
                                  "L=" + fmt(L) + ", kappa=" + fmt(ke.kappa) + ", " + verdict_detail(rep)));

  GronwallCertificate no_input = cert;
  no_input.kappa = 0.0;
  no_input.eta = 1e-6;
  es.fixed_inputs = {InputSignal::piecewise_constant({0.0}, {Vec::Constant(1, 5.0)})};
  es.input = InputFamily::Fixed;
  es.r_min = 0.01;
  es.r_max = 0.1;
  const CheckReport bad = check_gronwall(sys, make_ensemble(sys, inverter_dwell(), es), no_input, cfg.check());
  res.reports["gronwall_kappa0"] = to_json(bad);
  if (bad.witness) put_witness(out, "gronwall_kappa0_witness", sys, *bad.witness, cfg.sim());
  res.assertions.push_back(expect("kappa=0 with energetic input VIOLATED", bad.violated(), verdict_detail(bad)));
  return res;
}

}  // namespace

bool ScenarioResult::pass() const {
  for (const auto& a : assertions)
    if (!a.pass) return false;
  return !assertions.empty();
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"prop4_counterexample", "inverter_iiss", "inverter_beics",
                                                 "inverter_not_iss_probe", "gronwall_demo"};
  return names;
}

ScenarioResult run_scenario(const std::string& name, const Config& cfg, Bundle& out) {
  if (name == "prop4_counterexample") return prop4_counterexample(cfg, out);
  if (name == "inverter_iiss") return inverter_iiss(cfg, out);
  if (name == "inverter_beics") return inverter_beics(cfg, out);
  if (name == "inverter_not_iss_probe") return inverter_not_iss_probe(cfg, out);
  if (name == "gronwall_demo") return gronwall_demo(cfg, out);
  std::string known;
  for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown scenario " + name + " (known: " + known + ")");
}

}  // namespace iiss::cli
