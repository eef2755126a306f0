// iiss: simulate, check, fit and falsify stability estimates of switched
// systems, and run the canonical scenarios.

#include <cstdio>
#include <optional>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "iiss/falsify.hpp"
#include "iiss/random.hpp"
#include "output.hpp"
#include "scenarios.hpp"

using namespace iiss;
using namespace iiss::cli;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kViolated = 1;
constexpr int kError = 2;
constexpr int kInconclusive = 3;

int verdict_code(const CheckReport& rep) {
  switch (rep.verdict) {
    case Verdict::HoldsOnEnsemble:
      return kOk;
    case Verdict::Violated:
      return kViolated;
    default:
      return kInconclusive;
  }
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open " + path);
  return json::parse(is);
}

void print_report(const CheckReport& rep) {
  std::cout << rep.check << ": " << to_string(rep.verdict) << " (" << rep.runs << " runs, " << rep.points
            << " points, worst margin " << rep.worst_margin << ")\n";
  if (rep.witness && rep.violated())
    std::cout << "  witness: run " << rep.witness->run << " at t=" << rep.witness->t << ", lhs=" << rep.witness->lhs
              << " > rhs=" << rep.witness->rhs << "\n";
  for (const auto& n : rep.notes) std::cout << "  note: " << n << "\n";
}

void put_witness_files(Bundle& out, const SwitchedSystem& sys, const CheckReport& rep, const SimOptions& sim) {
  if (!rep.witness || !rep.violated()) return;
  const Witness& w = *rep.witness;
  out.put_json("witness_signal.json", to_json(w.sigma));
  out.put_trajectory("witness_trajectory.csv", simulate(sys, w.x0, w.t0, w.u, w.sigma, w.T, sim));
}

int cmd_simulate(const Config& cfg) {
  const SwitchedSystem sys = cfg.system();
  const json& sj = cfg.doc["simulate"];
  const std::vector<double> xv = sj["x0"].get<std::vector<double>>();
  const Vec x0 = Eigen::Map<const Vec>(xv.data(), static_cast<Eigen::Index>(xv.size()));
  const double t0 = sj["t0"];
  const double T = sj["T"];
  const InputSignal u = input_from_json(sj["input"]);
  const SwitchingSignal sigma =
      sj["sigma"].is_null() ? sample_signal_set(cfg.signal_set(), T, cfg.seed()) : signal_from_json(sj["sigma"]);
  const Trajectory tr = simulate(sys, x0, t0, u, sigma, T, cfg.sim());
  Bundle out(cfg.out_dir());
  out.put_trajectory("trajectory.csv", tr);
  out.put("plot.tsv", trajectory_plot_tsv(tr));
  json report = report_header(cfg.doc, "simulate");
  report["system"] = sys.name();
  report["sigma"] = to_json(sigma);
  report["input"] = to_json(u);
  report["points"] = tr.size();
  report["max_norm"] = number(tr.max_norm());
  report["blow_up"] = tr.blow_up ? number(*tr.blow_up) : json(nullptr);
  out.put_json("report.json", report);
  out.flush();
  std::cout << "simulated " << tr.size() << " points on [" << t0 << ", " << tr.t_end() << "], max |x| = " << tr.max_norm()
            << "\nwrote " << cfg.out_dir() << "/{trajectory.csv,plot.tsv,report.json}\n";
  return kOk;
}

struct CheckArgs {
  std::string estimate;
  std::string certificate;
  double eps = 0.1;
  double window = 5.0;
  double r = -1.0;
  double eps_conv = 0.05;
  double t_conv = -1.0;
};

int cmd_check(const Config& cfg, const CheckArgs& a) {
  const SwitchedSystem sys = cfg.system();
  const SignalSetSpec set = cfg.signal_set();
  EnsembleSpec es = cfg.ensemble();
  const CheckOptions opts = cfg.check();
  const StorageResolver resolve = [&](const std::string& name) { return storage_by_name(name, cfg); };
  auto load = [&]() {
    if (a.certificate.empty()) throw std::invalid_argument("--certificate is required for --estimate " + a.estimate);
    return certificate_from_json(read_json_file(a.certificate), resolve);
  };
  auto expect_kind = [&](const EstimateCertificate& c, std::size_t index) {
    if (c.index() != index) throw std::invalid_argument("certificate kind does not match --estimate " + a.estimate);
  };

  CheckReport rep;
  if (a.estimate == "iiss") {
    const auto c = load();
    expect_kind(c, 0);
    rep = check_iiss(sys, make_ensemble(sys, set, es), std::get<IissCertificate>(c), opts);
  } else if (a.estimate == "ubebs") {
    const auto c = load();
    expect_kind(c, 1);
    rep = check_ubebs(sys, make_ensemble(sys, set, es), std::get<UbebsCertificate>(c), opts);
  } else if (a.estimate == "0guas") {
    const auto c = load();
    expect_kind(c, 2);
    es.input = InputFamily::Zero;
    rep = check_0guas(sys, make_ensemble(sys, set, es), std::get<ZeroGuasCertificate>(c).beta, opts);
  } else if (a.estimate == "dissipation") {
    const auto c = load();
    expect_kind(c, 3);
    rep = check_dissipation(sys, make_ensemble(sys, set, es), std::get<DissipationCertificate>(c), opts);
  } else if (a.estimate == "gronwall") {
    const auto c = load();
    expect_kind(c, 4);
    rep = check_gronwall(sys, make_ensemble(sys, set, es), std::get<GronwallCertificate>(c), opts);
  } else if (a.estimate == "output-pe") {
    es.input = InputFamily::Zero;
    const Ensemble ens = make_ensemble(sys, set, es);
    const double r = a.r >= 0.0 ? a.r : 0.5 * measure_output_pe(sys, ens, a.eps, a.window);
    rep = check_output_pe(sys, ens, a.eps, a.window, r, opts);
  } else if (a.estimate == "beics") {
    const MonotoneFn chi = a.certificate.empty() ? MonotoneFn::identity() : gain_from_json(read_json_file(a.certificate));
    BeicsOptions bo;
    bo.eps_conv = a.eps_conv;
    const Ensemble ens = make_ensemble(sys, set, es);
    if (a.t_conv >= 0.0) {
      bo.T_conv = a.t_conv;
    } else {
      EnsembleSpec pilot = es;
      pilot.count = std::max<std::size_t>(1, es.count / 5);
      pilot.seed = derive_seed(es.seed, 0xB1C5);
      bo.T_conv = pilot_t_conv(sys, make_ensemble(sys, set, pilot), bo.eps_conv);
    }
    rep = check_beics(sys, ens, chi, bo, opts);
  } else {
    throw std::invalid_argument("unknown estimate " + a.estimate);
  }

  Bundle out(cfg.out_dir());
  json report = report_header(cfg.doc, "check");
  report["estimate"] = a.estimate;
  report["certificate_path"] = a.certificate;
  report["report"] = to_json(rep);
  if (rep.witness && rep.violated()) {
    report["witness_files"] = {"witness_signal.json", "witness_trajectory.csv"};
    put_witness_files(out, sys, rep, es.sim);
  }
  out.put_json("report.json", report);
  out.flush();
  print_report(rep);
  return verdict_code(rep);
}

int cmd_fit(const Config& cfg, const std::string& estimate, double chi_slope, double inflation, std::size_t factor) {
  const SwitchedSystem sys = cfg.system();
  const SignalSetSpec set = cfg.signal_set();
  EnsembleSpec es = cfg.ensemble();
  // Envelopes fitted on the check-sized ensemble generalize poorly.
  es.count *= factor;
  const MonotoneFn gamma = sys.declared().gamma ? *sys.declared().gamma : MonotoneFn::identity();
  const MonotoneFn chi = derive_iiss_gain(MonotoneFn::linear(chi_slope), gamma);
  Bundle out(cfg.out_dir());
  json report = report_header(cfg.doc, "fit");
  report["estimate"] = estimate;
  std::optional<EstimateCertificate> cert;
  if (estimate == "0guas") {
    es.input = InputFamily::Zero;
    cert = ZeroGuasCertificate{fit_0guas_beta(sys, make_ensemble(sys, set, es)).scaled(inflation)};
  } else if (estimate == "ubebs") {
    const UbebsCertificate ub = fit_ubebs_gains(sys, make_ensemble(sys, set, es), chi);
    out.put("gain_alpha1.tsv", gain_plot_tsv(ub.alpha1, 20.0));
    cert = ub;
  } else if (estimate == "iiss") {
    const Ensemble training = make_ensemble(sys, set, es);
    const UbebsCertificate ub = fit_ubebs_gains(sys, training, chi);
    const IissCertificate ic = fit_iiss_certificate(sys, training, chi, ub.alpha1);
    out.put("gain_rho.tsv", gain_plot_tsv(ic.rho, 20.0));
    out.put("gain_chi.tsv", gain_plot_tsv(ic.chi, 20.0));
    cert = ic;
  } else {
    throw std::invalid_argument("fit supports --estimate 0guas, ubebs or iiss");
  }
  out.put_json("certificate.json", to_json(*cert));
  report["certificate_file"] = "certificate.json";
  out.put_json("report.json", report);
  out.flush();
  std::cout << "fitted " << estimate << " certificate; wrote " << cfg.out_dir() << "/certificate.json\n";
  return kOk;
}

int cmd_falsify(const Config& cfg, const std::string& target, std::optional<std::size_t> budget) {
  const SwitchedSystem sys = cfg.system();
  const json& fz = cfg.doc["falsify"];
  Bundle out(cfg.out_dir());
  json report = report_header(cfg.doc, "falsify");
  int code = kOk;
  if (target.empty()) {
    DestabilizeSpec ds;
    ds.growth_target = fz["growth_target"];
    ds.T_max = fz["T_max"];
    ds.seed = cfg.seed();
    ds.sim = cfg.sim();
    const auto w = find_destabilizing(sys, ds);
    report["target"] = "destabilizing switching";
    report["witness"] = w ? to_json(*w) : json(nullptr);
    if (w) {
      out.put_json("witness_signal.json", to_json(w->sigma));
      out.put_trajectory("witness_trajectory.csv", simulate(sys, w->x0, w->t0, InputSignal::zero(sys.input_dim()), w->sigma, w->T, ds.sim));
      std::cout << "destabilizing witness: " << w->policy.describe() << ", growth " << w->growth << " at T=" << w->T << "\n";
      code = kViolated;
    } else {
      std::cout << "no destabilizing signal found (absence of a witness is not a proof)\n";
    }
  } else {
    const EstimateCertificate cert =
        certificate_from_json(read_json_file(target), [&](const std::string& n) { return storage_by_name(n, cfg); });
    SearchSpec ss;
    ss.budget = budget ? *budget : fz["budget"].get<std::size_t>();
    ss.seed = cfg.seed();
    const EnsembleSpec es = cfg.ensemble();
    ss.horizon = es.horizon;
    ss.r_min = es.r_min;
    ss.r_max = es.r_max;
    ss.input_bound = es.input_bound;
    ss.sim = cfg.sim();
    const CheckReport rep = search_certificate_violation(sys, cfg.signal_set(), cert, ss, cfg.check());
    report["target"] = target;
    report["report"] = to_json(rep);
    if (rep.violated()) {
      report["witness_files"] = {"witness_signal.json", "witness_trajectory.csv"};
      put_witness_files(out, sys, rep, ss.sim);
    }
    print_report(rep);
    code = verdict_code(rep);
  }
  out.put_json("report.json", report);
  out.flush();
  return code;
}

int cmd_scenario(const Config& cfg, const std::string& name) {
  Bundle out(cfg.out_dir() + "/" + name);
  const ScenarioResult res = run_scenario(name, cfg, out);
  json report = report_header(cfg.doc, "scenario");
  report["scenario"] = name;
  json asserts = json::array();
  for (const auto& a : res.assertions) {
    asserts.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
  }
  report["assertions"] = asserts;
  report["pass"] = res.pass();
  report["reports"] = res.reports;
  out.put_json("report.json", report);
  out.flush();
  if (!res.pass()) {
    for (const auto& a : res.assertions)
      if (!a.pass) std::cerr << "scenario " << name << " failed: " << a.name << "\n";
    return kViolated;
  }
  std::cout << "scenario " << name << ": all assertions pass; bundle in " << out.dir() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iiss: simulation and empirical stability certification for switched systems"};
  app.require_subcommand(0, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for every random draw");
  app.add_option("--out", out, "Output directory");
  app.add_option("--tol", tol, "Relative check tolerance tol_rel")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", print_config, "Print the default configuration and exit");
  app.fallthrough();

  auto* sim = app.add_subcommand("simulate", "Simulate one trajectory from the [simulate] section");

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "Check a certificate on an ensemble");
  check->add_option("--estimate", ca.estimate, "iiss|ubebs|0guas|beics|dissipation|output-pe|gronwall")
      ->required()
      ->check(CLI::IsMember({"iiss", "ubebs", "0guas", "beics", "dissipation", "output-pe", "gronwall"}));
  check->add_option("--certificate", ca.certificate, "Certificate JSON (chi gain JSON for beics)");
  check->add_option("--eps", ca.eps, "output-pe annulus eps");
  check->add_option("--window", ca.window, "output-pe window length T");
  check->add_option("--r", ca.r, "output-pe threshold (default: half the measured minimum)");
  check->add_option("--eps-conv", ca.eps_conv, "beics convergence radius");
  check->add_option("--t-conv", ca.t_conv, "beics convergence time (default: pilot run)");

  std::string fit_estimate;
  double chi_slope = 1.0;
  double inflation = 1.5;
  std::size_t training_factor = 4;
  auto* fit = app.add_subcommand("fit", "Fit a certificate from an ensemble");
  fit->add_option("--estimate", fit_estimate, "0guas|ubebs|iiss")->required()->check(CLI::IsMember({"0guas", "ubebs", "iiss"}));
  fit->add_option("--chi-slope", chi_slope, "chi = max(slope * s, gamma)")->check(CLI::PositiveNumber);
  fit->add_option("--inflation", inflation, "0guas: scale the fitted beta for out-of-sample margin")->check(CLI::Range(1.0, 1e6));
  fit->add_option("--training-factor", training_factor, "Training ensemble size as a multiple of ensemble.count")
      ->check(CLI::Range(1, 100));

  std::string target;
  std::optional<std::size_t> budget;
  auto* fals = app.add_subcommand("falsify", "Search for a certificate violation or destabilizing switching");
  fals->add_option("--target", target, "Certificate JSON; without it, search for destabilizing switching");
  fals->add_option("--budget", budget, "Number of candidate runs");

  std::string scenario;
  auto* scen = app.add_subcommand("scenario", "Run a canonical scenario");
  scen->add_option("name", scenario, "prop4_counterexample|inverter_iiss|inverter_beics|inverter_not_iss_probe|gronwall_demo")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (print_config) {
      std::cout << default_config().dump(2) << "\n";
      return kOk;
    }
    const Config cfg = load_config(config_path, seed, out, tol);
    if (*sim) return cmd_simulate(cfg);
    if (*check) return cmd_check(cfg, ca);
    if (*fit) return cmd_fit(cfg, fit_estimate, chi_slope, inflation, training_factor);
    if (*fals) return cmd_falsify(cfg, target, budget);
    if (*scen) return cmd_scenario(cfg, scenario);
    std::cout << app.help();
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
}
