#include "config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace iiss::cli {

namespace {

void merge(json& base, const json& over, const std::string& path) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("unknown config key " + key);
    json& slot = base[it.key()];
    // signal_set, input and sigma are replaced whole
    if (slot.is_object() && it->is_object() && key != "signal_set" && key != "simulate.input" && key != "simulate.sigma") {
      merge(slot, *it, key);
    } else {
      slot = *it;
    }
  }
}

InputFamily family_from(const std::string& s) {
  if (s == "zero") return InputFamily::Zero;
  if (s == "piecewise_constant") return InputFamily::PiecewiseConstant;
  if (s == "exp_decay") return InputFamily::ExpDecay;
  if (s == "mixed") return InputFamily::Mixed;
  throw std::invalid_argument("unknown input family " + s);
}

}  // namespace

json default_config() {
  return json::parse(R"({
  "system": {
    "name": "inverter",
    "inverter": {"L1": 1.0, "L2": 1.0, "C1": 1.0, "C2": 1.0, "a_min": 0.5, "a_max": 2.0,
                 "r_min": 0.5, "r_max": 1.5, "profile": "sinusoidal", "a_const": 0.5, "r_const": 1.0}
  },
  "signal_set": {"kind": "dwell_time", "d_min": 0.1, "d_max": 1.0, "modes": [1, 2]},
  "ensemble": {"count": 100, "seed": 1, "r_min": 0.01, "r_max": 10.0, "horizon": 20.0, "t0": 0.0,
               "input": "mixed", "input_bound": 5.0, "input_rate": 1.0, "piece_min": 0.2, "piece_max": 2.0},
  "sim": {"h_step": 0.001, "blow_up_bound": 1e9},
  "tolerances": {"tol_rel": 1e-6},
  "simulate": {"x0": [1.0, 0.0, 0.0, 0.0], "t0": 0.0, "T": 10.0,
               "input": {"kind": "zero", "dimension": 1}, "sigma": null},
  "falsify": {"budget": 200, "growth_target": 10.0, "T_max": 5.0, "k": 2},
  "seed": 1,
  "out": "iiss_out"
})");
}

Config load_config(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
                   std::optional<double> tol) {
  Config cfg{default_config()};
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config " + path);
    json user;
    try {
      user = json::parse(is);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config " + path + ": " + e.what());
    }
    if (!user.is_object()) throw std::invalid_argument("config " + path + " must be a JSON object");
    merge(cfg.doc, user, "");
  }
  if (seed) {
    cfg.doc["seed"] = *seed;
    cfg.doc["ensemble"]["seed"] = *seed;
  }
  if (out) cfg.doc["out"] = *out;
  if (tol) cfg.doc["tolerances"]["tol_rel"] = *tol;
  if (!(cfg.doc["tolerances"]["tol_rel"].get<double>() > 0.0)) throw std::invalid_argument("tol_rel must be positive");
  if (!(cfg.doc["sim"]["h_step"].get<double>() > 0.0)) throw std::invalid_argument("h_step must be positive");
  return cfg;
}

std::string Config::system_name() const { return doc["system"]["name"].get<std::string>(); }

InverterParams Config::inverter() const {
  const json& j = doc["system"]["inverter"];
  InverterParams p;
  p.L1 = j["L1"];
  p.L2 = j["L2"];
  p.C1 = j["C1"];
  p.C2 = j["C2"];
  p.a_min = j["a_min"];
  p.a_max = j["a_max"];
  p.r_min = j["r_min"];
  p.r_max = j["r_max"];
  const std::string prof = j["profile"];
  if (prof != "sinusoidal" && prof != "constant") throw std::invalid_argument("unknown load profile " + prof);
  p.profile = prof == "constant" ? LoadProfile::Constant : LoadProfile::Sinusoidal;
  p.a_const = j["a_const"];
  p.r_const = j["r_const"];
  p.validate();
  return p;
}

SwitchedSystem Config::system() const {
  const std::string name = system_name();
  if (name == "inverter") return make_inverter(inverter());
  if (name == "prop4_pair") return make_prop4_pair();
  throw std::invalid_argument("unknown system " + name + " (expected inverter or prop4_pair)");
}

SignalSetSpec Config::signal_set() const { return set_from_json(doc["signal_set"]); }

SimOptions Config::sim() const {
  SimOptions s;
  s.h_step = doc["sim"]["h_step"];
  s.blow_up_bound = doc["sim"]["blow_up_bound"];
  return s;
}

EnsembleSpec Config::ensemble() const {
  const json& j = doc["ensemble"];
  EnsembleSpec e;
  e.count = j["count"];
  e.seed = j["seed"];
  e.r_min = j["r_min"];
  e.r_max = j["r_max"];
  e.horizon = j["horizon"];
  e.t0 = j["t0"];
  e.input = family_from(j["input"]);
  e.input_bound = j["input_bound"];
  e.input_rate = j["input_rate"];
  e.piece_min = j["piece_min"];
  e.piece_max = j["piece_max"];
  e.sim = sim();
  return e;
}

CheckOptions Config::check() const { return {doc["tolerances"]["tol_rel"].get<double>()}; }

std::uint64_t Config::seed() const { return doc["seed"].get<std::uint64_t>(); }

std::string Config::out_dir() const { return doc["out"].get<std::string>(); }

StorageFn storage_by_name(const std::string& name, const Config& cfg) {
  if (name == "half_norm_sq") return [](double, const Vec& x, Mode) { return 0.5 * x.squaredNorm(); };
  if (name == "inverter_energy" || name == "inverter_sqrt_energy") {
    const Mat P = cfg.inverter().P();
    if (name == "inverter_energy") return [P](double, const Vec& x, Mode) { return 0.5 * x.dot(P * x); };
    return [P](double, const Vec& x, Mode) { return std::sqrt(0.5 * x.dot(P * x)); };
  }
  if (name == "prop4_sqrt_lyapunov") {
    const SwitchedSystem sys = make_prop4_pair();
    std::vector<Mat> Ps;
    for (const Mat& A : sys.linear_A()) Ps.push_back(lyapunov_matrix(A, Mat::Identity(2, 2)));
    return [Ps](double, const Vec& x, Mode i) { return std::sqrt(x.dot(Ps.at(static_cast<std::size_t>(i - 1)) * x)); };
  }
  return {};
}

}  // namespace iiss::cli
