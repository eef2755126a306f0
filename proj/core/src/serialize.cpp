#include "iiss/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace iiss {

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v(k)));
  return a;
}

Eigen::VectorXd vec_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = read_number(j[k]);
  return v;
}

std::vector<double> doubles(const json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(read_number(x));
  return out;
}

json doubles_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("JSON object lacks \"") + key + "\"");
  return j.at(key);
}

json modes_json(const std::vector<Mode>& modes) { return json(modes); }

}  // namespace

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::invalid_argument("expected a number, got " + j.dump());
}

json to_json(const MonotoneFn& fn) {
  return {{"class", fn.gain_class() == GainClass::K ? "K" : "KInf"},
          {"knots", doubles_json(fn.knots())},
          {"values", doubles_json(fn.values())},
          {"tail_slope", number(fn.tail_slope())}};
}

MonotoneFn gain_from_json(const json& j) {
  const std::string cls = j.value("class", std::string("KInf"));
  if (cls != "K" && cls != "KInf") throw std::invalid_argument("unknown gain class " + cls);
  return MonotoneFn(doubles(field(j, "knots")), doubles(field(j, "values")), read_number(field(j, "tail_slope")),
                    cls == "K" ? GainClass::K : GainClass::KInf);
}

json to_json(const KLFn& fn) {
  json rows = json::array();
  for (const auto& row : fn.values()) rows.push_back(doubles_json(row));
  return {{"class", "KL"},
          {"r_knots", doubles_json(fn.r_knots())},
          {"t_knots", doubles_json(fn.t_knots())},
          {"values", rows},
          {"r_tail_slope", number(fn.r_tail_slope())},
          {"t_decay_rate", number(fn.t_decay_rate())}};
}

KLFn kl_from_json(const json& j) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : field(j, "values")) rows.push_back(doubles(row));
  return KLFn(doubles(field(j, "r_knots")), doubles(field(j, "t_knots")), std::move(rows),
              read_number(field(j, "r_tail_slope")), read_number(field(j, "t_decay_rate")));
}

json to_json(const SwitchingSignal& sigma) {
  return {{"switch_times", doubles_json(sigma.switch_times())},
          {"modes", modes_json(sigma.modes())},
          {"horizon", number(sigma.horizon())}};
}

SwitchingSignal signal_from_json(const json& j) {
  return SwitchingSignal(doubles(field(j, "switch_times")), field(j, "modes").get<std::vector<Mode>>(),
                         j.contains("horizon") ? read_number(j.at("horizon")) : 0.0);
}

json to_json(const SignalSetSpec& set) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FiniteFamily>) {
          json members = json::array();
          for (const auto& m : k.members) members.push_back(to_json(m));
          return {{"kind", "finite_family"}, {"members", members}};
        } else if constexpr (std::is_same_v<K, DwellTime>) {
          return {{"kind", "dwell_time"}, {"d_min", number(k.d_min)}, {"d_max", number(k.d_max)}, {"modes", k.modes}};
        } else if constexpr (std::is_same_v<K, ConcatClosure>) {
          return {{"kind", "concat_closure"}, {"base", to_json(*k.base)}, {"k", k.depth}};
        } else {
          return {{"kind", "arbitrary"}, {"modes", k.modes}};
        }
      },
      set.kind());
}

SignalSetSpec set_from_json(const json& j) {
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "finite_family") {
    std::vector<SwitchingSignal> members;
    for (const auto& m : field(j, "members")) members.push_back(signal_from_json(m));
    return SignalSetSpec::finite_family(std::move(members));
  }
  if (kind == "dwell_time")
    return SignalSetSpec::dwell_time(read_number(field(j, "d_min")), read_number(field(j, "d_max")),
                                     field(j, "modes").get<std::vector<Mode>>());
  if (kind == "concat_closure") return SignalSetSpec::concat_closure(set_from_json(field(j, "base")), field(j, "k").get<int>());
  if (kind == "arbitrary") return SignalSetSpec::arbitrary(field(j, "modes").get<std::vector<Mode>>());
  throw std::invalid_argument("unknown signal set kind " + kind);
}

json to_json(const InputSignal& u) {
  switch (u.kind()) {
    case InputSignal::Kind::Zero:
      return {{"kind", "zero"}, {"dimension", u.dimension()}};
    case InputSignal::Kind::PiecewiseConstant: {
      json values = json::array();
      for (const auto& v : u.values()) values.push_back(vec_json(v));
      return {{"kind", "piecewise_constant"}, {"times", doubles_json(u.times())}, {"values", values}};
    }
    case InputSignal::Kind::ExpDecay:
      return {{"kind", "exp_decay"}, {"amplitude", vec_json(u.amplitude())}, {"rate", number(u.rate())}};
    case InputSignal::Kind::Sinusoid:
      return {{"kind", "sinusoid"},
              {"amplitude", vec_json(u.amplitude())},
              {"omega", number(u.rate())},
              {"phase", number(u.phase())}};
    case InputSignal::Kind::Pulse:
      return {{"kind", "pulse"}, {"amplitude", vec_json(u.amplitude())}, {"t_on", number(u.t_on())}, {"t_off", number(u.t_off())}};
  }
  throw std::logic_error("unreachable input kind");
}

InputSignal input_from_json(const json& j) {
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "zero") return InputSignal::zero(field(j, "dimension").get<Eigen::Index>());
  if (kind == "piecewise_constant") {
    std::vector<Eigen::VectorXd> values;
    for (const auto& v : field(j, "values")) values.push_back(vec_from(v));
    return InputSignal::piecewise_constant(doubles(field(j, "times")), std::move(values));
  }
  if (kind == "exp_decay") return InputSignal::exp_decay(vec_from(field(j, "amplitude")), read_number(field(j, "rate")));
  if (kind == "sinusoid")
    return InputSignal::sinusoid(vec_from(field(j, "amplitude")), read_number(field(j, "omega")),
                                 j.contains("phase") ? read_number(j.at("phase")) : 0.0);
  if (kind == "pulse")
    return InputSignal::pulse(vec_from(field(j, "amplitude")), read_number(field(j, "t_on")), read_number(field(j, "t_off")));
  throw std::invalid_argument("unknown input kind " + kind);
}

json to_json(const EstimateCertificate& cert) {
  return std::visit(
      [](const auto& c) -> json {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, IissCertificate>) {
          return {{"kind", "iiss"}, {"beta", to_json(c.beta)}, {"rho", to_json(c.rho)}, {"chi", to_json(c.chi)}};
        } else if constexpr (std::is_same_v<C, UbebsCertificate>) {
          return {{"kind", "ubebs"},
                  {"alpha1", to_json(c.alpha1)},
                  {"alpha2", to_json(c.alpha2)},
                  {"alpha", to_json(c.alpha)},
                  {"c", number(c.c)}};
        } else if constexpr (std::is_same_v<C, ZeroGuasCertificate>) {
          return {{"kind", "0guas"}, {"beta", to_json(c.beta)}};
        } else if constexpr (std::is_same_v<C, DissipationCertificate>) {
          json j = {{"kind", "dissipation"},
                    {"storage", c.storage},
                    {"phi1", to_json(c.phi1)},
                    {"phi2", to_json(c.phi2)},
                    {"alpha", to_json(c.alpha)}};
          j["alpha3"] = c.alpha3 ? to_json(*c.alpha3) : json(nullptr);
          return j;
        } else {
          return {{"kind", "gronwall"},  {"beta", to_json(c.beta)}, {"eta", number(c.eta)}, {"kappa", number(c.kappa)},
                  {"L", number(c.L)},     {"chi", to_json(c.chi)},   {"r", number(c.r)}};
        }
      },
      cert);
}

EstimateCertificate certificate_from_json(const json& j, const StorageResolver& storage) {
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "iiss")
    return IissCertificate{kl_from_json(field(j, "beta")), gain_from_json(field(j, "rho")), gain_from_json(field(j, "chi"))};
  if (kind == "ubebs") {
    UbebsCertificate c{gain_from_json(field(j, "alpha1")), gain_from_json(field(j, "alpha2")),
                       gain_from_json(field(j, "alpha")), read_number(field(j, "c"))};
    validate(c);
    return c;
  }
  if (kind == "0guas") return ZeroGuasCertificate{kl_from_json(field(j, "beta"))};
  if (kind == "dissipation") {
    const std::string name = field(j, "storage").get<std::string>();
    if (!storage) throw std::invalid_argument("dissipation certificate needs a storage resolver");
    StorageFn V = storage(name);
    if (!V) throw std::invalid_argument("unknown storage function " + name);
    std::optional<MonotoneFn> a3;
    if (j.contains("alpha3") && !j.at("alpha3").is_null()) a3 = gain_from_json(j.at("alpha3"));
    return DissipationCertificate{std::move(V), name, gain_from_json(field(j, "phi1")), gain_from_json(field(j, "phi2")),
                                  gain_from_json(field(j, "alpha")), std::move(a3)};
  }
  if (kind == "gronwall") {
    GronwallCertificate c{kl_from_json(field(j, "beta")), read_number(field(j, "eta")), read_number(field(j, "kappa")),
                          read_number(field(j, "L")), gain_from_json(field(j, "chi")), read_number(field(j, "r"))};
    validate(c);
    return c;
  }
  throw std::invalid_argument("unknown certificate kind " + kind);
}

json to_json(const Witness& w) {
  return {{"run", w.run},
          {"seed", w.seed},
          {"x0", vec_json(w.x0)},
          {"t0", number(w.t0)},
          {"T", number(w.T)},
          {"input", to_json(w.u)},
          {"sigma", to_json(w.sigma)},
          {"t", number(w.t)},
          {"t_ref", number(w.t_ref)},
          {"lhs", number(w.lhs)},
          {"rhs", number(w.rhs)},
          {"inequality", w.inequality}};
}

json to_json(const CheckReport& rep) {
  json values = json::object();
  for (const auto& [k, v] : rep.values) values[k] = number(v);
  json j = {{"check", rep.check},
            {"verdict", to_string(rep.verdict)},
            {"ensemble", rep.ensemble},
            {"runs", rep.runs},
            {"points", rep.points},
            {"worst_margin", number(rep.worst_margin)},
            {"vacuous", rep.vacuous},
            {"notes", rep.notes},
            {"values", values}};
  j["witness"] = rep.witness ? to_json(*rep.witness) : json(nullptr);
  return j;
}

json to_json(const SwitchPolicy& p) {
  json j = {{"describe", p.describe()}, {"delta_guard", number(p.delta_guard)}, {"max_dwell", number(p.max_dwell)}};
  switch (p.kind) {
    case PolicyKind::Constant:
      j["kind"] = "constant";
      j["mode"] = p.mode;
      break;
    case PolicyKind::QuadrantRule:
      j["kind"] = "quadrant_rule";
      j["quadrant"] = p.quadrant;
      break;
    case PolicyKind::GrowthGreedy:
      j["kind"] = "growth_greedy";
      j["weighted"] = p.weight.size() > 0;
      break;
    case PolicyKind::RandomDwell:
      j["kind"] = "random_dwell";
      j["d_min"] = number(p.d_min);
      j["d_max"] = number(p.d_max);
      j["seed"] = p.seed;
      break;
  }
  return j;
}

json to_json(const DestabilizingWitness& w) {
  return {{"policy_index", w.policy_index},
          {"x0_index", w.x0_index},
          {"policy", to_json(w.policy)},
          {"x0", vec_json(w.x0)},
          {"t0", number(w.t0)},
          {"T", number(w.T)},
          {"growth", number(w.growth)},
          {"sigma", to_json(w.sigma)},
          {"replay_growth", number(w.replay_growth)},
          {"replay_rel_error", number(w.replay_rel_error)}};
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace iiss
