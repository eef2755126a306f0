#pragma once

// JSON forms of gains, signals, inputs, certificates and reports.

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "iiss/certify.hpp"
#include "iiss/comparison.hpp"
#include "iiss/falsify.hpp"
#include "iiss/signals.hpp"

namespace iiss {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

/// Non-finite doubles are written as the strings "inf", "-inf", "nan".
json number(double v);
double read_number(const json& j);

json to_json(const MonotoneFn& fn);
MonotoneFn gain_from_json(const json& j);

json to_json(const KLFn& fn);
KLFn kl_from_json(const json& j);

json to_json(const SwitchingSignal& sigma);
SwitchingSignal signal_from_json(const json& j);

json to_json(const SignalSetSpec& set);
SignalSetSpec set_from_json(const json& j);

json to_json(const InputSignal& u);
InputSignal input_from_json(const json& j);

/// Maps a storage name to its evaluator when reading dissipation
/// certificates.
using StorageResolver = std::function<StorageFn(const std::string& name)>;

/// {"kind": "iiss" | "ubebs" | "0guas" | "dissipation" | "gronwall", ...}
json to_json(const EstimateCertificate& cert);
EstimateCertificate certificate_from_json(const json& j, const StorageResolver& storage = {});

json to_json(const Witness& w);
json to_json(const CheckReport& rep);
json to_json(const SwitchPolicy& p);
json to_json(const DestabilizingWitness& w);

/// 16 hex digits of FNV-1a over the compact dump.
std::string config_hash(const json& config);

}  // namespace iiss
