#pragma once

#include <optional>
#include <string>

#include "iiss/certify.hpp"
#include "iiss/serialize.hpp"
#include "iiss/systems.hpp"

namespace iiss::cli {

/// Parsed run configuration. Every field has a default; a JSON file
/// overrides any subset of them.
struct Config {
  json doc;  ///< merged document, defaults included

  std::string system_name() const;
  SwitchedSystem system() const;
  InverterParams inverter() const;
  SignalSetSpec signal_set() const;
  EnsembleSpec ensemble() const;
  SimOptions sim() const;
  CheckOptions check() const;
  std::uint64_t seed() const;
  std::string out_dir() const;
};

/// The full default document, as printed by --print-config.
json default_config();

/// Defaults, overridden by the file (if any) and then by the flags.
Config load_config(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
                   std::optional<double> tol);

/// Storage functions known to the CLI by name.
StorageFn storage_by_name(const std::string& name, const Config& cfg);

}  // namespace iiss::cli
