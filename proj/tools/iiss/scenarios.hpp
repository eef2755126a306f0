#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "output.hpp"

namespace iiss::cli {

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ScenarioResult {
  std::string name;
  std::vector<Assertion> assertions;
  json reports = json::object();

  bool pass() const;
};

const std::vector<std::string>& scenario_names();

/// Throws std::invalid_argument for an unknown name.
ScenarioResult run_scenario(const std::string& name, const Config& cfg, Bundle& out);

}  // namespace iiss::cli
