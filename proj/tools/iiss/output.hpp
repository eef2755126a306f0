#pragma once

#include <map>
#include <string>

#include "iiss/certify.hpp"
#include "iiss/integrator.hpp"
#include "iiss/serialize.hpp"

namespace iiss::cli {

/// Collects every output file in memory and writes them in one pass, in
/// path order, so a bundle is either complete or absent.
class Bundle {
 public:
  explicit Bundle(std::string dir) : dir_(std::move(dir)) {}

  void put(const std::string& name, std::string content);
  void put_json(const std::string& name, const json& j);
  void put_trajectory(const std::string& name, const Trajectory& traj);
  const std::string& dir() const { return dir_; }

  /// Creates the directory and writes all files; throws on I/O errors.
  void flush() const;

 private:
  std::string dir_;
  std::map<std::string, std::string> files_;
};

/// Columns t, norm, V (if given), mode.
std::string trajectory_plot_tsv(const Trajectory& traj, const StorageFn& V = {});

/// Columns s, value at `points` evenly spaced points on [0, s_max].
std::string gain_plot_tsv(const MonotoneFn& fn, double s_max, int points = 200);

/// Report header shared by every command: tool version, config hash, seeds.
json report_header(const json& config, const std::string& command);

}  // namespace iiss::cli
