#include "output.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace iiss::cli {

void Bundle::put(const std::string& name, std::string content) { files_[name] = std::move(content); }

void Bundle::put_json(const std::string& name, const json& j) { put(name, j.dump(2) + "\n"); }

void Bundle::put_trajectory(const std::string& name, const Trajectory& traj) {
  std::ostringstream os;
  write_csv(os, traj);
  put(name, os.str());
}

void Bundle::flush() const {
  namespace fs = std::filesystem;
  for (const auto& [name, content] : files_) {
    const fs::path p = fs::path(dir_) / name;
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + p.string());
  }
}

std::string trajectory_plot_tsv(const Trajectory& traj, const StorageFn& V) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "t\tnorm" << (V ? "\tV" : "") << "\tmode\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << traj.times[k] << '\t' << traj.norm_at(k);
    if (V) os << '\t' << V(traj.times[k], traj.state(k), traj.modes[k]);
    os << '\t' << traj.modes[k] << '\n';
  }
  return os.str();
}

std::string gain_plot_tsv(const MonotoneFn& fn, double s_max, int points) {
  if (points < 2) throw std::invalid_argument("gain plot needs at least two points");
  std::ostringstream os;
  os << std::setprecision(12) << "s\tvalue\n";
  for (int k = 0; k < points; ++k) {
    const double s = s_max * k / (points - 1);
    os << s << '\t' << fn(s) << '\n';
  }
  return os.str();
}

json report_header(const json& config, const std::string& command) {
  return {{"tool", "iiss"},
          {"version", kVersion},
          {"command", command},
          {"config_hash", config_hash(config)},
          {"seeds", {{"seed", config["seed"]}, {"ensemble", config["ensemble"]["seed"]}}}};
}

}  // namespace iiss::cli
