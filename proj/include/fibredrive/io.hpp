#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fibredrive/dynamics.hpp"

namespace fibredrive {

/// One experiment description. Serialises to flat JSON with the field names
/// as keys; command-line flags override file values.
struct RunConfig {
  std::string model;
  std::map<std::string, double> params;  // mass, dim, epsilon, ...
  std::vector<double> q0, v0;
  double t_end = 1.0;
  double dt = 1e-3;
  std::vector<double> u;  // values for free multipliers
  double tol_kernel = 1e-8;
  double tol_class = 1e-7;
  double tol_residual = 1e-8;
  std::uint64_t seed = 42;
  std::string out;

  bool operator==(const RunConfig&) const = default;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_config(const std::string& path);

nlohmann::json report_to_json(const std::string& model_name, int n,
                              const StabilisationReport& rep);

/// RFC 4180 CSV with header t, q_1..q_n, v_1..v_n, energy, el_residual and
/// one column per logged constraint.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int n);

nlohmann::json trajectory_summary(const Trajectory& traj);

}  // namespace fibredrive
