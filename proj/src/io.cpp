#include "fibredrive/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace fibredrive {

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"params", c.params},
                     {"q0", c.q0},
                     {"v0", c.v0},
                     {"t_end", c.t_end},
                     {"dt", c.dt},
                     {"u", c.u},
                     {"tol_kernel", c.tol_kernel},
                     {"tol_class", c.tol_class},
                     {"tol_residual", c.tol_residual},
                     {"seed", c.seed},
                     {"out", c.out}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  c.model = j.value("model", c.model);
  c.params = j.value("params", c.params);
  c.q0 = j.value("q0", c.q0);
  c.v0 = j.value("v0", c.v0);
  c.t_end = j.value("t_end", c.t_end);
  c.dt = j.value("dt", c.dt);
  c.u = j.value("u", c.u);
  c.tol_kernel = j.value("tol_kernel", c.tol_kernel);
  c.tol_class = j.value("tol_class", c.tol_class);
  c.tol_residual = j.value("tol_residual", c.tol_residual);
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j.get<RunConfig>();
}

nlohmann::json report_to_json(const std::string& model_name, int n,
                              const StabilisationReport& rep) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const StabilisationRound& r : rep.rounds) {
    nlohmann::json cs = nlohmann::json::array();
    for (const ConstraintFunction& c : r.new_constraints)
      cs.push_back({{"name", c.name},
                    {"level", c.level},
                    {"provenance", c.provenance},
                    {"identically_zero", c.identically_zero}});
    nlohmann::json rels = nlohmann::json::array();
    for (const Eigen::VectorXd& row : r.multiplier_relations) {
      std::vector<double> v(row.data(), row.data() + row.size());
      rels.push_back(v);
    }
    rounds.push_back({{"level", r.level},
                      {"new_constraints", cs},
                      {"multiplier_relations", rels}});
  }

  nlohmann::json multipliers;
  multipliers["count"] = rep.kernel_dim;
  multipliers["free"] = rep.free_multipliers;
  std::vector<int> det;
  nlohmann::json det_samples = nlohmann::json::object();
  for (const auto& [mu, field] : rep.determined_u) {
    det.push_back(mu);
    std::vector<double> vals;
    for (const ChartPoint& p : rep.final_samples)
      vals.push_back(field_value(field, p));
    det_samples[std::to_string(mu)] = vals;
  }
  multipliers["determined"] = det;
  multipliers["determined_values_at_final_samples"] = det_samples;

  nlohmann::json samples = nlohmann::json::array();
  for (const ChartPoint& p : rep.final_samples) {
    std::vector<double> row = to_std(p.q);
    std::vector<double> vv = to_std(p.v);
    row.insert(row.end(), vv.begin(), vv.end());
    samples.push_back(row);
  }

  return nlohmann::json{{"model", model_name},
                        {"n", n},
                        {"kernel_dim", rep.kernel_dim},
                        {"status", to_string(rep.status)},
                        {"rounds", rounds},
                        {"multipliers", multipliers},
                        {"max_primary_abs", rep.max_primary_abs},
                        {"final_tangency_max", rep.final_tangency_max},
                        {"final_samples", samples}};
}

namespace {
const char* to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::completed:
      return "completed";
    case TrajectoryStatus::domain_exit:
      return "domain_exit";
    case TrajectoryStatus::non_finite:
      return "non_finite";
  }
  return "unknown";
}
}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int n) {
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",q_" << i;
  for (int i = 1; i <= n; ++i) os << ",v_" << i;
  os << ",energy,el_residual";
  for (const std::string& name : traj.constraint_names) os << "," << name;
  os << "\r\n";

  os << std::setprecision(17);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    os << traj.times[k];
    const ChartPoint& p = traj.states[k];
    for (int i = 0; i < n; ++i) os << "," << p.q[i];
    for (int i = 0; i < n; ++i) os << "," << p.v[i];
    os << "," << traj.energy[k] << "," << traj.el_residual[k];
    for (const auto& col : traj.constraint_residuals) os << "," << col[k];
    os << "\r\n";
  }
}

nlohmann::json trajectory_summary(const Trajectory& traj) {
  nlohmann::json j;
  j["status"] = to_string(traj.status);
  j["steps"] = traj.times.empty() ? 0 : traj.times.size() - 1;
  if (!traj.times.empty()) {
    j["t_final"] = traj.times.back();
    j["final_q"] = to_std(traj.states.back().q);
    j["final_v"] = to_std(traj.states.back().v);
    double drift = 0.0;
    for (double e : traj.energy) drift = std::max(drift, std::abs(e - traj.energy.front()));
    j["max_energy_drift"] = drift;
    double el = 0.0;
    for (double r : traj.el_residual) el = std::max(el, r);
    j["max_el_residual"] = el;
    nlohmann::json cres = nlohmann::json::object();
    for (std::size_t c = 0; c < traj.constraint_names.size(); ++c) {
      double m = 0.0;
      for (double r : traj.constraint_residuals[c]) m = std::max(m, r);
      cres[traj.constraint_names[c]] = m;
    }
    j["max_constraint_residuals"] = cres;
  }
  return j;
}

}  // namespace fibredrive
