// fibredrive command-line front end: model analysis, trajectory integration
// and calculus verification with machine-readable outputs.
//
// Exit codes: 0 success, 1 usage/config error, 2 algorithmic non-completion,
// 3 domain exit during integration.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "fibredrive/dynamics.hpp"
#include "fibredrive/fibrecalc.hpp"
#include "fibredrive/io.hpp"
#include "fibredrive/models.hpp"

namespace fd = fibredrive;

namespace {

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

struct FlagValues {
  std::string config, model, q0, v0, u, out;
  double mass = 0.0, dim = 0.0, t_end = 0.0, dt = 0.0;
  double tol_kernel = 0.0, tol_class = 0.0;
  std::uint64_t seed = 0;
};

void add_common_flags(CLI::App* cmd, FlagValues& f) {
  cmd->add_option("--model", f.model, "registry model name");
  cmd->add_option("--mass", f.mass, "mass parameter override");
  cmd->add_option("--dim", f.dim, "dimension parameter override");
  cmd->add_option("--q0", f.q0, "initial base point a,b,...");
  cmd->add_option("--v0", f.v0, "initial fibre point a,b,...");
  cmd->add_option("--t-end", f.t_end, "integration time span");
  cmd->add_option("--dt", f.dt, "integration step");
  cmd->add_option("--u", f.u, "values for free multipliers a,b,...");
  cmd->add_option("--tol-kernel", f.tol_kernel, "kernel SVD threshold");
  cmd->add_option("--tol-class", f.tol_class, "constraint classification tolerance");
  cmd->add_option("--seed", f.seed, "RNG seed for randomized diagnostics");
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--out", f.out, "output path");
}

fd::RunConfig build_config(const CLI::App* cmd, const FlagValues& f) {
  fd::RunConfig cfg;
  if (cmd->count("--config")) cfg = fd::load_config(f.config);
  if (cmd->count("--model")) cfg.model = f.model;
  if (cmd->count("--mass")) cfg.params["mass"] = f.mass;
  if (cmd->count("--dim")) cfg.params["dim"] = f.dim;
  if (cmd->count("--q0")) cfg.q0 = parse_number_list(f.q0);
  if (cmd->count("--v0")) cfg.v0 = parse_number_list(f.v0);
  if (cmd->count("--t-end")) cfg.t_end = f.t_end;
  if (cmd->count("--dt")) cfg.dt = f.dt;
  if (cmd->count("--u")) cfg.u = parse_number_list(f.u);
  if (cmd->count("--tol-kernel")) cfg.tol_kernel = f.tol_kernel;
  if (cmd->count("--tol-class")) cfg.tol_class = f.tol_class;
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--out")) cfg.out = f.out;
  return cfg;
}

fd::StabilisationReport run_stabilisation(const fd::ModelRegistryEntry& entry,
                                          const fd::RunConfig& cfg,
                                          fd::SecondOrderField& d0_out) {
  fd::SecondOrderField x0 = fd::zero_second_order_field(entry.model.n);
  d0_out = fd::primary_field_D0(entry.model, entry.link, x0);
  fd::StabilisationOptions opts;
  opts.tol_class = cfg.tol_class;
  return fd::stabilise(entry.model, entry.link, d0_out, entry.default_seeds, opts);
}

int cmd_analyze(const fd::RunConfig& cfg, bool as_json) {
  fd::ModelRegistryEntry entry = fd::make_model(cfg.model, cfg.params);
  fd::SecondOrderField d0;
  fd::StabilisationReport rep = run_stabilisation(entry, cfg, d0);

  // Residual statistics at random domain points.
  std::mt19937_64 rng(cfg.seed);
  fd::SecondOrderField x0 = fd::zero_second_order_field(entry.model.n);
  const int n = entry.model.n;
  fd::SecondOrderField x0_alt{fd::VectorField(n, n, n, [n](auto q, auto v) {
    using S = typename decltype(q)::value_type;
    std::vector<S> a(static_cast<std::size_t>(n), S(0.0));
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = 0.3 * q[i] + 0.2 * v[i];
    return a;
  })};

  double d0_prim = 0.0, chi_indep = 0.0, res_lam = 0.0, res_imw = 0.0,
         frame_angle = 0.0;
  for (int k = 0; k < 25; ++k) {
    fd::ChartPoint p = fd::random_domain_point(entry, rng);
    d0_prim = std::max(d0_prim,
                       fd::d0_prim_residual(entry.model, entry.link, d0, x0, p));
    chi_indep = std::max(chi_indep, fd::x0_independence_residual(
                                        entry.model, entry.link, x0, x0_alt, p));
    fd::ResolutionData rd = fd::resolution_check(entry.model, entry.link, p);
    res_lam = std::max(res_lam, rd.residual_identity);
    res_imw = std::max(res_imw, rd.residual_derivative);
    frame_angle = std::max(frame_angle, fd::kernel_frame_angle(
                                            entry.model, entry.link, p,
                                            cfg.tol_kernel));
  }

  nlohmann::json j = fd::report_to_json(entry.name, entry.model.n, rep);
  j["residuals"] = {{"d0_prim_max", d0_prim},
                    {"chi_x0_independence_max", chi_indep},
                    {"resolution_identity_max", res_lam},
                    {"resolution_derivative_max", res_imw},
                    {"kernel_frame_angle_max", frame_angle}};

  if (!cfg.out.empty()) {
    std::ofstream f(cfg.out);
    if (!f) throw fd::Error("cannot write report to '" + cfg.out + "'");
    f << j.dump(2) << "\n";
  }

  if (as_json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "model: " << entry.name << " (n=" << entry.model.n
              << ", kernel dim " << rep.kernel_dim << ")\n";
    std::cout << "status: " << fd::to_string(rep.status) << " after "
              << rep.rounds.size() << " round(s)\n";
    for (const auto& r : rep.rounds) {
      std::cout << "  round level " << r.level << ": ";
      if (r.new_constraints.empty() && r.multiplier_relations.empty())
        std::cout << "nothing new";
      for (const auto& c : r.new_constraints)
        std::cout << c.name << (c.identically_zero ? " (identically zero) " : " ");
      if (!r.multiplier_relations.empty())
        std::cout << "[" << r.multiplier_relations.size()
                  << " multiplier relation row(s)]";
      std::cout << "\n";
    }
    std::cout << "multipliers: " << rep.kernel_dim << " total, "
              << rep.determined_u.size() << " determined, "
              << rep.free_multipliers.size() << " free\n";
    std::cout << "max |chi| on seeds: " << rep.max_primary_abs
              << ", final tangency: " << rep.final_tangency_max << "\n";
    std::cout << "residuals: d0_prim " << d0_prim << ", resolution "
              << res_lam << " / " << res_imw << ", frame angle " << frame_angle
              << "\n";
    if (!cfg.out.empty()) std::cout << "report written to " << cfg.out << "\n";
  }

  switch (rep.status) {
    case fd::StabilisationStatus::finished:
    case fd::StabilisationStatus::empty_final_set:
      return 0;
    default:
      return 2;
  }
}

int cmd_integrate(const fd::RunConfig& cfg, bool as_json) {
  fd::ModelRegistryEntry entry = fd::make_model(cfg.model, cfg.params);
  const int n = entry.model.n;

  fd::ChartPoint p0 = entry.default_seeds.front();
  if (!cfg.q0.empty() || !cfg.v0.empty()) {
    if (static_cast<int>(cfg.q0.size()) != n || static_cast<int>(cfg.v0.size()) != n)
      throw fd::Error("q0/v0 must have dimension " + std::to_string(n));
    p0 = fd::ChartPoint(fd::to_eigen(cfg.q0), fd::to_eigen(cfg.v0));
  }
  if (!entry.model.in_domain(p0))
    throw fd::Error("initial point lies outside the model domain");

  fd::SecondOrderField d0;
  fd::StabilisationReport rep = run_stabilisation(entry, cfg, d0);

  // Assemble the final field: determined multipliers from the report, free
  // ones from --u (default 0).
  fd::SecondOrderField field = d0;
  if (entry.link.m > 0) {
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(entry.link.m);
    std::vector<fd::ScalarField> u = fd::constant_multipliers(n, zeros);
    std::size_t next_free = 0;
    for (int mu = 0; mu < entry.link.m; ++mu) {
      auto it = rep.determined_u.find(mu);
      if (it != rep.determined_u.end()) {
        u[static_cast<std::size_t>(mu)] = it->second;
      } else if (next_free < cfg.u.size()) {
        Eigen::VectorXd c(1);
        c[0] = cfg.u[next_free++];
        u[static_cast<std::size_t>(mu)] = fd::constant_multipliers(n, c)[0];
      }
    }
    field = fd::field_Du(entry.model, entry.link, d0, u);
  }

  std::vector<fd::ConstraintFunction> log_constraints = rep.active_constraints();
  fd::Trajectory traj = fd::integrate(entry.model, field, p0, cfg.t_end, cfg.dt,
                                      log_constraints);

  std::string csv_path = cfg.out.empty() ? "trajectory.csv" : cfg.out;
  {
    std::ofstream f(csv_path, std::ios::binary);
    if (!f) throw fd::Error("cannot write trajectory to '" + csv_path + "'");
    fd::write_trajectory_csv(f, traj, n);
  }

  nlohmann::json summary = fd::trajectory_summary(traj);
  summary["csv"] = csv_path;
  if (as_json)
    std::cout << summary.dump(2) << "\n";
  else
    std::cout << "integrated " << summary["steps"] << " step(s), status "
              << summary["status"].get<std::string>() << "; trajectory in "
              << csv_path << "\n"
              << summary.dump(2) << "\n";

  return traj.status == fd::TrajectoryStatus::completed ? 0 : 3;
}

int cmd_verify_calculus(std::uint64_t seed, int count, bool as_json) {
  fd::CalculusVerification v = fd::run_calculus_verification(seed, count);
  nlohmann::json j = {{"instances", v.instances},
                      {"tolerance", v.tolerance},
                      {"max_product_rule", v.max_product},
                      {"max_pairing_rule", v.max_pairing},
                      {"max_chain_rule", v.max_chain},
                      {"max_liouville_pairing", v.max_liouville1},
                      {"max_liouville_derivative", v.max_liouville2},
                      {"pass", v.pass()}};
  if (as_json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "calculus verification over " << v.instances
              << " randomized polynomial instance(s):\n"
              << "  product rule   max residual " << v.max_product << "\n"
              << "  pairing rule   max residual " << v.max_pairing << "\n"
              << "  chain rule     max residual " << v.max_chain << "\n"
              << "  liouville (1)  max residual " << v.max_liouville1 << "\n"
              << "  liouville (2)  max residual " << v.max_liouville2 << "\n"
              << (v.pass() ? "PASS" : "FAIL") << " at tolerance " << v.tolerance
              << "\n";
  }
  return v.pass() ? 0 : 2;
}

int cmd_list_models(const std::string& filter, bool as_json) {
  nlohmann::json arr = nlohmann::json::array();
  for (const std::string& name : fd::registry_names()) {
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    fd::ModelRegistryEntry e = fd::make_model(name);
    arr.push_back({{"name", e.name},
                   {"n", e.model.n},
                   {"constraints", e.link.m},
                   {"params", e.model.params},
                   {"notes", e.notes}});
  }
  if (as_json) {
    std::cout << arr.dump(2) << "\n";
  } else {
    for (const auto& m : arr) {
      std::cout << m["name"].get<std::string>() << " (n=" << m["n"]
                << ", constraints=" << m["constraints"] << ")";
      if (!m["params"].empty()) std::cout << " params " << m["params"].dump();
      std::cout << "\n  " << m["notes"].get<std::string>() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fibredrive: numerical engine for singular Lagrangian dynamics"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable output");

  FlagValues fa, fi;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "constraint stabilisation analysis of a registry model");
  add_common_flags(analyze, fa);
  analyze->fallthrough();

  CLI::App* integrate = app.add_subcommand(
      "integrate", "integrate the final dynamics and log residuals");
  add_common_flags(integrate, fi);
  integrate->fallthrough();

  std::uint64_t vc_seed = 42;
  int vc_count = 100;
  CLI::App* verify = app.add_subcommand(
      "verify-calculus", "randomized verification of the derivation rules");
  verify->add_option("--seed", vc_seed, "RNG seed");
  verify->add_option("--count", vc_count, "instances per rule");
  verify->fallthrough();

  std::string filter;
  CLI::App* list = app.add_subcommand("list-models", "list registry models");
  list->add_option("--filter", filter, "substring filter");
  list->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(build_config(analyze, fa), as_json);
    if (integrate->parsed())
      return cmd_integrate(build_config(integrate, fi), as_json);
    if (verify->parsed())
      return cmd_verify_calculus(vc_seed, vc_count, as_json);
    if (list->parsed()) return cmd_list_models(filter, as_json);
  } catch (const fd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
