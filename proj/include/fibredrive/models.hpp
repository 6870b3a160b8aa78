#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "fibredrive/dynamics.hpp"
#include "fibredrive/hamlink.hpp"
#include "fibredrive/lagrangian.hpp"

namespace fibredrive {

/// A built-in model: Lagrangian, matching Hamiltonian-side data, seed points
/// for surface sampling and coordinate boxes for random domain sampling.
struct ModelRegistryEntry {
  std::string name;
  LagrangianModel model;
  HamiltonianLink link;
  std::vector<ChartPoint> default_seeds;
  std::string notes;
  Eigen::VectorXd q_lo, q_hi, v_lo, v_hi;
};

std::vector<std::string> registry_names();

/// Builds a registry model with parameter overrides (e.g. mass, dim,
/// epsilon). The link is validated against the model on the default seeds;
/// inconsistent data is rejected here.
ModelRegistryEntry make_model(const std::string& name,
                              const std::map<std::string, double>& params = {});

/// Uniform sample from the entry's coordinate box, rejected against the
/// model domain.
ChartPoint random_domain_point(const ModelRegistryEntry& entry,
                               std::mt19937_64& rng);

}  // namespace fibredrive
