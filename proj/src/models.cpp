#include "fibredrive/models.hpp"

#include <cmath>

namespace fibredrive {

namespace {

double param_or(const std::map<std::string, double>& params,
                const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params,
                    std::initializer_list<const char*> allowed,
                    const std::string& model) {
  for (const auto& [key, value] : params) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(model + ": unknown parameter '" + key + "'");
  }
}

Eigen::VectorXd constant_vec(int n, double c) {
  return Eigen::VectorXd::Constant(n, c);
}

ChartPoint seed(std::initializer_list<double> q, std::initializer_list<double> v) {
  return ChartPoint(to_eigen(std::vector<double>(q)),
                    to_eigen(std::vector<double>(v)));
}

ModelRegistryEntry make_harmonic() {
  ModelRegistryEntry e;
  e.name = "harmonic";
  e.notes = "1-d harmonic oscillator; regular Lagrangian, no constraints";

  e.model.n = 1;
  e.model.name = e.name;
  e.model.L = ScalarField(1, 1, [](auto q, auto v) {
    return 0.5 * (v[0] * v[0] - q[0] * q[0]);
  });

  e.link.m = 0;
  e.link.H = ScalarField(1, 1, [](auto q, auto p) {
    return 0.5 * (p[0] * p[0] + q[0] * q[0]);
  });

  e.default_seeds = {seed({0.3}, {1.2}), seed({1.0}, {0.5}), seed({-0.7}, {0.9}),
                     seed({0.2}, {-1.1})};
  e.q_lo = constant_vec(1, -1.5);
  e.q_hi = constant_vec(1, 1.5);
  e.v_lo = constant_vec(1, -1.5);
  e.v_hi = constant_vec(1, 1.5);
  return e;
}

ModelRegistryEntry make_toy_singular() {
  ModelRegistryEntry e;
  e.name = "toy_singular";
  e.notes = "L = v1^2/2 + v1 q2; one primary constraint, two-level "
            "stabilisation with the multiplier pinned to zero";

  e.model.n = 2;
  e.model.name = e.name;
  e.model.L = ScalarField(2, 2, [](auto q, auto v) {
    return 0.5 * v[0] * v[0] + v[0] * q[1];
  });

  e.link.m = 1;
  e.link.H = ScalarField(2, 2, [](auto q, auto p) {
    auto d = p[0] - q[1];
    return 0.5 * d * d;
  });
  e.link.constraints = {ScalarField(2, 2, [](auto, auto p) { return p[1]; })};

  e.default_seeds = {seed({0.4, -0.3}, {0.8, 0.6}),
                     seed({-0.2, 0.5}, {-0.4, 1.1}),
                     seed({0.1, 0.2}, {1.3, -0.7}),
                     seed({-0.6, -0.8}, {0.9, 0.4}),
                     seed({0.7, 0.1}, {-1.2, -0.5})};
  e.q_lo = constant_vec(2, -1.5);
  e.q_hi = constant_vec(2, 1.5);
  e.v_lo = constant_vec(2, -1.5);
  e.v_hi = constant_vec(2, 1.5);
  return e;
}

std::vector<double> minkowski_metric(int dim) {
  std::vector<double> eta(static_cast<std::size_t>(dim), -1.0);
  eta[0] = 1.0;
  return eta;
}

std::vector<ChartPoint> timelike_seeds(int dim) {
  std::vector<ChartPoint> seeds;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> qd(-0.8, 0.8);
  std::uniform_real_distribution<double> v0d(1.8, 2.8);
  std::uniform_real_distribution<double> vsd(-0.7, 0.7);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd q(dim), v(dim);
    for (int i = 0; i < dim; ++i) q[i] = qd(rng);
    v[0] = v0d(rng);
    for (int i = 1; i < dim; ++i) v[i] = vsd(rng);
    seeds.emplace_back(q, v);
  }
  return seeds;
}

ModelRegistryEntry make_free_particle(const std::map<std::string, double>& params,
                                      bool conformal) {
  const std::string name =
      conformal ? "free_particle_conformal" : "free_particle_minkowski";
  if (conformal)
    reject_unknown(params, {"mass", "dim", "epsilon"}, name);
  else
    reject_unknown(params, {"mass", "dim"}, name);

  const double mass = param_or(params, "mass", 1.0);
  const int dim = static_cast<int>(param_or(params, "dim", 2.0));
  const double eps = conformal ? param_or(params, "epsilon", 0.1) : 0.0;
  if (mass <= 0.0) throw Error(name + ": mass must be positive");
  if (dim < 2) throw Error(name + ": dim must be at least 2");

  ModelRegistryEntry e;
  e.name = name;
  e.notes = conformal
                ? "free relativistic particle, metric (1 + eps |q_space|^2)^2 "
                  "* diag(1,-1,...); trajectories are reparametrised geodesics"
                : "free relativistic particle in flat space; straight "
                  "world-lines up to reparametrisation";

  std::vector<double> eta = minkowski_metric(dim);

  // Conformal factor 1 + eps |q_space|^2 (identically 1 in the flat case).
  auto omega = [eps, dim](const auto& q) {
    using S = std::remove_cvref_t<decltype(q[0])>;
    S om(1.0);
    for (int i = 1; i < dim; ++i) om += eps * q[i] * q[i];
    return om;
  };

  e.model.n = dim;
  e.model.name = name;
  e.model.params = {{"mass", mass}, {"dim", static_cast<double>(dim)}};
  if (conformal) e.model.params["epsilon"] = eps;

  e.model.L = ScalarField(dim, dim, [mass, dim, eta, omega](auto q, auto v) {
    using S = typename decltype(q)::value_type;
    using std::sqrt;
    S s(0.0);
    for (int i = 0; i < dim; ++i) s += eta[static_cast<std::size_t>(i)] * v[i] * v[i];
    return mass * omega(q) * sqrt(s);
  });
  e.model.domain = [dim, eta](const ChartPoint& p) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += eta[static_cast<std::size_t>(i)] * p.v[i] * p.v[i];
    return s > 0.0;
  };

  e.link.m = 1;
  e.link.H = ScalarField(dim, dim, [](auto q, auto) {
    using S = typename decltype(q)::value_type;
    return S(0.0);  // the energy of a degree-1 homogeneous Lagrangian vanishes
  });
  e.link.constraints = {
      ScalarField(dim, dim, [mass, dim, eta, omega](auto q, auto p) {
        using S = typename decltype(q)::value_type;
        S s(0.0);
        for (int i = 0; i < dim; ++i)
          s += eta[static_cast<std::size_t>(i)] * p[i] * p[i];
        S om = omega(q);
        return 0.5 * (s / (om * om) - mass * mass);
      })};

  e.default_seeds = timelike_seeds(dim);
  e.q_lo = constant_vec(dim, -0.8);
  e.q_hi = constant_vec(dim, 0.8);
  e.v_lo = constant_vec(dim, -0.7);
  e.v_hi = constant_vec(dim, 0.7);
  e.v_lo[0] = 1.8;
  e.v_hi[0] = 2.8;
  return e;
}

}  // namespace

std::vector<std::string> registry_names() {
  return {"harmonic", "toy_singular", "free_particle_minkowski",
          "free_particle_conformal"};
}

ModelRegistryEntry make_model(const std::string& name,
                              const std::map<std::string, double>& params) {
  ModelRegistryEntry e;
  if (name == "harmonic") {
    reject_unknown(params, {}, name);
    e = make_harmonic();
  } else if (name == "toy_singular") {
    reject_unknown(params, {}, name);
    e = make_toy_singular();
  } else if (name == "free_particle_minkowski") {
    e = make_free_particle(params, false);
  } else if (name == "free_particle_conformal") {
    e = make_free_particle(params, true);
  } else {
    throw Error("unknown model '" + name + "'");
  }
  validate_link(e.model, e.link, e.default_seeds);
  return e;
}

ChartPoint random_domain_point(const ModelRegistryEntry& entry,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = entry.model.n;
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::VectorXd q(n), v(n);
    for (int i = 0; i < n; ++i) {
      q[i] = entry.q_lo[i] + (entry.q_hi[i] - entry.q_lo[i]) * unit(rng);
      v[i] = entry.v_lo[i] + (entry.v_hi[i] - entry.v_lo[i]) * unit(rng);
    }
    ChartPoint p(q, v);
    if (entry.model.in_domain(p)) return p;
  }
  throw DomainError(entry.name + ": failed to sample a domain point");
}

}  // namespace fibredrive
