#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fibredrive/dynamics.hpp"
#include "fibredrive/models.hpp"
#include "oracles.hpp"

using namespace fibredrive;
namespace tst = fibredrive::testing;

namespace {

ChartPoint pt(std::vector<double> q, std::vector<double> v) {
  return ChartPoint(to_eigen(q), to_eigen(v));
}

SecondOrderField poly_x0(int n, std::mt19937_64& rng) {
  Poly p = random_poly(rng, n, n, 2, 4);
  return {VectorField(n, n, n, [p, n](auto q, auto v) {
    using S = typename decltype(q)::value_type;
    std::vector<S> a(static_cast<std::size_t>(n), S(0.0));
    S base = p(q, v);
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = base + 0.1 * v[i];
    return a;
  })};
}

}  // namespace

TEST_CASE("primary constraints of the worked models") {
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField x0 = zero_second_order_field(2);
  auto chis = primary_constraints(toy.model, toy.link, x0);
  REQUIRE(chis.size() == 1);
  std::mt19937_64 rng(83);
  for (int k = 0; k < 20; ++k) {
    ChartPoint p = random_domain_point(toy, rng);
    CHECK(field_value(chis[0].eval, p) == doctest::Approx(p.v[0]).epsilon(1e-12));
  }

  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  auto chis_fp = primary_constraints(fp.model, fp.link, zero_second_order_field(2));
  REQUIRE(chis_fp.size() == 1);
  for (int k = 0; k < 20; ++k) {
    ChartPoint p = random_domain_point(fp, rng);
    CHECK(std::abs(field_value(chis_fp[0].eval, p)) <= 1e-9);
  }

  ModelRegistryEntry h = make_model("harmonic");
  CHECK(primary_constraints(h.model, h.link, zero_second_order_field(1)).empty());
}

TEST_CASE("primary constraints do not depend on the reference field") {
  std::mt19937_64 rng(89);
  for (const char* name :
       {"toy_singular", "free_particle_minkowski", "free_particle_conformal"}) {
    ModelRegistryEntry e = make_model(name);
    SecondOrderField x0a = zero_second_order_field(e.model.n);
    SecondOrderField x0b = poly_x0(e.model.n, rng);
    CHECK(x0_independence_residual(e.model, e.link, x0a, x0a,
                                   random_domain_point(e, rng)) == 0.0);
    for (int k = 0; k < 20; ++k) {
      ChartPoint p = random_domain_point(e, rng);
      CHECK(x0_independence_residual(e.model, e.link, x0a, x0b, p) <= 1e-9);
    }
  }
}

TEST_CASE("primary field D0 on the worked models") {
  // regular model: the unique second-order dynamics
  ModelRegistryEntry h = make_model("harmonic");
  SecondOrderField d0h =
      primary_field_D0(h.model, h.link, zero_second_order_field(1));
  ChartPoint p = pt({0.7}, {-0.2});
  CHECK(field_value(d0h.accel, p)[0] == doctest::Approx(-0.7).epsilon(1e-12));

  // toy singular: accel = (-v2, 0)
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField d0t =
      primary_field_D0(toy.model, toy.link, zero_second_order_field(2));
  ChartPoint p2 = pt({0.4, -0.8}, {1.1, 0.6});
  Eigen::VectorXd a2 = field_value(d0t.accel, p2);
  CHECK(a2[0] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(a2[1] == doctest::Approx(0.0));

  // flat relativistic particle: the geodesic spray has zero acceleration
  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  SecondOrderField d0f =
      primary_field_D0(fp.model, fp.link, zero_second_order_field(2));
  std::mt19937_64 rng(97);
  for (int k = 0; k < 10; ++k) {
    ChartPoint pk = random_domain_point(fp, rng);
    CHECK(field_value(d0f.accel, pk).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("EL(D0) equals sum chi_mu D lambda^mu everywhere") {
  std::mt19937_64 rng(101);
  for (const std::string& name : registry_names()) {
    ModelRegistryEntry e = make_model(name);
    SecondOrderField x0 = zero_second_order_field(e.model.n);
    SecondOrderField d0 = primary_field_D0(e.model, e.link, x0);
    for (int k = 0; k < 25; ++k) {
      ChartPoint p = random_domain_point(e, rng);
      CHECK(d0_prim_residual(e.model, e.link, d0, x0, p) <= 1e-6);
    }
  }
}

TEST_CASE("two primary fields differ by a kernel section") {
  std::mt19937_64 rng(103);
  for (const char* name : {"toy_singular", "free_particle_minkowski"}) {
    ModelRegistryEntry e = make_model(name);
    SecondOrderField d0a =
        primary_field_D0(e.model, e.link, zero_second_order_field(e.model.n));
    SecondOrderField d0b = primary_field_D0(e.model, e.link, poly_x0(e.model.n, rng));
    for (int k = 0; k < 20; ++k) {
      ChartPoint p = random_domain_point(e, rng);
      Eigen::VectorXd diff =
          field_value(d0a.accel, p) - field_value(d0b.accel, p);
      CHECK((hessian_W(e.model, p) * diff).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("D_u adds multiplier directions") {
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField d0 =
      primary_field_D0(toy.model, toy.link, zero_second_order_field(2));

  // u = 0 reproduces D0
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  SecondOrderField du0 =
      field_Du(toy.model, toy.link, d0, constant_multipliers(2, zero));
  ChartPoint p = pt({0.1, 0.9}, {0.5, -1.2});
  CHECK((field_value(du0.accel, p) - field_value(d0.accel, p)).cwiseAbs().maxCoeff() == 0.0);

  // toy: accel = (-v2, u0)
  Eigen::VectorXd u0(1);
  u0 << 0.8;
  SecondOrderField du =
      field_Du(toy.model, toy.link, d0, constant_multipliers(2, u0));
  Eigen::VectorXd a = field_value(du.accel, p);
  CHECK(a[0] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(0.8).epsilon(1e-12));

  // free particle with constant u: acceleration c (m/v) v, along v
  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  SecondOrderField d0f =
      primary_field_D0(fp.model, fp.link, zero_second_order_field(2));
  Eigen::VectorXd uc(1);
  uc << 0.5;
  SecondOrderField duf =
      field_Du(fp.model, fp.link, d0f, constant_multipliers(2, uc));
  ChartPoint p2 = pt({0.0, 0.0}, {2.0, 1.0});
  Eigen::VectorXd af = field_value(duf.accel, p2);
  const double s3 = std::sqrt(3.0);
  CHECK(af[0] == doctest::Approx(0.5 * 2.0 / s3).epsilon(1e-12));
  CHECK(af[1] == doctest::Approx(0.5 * 1.0 / s3).epsilon(1e-12));
}

TEST_CASE("newton projection onto a constraint surface") {
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField x0 = zero_second_order_field(2);
  auto chis = primary_constraints(toy.model, toy.link, x0);

  ProjectionResult pr = newton_project(toy.model, chis, pt({0.4, -0.3}, {0.8, 0.6}));
  CHECK(pr.status == ProjectionStatus::converged);
  CHECK(std::abs(pr.point.v[0]) <= 1e-10);   // chi_1 = v1 projected to zero
  CHECK(pr.point.v[1] == doctest::Approx(0.6));  // untouched direction

  // an infeasible constraint excludes every seed
  std::vector<ConstraintFunction> infeasible(1);
  infeasible[0].level = 1;
  infeasible[0].name = "one";
  infeasible[0].eval = ScalarField(2, 2, [](auto q, auto) {
    using S = typename decltype(q)::value_type;
    return S(1.0);
  });
  ProjectionResult bad = newton_project(toy.model, infeasible, pt({0.0, 0.0}, {1.0, 1.0}));
  CHECK(bad.status == ProjectionStatus::excluded);
}

TEST_CASE("stabilisation of toy_singular: the hand Dirac analysis") {
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField d0 =
      primary_field_D0(toy.model, toy.link, zero_second_order_field(2));
  StabilisationReport rep =
      stabilise(toy.model, toy.link, d0, toy.default_seeds);

  CHECK(rep.status == StabilisationStatus::finished);
  CHECK(rep.rounds.size() <= 3);
  auto active = rep.active_constraints();
  REQUIRE(active.size() == 2);
  CHECK(active[0].level == 1);
  CHECK(active[1].level == 2);

  // chi_1 == v1 everywhere; chi_1' == -v2
  std::mt19937_64 rng(107);
  for (int k = 0; k < 20; ++k) {
    ChartPoint p = random_domain_point(toy, rng);
    CHECK(std::abs(field_value(active[0].eval, p) - p.v[0]) <= 1e-8);
    CHECK(std::abs(field_value(active[1].eval, p) + p.v[1]) <= 1e-8);
  }

  // the one multiplier is pinned to zero
  REQUIRE(rep.determined_u.size() == 1);
  CHECK(rep.free_multipliers.empty());
  for (const ChartPoint& p : rep.final_samples) {
    CHECK(std::abs(field_value(rep.determined_u.at(0), p)) <= 1e-8);
    // final surface: v1 = v2 = 0
    CHECK(std::abs(p.v[0]) <= 1e-8);
    CHECK(std::abs(p.v[1]) <= 1e-8);
  }
  CHECK(rep.final_tangency_max <= 1e-6);
}

TEST_CASE("stabilisation of the regular and relativistic models") {
  ModelRegistryEntry h = make_model("harmonic");
  SecondOrderField d0h =
      primary_field_D0(h.model, h.link, zero_second_order_field(1));
  StabilisationReport rh = stabilise(h.model, h.link, d0h, h.default_seeds);
  CHECK(rh.status == StabilisationStatus::finished);
  CHECK(rh.rounds.size() == 1);
  CHECK(rh.active_constraints().empty());
  CHECK(rh.determined_u.empty());

  for (const char* name : {"free_particle_minkowski", "free_particle_conformal"}) {
    ModelRegistryEntry fp = make_model(name);
    SecondOrderField d0 =
        primary_field_D0(fp.model, fp.link, zero_second_order_field(fp.model.n));
    StabilisationReport rep = stabilise(fp.model, fp.link, d0, fp.default_seeds);
    CHECK(rep.status == StabilisationStatus::finished);
    CHECK(rep.rounds.size() == 1);
    CHECK(rep.max_primary_abs <= 1e-9);
    CHECK(rep.active_constraints().empty());
    REQUIRE(rep.rounds[0].new_constraints.size() == 1);
    CHECK(rep.rounds[0].new_constraints[0].identically_zero);
    CHECK(rep.free_multipliers == std::vector<int>{0});  // gauge freedom
  }
}

TEST_CASE("stabilisation flags an empty final set") {
  // L = v1^2/2 + q2 has the primary constraint chi == 1: the Euler-Lagrange
  // equations are inconsistent and the algorithm must report an empty set.
  LagrangianModel inconsistent;
  inconsistent.n = 2;
  inconsistent.name = "inconsistent";
  inconsistent.L = ScalarField(2, 2, [](auto q, auto v) {
    return 0.5 * v[0] * v[0] + q[1];
  });
  HamiltonianLink link;
  link.m = 1;
  link.H = ScalarField(2, 2, [](auto q, auto p) {
    return 0.5 * p[0] * p[0] - q[1];
  });
  link.constraints = {ScalarField(2, 2, [](auto, auto p) { return p[1]; })};

  std::vector<ChartPoint> seeds = {pt({0.3, -0.2}, {0.9, 0.4}),
                                   pt({-0.5, 0.8}, {0.2, -0.7})};
  validate_link(inconsistent, link, seeds);

  SecondOrderField d0 =
      primary_field_D0(inconsistent, link, zero_second_order_field(2));
  StabilisationReport rep = stabilise(inconsistent, link, d0, seeds);
  CHECK(rep.status == StabilisationStatus::empty_final_set);
  CHECK(rep.final_samples.empty());
}

TEST_CASE("stabilisation respects the round cap") {
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField d0 =
      primary_field_D0(toy.model, toy.link, zero_second_order_field(2));
  StabilisationOptions opts;
  opts.max_rounds = 1;
  StabilisationReport rep =
      stabilise(toy.model, toy.link, d0, toy.default_seeds, opts);
  CHECK(rep.status == StabilisationStatus::max_rounds_exceeded);
  CHECK(rep.rounds.size() == 1);
}

TEST_CASE("integration: harmonic closed orbit") {
  ModelRegistryEntry h = make_model("harmonic");
  SecondOrderField d0 =
      primary_field_D0(h.model, h.link, zero_second_order_field(1));
  ChartPoint p0 = pt({1.0}, {0.0});
  Trajectory traj = integrate(h.model, d0, p0, 2.0 * M_PI, 1e-3);
  CHECK(traj.status == TrajectoryStatus::completed);
  CHECK(std::abs(traj.states.back().q[0] - 1.0) <= 1e-9);
  CHECK(std::abs(traj.states.back().v[0]) <= 1e-9);
  double drift = 0.0;
  for (double e : traj.energy) drift = std::max(drift, std::abs(e - traj.energy[0]));
  CHECK(drift <= 1e-9);
  for (std::size_t k = 1; k < traj.times.size(); ++k)
    CHECK(traj.times[k] > traj.times[k - 1]);
}

TEST_CASE("integration logs constraint residuals") {
  ModelRegistryEntry toy = make_model("toy_singular");
  SecondOrderField d0 =
      primary_field_D0(toy.model, toy.link, zero_second_order_field(2));
  StabilisationReport rep = stabilise(toy.model, toy.link, d0, toy.default_seeds);
  auto constraints = rep.active_constraints();

  // start on the final surface with the pinned multiplier: residuals stay 0
  std::vector<ScalarField> u{rep.determined_u.at(0)};
  SecondOrderField df = field_Du(toy.model, toy.link, d0, u);
  ChartPoint p0 = pt({0.3, -0.4}, {0.0, 0.0});
  Trajectory traj = integrate(toy.model, df, p0, 1.0, 1e-3, constraints);
  CHECK(traj.status == TrajectoryStatus::completed);
  REQUIRE(traj.constraint_residuals.size() == 2);
  for (const auto& col : traj.constraint_residuals)
    for (double r : col) CHECK(std::abs(r) <= 1e-9);
}

TEST_CASE("integration stops at the domain boundary") {
  LagrangianModel strip;
  strip.n = 1;
  strip.name = "strip";
  strip.L = ScalarField(1, 1, [](auto, auto v) { return 0.5 * v[0] * v[0]; });
  strip.domain = [](const ChartPoint& p) { return p.q[0] < 1.0; };

  SecondOrderField freeflight{VectorField(1, 1, 1, [](auto q, auto) {
    using S = typename decltype(q)::value_type;
    return std::vector<S>{S(0.0)};
  })};
  Trajectory traj = integrate(strip, freeflight, pt({0.0}, {1.0}), 2.0, 1e-2);
  CHECK(traj.status == TrajectoryStatus::domain_exit);
  CHECK(traj.times.back() < 2.0);
  CHECK(traj.states.back().q[0] < 1.0);  // last valid state is kept
}

TEST_CASE("integration flags non-finite blow-up") {
  LagrangianModel blow;
  blow.n = 1;
  blow.name = "blow";
  blow.L = ScalarField(1, 1, [](auto, auto v) { return 0.5 * v[0] * v[0]; });

  SecondOrderField cubic{VectorField(1, 1, 1, [](auto, auto v) {
    using S = typename decltype(v)::value_type;
    return std::vector<S>{v[0] * v[0] * v[0]};
  })};
  Trajectory traj = integrate(blow, cubic, pt({0.0}, {1.5}), 5.0, 0.05);
  CHECK(traj.status != TrajectoryStatus::completed);
  CHECK(traj.times.back() < 5.0);
}
