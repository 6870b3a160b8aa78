#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fibredrive/hamlink.hpp"
#include "fibredrive/models.hpp"
#include "oracles.hpp"

using namespace fibredrive;
namespace tst = fibredrive::testing;

namespace {

ChartPoint pt(std::vector<double> q, std::vector<double> v) {
  return ChartPoint(to_eigen(q), to_eigen(v));
}

}  // namespace

TEST_CASE("gamma_field of momentum coordinates and worked examples") {
  ModelRegistryEntry toy = make_model("toy_singular");
  ChartPoint p = pt({0.2, 0.7}, {1.1, -0.4});

  for (int i = 0; i < 2; ++i) {
    ScalarField coord(2, 2, [i](auto, auto a) { return a[i]; });
    Eigen::VectorXd g = gamma_field(toy.model, coord, p);
    CHECK(g[i] == doctest::Approx(1.0));
    CHECK(g[1 - i] == doctest::Approx(0.0));
  }

  // toy H: gamma_H = (v1, 0)
  Eigen::VectorXd gh = gamma_field(toy.model, toy.link.H, p);
  CHECK(gh[0] == doctest::Approx(1.1));
  CHECK(gh[1] == doctest::Approx(0.0));

  // free particle phi at v = (2, 1): gamma_phi = (m/v) v = (2, 1)/sqrt(3)
  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  ChartPoint p2 = pt({0.0, 0.0}, {2.0, 1.0});
  Eigen::VectorXd gp = gamma_field(fp.model, fp.link.constraints[0], p2);
  const double s3 = std::sqrt(3.0);
  CHECK(gp[0] == doctest::Approx(2.0 / s3).epsilon(1e-12));
  CHECK(gp[1] == doctest::Approx(1.0 / s3).epsilon(1e-12));
}

TEST_CASE("upsilon duality") {
  ModelRegistryEntry toy = make_model("toy_singular");
  ChartPoint p = pt({0.3, -0.5}, {0.9, 0.4});

  // g = v_i, h = p_j evaluates the frame delta
  for (int i = 0; i < 2; ++i) {
    ScalarField g(2, 2, [i](auto, auto v) { return v[i]; });
    for (int j = 0; j < 2; ++j) {
      ScalarField hcoord(2, 2, [j](auto, auto a) { return a[j]; });
      CHECK(upsilon_apply(toy.model, g, hcoord, p) ==
            doctest::Approx(i == j ? 1.0 : 0.0));
    }
  }

  // constant h annihilates everything
  ScalarField any(2, 2, [](auto q, auto v) { return q[0] * v[1] + v[0]; });
  ScalarField consth(2, 2, [](auto q, auto) {
    using S = typename decltype(q)::value_type;
    return S(4.2);
  });
  CHECK(upsilon_apply(toy.model, any, consth, p) == doctest::Approx(0.0));

  // random polynomial g, h: Upsilon^g.h = Gamma_h.g
  std::mt19937_64 rng(53);
  for (int k = 0; k < 20; ++k) {
    ScalarField g = random_poly_field(rng, 2, 2);
    ScalarField h = random_poly_field(rng, 2, 2);
    ChartPoint pk = random_domain_point(toy, rng);
    double ups = upsilon_apply(toy.model, g, h, pk);
    Eigen::VectorXd gh = gamma_field(toy.model, h, pk);
    double lie = directional_derivative(g, pk, Eigen::VectorXd::Zero(2), gh);
    CHECK(std::abs(ups - lie) <= 1e-9);
  }
}

TEST_CASE("solve_lambda on the worked models") {
  ModelRegistryEntry h = make_model("harmonic");
  ChartPoint ph = pt({0.4}, {-0.9});
  CHECK(solve_lambda(h.model, h.link, ph).size() == 0);

  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  ChartPoint p = pt({0.0, 0.0}, {2.0, 1.0});
  Eigen::VectorXd lam = solve_lambda(fp.model, fp.link, p);
  REQUIRE(lam.size() == 1);
  CHECK(lam[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-10));

  ModelRegistryEntry toy = make_model("toy_singular");
  std::mt19937_64 rng(59);
  for (int k = 0; k < 20; ++k) {
    ChartPoint pk = random_domain_point(toy, rng);
    Eigen::VectorXd lk = solve_lambda(toy.model, toy.link, pk);
    CHECK(lk[0] == doctest::Approx(pk.v[1]).epsilon(1e-10));
  }
}

TEST_CASE("dlambda finite differences match the closed forms") {
  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  ChartPoint p = pt({0.0, 0.0}, {2.0, 1.0});
  Eigen::MatrixXd dl = dlambda(fp.model, fp.link, p);
  const double s3 = std::sqrt(3.0);
  CHECK(dl(0, 0) == doctest::Approx(2.0 / s3).epsilon(1e-8));
  CHECK(dl(0, 1) == doctest::Approx(-1.0 / s3).epsilon(1e-8));

  ModelRegistryEntry toy = make_model("toy_singular");
  Eigen::MatrixXd dlt = dlambda(toy.model, toy.link, pt({0.1, 0.4}, {0.6, 0.8}));
  CHECK(dlt(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dlt(0, 1) == doctest::Approx(1.0).epsilon(1e-9));

  ModelRegistryEntry h = make_model("harmonic");
  CHECK(dlambda(h.model, h.link, pt({0.2}, {0.3})).rows() == 0);
}

TEST_CASE("matrix_M on the worked models") {
  ModelRegistryEntry toy = make_model("toy_singular");
  Eigen::MatrixXd Mt = matrix_M(toy.model, toy.link, pt({0.5, -0.1}, {1.2, 0.3}));
  CHECK(Mt(0, 0) == doctest::Approx(1.0));
  CHECK(Mt(0, 1) == doctest::Approx(0.0));
  CHECK(Mt(1, 0) == doctest::Approx(0.0));
  CHECK(Mt(1, 1) == doctest::Approx(0.0));

  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  Eigen::MatrixXd M = matrix_M(fp.model, fp.link, pt({0.0, 0.0}, {2.0, 1.0}));
  const double s3 = std::sqrt(3.0);
  CHECK(M(0, 0) == doctest::Approx(s3).epsilon(1e-12));
  CHECK(M(1, 1) == doctest::Approx(-s3).epsilon(1e-12));
  CHECK(std::abs(M(0, 1)) < 1e-12);

  ModelRegistryEntry h = make_model("harmonic");
  CHECK(matrix_M(h.model, h.link, pt({0.7}, {0.2}))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("resolution of the identity: hand matrices at v = (2, 1)") {
  ModelRegistryEntry fp = make_model("free_particle_minkowski");
  ChartPoint p = pt({0.0, 0.0}, {2.0, 1.0});
  ResolutionData rd = resolution_check(fp.model, fp.link, p);

  Eigen::MatrixXd MW = rd.M * hessian_W(fp.model, p);
  Eigen::MatrixXd mw_want(2, 2);
  mw_want << -1.0 / 3.0, 2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0;
  CHECK((MW - mw_want).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::VectorXd gp = gamma_field(fp.model, fp.link.constraints[0], p);
  Eigen::MatrixXd outer = gp * rd.Dlambda.row(0);
  Eigen::MatrixXd outer_want(2, 2);
  outer_want << 4.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0;
  CHECK((outer - outer_want).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((MW + outer - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);

  CHECK(rd.residual_identity <= 1e-8);
  CHECK(rd.residual_derivative <= 1e-6);

  // toy: [[1,0],[0,0]] + (0,1)x(0,1) = Id
  ModelRegistryEntry toy = make_model("toy_singular");
  ResolutionData rt = resolution_check(toy.model, toy.link, pt({0.3, 0.9}, {0.5, -0.6}));
  CHECK(rt.residual_identity <= 1e-8);
  CHECK(rt.residual_derivative <= 1e-6);

  // regular model: M W = Id directly
  ModelRegistryEntry h = make_model("harmonic");
  ResolutionData rh = resolution_check(h.model, h.link, pt({0.2}, {1.4}));
  CHECK(rh.residual_identity <= 1e-8);
  CHECK(rh.residual_derivative <= 1e-6);
}

TEST_CASE("constraint fields frame the kernel of W") {
  std::mt19937_64 rng(61);
  for (const char* name :
       {"toy_singular", "free_particle_minkowski", "free_particle_conformal"}) {
    ModelRegistryEntry e = make_model(name);
    for (int k = 0; k < 20; ++k) {
      ChartPoint p = random_domain_point(e, rng);
      CHECK(kernel_frame_angle(e.model, e.link, p) <= 1e-6);
    }
  }
}

TEST_CASE("chain-rule identity: grad_v (h o F) = W gamma_h") {
  ModelRegistryEntry toy = make_model("toy_singular");
  std::mt19937_64 rng(67);
  for (int k = 0; k < 20; ++k) {
    ScalarField h = random_poly_field(rng, 2, 2);
    ChartPoint p = random_domain_point(toy, rng);

    LagrangianModel model = toy.model;
    ScalarField h_of_F(
        2, 2,
        [model, h](auto q, auto v) {
          auto alpha = legendre_of(model, q, v);
          using S = typename decltype(q)::value_type;
          return h.eval(q, std::span<const S>(alpha));
        },
        std::min(model.L.max_depth(), h.max_depth()) - 1);

    std::vector<double> qs = to_std(p.q), vs = to_std(p.v);
    Eigen::VectorXd lhs = to_eigen(fibre_gradient(
        h_of_F, std::span<const double>(qs), std::span<const double>(vs)));
    Eigen::VectorXd rhs = hessian_W(toy.model, p) * gamma_field(toy.model, h, p);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("fibre derivative of gamma_h equals (hess_pp h o F) W") {
  // outer finite-difference check in the fibre coordinates
  ModelRegistryEntry toy = make_model("toy_singular");
  std::mt19937_64 rng(71);
  for (int k = 0; k < 10; ++k) {
    ScalarField h = random_poly_field(rng, 2, 2);
    ChartPoint p = random_domain_point(toy, rng);
    const double step = 1e-5;

    Eigen::MatrixXd dgamma(2, 2);
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd vp = p.v, vm = p.v;
      vp[j] += step;
      vm[j] -= step;
      Eigen::VectorXd gp = gamma_field(toy.model, h, ChartPoint(p.q, vp));
      Eigen::VectorXd gm = gamma_field(toy.model, h, ChartPoint(p.q, vm));
      dgamma.col(j) = (gp - gm) / (2.0 * step);
    }

    std::vector<double> qs = to_std(p.q), vs = to_std(p.v);
    std::vector<double> alpha = legendre_of(toy.model, std::span<const double>(qs),
                                            std::span<const double>(vs));
    Eigen::MatrixXd hpp = to_eigen(
        fibre_jet(h, std::span<const double>(qs), std::span<const double>(alpha))
            .hess);
    Eigen::MatrixXd rhs = hpp * hessian_W(toy.model, p);
    CHECK((dgamma - rhs).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("W annihilates gamma_phi for constraints vanishing on the image") {
  std::mt19937_64 rng(73);
  for (const char* name :
       {"toy_singular", "free_particle_minkowski", "free_particle_conformal"}) {
    ModelRegistryEntry e = make_model(name);
    for (int k = 0; k < 20; ++k) {
      ChartPoint p = random_domain_point(e, rng);
      Eigen::MatrixXd W = hessian_W(e.model, p);
      for (const ScalarField& phi : e.link.constraints) {
        Eigen::VectorXd g = gamma_field(e.model, phi, p);
        CHECK((W * g).cwiseAbs().maxCoeff() <= 1e-9);
      }
    }
  }
}

TEST_CASE("Gamma_nu . lambda^mu is the identity on multipliers") {
  std::mt19937_64 rng(79);
  for (const char* name :
       {"toy_singular", "free_particle_minkowski", "free_particle_conformal"}) {
    ModelRegistryEntry e = make_model(name);
    for (int k = 0; k < 10; ++k) {
      ChartPoint p = random_domain_point(e, rng);
      Eigen::MatrixXd dl = dlambda(e.model, e.link, p);
      for (int nu = 0; nu < e.link.m; ++nu) {
        Eigen::VectorXd g = gamma_field(e.model, e.link.constraints[nu], p);
        for (int mu = 0; mu < e.link.m; ++mu) {
          double want = mu == nu ? 1.0 : 0.0;
          CHECK(std::abs(dl.row(mu).dot(g) - want) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("link validation rejects inconsistent data") {
  ModelRegistryEntry toy = make_model("toy_singular");

  // wrong H: H o F != E
  HamiltonianLink bad_h = toy.link;
  bad_h.H = ScalarField(2, 2, [](auto q, auto p) {
    auto d = p[0] - q[1];
    return 0.5 * d * d + 0.1 * p[0];
  });
  CHECK_THROWS_AS(validate_link(toy.model, bad_h, toy.default_seeds),
                  InconsistentLinkError);

  // wrong constraint: does not vanish on the image of F
  HamiltonianLink bad_phi = toy.link;
  bad_phi.constraints = {ScalarField(2, 2, [](auto, auto p) { return p[1] + 0.2; })};
  CHECK_THROWS_AS(validate_link(toy.model, bad_phi, toy.default_seeds),
                  InconsistentLinkError);

  // wrong constraint count vs kernel dimension
  HamiltonianLink bad_m = toy.link;
  bad_m.m = 0;
  bad_m.constraints.clear();
  CHECK_THROWS_AS(validate_link(toy.model, bad_m, toy.default_seeds),
                  InconsistentLinkError);

  // the registry link itself validates
  CHECK_NOTHROW(validate_link(toy.model, toy.link, toy.default_seeds));
}

TEST_CASE("degenerate constraint frame is reported") {
  // phi = p2^2 vanishes on the image of F but its gradient does too, so the
  // frame gamma_mu loses rank.
  ModelRegistryEntry toy = make_model("toy_singular");
  HamiltonianLink degen = toy.link;
  degen.constraints = {ScalarField(2, 2, [](auto, auto p) { return p[1] * p[1]; })};
  CHECK_THROWS_AS(
      (void)solve_lambda(toy.model, degen, pt({0.1, 0.2}, {0.5, 0.7})),
      DegenerateConstraintsError);
}

TEST_CASE("inconsistent multiplier system is reported by solve_lambda") {
  // Keep phi = p2 (full-rank frame) but lie about H so v - gamma_H leaves
  // the span of gamma_phi.
  ModelRegistryEntry toy = make_model("toy_singular");
  HamiltonianLink lying = toy.link;
  lying.H = ScalarField(2, 2, [](auto q, auto p) {
    auto d = p[0] - q[1];
    return 0.25 * d * d;  // gamma_H = (v1/2, 0): residual in the first slot
  });
  CHECK_THROWS_AS(
      (void)solve_lambda(toy.model, lying, pt({0.1, 0.2}, {0.8, 0.3})),
      InconsistentLinkError);
}
