#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fibredrive/chart.hpp"
#include "fibredrive/fibrecalc.hpp"
#include "fibredrive/field.hpp"
#include "fibredrive/jets.hpp"

namespace fibredrive {

/// A first-order autonomous Lagrangian on an n-dimensional velocity chart.
struct LagrangianModel {
  int n = 0;
  std::string name;
  ScalarField L;
  std::function<bool(const ChartPoint&)> domain;  // empty: whole chart
  std::map<std::string, double> params;

  bool in_domain(const ChartPoint& p) const { return !domain || domain(p); }
  void require_domain(const ChartPoint& p) const {
    if (p.n() != n) throw DimensionError(name + ": point dimension mismatch");
    if (!in_domain(p)) throw DomainError(name + ": point outside model domain");
  }
};

/// Second-order vector field in chart form: base part forced to v, fibre part
/// the acceleration map A(q, v).
struct SecondOrderField {
  VectorField accel;
};

/// Vertical vector field, stored as its fibre component.
struct VerticalField {
  VectorField comp;
};

struct EulerLagrangeValue {
  Eigen::VectorXd covector;
};

/// Second-order field with A == 0 (the simplest choice of reference field).
SecondOrderField zero_second_order_field(int n);

// Differentiable evaluation stack (generic over the jet scalar).

/// Legendre map: grad_v L.
template <class S>
std::vector<S> legendre_of(const LagrangianModel& model, std::span<const S> q,
                           std::span<const S> v) {
  return fibre_gradient(model.L, q, v);
}

/// Fibre hessian W_ij = d2L/dv_i dv_j.
template <class S>
MatS<S> hessian_W_of(const LagrangianModel& model, std::span<const S> q,
                     std::span<const S> v) {
  return fibre_jet(model.L, q, v).hess;
}

/// Euler-Lagrange covector at acceleration A:
/// dL/dq_i - sum_j d2L/dq_j dv_i v_j - sum_j W_ij A_j.
template <class S>
std::vector<S> euler_lagrange_of(const LagrangianModel& model,
                                 std::span<const S> q, std::span<const S> v,
                                 std::span<const S> A) {
  JetRecord<S> jet = jet_full(model.L, q, v);
  const int n = model.n;
  std::vector<S> out(static_cast<std::size_t>(n), S(0.0));
  for (int i = 0; i < n; ++i) {
    S s = jet.grad_x[i];
    for (int j = 0; j < n; ++j) s -= jet.hess_xa(j, i) * v[j];
    for (int j = 0; j < n; ++j) s -= jet.hess_aa(i, j) * A[j];
    out[i] = s;
  }
  return out;
}

/// Energy E = <grad_v L, v> - L.
template <class S>
S energy_of(const LagrangianModel& model, std::span<const S> q,
            std::span<const S> v) {
  std::vector<S> p = legendre_of(model, q, v);
  S s(0.0);
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * v[i];
  return s - model.L.eval(q, v);
}

// Double-level public surface.

Eigen::VectorXd legendre(const LagrangianModel& model, const ChartPoint& p);

Eigen::MatrixXd hessian_W(const LagrangianModel& model, const ChartPoint& p);

/// Orthonormal basis of the numerical kernel of W(p): right singular vectors
/// with sigma_k <= tol * sigma_max (all of them if sigma_max == 0). Empty
/// exactly when L is regular at p.
std::vector<Eigen::VectorXd> kernel_basis(const LagrangianModel& model,
                                          const ChartPoint& p,
                                          double tol = 1e-8);

/// Kernel dimension checked across sample points; a change of rank raises
/// RankInstabilityError instead of silently proceeding.
int kernel_dimension(const LagrangianModel& model,
                     std::span<const ChartPoint> points, double tol = 1e-8);

double energy(const LagrangianModel& model, const ChartPoint& p);

/// Max-norm of grad_v E(p) - W(p)·v. Contract: <= 1e-9 on the model domain.
double energy_identity_residual(const LagrangianModel& model,
                                const ChartPoint& p);

EulerLagrangeValue euler_lagrange(const LagrangianModel& model,
                                  const ChartPoint& p,
                                  const Eigen::VectorXd& A);

/// The Legendre map packaged as a bundle map (for fibre-calculus
/// cross-checks: its fibre derivative is W).
BundleMap legendre_bundle_map(const LagrangianModel& model);

}  // namespace fibredrive
