#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fibredrive/hamlink.hpp"
#include "fibredrive/lagrangian.hpp"

namespace fibredrive {

/// A constraint produced by the stabilisation algorithm, kept as a
/// differentiable closure so later rounds can take its derivatives.
struct ConstraintFunction {
  int level = 1;
  std::string name;
  std::string provenance;
  ScalarField eval;
  bool identically_zero = false;  // vanished at every sample when discovered
};

enum class StabilisationStatus {
  finished,
  empty_final_set,
  max_rounds_exceeded,
  rank_instability,
};

const char* to_string(StabilisationStatus s);

struct StabilisationRound {
  int level = 1;
  std::vector<ConstraintFunction> new_constraints;
  // Rows (c_1, ..., c_m, c_0) meaning sum_mu c_mu u^mu + c_0 = 0, one row per
  // surface sample of the constraint that produced them.
  std::vector<Eigen::VectorXd> multiplier_relations;
};

struct StabilisationReport {
  StabilisationStatus status = StabilisationStatus::finished;
  int kernel_dim = 0;
  std::vector<StabilisationRound> rounds;
  std::map<int, ScalarField> determined_u;  // multiplier index -> value field
  std::vector<int> free_multipliers;
  std::vector<ChartPoint> final_samples;
  double max_primary_abs = 0.0;     // max |chi_mu| over the input samples
  double final_tangency_max = 0.0;  // max |D_f · chi| on the final samples

  /// All constraints that are active (not flagged identically zero).
  std::vector<ConstraintFunction> active_constraints() const;
};

struct StabilisationOptions {
  double tol_class = 1e-7;   // relative classification threshold
  int max_rounds = 10;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
};

enum class TrajectoryStatus { completed, domain_exit, non_finite };

struct Trajectory {
  std::vector<double> times;
  std::vector<ChartPoint> states;
  std::vector<double> energy;
  std::vector<double> el_residual;
  std::vector<std::string> constraint_names;
  std::vector<std::vector<double>> constraint_residuals;  // [constraint][step]
  TrajectoryStatus status = TrajectoryStatus::completed;
};

// Differentiable evaluation stack.

template <class S>
std::vector<S> d0_accel_of(const LagrangianModel& model,
                           const HamiltonianLink& link, const VectorField& x0,
                           std::span<const S> q, std::span<const S> v) {
  std::vector<S> A = x0.eval(q, v);
  std::vector<S> el = euler_lagrange_of(model, q, v, std::span<const S>(A));
  MatS<S> M = matrix_M_of(model, link, q, v);
  std::vector<S> corr = matvec(M, std::span<const S>(el));
  for (std::size_t i = 0; i < A.size(); ++i) A[i] += corr[i];
  return A;
}

template <class S>
S chi_of(const LagrangianModel& model, const HamiltonianLink& link,
         const VectorField& x0, int mu, std::span<const S> q,
         std::span<const S> v) {
  std::vector<S> A = x0.eval(q, v);
  std::vector<S> el = euler_lagrange_of(model, q, v, std::span<const S>(A));
  std::vector<S> g = gamma_of(model, link.constraints[mu], q, v);
  return dot(std::span<const S>(el), std::span<const S>(g));
}

// Field constructors.

/// Primary constraints chi_mu = <EL(X0), Gamma_mu> as differentiable
/// closures (the values do not depend on the X0 chosen).
std::vector<ConstraintFunction> primary_constraints(
    const LagrangianModel& model, const HamiltonianLink& link,
    const SecondOrderField& x0);

/// max_mu |chi_mu via X0a - chi_mu via X0b| at p.
double x0_independence_residual(const LagrangianModel& model,
                                const HamiltonianLink& link,
                                const SecondOrderField& x0a,
                                const SecondOrderField& x0b,
                                const ChartPoint& p);

/// D0 = X0 + M∘(EL∘X0): a second-order field solving the Euler-Lagrange
/// equation on the primary constraint surface.
SecondOrderField primary_field_D0(const LagrangianModel& model,
                                  const HamiltonianLink& link,
                                  const SecondOrderField& x0);

/// Gamma_mu as a vertical field.
VerticalField gamma_vertical(const LagrangianModel& model,
                             const HamiltonianLink& link, int mu);

/// D_u = D0 + sum_mu u^mu Gamma_mu for multiplier fields u.
SecondOrderField field_Du(const LagrangianModel& model,
                          const HamiltonianLink& link,
                          const SecondOrderField& d0,
                          const std::vector<ScalarField>& u);

/// Constant multiplier fields on an n-dimensional chart.
std::vector<ScalarField> constant_multipliers(int n,
                                              const Eigen::VectorXd& values);

/// Derivative of a scalar field along a second-order field
/// (grad_q g · v + grad_v g · A), as a differentiable closure.
ScalarField lie_along(const ScalarField& g, const SecondOrderField& f);

/// Derivative along a vertical field (grad_v g · comp).
ScalarField lie_along_vertical(const ScalarField& g, const VerticalField& y);

/// Max-norm of EL(D0) - sum_mu chi_mu * Dlambda^mu at p (this identity holds
/// on the whole domain, not only on the constraint surface).
double d0_prim_residual(const LagrangianModel& model,
                        const HamiltonianLink& link,
                        const SecondOrderField& d0, const SecondOrderField& x0,
                        const ChartPoint& p);

// Surface sampling.

enum class ProjectionStatus { converged, excluded, failed };

struct ProjectionResult {
  ProjectionStatus status = ProjectionStatus::failed;
  ChartPoint point;
  double residual = 0.0;
};

/// Damped Newton projection of a seed onto the zero set of the given
/// constraints (least-squares step, step halving, domain-aware).
ProjectionResult newton_project(const LagrangianModel& model,
                                std::span<const ConstraintFunction> constraints,
                                const ChartPoint& seed, double tol = 1e-10,
                                int max_iter = 50);

/// Tangency analysis of D_u = D0 + sum u^mu Gamma_mu: per round, derivatives
/// of the newest constraints along D0 and Gamma_mu are classified into new
/// constraints and multiplier relations until nothing new appears.
StabilisationReport stabilise(const LagrangianModel& model,
                              const HamiltonianLink& link,
                              const SecondOrderField& d0,
                              std::span<const ChartPoint> seeds,
                              const StabilisationOptions& opts = {});

/// Classical fixed-step 4th-order integration of q' = v, v' = A(q, v) with
/// per-step residual logging. Stops early (with a status flag) when the
/// state leaves the model domain or goes non-finite; drift is logged, never
/// corrected.
Trajectory integrate(const LagrangianModel& model, const SecondOrderField& field,
                     const ChartPoint& p0, double t_end, double dt,
                     std::span<const ConstraintFunction> log_constraints = {});

}  // namespace fibredrive
