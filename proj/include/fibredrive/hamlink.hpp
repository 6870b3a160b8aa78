#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fibredrive/lagrangian.hpp"
#include "fibredrive/linops.hpp"

namespace fibredrive {

/// Hamiltonian-side data on the momentum chart (q, p): a hamiltonian H with
/// H∘F = E and m primary constraints phi_mu vanishing on the image of the
/// Legendre map.
struct HamiltonianLink {
  int m = 0;
  ScalarField H;
  std::vector<ScalarField> constraints;
};

struct ResolutionData {
  Eigen::VectorXd lambda;    // m multipliers
  Eigen::MatrixXd Dlambda;   // m x n fibre derivatives of the multipliers
  Eigen::MatrixXd M;         // n x n, covectors -> fibre vectors
  double residual_identity = 0.0;   // v = gamma_H + sum gamma_mu lambda^mu
  double residual_derivative = 0.0; // Id = M W + sum gamma_mu (x) D lambda^mu
};

// Differentiable evaluation stack.

/// gamma_h = grad_p h evaluated at (q, F(q, v)).
template <class S>
std::vector<S> gamma_of(const LagrangianModel& model, const ScalarField& h,
                        std::span<const S> q, std::span<const S> v) {
  std::vector<S> alpha = legendre_of(model, q, v);
  return fibre_gradient(h, q, std::span<const S>(alpha));
}

/// Multipliers from the normal equations of Gamma·lambda = v - gamma_H.
/// Stays differentiable; the double-level solve_lambda adds rank and
/// consistency checks on top.
template <class S>
std::vector<S> lambda_of(const LagrangianModel& model,
                         const HamiltonianLink& link, std::span<const S> q,
                         std::span<const S> v) {
  const int n = model.n;
  const int m = link.m;
  if (m == 0) return {};
  std::vector<S> gH = gamma_of(model, link.H, q, v);
  std::vector<S> rhs(static_cast<std::size_t>(n), S(0.0));
  for (int i = 0; i < n; ++i) rhs[i] = v[i] - gH[i];
  MatS<S> G(n, m);
  for (int mu = 0; mu < m; ++mu) {
    std::vector<S> col = gamma_of(model, link.constraints[mu], q, v);
    for (int i = 0; i < n; ++i) G(i, mu) = col[i];
  }
  MatS<S> gram(m, m);
  std::vector<S> b(static_cast<std::size_t>(m), S(0.0));
  for (int mu = 0; mu < m; ++mu) {
    for (int nu = 0; nu < m; ++nu) {
      S s(0.0);
      for (int i = 0; i < n; ++i) s += G(i, mu) * G(i, nu);
      gram(mu, nu) = s;
    }
    S s(0.0);
    for (int i = 0; i < n; ++i) s += G(i, mu) * rhs[i];
    b[mu] = s;
  }
  return solve_dense(gram, b);
}

/// M = (D2H ∘ F) + sum_mu lambda^mu (D2phi_mu ∘ F) on the fibre block.
template <class S>
MatS<S> matrix_M_of(const LagrangianModel& model, const HamiltonianLink& link,
                    std::span<const S> q, std::span<const S> v) {
  std::vector<S> alpha = legendre_of(model, q, v);
  std::span<const S> asp(alpha);
  MatS<S> M = fibre_jet(link.H, q, asp).hess;
  if (link.m > 0) {
    std::vector<S> lam = lambda_of(model, link, q, v);
    for (int mu = 0; mu < link.m; ++mu) {
      MatS<S> hp = fibre_jet(link.constraints[mu], q, asp).hess;
      for (int i = 0; i < model.n; ++i)
        for (int j = 0; j < model.n; ++j) M(i, j) += lam[mu] * hp(i, j);
    }
  }
  return M;
}

// Double-level public surface.

/// Fibre components of the vertical field Gamma_h at p.
Eigen::VectorXd gamma_field(const LagrangianModel& model, const ScalarField& h,
                            const ChartPoint& p);

/// (Upsilon^g · h)(p) = sum_i dg/dv_i · (dh/dp_i ∘ F). Equals (Gamma_h·g)(p).
double upsilon_apply(const LagrangianModel& model, const ScalarField& g,
                     const ScalarField& h, const ChartPoint& p);

/// Least-squares multipliers with column-pivot rank check and residual
/// certificate. Throws DegenerateConstraintsError when the frame loses rank
/// and InconsistentLinkError when the system fails to close.
Eigen::VectorXd solve_lambda(const LagrangianModel& model,
                             const HamiltonianLink& link, const ChartPoint& p,
                             double tol_rank = 1e-8,
                             double tol_residual = 1e-8);

/// D lambda^mu by central finite differences of solve_lambda in the fibre
/// coordinates.
Eigen::MatrixXd dlambda(const LagrangianModel& model,
                        const HamiltonianLink& link, const ChartPoint& p,
                        double step = 1e-5);

Eigen::MatrixXd matrix_M(const LagrangianModel& model,
                         const HamiltonianLink& link, const ChartPoint& p);

/// Assembles lambda, D lambda and M and reports the residuals of both
/// resolution-of-identity equations.
ResolutionData resolution_check(const LagrangianModel& model,
                                const HamiltonianLink& link,
                                const ChartPoint& p);

struct LinkValidationOptions {
  double tol_kernel = 1e-8;  // relative SVD threshold for kernel rank
  double tol_match = 1e-8;   // |H∘F - E| and |phi∘F| bound at samples
};

/// Checks that the link data matches the model: constraint count equals the
/// kernel dimension of W, H∘F = E and phi_mu∘F = 0 at every sample point.
void validate_link(const LagrangianModel& model, const HamiltonianLink& link,
                   std::span<const ChartPoint> samples,
                   const LinkValidationOptions& opts = {});

/// Sine of the largest principal angle between the column spans of A and B.
double span_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Principal angle between span{gamma_mu(p)} and the numerical kernel of
/// W(p) (the frame property of the constraint fields).
double kernel_frame_angle(const LagrangianModel& model,
                          const HamiltonianLink& link, const ChartPoint& p,
                          double tol_kernel = 1e-8);

}  // namespace fibredrive
