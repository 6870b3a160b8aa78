#include "fibredrive/hamlink.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

namespace fibredrive {

namespace {

struct ChartData {
  std::vector<double> q, v;
  std::span<const double> qs() const { return q; }
  std::span<const double> vs() const { return v; }
};

ChartData unpack(const ChartPoint& p) { return {to_std(p.q), to_std(p.v)}; }

Eigen::MatrixXd gamma_frame(const LagrangianModel& model,
                            const HamiltonianLink& link, const ChartData& c) {
  Eigen::MatrixXd G(model.n, link.m);
  for (int mu = 0; mu < link.m; ++mu)
    G.col(mu) = to_eigen(gamma_of(model, link.constraints[mu], c.qs(), c.vs()));
  return G;
}

}  // namespace

Eigen::VectorXd gamma_field(const LagrangianModel& model, const ScalarField& h,
                            const ChartPoint& p) {
  model.require_domain(p);
  if (h.base_dim() != model.n || h.fibre_dim() != model.n)
    throw DimensionError("gamma_field: momentum field dimension mismatch");
  ChartData c = unpack(p);
  Eigen::VectorXd g = to_eigen(gamma_of(model, h, c.qs(), c.vs()));
  if (!g.allFinite()) throw EvaluationError("gamma_field: non-finite result");
  return g;
}

double upsilon_apply(const LagrangianModel& model, const ScalarField& g,
                     const ScalarField& h, const ChartPoint& p) {
  model.require_domain(p);
  ChartData c = unpack(p);
  Eigen::VectorXd dg = to_eigen(fibre_gradient(g, c.qs(), c.vs()));
  Eigen::VectorXd gh = to_eigen(gamma_of(model, h, c.qs(), c.vs()));
  return dg.dot(gh);
}

Eigen::VectorXd solve_lambda(const LagrangianModel& model,
                             const HamiltonianLink& link, const ChartPoint& p,
                             double tol_rank, double tol_residual) {
  model.require_domain(p);
  ChartData c = unpack(p);
  Eigen::VectorXd gH = to_eigen(gamma_of(model, link.H, c.qs(), c.vs()));
  Eigen::VectorXd rhs = p.v - gH;
  double scale = 1.0 + p.v.cwiseAbs().maxCoeff();

  if (link.m == 0) {
    if (rhs.cwiseAbs().maxCoeff() > tol_residual * scale)
      throw InconsistentLinkError(model.name +
                                  ": v != gamma_H for a regular model");
    return Eigen::VectorXd(0);
  }

  Eigen::MatrixXd G = gamma_frame(model, link, c);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
  qr.setThreshold(tol_rank);
  if (qr.rank() < link.m)
    throw DegenerateConstraintsError(
        model.name + ": constraint frame gamma_mu lost column rank");
  Eigen::VectorXd lambda = qr.solve(rhs);
  if ((G * lambda - rhs).cwiseAbs().maxCoeff() > tol_residual * scale)
    throw InconsistentLinkError(
        model.name + ": multiplier system inconsistent (bad H or phi)");
  return lambda;
}

Eigen::MatrixXd dlambda(const LagrangianModel& model,
                        const HamiltonianLink& link, const ChartPoint& p,
                        double step) {
  Eigen::MatrixXd out(link.m, model.n);
  for (int j = 0; j < model.n; ++j) {
    Eigen::VectorXd vp = p.v, vm = p.v;
    vp[j] += step;
    vm[j] -= step;
    Eigen::VectorXd lp = solve_lambda(model, link, ChartPoint(p.q, vp));
    Eigen::VectorXd lm = solve_lambda(model, link, ChartPoint(p.q, vm));
    out.col(j) = (lp - lm) / (2.0 * step);
  }
  return out;
}

Eigen::MatrixXd matrix_M(const LagrangianModel& model,
                         const HamiltonianLink& link, const ChartPoint& p) {
  model.require_domain(p);
  ChartData c = unpack(p);
  Eigen::MatrixXd M = to_eigen(matrix_M_of(model, link, c.qs(), c.vs()));
  if (!M.allFinite()) throw EvaluationError("matrix_M: non-finite result");
  return M;
}

ResolutionData resolution_check(const LagrangianModel& model,
                                const HamiltonianLink& link,
                                const ChartPoint& p) {
  ResolutionData out;
  out.lambda = solve_lambda(model, link, p);
  out.Dlambda = dlambda(model, link, p);
  out.M = matrix_M(model, link, p);

  ChartData c = unpack(p);
  Eigen::VectorXd gH = to_eigen(gamma_of(model, link.H, c.qs(), c.vs()));
  Eigen::VectorXd recon = gH;
  Eigen::MatrixXd G = gamma_frame(model, link, c);
  if (link.m > 0) recon += G * out.lambda;
  out.residual_identity = (recon - p.v).cwiseAbs().maxCoeff();

  Eigen::MatrixXd W = hessian_W(model, p);
  Eigen::MatrixXd id = out.M * W;
  for (int mu = 0; mu < link.m; ++mu)
    id += G.col(mu) * out.Dlambda.row(mu);
  out.residual_derivative =
      (Eigen::MatrixXd::Identity(model.n, model.n) - id).cwiseAbs().maxCoeff();
  return out;
}

void validate_link(const LagrangianModel& model, const HamiltonianLink& link,
                   std::span<const ChartPoint> samples,
                   const LinkValidationOptions& opts) {
  if (static_cast<int>(link.constraints.size()) != link.m)
    throw DimensionError("validate_link: constraint count mismatch");
  if (samples.empty())
    throw DimensionError("validate_link: no sample points provided");

  int kdim = kernel_dimension(model, samples, opts.tol_kernel);
  if (kdim != link.m)
    throw InconsistentLinkError(
        model.name + ": constraint count " + std::to_string(link.m) +
        " does not match kernel dimension " + std::to_string(kdim));

  for (const ChartPoint& p : samples) {
    ChartData c = unpack(p);
    std::vector<double> alpha = legendre_of(model, c.qs(), c.vs());
    std::span<const double> asp(alpha);
    double e = energy_of(model, c.qs(), c.vs());
    double h = link.H.eval(c.qs(), asp);
    if (std::abs(h - e) > opts.tol_match * (1.0 + std::abs(e)))
      throw InconsistentLinkError(model.name +
                                  ": H∘F does not reproduce the energy");
    for (int mu = 0; mu < link.m; ++mu) {
      double phi = link.constraints[mu].eval(c.qs(), asp);
      if (std::abs(phi) > opts.tol_match)
        throw InconsistentLinkError(
            model.name + ": primary constraint " + std::to_string(mu + 1) +
            " does not vanish on the image of the Legendre map");
    }
  }
}

double span_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() == 0 && B.cols() == 0) return 0.0;
  if (A.cols() == 0 || B.cols() == 0) return 1.0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
  Eigen::MatrixXd Qa =
      qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd Qb =
      qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
  Eigen::MatrixXd R = Qb - Qa * (Qa.transpose() * Qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

double kernel_frame_angle(const LagrangianModel& model,
                          const HamiltonianLink& link, const ChartPoint& p,
                          double tol_kernel) {
  std::vector<Eigen::VectorXd> kb = kernel_basis(model, p, tol_kernel);
  Eigen::MatrixXd K(model.n, kb.size());
  for (std::size_t k = 0; k < kb.size(); ++k) K.col(static_cast<int>(k)) = kb[k];
  ChartData c = unpack(p);
  Eigen::MatrixXd G = gamma_frame(model, link, c);
  double a1 = span_angle(K, G);
  double a2 = span_angle(G, K);
  return std::max(a1, a2);
}

}  // namespace fibredrive
