#include "fibredrive/lagrangian.hpp"

#include <Eigen/SVD>

namespace fibredrive {

SecondOrderField zero_second_order_field(int n) {
  return {VectorField(n, n, n, [n](auto q, auto) {
    using S = typename decltype(q)::value_type;
    (void)q;
    return std::vector<S>(static_cast<std::size_t>(n), S(0.0));
  })};
}

Eigen::VectorXd legendre(const LagrangianModel& model, const ChartPoint& p) {
  model.require_domain(p);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  Eigen::VectorXd out = to_eigen(
      legendre_of(model, std::span<const double>(q), std::span<const double>(v)));
  if (!out.allFinite()) throw EvaluationError(model.name + ": non-finite momentum");
  return out;
}

Eigen::MatrixXd hessian_W(const LagrangianModel& model, const ChartPoint& p) {
  model.require_domain(p);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  Eigen::MatrixXd W = to_eigen(
      hessian_W_of(model, std::span<const double>(q), std::span<const double>(v)));
  if (!W.allFinite()) throw EvaluationError(model.name + ": non-finite hessian");
  return W;
}

std::vector<Eigen::VectorXd> kernel_basis(const LagrangianModel& model,
                                          const ChartPoint& p, double tol) {
  Eigen::MatrixXd W = hessian_W(model, p);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv[0] : 0.0;
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (smax == 0.0 || sv[k] <= tol * smax) basis.push_back(svd.matrixV().col(k));
  return basis;
}

int kernel_dimension(const LagrangianModel& model,
                     std::span<const ChartPoint> points, double tol) {
  if (points.empty()) throw DimensionError("kernel_dimension: no sample points");
  int dim = -1;
  for (const ChartPoint& p : points) {
    int d = static_cast<int>(kernel_basis(model, p, tol).size());
    if (dim < 0) dim = d;
    if (d != dim)
      throw RankInstabilityError(model.name +
                                 ": kernel rank changes across sampled points");
  }
  return dim;
}

double energy(const LagrangianModel& model, const ChartPoint& p) {
  model.require_domain(p);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  return energy_of(model, std::span<const double>(q), std::span<const double>(v));
}

double energy_identity_residual(const LagrangianModel& model,
                                const ChartPoint& p) {
  model.require_domain(p);
  LagrangianModel m = model;
  ScalarField e_field(
      model.n, model.n,
      [m](auto q, auto v) { return energy_of(m, q, v); },
      model.L.max_depth() - 1);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  Eigen::VectorXd grad_e = to_eigen(fibre_gradient(
      e_field, std::span<const double>(q), std::span<const double>(v)));
  Eigen::VectorXd wv = hessian_W(model, p) * p.v;
  return (grad_e - wv).cwiseAbs().maxCoeff();
}

EulerLagrangeValue euler_lagrange(const LagrangianModel& model,
                                  const ChartPoint& p,
                                  const Eigen::VectorXd& A) {
  model.require_domain(p);
  if (A.size() != p.q.size())
    throw DimensionError("euler_lagrange: acceleration dimension mismatch");
  std::vector<double> q = to_std(p.q), v = to_std(p.v), a = to_std(A);
  Eigen::VectorXd cov = to_eigen(
      euler_lagrange_of(model, std::span<const double>(q),
                        std::span<const double>(v), std::span<const double>(a)));
  if (!cov.allFinite())
    throw EvaluationError(model.name + ": non-finite Euler-Lagrange covector");
  return {std::move(cov)};
}

BundleMap legendre_bundle_map(const LagrangianModel& model) {
  LagrangianModel m = model;
  VectorField ev(
      model.n, model.n, model.n,
      [m](auto q, auto v) { return legendre_of(m, q, v); },
      model.L.max_depth() - 1);
  return {model.n, model.n, model.n, std::move(ev)};
}

}  // namespace fibredrive
