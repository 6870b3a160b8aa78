#include "fibredrive/jets.hpp"

namespace fibredrive {

namespace {

Eigen::MatrixXd pack(const MatS<double>& m) { return to_eigen(m); }

void check_dims(const ScalarField& f, const ChartPoint& p) {
  if (!f.valid()) throw DimensionError("eval_jet2: empty field");
  if (f.base_dim() != p.n() || f.fibre_dim() != p.n())
    throw DimensionError("eval_jet2: field/point dimension mismatch");
}

}  // namespace

Jet2 eval_jet2(const ScalarField& f, const ChartPoint& p) {
  check_dims(f, p);
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  JetRecord<double> rec =
      jet_full(f, std::span<const double>(q), std::span<const double>(v));

  Jet2 out;
  out.value = rec.value;
  out.grad_q = to_eigen(rec.grad_x);
  out.grad_v = to_eigen(rec.grad_a);
  out.hess_qq = pack(rec.hess_xx);
  out.hess_qv = pack(rec.hess_xa);
  out.hess_vv = pack(rec.hess_aa);

  if (!std::isfinite(out.value) || !out.grad_q.allFinite() ||
      !out.grad_v.allFinite() || !out.hess_qq.allFinite() ||
      !out.hess_qv.allFinite() || !out.hess_vv.allFinite())
    throw EvaluationError("eval_jet2: non-finite derivative at chart point");
  return out;
}

double directional_derivative(const ScalarField& f, const ChartPoint& p,
                              const Eigen::VectorXd& dq,
                              const Eigen::VectorXd& dv) {
  check_dims(f, p);
  if (dq.size() != p.q.size() || dv.size() != p.v.size())
    throw DimensionError("directional_derivative: direction dimension mismatch");
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  std::vector<double> dqs = to_std(dq), dvs = to_std(dv);
  double r = directional(f, std::span<const double>(q), std::span<const double>(v),
                         std::span<const double>(dqs), std::span<const double>(dvs));
  if (!std::isfinite(r))
    throw EvaluationError("directional_derivative: non-finite result");
  return r;
}

}  // namespace fibredrive
