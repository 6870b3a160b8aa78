#include "fibredrive/fibrecalc.hpp"

#include <algorithm>
#include <cmath>

namespace fibredrive {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw DimensionError(msg);
}

double scaled_residual(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs) {
  double num = (lhs - rhs).cwiseAbs().maxCoeff();
  double den = 1.0 + std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
  return num / den;
}

double scaled_residual(const Eigen::VectorXd& lhs, const Eigen::VectorXd& rhs) {
  double num = (lhs - rhs).cwiseAbs().maxCoeff();
  double den = 1.0 + std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
  return num / den;
}

std::vector<double> as_std(const Eigen::VectorXd& x) { return to_std(x); }

}  // namespace

FibreDerivativeValue fibre_derivative(const BundleMap& f,
                                      const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& a) {
  require(x.size() == f.base_dim && a.size() == f.in_dim,
          "fibre_derivative: dimension mismatch");
  std::vector<double> xs = as_std(x), as = as_std(a);
  MatS<double> m = vec_fibre_jacobian(f.eval, std::span<const double>(xs),
                                      std::span<const double>(as));
  FibreDerivativeValue out{to_eigen(m)};
  if (!out.matrix.allFinite())
    throw EvaluationError("fibre_derivative: non-finite result");
  return out;
}

FibreHessianValue fibre_hessian(const BundleMap& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& a) {
  require(x.size() == f.base_dim && a.size() == f.in_dim,
          "fibre_hessian: dimension mismatch");
  std::vector<double> xs = as_std(x), as = as_std(a);
  std::vector<MatS<double>> t = vec_fibre_hessian(
      f.eval, std::span<const double>(xs), std::span<const double>(as));
  FibreHessianValue out;
  out.tensor.reserve(t.size());
  for (const auto& m : t) {
    out.tensor.push_back(to_eigen(m));
    if (!out.tensor.back().allFinite())
      throw EvaluationError("fibre_hessian: non-finite result");
  }
  return out;
}

BundleMap scale_bundle_map(const BundleMap& f, const ScalarField& phi) {
  require(phi.base_dim() == f.base_dim && phi.fibre_dim() == f.in_dim,
          "scale_bundle_map: dimension mismatch");
  VectorField fe = f.eval;
  ScalarField pe = phi;
  int depth = std::min(fe.max_depth(), pe.max_depth());
  VectorField ev(
      f.base_dim, f.in_dim, f.out_dim,
      [fe, pe](auto x, auto a) {
        auto val = fe.eval(x, a);
        auto s = pe.eval(x, a);
        for (auto& c : val) c = c * s;
        return val;
      },
      depth);
  return {f.base_dim, f.in_dim, f.out_dim, std::move(ev)};
}

ScalarField pairing_field(const BundleMap& phi, const BundleMap& f) {
  require(phi.base_dim == f.base_dim && phi.in_dim == f.in_dim &&
              phi.out_dim == f.out_dim,
          "pairing_field: dimension mismatch");
  VectorField pe = phi.eval, fe = f.eval;
  int depth = std::min(pe.max_depth(), fe.max_depth());
  return ScalarField(
      f.base_dim, f.in_dim,
      [pe, fe](auto x, auto a) {
        using S = typename decltype(x)::value_type;
        auto pv = pe.eval(x, a);
        auto fv = fe.eval(x, a);
        S s(0.0);
        for (std::size_t k = 0; k < pv.size(); ++k) s += pv[k] * fv[k];
        return s;
      },
      depth);
}

BundleMap compose_bundle_maps(const BundleMap& g, const BundleMap& f) {
  require(g.base_dim == f.base_dim && g.in_dim == f.out_dim,
          "compose_bundle_maps: dimension mismatch");
  VectorField ge = g.eval, fe = f.eval;
  int depth = std::min(ge.max_depth(), fe.max_depth());
  VectorField ev(
      f.base_dim, f.in_dim, g.out_dim,
      [ge, fe](auto x, auto a) {
        using S = typename decltype(x)::value_type;
        std::vector<S> mid = fe.eval(x, a);
        return ge.eval(x, std::span<const S>(mid));
      },
      depth);
  return {f.base_dim, f.in_dim, g.out_dim, std::move(ev)};
}

BundleMap derivative_bundle_map(const BundleMap& f) {
  VectorField fe = f.eval;
  const int od = f.out_dim, id = f.in_dim;
  VectorField ev(
      f.base_dim, f.in_dim, od * id,
      [fe, od, id](auto x, auto a) {
        using S = typename decltype(x)::value_type;
        MatS<S> m = vec_fibre_jacobian(fe, x, a);
        std::vector<S> flat(static_cast<std::size_t>(od) * id, S(0.0));
        for (int k = 0; k < od; ++k)
          for (int i = 0; i < id; ++i)
            flat[static_cast<std::size_t>(k) * id + i] = m(k, i);
        return flat;
      },
      fe.max_depth() - 1);
  return {f.base_dim, f.in_dim, od * id, std::move(ev)};
}

double check_product_rule(const BundleMap& f, const ScalarField& phi,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  require(phi.base_dim() == f.base_dim && phi.fibre_dim() == f.in_dim,
          "check_product_rule: dimension mismatch");
  Eigen::MatrixXd lhs = fibre_derivative(scale_bundle_map(f, phi), x, a).matrix;

  std::vector<double> xs = as_std(x), as = as_std(a);
  Eigen::MatrixXd df = fibre_derivative(f, x, a).matrix;
  double pv = phi.eval(std::span<const double>(xs), std::span<const double>(as));
  Eigen::VectorXd fv = to_eigen(
      f.eval.eval(std::span<const double>(xs), std::span<const double>(as)));
  Eigen::VectorXd dphi = to_eigen(
      fibre_gradient(phi, std::span<const double>(xs), std::span<const double>(as)));
  Eigen::MatrixXd rhs = df * pv + fv * dphi.transpose();
  return scaled_residual(lhs, rhs);
}

double check_pairing_rule(const BundleMap& phi, const BundleMap& f,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  Eigen::VectorXd lhs;
  {
    ScalarField pair = pairing_field(phi, f);
    std::vector<double> xs = as_std(x), as = as_std(a);
    lhs = to_eigen(fibre_gradient(pair, std::span<const double>(xs),
                                  std::span<const double>(as)));
  }
  std::vector<double> xs = as_std(x), as = as_std(a);
  Eigen::VectorXd pv = to_eigen(
      phi.eval.eval(std::span<const double>(xs), std::span<const double>(as)));
  Eigen::VectorXd fv = to_eigen(
      f.eval.eval(std::span<const double>(xs), std::span<const double>(as)));
  Eigen::MatrixXd df = fibre_derivative(f, x, a).matrix;
  Eigen::MatrixXd dphi = fibre_derivative(phi, x, a).matrix;
  Eigen::VectorXd rhs = df.transpose() * pv + dphi.transpose() * fv;
  return scaled_residual(lhs, rhs);
}

double check_chain_rule(const BundleMap& g, const BundleMap& f,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  Eigen::MatrixXd lhs = fibre_derivative(compose_bundle_maps(g, f), x, a).matrix;
  std::vector<double> xs = as_std(x), as = as_std(a);
  Eigen::VectorXd fv = to_eigen(
      f.eval.eval(std::span<const double>(xs), std::span<const double>(as)));
  Eigen::MatrixXd dg = fibre_derivative(g, x, fv).matrix;
  Eigen::MatrixXd df = fibre_derivative(f, x, a).matrix;
  return scaled_residual(lhs, Eigen::MatrixXd(dg * df));
}

std::pair<double, double> liouville_identities(const ScalarField& g,
                                               const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& e) {
  require(g.base_dim() == x.size() && g.fibre_dim() == e.size(),
          "liouville_identities: dimension mismatch");
  std::vector<double> xs = as_std(x), es = as_std(e);
  std::span<const double> xsp(xs), esp(es);

  // (Delta·g)(e) evaluated as a single directional pass vs <Dg(e), e>.
  double lie = directional(g, xsp, esp, std::span<const double>(), esp);
  Eigen::VectorXd dg = to_eigen(fibre_gradient(g, xsp, esp));
  Eigen::VectorXd ev = e;
  double r1 = std::abs(lie - dg.dot(ev)) / (1.0 + std::max(std::abs(lie), std::abs(dg.dot(ev))));

  // D(Delta·g)(e) vs Dg(e) + D2g(e)·e.
  ScalarField ge = g;
  ScalarField delta_g(
      g.base_dim(), g.fibre_dim(),
      [ge](auto xq, auto aq) {
        using S = typename decltype(xq)::value_type;
        std::vector<S> grad = fibre_gradient(ge, xq, aq);
        S s(0.0);
        for (std::size_t i = 0; i < grad.size(); ++i) s += grad[i] * aq[i];
        return s;
      },
      g.max_depth() - 1);
  Eigen::VectorXd lhs = to_eigen(fibre_gradient(delta_g, xsp, esp));

  FibreJet<double> jg = fibre_jet(g, xsp, esp);
  Eigen::VectorXd rhs = to_eigen(jg.grad) + to_eigen(jg.hess) * ev;
  return {r1, scaled_residual(lhs, rhs)};
}

Poly random_poly(std::mt19937_64& rng, int base_dim, int fibre_dim,
                 int max_degree, int n_terms) {
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::uniform_int_distribution<int> deg(0, max_degree);
  Poly p;
  p.base_dim = base_dim;
  p.fibre_dim = fibre_dim;
  p.terms.resize(static_cast<std::size_t>(n_terms));
  for (PolyTerm& t : p.terms) {
    t.coeff = coeff(rng);
    t.exp_x.assign(static_cast<std::size_t>(base_dim), 0);
    t.exp_a.assign(static_cast<std::size_t>(fibre_dim), 0);
    int budget = deg(rng);
    std::uniform_int_distribution<int> pick(0, base_dim + fibre_dim - 1);
    for (int k = 0; k < budget; ++k) {
      int i = pick(rng);
      if (i < base_dim)
        ++t.exp_x[static_cast<std::size_t>(i)];
      else
        ++t.exp_a[static_cast<std::size_t>(i - base_dim)];
    }
  }
  return p;
}

ScalarField random_poly_field(std::mt19937_64& rng, int base_dim, int fibre_dim,
                              int max_degree, int n_terms) {
  Poly p = random_poly(rng, base_dim, fibre_dim, max_degree, n_terms);
  return ScalarField(base_dim, fibre_dim,
                     [p](auto x, auto a) { return p(x, a); });
}

BundleMap random_poly_bundle_map(std::mt19937_64& rng, int base_dim, int in_dim,
                                 int out_dim, int max_degree, int n_terms) {
  std::vector<Poly> comps;
  comps.reserve(static_cast<std::size_t>(out_dim));
  for (int k = 0; k < out_dim; ++k)
    comps.push_back(random_poly(rng, base_dim, in_dim, max_degree, n_terms));
  VectorField ev(base_dim, in_dim, out_dim, [comps](auto x, auto a) {
    using S = typename decltype(x)::value_type;
    std::vector<S> out;
    out.reserve(comps.size());
    for (const Poly& p : comps) out.push_back(p(x, a));
    return out;
  });
  return {base_dim, in_dim, out_dim, std::move(ev)};
}

CalculusVerification run_calculus_verification(std::uint64_t seed, int count,
                                               double tolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 3);

  CalculusVerification out;
  out.instances = count;
  out.tolerance = tolerance;

  auto rand_vec = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = unit(rng);
    return v;
  };

  for (int it = 0; it < count; ++it) {
    int bx = dim(rng), in = dim(rng), mid = dim(rng), outd = dim(rng);
    Eigen::VectorXd x = rand_vec(bx), a = rand_vec(in);

    BundleMap f = random_poly_bundle_map(rng, bx, in, outd);
    ScalarField phi = random_poly_field(rng, bx, in);
    out.max_product = std::max(out.max_product, check_product_rule(f, phi, x, a));

    BundleMap cov = random_poly_bundle_map(rng, bx, in, outd);
    out.max_pairing = std::max(out.max_pairing, check_pairing_rule(cov, f, x, a));

    BundleMap f2 = random_poly_bundle_map(rng, bx, in, mid, 2);
    BundleMap g = random_poly_bundle_map(rng, bx, mid, outd, 2);
    out.max_chain = std::max(out.max_chain, check_chain_rule(g, f2, x, a));

    ScalarField gl = random_poly_field(rng, bx, in, 3, 6);
    auto [r1, r2] = liouville_identities(gl, x, a);
    out.max_liouville1 = std::max(out.max_liouville1, r1);
    out.max_liouville2 = std::max(out.max_liouville2, r2);
  }
  return out;
}

}  // namespace fibredrive
