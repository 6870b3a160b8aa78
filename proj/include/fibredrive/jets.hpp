#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fibredrive/chart.hpp"
#include "fibredrive/dual2.hpp"
#include "fibredrive/field.hpp"
#include "fibredrive/linops.hpp"

namespace fibredrive {

/// Value, gradient and hessian of a scalar field at a chart point, split into
/// base (q) and fibre (v) blocks. hess_qv(i,j) = d2f/dq_i dv_j.
struct Jet2 {
  double value = 0.0;
  Eigen::VectorXd grad_q, grad_v;
  Eigen::MatrixXd hess_qq, hess_qv, hess_vv;
};

/// Generic-scalar jet record used by the differentiable evaluation stack.
template <class S>
struct JetRecord {
  S value;
  std::vector<S> grad_x, grad_a;
  MatS<S> hess_xx, hess_xa, hess_aa;
};

namespace detail {

template <class S>
struct SeedWorkspace {
  std::vector<Dual2<S>> xs, as;

  SeedWorkspace(std::span<const S> x, std::span<const S> a)
      : xs(x.size()), as(a.size()) {
    for (std::size_t k = 0; k < x.size(); ++k) xs[k] = Dual2<S>(x[k]);
    for (std::size_t k = 0; k < a.size(); ++k) as[k] = Dual2<S>(a[k]);
  }
  Dual2<S>& coord(int i) {
    return i < static_cast<int>(xs.size()) ? xs[i]
                                           : as[i - static_cast<int>(xs.size())];
  }
  std::span<const Dual2<S>> x() const { return xs; }
  std::span<const Dual2<S>> a() const { return as; }
};

}  // namespace detail

/// Full second-order jet over all base and fibre coordinates, via n(2n+1)
/// directional passes and polarisation of the second derivatives. Exact to
/// machine precision (linear in the field).
template <class S>
JetRecord<S> jet_full(const ScalarField& f, std::span<const S> x,
                      std::span<const S> a) {
  const int bx = f.base_dim();
  const int ba = f.fibre_dim();
  const int N = bx + ba;
  detail::SeedWorkspace<S> w(x, a);

  JetRecord<S> out;
  out.grad_x.assign(bx, S(0.0));
  out.grad_a.assign(ba, S(0.0));
  out.hess_xx = MatS<S>(bx, bx);
  out.hess_xa = MatS<S>(bx, ba);
  out.hess_aa = MatS<S>(ba, ba);

  std::vector<S> grad(N, S(0.0)), diag(N, S(0.0));
  for (int i = 0; i < N; ++i) {
    w.coord(i).d = S(1.0);
    Dual2<S> r = f.eval(w.x(), w.a());
    if (i == 0) out.value = r.v;
    grad[i] = r.d;
    diag[i] = r.dd;
    w.coord(i).d = S(0.0);
  }

  auto set_hess = [&](int i, int j, const S& h) {
    if (i < bx && j < bx) {
      out.hess_xx(i, j) = h;
      out.hess_xx(j, i) = h;
    } else if (i < bx && j >= bx) {
      out.hess_xa(i, j - bx) = h;
    } else if (i >= bx && j < bx) {
      out.hess_xa(j, i - bx) = h;
    } else {
      out.hess_aa(i - bx, j - bx) = h;
      out.hess_aa(j - bx, i - bx) = h;
    }
  };

  for (int i = 0; i < N; ++i) {
    set_hess(i, i, diag[i]);
    for (int j = i + 1; j < N; ++j) {
      w.coord(i).d = S(1.0);
      w.coord(j).d = S(1.0);
      Dual2<S> r = f.eval(w.x(), w.a());
      set_hess(i, j, (r.dd - diag[i] - diag[j]) / 2.0);
      w.coord(i).d = S(0.0);
      w.coord(j).d = S(0.0);
    }
  }
  for (int i = 0; i < bx; ++i) out.grad_x[i] = grad[i];
  for (int i = 0; i < ba; ++i) out.grad_a[i] = grad[bx + i];
  return out;
}

/// Gradient with respect to the fibre block only (one pass per coordinate).
template <class S>
std::vector<S> fibre_gradient(const ScalarField& f, std::span<const S> x,
                              std::span<const S> a) {
  const int ba = f.fibre_dim();
  detail::SeedWorkspace<S> w(x, a);
  std::vector<S> g(ba, S(0.0));
  for (int i = 0; i < ba; ++i) {
    w.as[i].d = S(1.0);
    g[i] = f.eval(w.x(), w.a()).d;
    w.as[i].d = S(0.0);
  }
  return g;
}
template <class S>
std::vector<S> fibre_gradient(const ScalarField& f, const std::vector<S>& x,
                              const std::vector<S>& a) {
  return fibre_gradient(f, std::span<const S>(x), std::span<const S>(a));
}

template <class S>
struct FibreJet {
  S value;
  std::vector<S> grad;
  MatS<S> hess;
};

/// Value, fibre gradient and fibre hessian (base block held fixed).
template <class S>
FibreJet<S> fibre_jet(const ScalarField& f, std::span<const S> x,
                      std::span<const S> a) {
  const int ba = f.fibre_dim();
  detail::SeedWorkspace<S> w(x, a);
  FibreJet<S> out;
  out.grad.assign(ba, S(0.0));
  out.hess = MatS<S>(ba, ba);
  std::vector<S> diag(ba, S(0.0));
  for (int i = 0; i < ba; ++i) {
    w.as[i].d = S(1.0);
    Dual2<S> r = f.eval(w.x(), w.a());
    if (i == 0) out.value = r.v;
    out.grad[i] = r.d;
    diag[i] = r.dd;
    w.as[i].d = S(0.0);
  }
  for (int i = 0; i < ba; ++i) {
    out.hess(i, i) = diag[i];
    for (int j = i + 1; j < ba; ++j) {
      w.as[i].d = S(1.0);
      w.as[j].d = S(1.0);
      Dual2<S> r = f.eval(w.x(), w.a());
      S h = (r.dd - diag[i] - diag[j]) / 2.0;
      out.hess(i, j) = h;
      out.hess(j, i) = h;
      w.as[i].d = S(0.0);
      w.as[j].d = S(0.0);
    }
  }
  return out;
}

/// Gradient over both blocks, no second derivatives.
template <class S>
std::pair<std::vector<S>, std::vector<S>> full_gradient(const ScalarField& f,
                                                        std::span<const S> x,
                                                        std::span<const S> a) {
  const int bx = f.base_dim();
  const int ba = f.fibre_dim();
  detail::SeedWorkspace<S> w(x, a);
  std::vector<S> gx(bx, S(0.0)), ga(ba, S(0.0));
  for (int i = 0; i < bx + ba; ++i) {
    w.coord(i).d = S(1.0);
    S d = f.eval(w.x(), w.a()).d;
    if (i < bx)
      gx[i] = d;
    else
      ga[i - bx] = d;
    w.coord(i).d = S(0.0);
  }
  return {std::move(gx), std::move(ga)};
}

/// Directional derivative grad_x f . dx + grad_a f . da in a single pass.
/// Direction components may themselves be jet scalars.
template <class S>
S directional(const ScalarField& f, std::span<const S> x, std::span<const S> a,
              std::span<const S> dx, std::span<const S> da) {
  detail::SeedWorkspace<S> w(x, a);
  for (std::size_t k = 0; k < w.xs.size(); ++k)
    if (!dx.empty()) w.xs[k].d = dx[k];
  for (std::size_t k = 0; k < w.as.size(); ++k)
    if (!da.empty()) w.as[k].d = da[k];
  return f.eval(w.x(), w.a()).d;
}

// Vector-field counterparts.

template <class S>
std::vector<S> vec_value(const VectorField& f, std::span<const S> x,
                         std::span<const S> a) {
  return f.eval(x, a);
}

/// Matrix of fibre partials d f_k / d a_i (rows k, columns i).
template <class S>
MatS<S> vec_fibre_jacobian(const VectorField& f, std::span<const S> x,
                           std::span<const S> a) {
  const int ba = f.fibre_dim();
  detail::SeedWorkspace<S> w(x, a);
  MatS<S> out(f.out_dim(), ba);
  for (int i = 0; i < ba; ++i) {
    w.as[i].d = S(1.0);
    std::vector<Dual2<S>> col = f.eval(w.x(), w.a());
    for (int k = 0; k < f.out_dim(); ++k) out(k, i) = col[k].d;
    w.as[i].d = S(0.0);
  }
  return out;
}

/// Fibre hessian tensor d2 f_k / d a_i d a_j, one symmetric matrix per
/// output component.
template <class S>
std::vector<MatS<S>> vec_fibre_hessian(const VectorField& f,
                                       std::span<const S> x,
                                       std::span<const S> a) {
  const int ba = f.fibre_dim();
  const int od = f.out_dim();
  detail::SeedWorkspace<S> w(x, a);
  std::vector<MatS<S>> out(od, MatS<S>(ba, ba));
  MatS<S> diag(od, ba);
  for (int i = 0; i < ba; ++i) {
    w.as[i].d = S(1.0);
    std::vector<Dual2<S>> col = f.eval(w.x(), w.a());
    for (int k = 0; k < od; ++k) {
      diag(k, i) = col[k].dd;
      out[k](i, i) = col[k].dd;
    }
    w.as[i].d = S(0.0);
  }
  for (int i = 0; i < ba; ++i) {
    for (int j = i + 1; j < ba; ++j) {
      w.as[i].d = S(1.0);
      w.as[j].d = S(1.0);
      std::vector<Dual2<S>> col = f.eval(w.x(), w.a());
      for (int k = 0; k < od; ++k) {
        S h = (col[k].dd - diag(k, i) - diag(k, j)) / 2.0;
        out[k](i, j) = h;
        out[k](j, i) = h;
      }
      w.as[i].d = S(0.0);
      w.as[j].d = S(0.0);
    }
  }
  return out;
}

// Double-level public surface.

inline double field_value(const ScalarField& f, const ChartPoint& p) {
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  return f.eval(std::span<const double>(q), std::span<const double>(v));
}

inline Eigen::VectorXd field_value(const VectorField& f, const ChartPoint& p) {
  std::vector<double> q = to_std(p.q), v = to_std(p.v);
  return to_eigen(f.eval(std::span<const double>(q), std::span<const double>(v)));
}

Jet2 eval_jet2(const ScalarField& f, const ChartPoint& p);

double directional_derivative(const ScalarField& f, const ChartPoint& p,
                              const Eigen::VectorXd& dq,
                              const Eigen::VectorXd& dv);

}  // namespace fibredrive
