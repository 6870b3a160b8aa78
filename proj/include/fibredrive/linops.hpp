#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "fibredrive/dual2.hpp"
#include "fibredrive/errors.hpp"

namespace fibredrive {

/// Minimal dense matrix over an arbitrary arithmetic scalar. Used wherever
/// evaluations must stay differentiable (Eigen handles the double-only
/// decompositions).
template <class S>
struct MatS {
  int rows = 0;
  int cols = 0;
  std::vector<S> a;

  MatS() = default;
  MatS(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}

  S& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  const S& operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
};

template <class S>
S dot(std::span<const S> x, std::span<const S> y) {
  S s(0.0);
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}
template <class S>
S dot(const std::vector<S>& x, const std::vector<S>& y) {
  return dot(std::span<const S>(x), std::span<const S>(y));
}

template <class S>
std::vector<S> matvec(const MatS<S>& m, std::span<const S> x) {
  std::vector<S> y(static_cast<std::size_t>(m.rows), S(0.0));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) y[i] += m(i, j) * x[j];
  return y;
}
template <class S>
std::vector<S> matvec(const MatS<S>& m, const std::vector<S>& x) {
  return matvec(m, std::span<const S>(x));
}

/// y = m^T x.
template <class S>
std::vector<S> matvec_t(const MatS<S>& m, std::span<const S> x) {
  std::vector<S> y(static_cast<std::size_t>(m.cols), S(0.0));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) y[j] += m(i, j) * x[i];
  return y;
}

/// Gaussian elimination with partial pivoting on the innermost value part.
/// Dual components ride along, so the solution of A x = b is differentiable
/// wherever A stays invertible.
template <class S>
std::vector<S> solve_dense(MatS<S> m, std::vector<S> b) {
  const int n = m.rows;
  if (n != m.cols || static_cast<int>(b.size()) != n)
    throw DimensionError("solve_dense: square system required");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(scalar_value(m(k, k)));
    for (int i = k + 1; i < n; ++i) {
      double cand = std::abs(scalar_value(m(i, k)));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (best == 0.0)
      throw DegenerateConstraintsError("solve_dense: singular system");
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      S f = m(i, k) / m(k, k);
      for (int j = k; j < n; ++j) m(i, j) -= f * m(k, j);
      b[i] -= f * b[k];
    }
  }
  std::vector<S> x(static_cast<std::size_t>(n), S(0.0));
  for (int i = n - 1; i >= 0; --i) {
    S s = b[i];
    for (int j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
    x[i] = s / m(i, i);
  }
  return x;
}

inline Eigen::MatrixXd to_eigen(const MatS<double>& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
  return out;
}

template <class S>
double max_abs_value(const std::vector<S>& x) {
  double m = 0.0;
  for (const S& e : x) m = std::max(m, std::abs(scalar_value(e)));
  return m;
}

}  // namespace fibredrive
