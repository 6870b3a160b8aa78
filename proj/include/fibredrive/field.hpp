#pragma once

#include <concepts>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fibredrive/dual2.hpp"
#include "fibredrive/errors.hpp"

namespace fibredrive {

template <class S>
using ScalarEvalFn = std::function<S(std::span<const S>, std::span<const S>)>;
template <class S>
using VectorEvalFn =
    std::function<std::vector<S>(std::span<const S>, std::span<const S>)>;

namespace detail {

template <std::size_t... K>
std::tuple<ScalarEvalFn<jet_scalar_t<K>>...> scalar_tuple_probe(
    std::index_sequence<K...>);
template <std::size_t... K>
std::tuple<VectorEvalFn<jet_scalar_t<K>>...> vector_tuple_probe(
    std::index_sequence<K...>);

using DepthSeq = std::make_index_sequence<kMaxJetDepth + 1>;
using ScalarFnTuple = decltype(scalar_tuple_probe(DepthSeq{}));
using VectorFnTuple = decltype(vector_tuple_probe(DepthSeq{}));

template <class F, std::size_t... K>
ScalarFnTuple make_scalar_fns(const F& f, std::index_sequence<K...>) {
  return {ScalarEvalFn<jet_scalar_t<K>>(f)...};
}
template <class F, std::size_t... K>
VectorFnTuple make_vector_fns(const F& f, std::index_sequence<K...>) {
  return {VectorEvalFn<jet_scalar_t<K>>(f)...};
}

[[noreturn]] inline void throw_depth(int wanted, int have) {
  throw EvaluationError("jet depth " + std::to_string(wanted) +
                        " exceeds the supported depth " + std::to_string(have) +
                        " of this field");
}

}  // namespace detail

/// A scalar field on a two-block chart (base block x, fibre block a),
/// type-erased at every supported jet depth so that runtime-composed
/// closures remain differentiable. Construct from a generic callable
/// f(span<const S> x, span<const S> a) -> S; a field whose body consumes jet
/// levels of inner fields must declare the reduced max_depth.
///
/// Immutable after construction; cheap to copy; safe for concurrent use.
class ScalarField {
 public:
  ScalarField() = default;

  template <class F>
    requires std::invocable<F, std::span<const double>, std::span<const double>>
  ScalarField(int base_dim, int fibre_dim, F f, int max_depth = kMaxJetDepth)
      : impl_(std::make_shared<const Impl>(Impl{
            base_dim, fibre_dim, max_depth < kMaxJetDepth ? max_depth : kMaxJetDepth,
            detail::make_scalar_fns(f, detail::DepthSeq{})})) {}

  bool valid() const { return impl_ != nullptr; }
  int base_dim() const { return impl_->base_dim; }
  int fibre_dim() const { return impl_->fibre_dim; }
  int max_depth() const { return impl_ ? impl_->max_depth : -1; }

  template <class S>
  S eval(std::span<const S> x, std::span<const S> a) const {
    constexpr int K = jet_depth_v<S>;
    if constexpr (K > kMaxJetDepth) {
      detail::throw_depth(K, kMaxJetDepth);
    } else {
      if (!impl_ || K > impl_->max_depth) detail::throw_depth(K, max_depth());
      return std::get<static_cast<std::size_t>(K)>(impl_->fns)(x, a);
    }
  }
  template <class S>
  S eval(const std::vector<S>& x, const std::vector<S>& a) const {
    return eval(std::span<const S>(x), std::span<const S>(a));
  }

 private:
  struct Impl {
    int base_dim = 0;
    int fibre_dim = 0;
    int max_depth = -1;
    detail::ScalarFnTuple fns;
  };
  std::shared_ptr<const Impl> impl_;
};

/// Vector-valued analogue of ScalarField; the callable returns the fibre
/// components of the image (the base point passes through unchanged).
class VectorField {
 public:
  VectorField() = default;

  template <class F>
    requires std::invocable<F, std::span<const double>, std::span<const double>>
  VectorField(int base_dim, int fibre_dim, int out_dim, F f,
              int max_depth = kMaxJetDepth)
      : impl_(std::make_shared<const Impl>(Impl{
            base_dim, fibre_dim, out_dim,
            max_depth < kMaxJetDepth ? max_depth : kMaxJetDepth,
            detail::make_vector_fns(f, detail::DepthSeq{})})) {}

  bool valid() const { return impl_ != nullptr; }
  int base_dim() const { return impl_->base_dim; }
  int fibre_dim() const { return impl_->fibre_dim; }
  int out_dim() const { return impl_->out_dim; }
  int max_depth() const { return impl_ ? impl_->max_depth : -1; }

  template <class S>
  std::vector<S> eval(std::span<const S> x, std::span<const S> a) const {
    constexpr int K = jet_depth_v<S>;
    if constexpr (K > kMaxJetDepth) {
      detail::throw_depth(K, kMaxJetDepth);
    } else {
      if (!impl_ || K > impl_->max_depth) detail::throw_depth(K, max_depth());
      return std::get<static_cast<std::size_t>(K)>(impl_->fns)(x, a);
    }
  }
  template <class S>
  std::vector<S> eval(const std::vector<S>& x, const std::vector<S>& a) const {
    return eval(std::span<const S>(x), std::span<const S>(a));
  }

 private:
  struct Impl {
    int base_dim = 0;
    int fibre_dim = 0;
    int out_dim = 0;
    int max_depth = -1;
    detail::VectorFnTuple fns;
  };
  std::shared_ptr<const Impl> impl_;
};

}  // namespace fibredrive
