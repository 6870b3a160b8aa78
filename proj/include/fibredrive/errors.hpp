#pragma once

#include <stdexcept>
#include <string>

namespace fibredrive {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A point violates a model's domain predicate.
struct DomainError : Error {
  using Error::Error;
};

/// A field evaluation produced a non-finite value, or a jet was requested
/// beyond the depth a field supports.
struct EvaluationError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

/// The frame of constraint gradients lost column rank.
struct DegenerateConstraintsError : Error {
  using Error::Error;
};

/// Hamiltonian-side data does not match the Lagrangian (H∘F != E, phi∘F != 0,
/// or the multiplier system is inconsistent).
struct InconsistentLinkError : Error {
  using Error::Error;
};

/// The numerical kernel of the fibre hessian changed dimension between
/// sampled points.
struct RankInstabilityError : Error {
  using Error::Error;
};

/// Newton projection onto a constraint surface failed to converge.
struct SurfaceSamplingError : Error {
  using Error::Error;
};

}  // namespace fibredrive
