#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "fibredrive/field.hpp"
#include "fibredrive/jets.hpp"

namespace fibredrive {

/// A fibre-bundle map in a trivialised chart: (x, a) -> f(x, a), where only
/// the fibre value is produced and the base point passes through.
struct BundleMap {
  int base_dim = 0;
  int in_dim = 0;
  int out_dim = 0;
  VectorField eval;
};

struct FibreDerivativeValue {
  Eigen::MatrixXd matrix;  // out_dim x in_dim, entries d f_k / d a_i
};

struct FibreHessianValue {
  std::vector<Eigen::MatrixXd> tensor;  // out_dim matrices in_dim x in_dim
};

FibreDerivativeValue fibre_derivative(const BundleMap& f,
                                      const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& a);

FibreHessianValue fibre_hessian(const BundleMap& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& a);

// Closure algebra on bundle maps. The results stay differentiable; only
// derivative_bundle_map consumes a jet level.

/// Pointwise product f*phi of a bundle map with a scalar field.
BundleMap scale_bundle_map(const BundleMap& f, const ScalarField& phi);

/// Contraction <phi, f> of a dual-fibre-valued map with f.
ScalarField pairing_field(const BundleMap& phi, const BundleMap& f);

/// Composition g∘f over a common base.
BundleMap compose_bundle_maps(const BundleMap& g, const BundleMap& f);

/// The fibre derivative Df as a bundle map into Hom(E, F), flattened
/// row-major to out_dim*in_dim components.
BundleMap derivative_bundle_map(const BundleMap& f);

// Derivation-rule residuals (scaled: |lhs - rhs|_max / (1 + max |term|)).
// Contract: <= 1e-10 for smooth O(1) inputs.

/// D(f*phi) = (Df)*phi + f ⊗ Dphi.
double check_product_rule(const BundleMap& f, const ScalarField& phi,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& a);

/// D<phi, f> = phi • Df + Dphi • f.
double check_pairing_rule(const BundleMap& phi, const BundleMap& f,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& a);

/// D(g∘f) = (Dg∘f) • Df.
double check_chain_rule(const BundleMap& g, const BundleMap& f,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& a);

/// Liouville-field identities on a vector-bundle chart at fibre point e:
/// (Delta·g)(e) = <Dg(e), e> and D(Delta·g)(e) = Dg(e) + D2g(e)·e.
std::pair<double, double> liouville_identities(const ScalarField& g,
                                               const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& e);

// Randomized verification over polynomial instances (drives the CLI
// `verify-calculus` diagnostic).

struct CalculusVerification {
  int instances = 0;
  double tolerance = 1e-10;
  double max_product = 0.0;
  double max_pairing = 0.0;
  double max_chain = 0.0;
  double max_liouville1 = 0.0;
  double max_liouville2 = 0.0;

  bool pass() const {
    return max_product <= tolerance && max_pairing <= tolerance &&
           max_chain <= tolerance && max_liouville1 <= tolerance &&
           max_liouville2 <= tolerance;
  }
};

CalculusVerification run_calculus_verification(std::uint64_t seed, int count,
                                               double tolerance = 1e-10);

// Random polynomial fields (shared by the verification suite and tests).

struct PolyTerm {
  double coeff = 0.0;
  std::vector<int> exp_x, exp_a;
};

struct Poly {
  int base_dim = 0;
  int fibre_dim = 0;
  std::vector<PolyTerm> terms;

  template <class S>
  S operator()(std::span<const S> x, std::span<const S> a) const {
    S s(0.0);
    for (const PolyTerm& t : terms) {
      S m(t.coeff);
      for (int i = 0; i < base_dim; ++i)
        for (int e = 0; e < t.exp_x[i]; ++e) m = m * x[i];
      for (int i = 0; i < fibre_dim; ++i)
        for (int e = 0; e < t.exp_a[i]; ++e) m = m * a[i];
      s += m;
    }
    return s;
  }
};

Poly random_poly(std::mt19937_64& rng, int base_dim, int fibre_dim,
                 int max_degree, int n_terms);
ScalarField random_poly_field(std::mt19937_64& rng, int base_dim, int fibre_dim,
                              int max_degree = 3, int n_terms = 5);
BundleMap random_poly_bundle_map(std::mt19937_64& rng, int base_dim, int in_dim,
                                 int out_dim, int max_degree = 3,
                                 int n_terms = 4);

}  // namespace fibredrive
