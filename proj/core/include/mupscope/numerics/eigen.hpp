#pragma once

#include <vector>

#include "mupscope/numerics/rng.hpp"
#include "mupscope/numerics/types.hpp"

namespace mupscope::numerics {

/// Eigenvalues sorted descending, with per-value iteration counts and
/// convergence flags. Entries with converged == false are estimates only.
struct EigResult {
  std::vector<double> eigenvalues;
  std::vector<int> iterations;
  std::vector<bool> converged;
  // Final Rayleigh quotient per eigenvalue. Equal to the eigenvalue for
  // symmetric power iteration; kept separately for nonsymmetric operators.
  std::vector<double> rayleigh;
  std::vector<Vector> eigenvectors;

  bool all_converged() const;
  std::size_t size() const { return eigenvalues.size(); }
};

struct PowerIterationOptions {
  int max_iter = 100;
  double tol = 1e-3;
  // For nonsymmetric operators the estimate is ||A v|| / ||v||, i.e. the
  // magnitude of the dominant eigenvalue.
  bool symmetric = true;
};

/// k dominant eigenvalues of a matrix-free operator by power iteration with
/// Gram-Schmidt deflation against previously found eigenvectors.
///
/// Each eigenvalue stops when the relative change of its estimate drops below
/// `tol` or after `max_iter` applications. The start vector is a normalized
/// Gaussian from `rng`; if the estimate stalls at exactly zero the iteration
/// restarts once from a fresh vector.
EigResult power_iteration_top_k(const LinearOperator& apply, Index dim, int k, RngStream& rng,
                                const PowerIterationOptions& options = {});

EigResult power_iteration_top_k(const LinearOperator& apply, Index dim, int k, int max_iter,
                                double tol, RngStream& rng);

/// Full spectrum of a dense symmetric matrix, descending. Inputs with
/// asymmetry above 1e-10 are symmetrized as (m + m^T)/2 and a warning is
/// logged.
EigResult dense_sym_eig(const Matrix& m, bool with_vectors = false);

/// Removes components along `basis` (assumed orthonormal), repeating the pass
/// until the residual overlap is below 1e-10.
void orthogonalize(Vector& x, const std::vector<Vector>& basis);

}  // namespace mupscope::numerics
