#pragma once

#include "topobound/types.hpp"

namespace tb {

/// Eigendecomposition of a symmetric (or symmetric pencil) problem.
/// Eigenvalues are sorted in descending order; vectors are the matching columns.
struct EigResult {
  RealVector values;
  RealMatrix vectors;
};

/// Solve A z = b for dense complex A via partially pivoted LU.
/// Throws NumericalError when a pivot falls below 1e-14 * ||A||_F.
ComplexVector solve_complex_linear(const ComplexMatrix& A, const ComplexVector& b);

/// Eigenpairs of a dense real symmetric matrix, descending.
EigResult sym_eig(const RealMatrix& S);

/// Generalized symmetric eigenproblem A psi = lambda B psi with B SPD.
/// Eigenvectors are B-orthonormal, eigenvalues descending.
EigResult gen_sym_eig(const RealMatrix& A, const RealMatrix& B);

/// Solve S x = rhs with S symmetric positive definite via Cholesky.
RealVector chol_spd_solve(const RealMatrix& S, const RealVector& rhs);
RealMatrix chol_spd_solve(const RealMatrix& S, const RealMatrix& rhs);

}  // namespace tb
