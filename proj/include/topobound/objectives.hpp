#pragma once

#include "topobound/fem.hpp"
#include "topobound/types.hpp"

namespace tb {

/// Fractional quadratic objective
///   f(z) = (z^H P z + 2 Re(p^H z) + r) / (z^H Q z + 2 Re(q^H z) + s).
/// P and Q are Hermitian (real symmetric in the uncondensed case); the
/// Hermitian generality is what survives static condensation of objectives
/// supported on eliminated dofs. Empty P/Q/p/q blocks mean zero.
///
/// When has_factors is set, the objective is carried in factored affine form
///   numerator   = |num_t0 - num_u^H z|^2
///   denominator = ||den_f0 - den_F z||^2 + den_const,
/// which the QCQP homogenization uses to emit low-rank constraint matrices.
/// Factored objectives leave the dense blocks empty (they would be n x n);
/// call refresh_dense_from_factors where the explicit matrices are needed.
struct QuadraticObjective {
  Index n = 0;
  ComplexMatrix P, Q;
  ComplexVector p, q;
  double r = 0.0, s = 0.0;

  bool has_factors = false;
  ComplexVector num_u;
  Complex num_t0{0.0, 0.0};
  ComplexMatrix den_F;
  ComplexVector den_f0;
  double den_const = 0.0;
};

/// Normalized overlap |c^H z_S|^2 / ||z_S||^2 with ||c||_2 = 1 given on the
/// index set S.
QuadraticObjective build_normalized_overlap(const ComplexVector& c, const IndexList& S, Index n);

/// Output overlap magnitude |c^H z_S|^2.
QuadraticObjective build_overlap_magnitude(const ComplexVector& c, const IndexList& S, Index n);

double evaluate(const QuadraticObjective& obj, const ComplexVector& z);

/// Gradients with respect to the real split (Re z, Im z), ready to drive the
/// adjoint system.
struct StateGradient {
  RealVector re, im;
};
StateGradient state_gradient(const QuadraticObjective& obj, const ComplexVector& z);

/// Push an objective with factored form through a static condensation,
/// producing the equivalent objective on the free dofs.
QuadraticObjective condense_objective(const QuadraticObjective& obj, const SparseCondenser& cond);

/// Rebuild the dense P/Q/p/q/r/s blocks from the factored form.
void refresh_dense_from_factors(QuadraticObjective& obj);

}  // namespace tb
