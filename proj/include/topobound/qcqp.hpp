#pragma once

#include "topobound/objectives.hpp"
#include "topobound/types.hpp"

namespace tb {

/// Real 2n x 2n split of the complex affine system: C' = [Re C, -Im C; Im C,
/// Re C], D' the same blocks of diag(d), b' = [Re b; Im b], theta' = [theta;
/// theta]. Row j and row n+j form the (Re, Im) pair of complex row j.
struct RealSplitSystem {
  RealMatrix Cp;
  RealMatrix Dp;
  RealVector bp;
  Index n = 0;  // complex dofs; split size is 2n
};

RealSplitSystem real_split(const ComplexMatrix& C, const ComplexVector& d,
                           const ComplexVector& b);

/// One rank term coef * sym(pool_col[left] * pool_col[right]^T) of a
/// constraint matrix; left == right gives coef * u u^T.
struct RankTerm {
  double coef;
  Index left, right;
};

struct QcqpConstraint {
  std::vector<RankTerm> terms;
  char sense = '<';  // '<' : x^T M x <= rhs, '=' : equality
  double rhs = 0.0;
  bool degenerate = false;  // d_j = 0 row: inequality collapses to an equality
};

/// Homogenized QCQP over x = [Re y, Im y, alpha] (size m = 2n+1), or
/// x = [y, alpha] (m = n+1) when the whole problem is real-valued.
/// Constraint matrices are low-rank combinations over a shared column pool;
/// the objective blocks P', Q' are also kept dense.
struct QcqpInstance {
  Index n = 0;          // design dofs
  Index m = 0;          // QCQP size
  bool complexified = true;
  RealMatrix pool;      // m x K columns referenced by RankTerm
  QcqpConstraint normalization;             // x^T Q' x = 1
  std::vector<QcqpConstraint> elimination;  // x^T A'_j x <= 0, j = 0..n-1
  std::vector<QcqpConstraint> cross;        // x^T B'_j x  = 0 (empty terms when degenerate)
  RealMatrix P;  // objective x^T P' x
  RealMatrix Q;  // normalization matrix (same data as the rank terms)
  IndexList degenerate_rows;

  RealMatrix densify(const QcqpConstraint& c) const;
};

struct QcqpOptions {
  bool cross_correlation = true;  // emit the B'_j constraints
  bool row_normalize = true;      // scale each system row to unit norm first
  bool allow_real_shortcut = true;
};

/// Build the full QCQP from a (condensed) affine system and its objective.
QcqpInstance build_qcqp(const AffineSystem& sys, const QuadraticObjective& obj,
                        const QcqpOptions& opt = {});

/// Homogenized objective block [[Re P, -Im P, Re p], [Im P^T..], [.., r]] for
/// Hermitian P; pass (Q, q, s) for the denominator block. The real variant
/// returns [[P, p], [p^T, r]].
RealMatrix build_objective_block(const ComplexMatrix& P, const ComplexVector& p, double r,
                                 Index n, bool complexify);

/// Lift a feasible design to QCQP coordinates: solve the state, choose alpha
/// so the objective denominator equals one, stack the real split.
struct LiftedPoint {
  RealVector x;
  double alpha = 0.0;
  ComplexVector z;
};
LiftedPoint lift_point(const AffineSystem& sys, const QuadraticObjective& obj,
                       const RealVector& theta, bool complexify = true);

/// theta'_j = (alpha b'_j - C'_j y') / (D'_j y') for every split row; rows
/// with |D'_j y'| <= 1e-12 ||y'|| are set to zero and flagged.
struct RecoveredTheta {
  RealVector theta;  // one value per split row (both halves)
  std::vector<char> indeterminate;
};
RecoveredTheta recover_theta(const RealVector& x, const RealSplitSystem& split);

}  // namespace tb
