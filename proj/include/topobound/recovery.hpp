#pragma once

#include "topobound/qcqp.hpp"
#include "topobound/types.hpp"

namespace tb {

/// Rank-r approximation of a lifted solution: x_hat = sum_{j<=r} sqrt(l_j)
/// psi_j, with the two design halves read back from the split rows.
struct RankApproximation {
  int r = 0;
  RealVector lambda;              // top-r eigenvalues, descending
  RealVector xhat;                // size m
  RealVector theta_a, theta_b;    // recovered halves, size n each
  std::vector<char> indeterminate;  // per split row (2n)
};

/// #{lambda_j > rel_tol * lambda_1} for a symmetric PSD matrix.
int numerical_rank(const RealMatrix& X, double rel_tol = 1e-6);

/// Top-r eigenpair approximation of X plus design recovery through the split
/// system. Eigenvector signs are fixed so the alpha (last) component is
/// nonnegative. Throws when r exceeds the reliable rank (l_r <= 1e-10 l_1).
RankApproximation rank_r_recover(const RealMatrix& X, int r, const RealSplitSystem& split);

/// Componentwise clamp onto [-1, 1]; the nearest box point in any p-norm.
RealVector project_box(const RealVector& theta);

/// Solve the true state problem at project_box(theta) and evaluate the
/// objective; by weak duality the result never exceeds the computed bound.
double evaluate_recovered(const AffineSystem& sys, const QuadraticObjective& obj,
                          const RealVector& theta);

/// Initial design for a topopt run from a recovered half ('a' or 'b').
RealVector seed_topopt(const RankApproximation& approx, char half = 'a');

}  // namespace tb
