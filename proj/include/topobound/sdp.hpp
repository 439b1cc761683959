#pragma once

#include <iosfwd>
#include <vector>

#include "topobound/qcqp.hpp"
#include "topobound/types.hpp"

namespace tb {

struct SdpConstraint {
  std::vector<RankTerm> terms;  // sym rank terms over the shared pool
  char sense = '=';             // '<' : tr(A X) <= rhs, '=' : equality
  double rhs = 0.0;
};

/// max tr(P X)  s.t.  tr(A_i X) (<=,=) b_i,  X >= 0.
/// constraints[0] is always the normalization tr(Q' X) = 1.
struct SdpProblem {
  Index m = 0;
  RealMatrix P;
  RealMatrix pool;
  std::vector<SdpConstraint> constraints;

  RealMatrix densify(Index i) const;
  void validate() const;
};

/// Direct mapping of the relaxation: drop the rank-one requirement on
/// X = x x^T. Degenerate-tagged elimination rows become equalities; empty
/// cross-correlation placeholders are skipped.
SdpProblem assemble_relaxation(const QcqpInstance& qcqp);

struct SdpOptions {
  double tol = 1e-7;  // relative duality gap and scaled residual target
  int max_iters = 100;
  bool verbose = false;
};

struct SdpSolution {
  RealMatrix X;
  RealVector y;      // dual multipliers; bound = b . y
  RealVector slack;  // primal slacks of the inequality rows (0 for equalities)
  double primal_value = 0.0;  // tr(P X)
  double dual_value = 0.0;    // certified bound (safe side)
  double gap = 1.0;           // relative duality gap at exit
  int iterations = 0;
  bool converged = false;
  std::vector<double> mu_history;  // complementarity measure per iteration
};

/// Primal-dual path-following interior-point method with Nesterov-Todd
/// scaling and a Mehrotra predictor-corrector; inequality rows carry
/// nonnegative slack variables. Dense Schur complement assembled from the
/// low-rank constraint terms. Refuses m > 4000 (O(m^3) per iteration).
SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opt = {});

/// Independent re-check of the certificate: primal feasibility, psd-ness of
/// X and of Z = sum y_i A_i - P, sign of the inequality multipliers, duality
/// gap, and complementary slackness, all recomputed from scratch.
struct CertificateReport {
  bool primal_feasible = false;
  bool x_psd = false;
  bool dual_feasible = false;  // Z psd and inequality multipliers >= 0
  bool gap_ok = false;
  bool complementarity_ok = false;
  double max_primal_residual = 0.0;
  double min_eig_x = 0.0;
  double min_eig_z = 0.0;
  double gap = 0.0;
  double complementarity = 0.0;

  bool ok() const {
    return primal_feasible && x_psd && dual_feasible && gap_ok && complementarity_ok;
  }
};
CertificateReport verify_certificate(const SdpProblem& prob, const SdpSolution& sol,
                                     double tol = 1e-6);

/// Plain-text sparse-triple export: after '#' comment headers, the objective
/// appears as block 0 and constraint i as block i+1, each matrix listed as
/// `block row col value` lines (upper triangle); `meta i sense rhs` lines
/// carry the constraint senses.
void export_sdp(const SdpProblem& prob, std::ostream& out);

}  // namespace tb
