#include "topobound/recovery.hpp"

#include <cmath>

#include "topobound/numerics.hpp"

namespace tb {

int numerical_rank(const RealMatrix& X, double rel_tol) {
  if (X.rows() != X.cols() || X.rows() < 1) throw InvalidArgument("numerical_rank: square matrix expected");
  const RealVector lam = sym_eig(RealMatrix(0.5 * (X + X.transpose()))).values;
  const double top = lam(0);
  if (!(top > 0)) return 0;
  int r = 0;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam(i) > rel_tol * top) ++r;
  return r;
}

RankApproximation rank_r_recover(const RealMatrix& X, int r, const RealSplitSystem& split) {
  const Index m = X.rows();
  if (X.cols() != m || m < 2) throw InvalidArgument("rank_r_recover: square lifted matrix expected");
  if (r < 1) throw InvalidArgument("rank_r_recover: rank must be at least 1");
  const Index n = split.n;
  const bool complexified = (m == 2 * n + 1);
  if (!complexified && m != n + 1)
    throw InvalidArgument("rank_r_recover: lifted size does not match the split system");

  const EigResult eig = sym_eig(RealMatrix(0.5 * (X + X.transpose())));
  if (r > Index(eig.values.size()) || eig.values(r - 1) <= 1e-10 * std::max(eig.values(0), 0.0))
    throw InvalidArgument("rank_r_recover: requested rank exceeds the numerical rank of X");

  RankApproximation out;
  out.r = r;
  out.lambda = eig.values.head(r);
  out.xhat = RealVector::Zero(m);
  for (int j = 0; j < r; ++j) {
    RealVector psi = eig.vectors.col(j);
    // sign convention: alpha component nonnegative, largest entry as tie-break
    double pivot = psi(m - 1);
    if (std::abs(pivot) <= 1e-12 * psi.norm()) {
      Index imax = 0;
      psi.cwiseAbs().maxCoeff(&imax);
      pivot = psi(imax);
    }
    if (pivot < 0) psi = -psi;
    out.xhat += std::sqrt(eig.values(j)) * psi;
  }

  // real-shortcut instances carry a single design copy; pad the imaginary
  // block with zeros so the split rows still apply, then mirror the halves
  RealVector x = out.xhat;
  if (!complexified) {
    x = RealVector::Zero(2 * n + 1);
    x.head(n) = out.xhat.head(n);
    x(2 * n) = out.xhat(n);
  }
  const RecoveredTheta rec = recover_theta(x, split);
  out.theta_a = rec.theta.head(n);
  out.theta_b = complexified ? RealVector(rec.theta.tail(n)) : out.theta_a;
  out.indeterminate = rec.indeterminate;
  if (!complexified)
    for (Index j = 0; j < n; ++j) out.indeterminate[n + j] = out.indeterminate[j];
  return out;
}

RealVector project_box(const RealVector& theta) {
  return theta.cwiseMax(-1.0).cwiseMin(1.0);
}

double evaluate_recovered(const AffineSystem& sys, const QuadraticObjective& obj,
                          const RealVector& theta) {
  const RealVector boxed = project_box(theta);
  const ComplexVector z = solve_complex_linear(sys.assemble(boxed), sys.b);
  return evaluate(obj, z);
}

RealVector seed_topopt(const RankApproximation& approx, char half) {
  if (half != 'a' && half != 'b') throw InvalidArgument("seed_topopt: half must be 'a' or 'b'");
  return project_box(half == 'a' ? approx.theta_a : approx.theta_b);
}

}  // namespace tb
