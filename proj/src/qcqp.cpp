#include "topobound/qcqp.hpp"

#include <cmath>

#include "topobound/numerics.hpp"

namespace tb {

namespace {

bool is_real(const ComplexMatrix& M) { return M.size() == 0 || M.imag().norm() == 0.0; }
bool is_real(const ComplexVector& v) { return v.size() == 0 || v.imag().norm() == 0.0; }

/// Append a column to the pool, returning its index.
Index push_col(RealMatrix& pool, Index& used, const RealVector& col) {
  if (used == pool.cols()) pool.conservativeResize(Eigen::NoChange, 2 * pool.cols() + 8);
  pool.col(used) = col;
  return used++;
}

}  // namespace

RealSplitSystem real_split(const ComplexMatrix& C, const ComplexVector& d,
                           const ComplexVector& b) {
  const Index n = C.rows();
  if (C.cols() != n || d.size() != n || b.size() != n)
    throw InvalidArgument("real_split: size mismatch");
  RealSplitSystem s;
  s.n = n;
  s.Cp.resize(2 * n, 2 * n);
  s.Cp << C.real(), -C.imag(), C.imag(), C.real();
  s.Dp = RealMatrix::Zero(2 * n, 2 * n);
  for (Index j = 0; j < n; ++j) {
    s.Dp(j, j) = d(j).real();
    s.Dp(j, n + j) = -d(j).imag();
    s.Dp(n + j, j) = d(j).imag();
    s.Dp(n + j, n + j) = d(j).real();
  }
  s.bp.resize(2 * n);
  s.bp << b.real(), b.imag();
  return s;
}

RealMatrix QcqpInstance::densify(const QcqpConstraint& c) const {
  RealMatrix M = RealMatrix::Zero(m, m);
  for (const RankTerm& t : c.terms) {
    const auto& u = pool.col(t.left);
    const auto& v = pool.col(t.right);
    M += (0.5 * t.coef) * (u * v.transpose() + v * u.transpose());
  }
  return M;
}

RealMatrix build_objective_block(const ComplexMatrix& P, const ComplexVector& p, double r,
                                 Index n, bool complexify) {
  const Index m = complexify ? 2 * n + 1 : n + 1;
  RealMatrix B = RealMatrix::Zero(m, m);
  if (complexify) {
    if (P.size() > 0) {
      B.block(0, 0, n, n) = P.real();
      B.block(n, n, n, n) = P.real();
      B.block(0, n, n, n) = -P.imag();
      B.block(n, 0, n, n) = P.imag();
    }
    if (p.size() > 0) {
      B.block(0, m - 1, n, 1) = p.real();
      B.block(n, m - 1, n, 1) = p.imag();
      B.block(m - 1, 0, 1, n) = p.real().transpose();
      B.block(m - 1, n, 1, n) = p.imag().transpose();
    }
  } else {
    if (P.size() > 0) B.block(0, 0, n, n) = P.real();
    if (p.size() > 0) {
      B.block(0, m - 1, n, 1) = p.real();
      B.block(m - 1, 0, 1, n) = p.real().transpose();
    }
  }
  B(m - 1, m - 1) = r;
  return B;
}

QcqpInstance build_qcqp(const AffineSystem& sys, const QuadraticObjective& obj,
                        const QcqpOptions& opt) {
  const Index n = sys.size();
  if (obj.n != n) throw InvalidArgument("build_qcqp: objective size does not match the system");
  QuadraticObjective o = obj;
  if (o.has_factors) refresh_dense_from_factors(o);

  QcqpInstance inst;
  inst.n = n;
  inst.complexified = !(opt.allow_real_shortcut && is_real(sys.C) && is_real(sys.d) &&
                        is_real(sys.b) && is_real(o.P) && is_real(o.Q) && is_real(o.p) &&
                        is_real(o.q));
  const Index m = inst.complexified ? 2 * n + 1 : n + 1;
  inst.m = m;

  inst.P = build_objective_block(o.P, o.p, o.r, n, inst.complexified);
  inst.Q = build_objective_block(o.Q, o.q, o.s, n, inst.complexified);

  RealMatrix pool(m, 0);
  Index used = 0;

  // normalization x^T Q' x = 1 as rank terms via the eigendecomposition
  {
    EigResult eig = sym_eig(RealMatrix(0.5 * (inst.Q + inst.Q.transpose())));
    const double scale = eig.values.cwiseAbs().maxCoeff();
    inst.normalization.sense = '=';
    inst.normalization.rhs = 1.0;
    for (Index i = 0; i < m; ++i) {
      if (std::abs(eig.values(i)) <= 1e-12 * scale) continue;
      const Index k = push_col(pool, used, eig.vectors.col(i));
      inst.normalization.terms.push_back({eig.values(i), k, k});
    }
    if (inst.normalization.terms.empty())
      throw InvalidArgument("build_qcqp: objective denominator is identically zero");
  }

  inst.elimination.reserve(n);
  if (opt.cross_correlation && inst.complexified) inst.cross.reserve(n);
  for (Index j = 0; j < n; ++j) {
    const Complex dj = sys.d(j);
    const Complex bj = sys.b(j);
    const bool degenerate = dj == Complex(0.0, 0.0);
    double scale = 1.0;
    if (opt.row_normalize) {
      const double rn = std::sqrt(sys.C.row(j).squaredNorm() + std::norm(dj) + std::norm(bj));
      if (rn > 0) scale = 1.0 / rn;
    }

    QcqpConstraint a;
    a.sense = '<';
    a.degenerate = degenerate;
    QcqpConstraint bc;
    bc.sense = '=';
    bc.degenerate = degenerate;

    if (inst.complexified) {
      RealVector u1(m), u2(m);
      u1.head(n) = scale * sys.C.row(j).real().transpose();
      u1.segment(n, n) = -scale * sys.C.row(j).imag().transpose();
      u1(m - 1) = -scale * bj.real();
      u2.head(n) = scale * sys.C.row(j).imag().transpose();
      u2.segment(n, n) = scale * sys.C.row(j).real().transpose();
      u2(m - 1) = -scale * bj.imag();
      const Index iu1 = push_col(pool, used, u1);
      const Index iu2 = push_col(pool, used, u2);
      a.terms.push_back({1.0, iu1, iu1});
      a.terms.push_back({1.0, iu2, iu2});
      if (!degenerate) {
        RealVector w1 = RealVector::Zero(m), w2 = RealVector::Zero(m);
        w1(j) = scale * dj.real();
        w1(n + j) = -scale * dj.imag();
        w2(j) = scale * dj.imag();
        w2(n + j) = scale * dj.real();
        const Index iw1 = push_col(pool, used, w1);
        const Index iw2 = push_col(pool, used, w2);
        a.terms.push_back({-1.0, iw1, iw1});
        a.terms.push_back({-1.0, iw2, iw2});
        bc.terms.push_back({1.0, iu2, iw1});
        bc.terms.push_back({-1.0, iu1, iw2});
      }
    } else {
      RealVector u(m);
      u.head(n) = scale * sys.C.row(j).real().transpose();
      u(m - 1) = -scale * bj.real();
      const Index iu = push_col(pool, used, u);
      a.terms.push_back({1.0, iu, iu});
      if (!degenerate) {
        RealVector w = RealVector::Zero(m);
        w(j) = scale * dj.real();
        const Index iw = push_col(pool, used, w);
        a.terms.push_back({-1.0, iw, iw});
      }
    }
    if (degenerate) inst.degenerate_rows.push_back(j);
    inst.elimination.push_back(std::move(a));
    if (opt.cross_correlation && inst.complexified) inst.cross.push_back(std::move(bc));
  }

  inst.pool = pool.leftCols(used);
  return inst;
}

LiftedPoint lift_point(const AffineSystem& sys, const QuadraticObjective& obj,
                       const RealVector& theta, bool complexify) {
  LiftedPoint lp;
  lp.z = solve_complex_linear(sys.assemble(theta), sys.b);
  QuadraticObjective o = obj;
  if (o.has_factors) refresh_dense_from_factors(o);
  double den = o.s;
  if (o.Q.size() > 0) den += (lp.z.adjoint() * o.Q * lp.z)(0).real();
  if (o.q.size() > 0) den += 2.0 * o.q.dot(lp.z).real();
  if (!(den > 0)) throw NumericalError("lift_point: nonpositive objective denominator");
  lp.alpha = 1.0 / std::sqrt(den);
  const ComplexVector y = lp.alpha * lp.z;
  const Index n = lp.z.size();
  if (complexify) {
    lp.x.resize(2 * n + 1);
    lp.x << y.real(), y.imag(), lp.alpha;
  } else {
    if (y.imag().norm() > 1e-12 * y.norm())
      throw InvalidArgument("lift_point: complex state cannot use the real layout");
    lp.x.resize(n + 1);
    lp.x << y.real(), lp.alpha;
  }
  return lp;
}

RecoveredTheta recover_theta(const RealVector& x, const RealSplitSystem& split) {
  const Index rows = split.Cp.rows();
  if (x.size() != split.Cp.cols() + 1)
    throw InvalidArgument("recover_theta: point size does not match the split");
  const RealVector y = x.head(rows);
  const double alpha = x(rows);
  const double ynorm = y.norm();
  RecoveredTheta rec;
  rec.theta.resize(rows);
  rec.indeterminate.assign(rows, 0);
  for (Index j = 0; j < rows; ++j) {
    const double den = split.Dp.row(j).dot(y);
    if (std::abs(den) <= 1e-12 * ynorm) {
      rec.theta(j) = 0.0;
      rec.indeterminate[j] = 1;
    } else {
      rec.theta(j) = (alpha * split.bp(j) - split.Cp.row(j).dot(y)) / den;
    }
  }
  return rec;
}

}  // namespace tb
