#include "topobound/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <cmath>
#include <ostream>
#include <cstdio>

#include "topobound/numerics.hpp"

namespace tb {

namespace {

constexpr double kStepFraction = 0.99;

/// sum_i w_i A_i over the shared pool, computed as basis * Omega * basis^T
/// with the sparse K x K coupling Omega = sum (w_i c_t / 2)(e_u e_v^T + e_v e_u^T).
RealMatrix weighted_sum(const std::vector<SdpConstraint>& cons, const RealVector& w,
                        const RealMatrix& basis) {
  const Index K = basis.cols();
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < Index(cons.size()); ++i) {
    if (w(i) == 0.0) continue;
    for (const RankTerm& t : cons[i].terms) {
      trip.emplace_back(t.left, t.right, 0.5 * w(i) * t.coef);
      trip.emplace_back(t.right, t.left, 0.5 * w(i) * t.coef);
    }
  }
  Eigen::SparseMatrix<double> Om(K, K);
  Om.setFromTriplets(trip.begin(), trip.end());
  RealMatrix B = basis * Om;
  return B * basis.transpose();
}

/// tr(A_i V) for every constraint, V symmetric.
RealVector constraint_traces(const std::vector<SdpConstraint>& cons, const RealMatrix& pool,
                             const RealMatrix& V) {
  RealMatrix VP = V * pool;
  RealVector tr(cons.size());
  for (Index i = 0; i < Index(cons.size()); ++i) {
    double v = 0.0;
    for (const RankTerm& t : cons[i].terms) v += t.coef * pool.col(t.left).dot(VP.col(t.right));
    tr(i) = v;
  }
  return tr;
}

/// Schur entries M_ij = tr(A_i W A_j W) from the pool Gram G = pool^T W pool.
RealMatrix schur_matrix(const std::vector<SdpConstraint>& cons, const RealMatrix& G) {
  const Index nc = cons.size();
  RealMatrix M(nc, nc);
  for (Index i = 0; i < nc; ++i) {
    for (Index j = 0; j <= i; ++j) {
      double v = 0.0;
      for (const RankTerm& t : cons[i].terms)
        for (const RankTerm& u : cons[j].terms)
          v += 0.5 * t.coef * u.coef *
               (G(t.right, u.left) * G(u.right, t.left) + G(t.right, u.right) * G(t.left, u.left));
      M(i, j) = M(j, i) = v;
    }
  }
  return M;
}

/// Cholesky with escalating diagonal jitter; roundoff near the central path
/// can push an iterate marginally indefinite without invalidating the run.
Eigen::LLT<RealMatrix> chol_with_jitter(RealMatrix S, const char* what) {
  double delta = 1e-14 * std::max(1.0, S.trace() / double(S.rows()));
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<RealMatrix> llt(S);
    if (llt.info() == Eigen::Success) return llt;
    S.diagonal().array() += delta;
    delta *= 100.0;
  }
  throw NumericalError(std::string("solve_sdp: ") + what + " lost positive definiteness");
}

/// Largest step in [0, 1] keeping S + alpha * dS positive definite, from the
/// smallest eigenvalue of L^{-1} dS L^{-T}, times the boundary fraction.
double psd_step(const Eigen::LLT<RealMatrix>& llt, const RealMatrix& S, const RealMatrix& dS,
                double cap) {
  const auto L = llt.matrixL();
  RealMatrix N = L.solve(dS);
  N = L.solve(RealMatrix(N.transpose()));
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(RealMatrix(0.5 * (N + N.transpose())),
                                               Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  double alpha = std::min(1.0, cap);
  if (lmin < 0) alpha = std::min(alpha, -1.0 / lmin);
  alpha *= kStepFraction;
  // the factorization may have been jittered; certify the step against the
  // true matrix and back off if rounding pushed it outside the cone
  while (alpha > 1e-14) {
    Eigen::LLT<RealMatrix> check(RealMatrix(S + alpha * dS));
    if (check.info() == Eigen::Success) break;
    alpha *= 0.5;
  }
  return alpha;
}

}  // namespace

RealMatrix SdpProblem::densify(Index i) const {
  RealMatrix M = RealMatrix::Zero(m, m);
  for (const RankTerm& t : constraints[i].terms) {
    const auto& u = pool.col(t.left);
    const auto& v = pool.col(t.right);
    M += (0.5 * t.coef) * (u * v.transpose() + v * u.transpose());
  }
  return M;
}

void SdpProblem::validate() const {
  if (m < 1) throw InvalidArgument("sdp: empty problem");
  if (P.rows() != m || P.cols() != m) throw InvalidArgument("sdp: objective size mismatch");
  if (pool.rows() != m) throw InvalidArgument("sdp: pool row size mismatch");
  if (constraints.empty() || constraints[0].sense != '=')
    throw InvalidArgument("sdp: missing normalization constraint");
  Index eq_one = 0;
  for (const SdpConstraint& c : constraints) {
    if (c.sense != '<' && c.sense != '=') throw InvalidArgument("sdp: unknown constraint sense");
    if (c.rhs == 1.0) ++eq_one;
    for (const RankTerm& t : c.terms)
      if (t.left < 0 || t.left >= pool.cols() || t.right < 0 || t.right >= pool.cols())
        throw InvalidArgument("sdp: rank term indexes outside the pool");
  }
  if (eq_one != 1) throw InvalidArgument("sdp: exactly one normalization constraint expected");
}

SdpProblem assemble_relaxation(const QcqpInstance& qcqp) {
  SdpProblem prob;
  prob.m = qcqp.m;
  prob.P = 0.5 * (qcqp.P + qcqp.P.transpose());
  prob.pool = qcqp.pool;
  prob.constraints.push_back({qcqp.normalization.terms, '=', 1.0});
  for (const QcqpConstraint& c : qcqp.elimination) {
    if (c.terms.empty()) continue;  // identically zero row
    prob.constraints.push_back({c.terms, c.degenerate ? '=' : '<', 0.0});
  }
  for (const QcqpConstraint& c : qcqp.cross) {
    if (c.terms.empty()) continue;  // degenerate placeholder
    prob.constraints.push_back({c.terms, '=', 0.0});
  }
  prob.validate();
  return prob;
}

SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opt) {
  prob.validate();
  if (!(opt.tol >= 1e-9)) throw InvalidArgument("solve_sdp: tolerance below 1e-9");
  const Index m = prob.m;
  if (m > 4000)
    throw InvalidArgument(
        "solve_sdp: matrix side exceeds 4000; the dense interior-point method costs O(m^3) per "
        "iteration and this instance is out of reach");
  const Index nc = prob.constraints.size();

  RealVector b(nc), ineq(nc);
  for (Index i = 0; i < nc; ++i) {
    b(i) = prob.constraints[i].rhs;
    ineq(i) = prob.constraints[i].sense == '<' ? 1.0 : 0.0;
  }
  const Index p = Index(ineq.sum());

  // initial point: X = tau I rescaled onto the normalization slice, Z = I
  SdpSolution sol;
  sol.X = RealMatrix::Identity(m, m) / double(m);
  {
    const double t0 = constraint_traces(prob.constraints, prob.pool, sol.X)(0);
    if (!(std::abs(t0) > 1e-12))
      throw NumericalError(
          "solve_sdp: the normalization constraint has zero interaction with the cone; the "
          "relaxation is infeasible as posed");
    sol.X /= t0;
    if (t0 < 0) sol.X = RealMatrix::Identity(m, m);  // fall back to a plain cone point
  }
  RealMatrix Z = RealMatrix::Identity(m, m);
  sol.y = RealVector::Zero(nc);
  RealVector s = ineq, z = ineq;  // slacks only live on inequality rows
  {
    for (Index i = 0; i < nc; ++i)
      if (ineq(i) > 0) sol.y(i) = 1.0;
  }

  const double pnorm = 1.0 + prob.P.norm(), bnorm = 1.0 + b.norm();
  double mu = (sol.X.cwiseProduct(Z).sum() + s.dot(z)) / double(m + p);

  // exact constraint Gram tr(A_i A_j), used to refine search directions and to
  // polish the final iterate against the affine constraint set
  RealMatrix M0 = schur_matrix(prob.constraints, RealMatrix(prob.pool.transpose() * prob.pool));
  M0.diagonal().array() += 1e-13 * std::max(1.0, M0.trace() / double(nc));
  Eigen::LDLT<RealMatrix> ldlt0(M0);
  auto affine_correct = [&](RealMatrix& S, const RealVector& target) {
    if (ldlt0.info() != Eigen::Success) return;
    const RealVector res = target - constraint_traces(prob.constraints, prob.pool, S);
    RealVector lam = ldlt0.solve(res);
    lam += ldlt0.solve(RealVector(res - M0 * lam));
    S += weighted_sum(prob.constraints, lam, prob.pool);
  };

  int stalled = 0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    // residuals
    const RealVector trX = constraint_traces(prob.constraints, prob.pool, sol.X);
    const RealVector rp = b - trX - ineq.cwiseProduct(s);
    RealMatrix Rd = prob.P - weighted_sum(prob.constraints, sol.y, prob.pool) + Z;
    Rd = 0.5 * (Rd + Rd.transpose());
    RealVector rc = RealVector::Zero(nc);
    for (Index i = 0; i < nc; ++i)
      if (ineq(i) > 0) rc(i) = sol.y(i) - z(i);

    sol.primal_value = prob.P.cwiseProduct(sol.X).sum();
    sol.dual_value = b.dot(sol.y);
    sol.gap = std::abs(sol.dual_value - sol.primal_value) /
              (1.0 + std::abs(sol.primal_value) + std::abs(sol.dual_value));
    sol.iterations = it - 1;
    sol.mu_history.push_back(mu);
    const double prim_res = rp.norm() / bnorm;
    const double dual_res = Rd.norm() / pnorm;
    if (sol.gap <= opt.tol && prim_res <= opt.tol && dual_res <= opt.tol &&
        rc.cwiseAbs().maxCoeff() <= opt.tol) {
      sol.converged = true;
      break;
    }
    if (std::abs(sol.dual_value) > 1e10 || sol.X.trace() > 1e12)
      throw NumericalError("solve_sdp: iterates diverge; the relaxation looks unbounded");

    try {
    // Nesterov-Todd scaling: G = Lx Q Lam^{-1/4} with Lx^T Z Lx = Q Lam Q^T
    // gives W = G G^T (W Z W = X) and the diagonal scaled point
    // V = G^{-1} X G^{-T} = G^T Z G = Lam^{1/2}.
    Eigen::LLT<RealMatrix> lltX = chol_with_jitter(sol.X, "primal iterate");
    const RealMatrix Lx = lltX.matrixL();
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(RealMatrix(Lx.transpose() * Z * Lx));
    if (es.eigenvalues().minCoeff() <= 0)
      throw NumericalError("solve_sdp: dual iterate lost positive definiteness");
    const RealVector vdiag = es.eigenvalues().cwiseSqrt();
    const RealMatrix Gscal =
        Lx * es.eigenvectors() * vdiag.cwiseSqrt().cwiseInverse().asDiagonal();
    const RealMatrix W = Gscal * Gscal.transpose();

    Eigen::LLT<RealMatrix> lltZ = chol_with_jitter(Z, "dual iterate");
    const RealMatrix Zinv = lltZ.solve(RealMatrix::Identity(m, m));

    const RealMatrix WP = W * prob.pool;
    const RealMatrix Gram = prob.pool.transpose() * WP;
    RealMatrix M = schur_matrix(prob.constraints, Gram);
    for (Index i = 0; i < nc; ++i)
      if (ineq(i) > 0) M(i, i) += s(i) / z(i);
    M.diagonal().array() += 1e-13 * std::max(1.0, M.trace() / double(nc));
    Eigen::LDLT<RealMatrix> ldlt(M);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("solve_sdp: Schur complement factorization failed");

    const RealMatrix WRdW = W * Rd * W;

    auto direction = [&](double sigmu, const RealVector& corr_lp, RealMatrix& dX, RealMatrix& dZ,
                         RealVector& dy, RealVector& ds, RealVector& dz) {
      RealMatrix Rc = -sol.X;
      if (sigmu > 0) Rc += sigmu * Zinv;
      Rc = 0.5 * (Rc + Rc.transpose());
      const RealMatrix V = Rc + WRdW;
      RealVector rhs = constraint_traces(prob.constraints, prob.pool, V) - rp;
      for (Index i = 0; i < nc; ++i)
        if (ineq(i) > 0)
          rhs(i) += (sigmu - s(i) * z(i) - corr_lp(i)) / z(i) + (s(i) / z(i)) * rc(i);
      dy = ldlt.solve(rhs);
      // two rounds of iterative refinement keep the endgame Schur solves sharp
      for (int ref = 0; ref < 2; ++ref) dy += ldlt.solve(RealVector(rhs - M * dy));
      dZ = weighted_sum(prob.constraints, dy, prob.pool) - Rd;
      dX = V - weighted_sum(prob.constraints, dy, WP);
      dX = 0.5 * (dX + dX.transpose());
      ds = RealVector::Zero(nc);
      dz = RealVector::Zero(nc);
      for (Index i = 0; i < nc; ++i)
        if (ineq(i) > 0) {
          dz(i) = dy(i) - rc(i);
          ds(i) = (sigmu - s(i) * z(i) - corr_lp(i)) / z(i) - (s(i) / z(i)) * dz(i);
        }
    };

    auto lp_mask_step = [&](const RealVector& v, const RealVector& dv) {
      if (p == 0) return 1.0;
      double alpha = 1.0;
      for (Index i = 0; i < nc; ++i)
        if (ineq(i) > 0 && dv(i) < 0) alpha = std::min(alpha, -v(i) / dv(i));
      return alpha;
    };

    // predictor (affine scaling)
    RealMatrix dX, dZ;
    RealVector dy, ds, dz;
    direction(0.0, RealVector::Zero(nc), dX, dZ, dy, ds, dz);
    double ap = psd_step(lltX, sol.X, dX, lp_mask_step(s, ds));
    double ad = psd_step(lltZ, Z, dZ, lp_mask_step(z, dz));
    const double mu_aff = ((sol.X + ap * dX).cwiseProduct(Z + ad * dZ).sum() +
                           (s + ap * ds).dot(z + ad * dz)) /
                          double(m + p);
    double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3);
    sigma = std::min(std::max(sigma, 1e-6), 0.99);

    // centering step; the Mehrotra second-order term is kept only on the
    // scalar slack block, where it is reliable -- the semidefinite analogue
    // consistently degraded the NT direction on these instances
    RealVector corr_lp = RealVector::Zero(nc);
    for (Index i = 0; i < nc; ++i)
      if (ineq(i) > 0) corr_lp(i) = ds(i) * dz(i);
    // the value gap cannot drop below ~|rp||y|; letting complementarity
    // collapse past that floor only degrades the iterate's conditioning
    double mu_floor = 0.0;
    if (prim_res < 1e2 * opt.tol)
      mu_floor = std::min(mu, rp.norm() * (1.0 + sol.y.norm()) / double(m + p));
    const double sigmu = std::max(sigma * mu, mu_floor);
    direction(sigmu, corr_lp, dX, dZ, dy, ds, dz);
    ap = psd_step(lltX, sol.X, dX, lp_mask_step(s, ds));
    ad = psd_step(lltZ, Z, dZ, lp_mask_step(z, dz));

    // unequal step lengths can push the complementarity measure up; equalize
    // (and back off once) when that happens
    auto mu_at = [&](double a1, double a2) {
      return ((sol.X + a1 * dX).cwiseProduct(Z + a2 * dZ).sum() + (s + a1 * ds).dot(z + a2 * dz)) /
             double(m + p);
    };
    if (sigmu < mu && mu_at(ap, ad) > mu) {
      ap = ad = std::min(ap, ad);
      if (mu_at(ap, ad) > mu && mu_at(0.5 * ap, 0.5 * ad) < mu) {
        ap *= 0.5;
        ad *= 0.5;
      }
    }

    if (opt.verbose) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> esM(M, Eigen::EigenvaluesOnly);
      std::fprintf(stderr,
                   "it %d mu %.3e gap %.3e rp %.3e rd %.3e ap %.3e ad %.3e sig %.3e |dX| %.3e "
                   "|dZ| %.3e |dy| %.3e lminM %.3e lmaxM %.3e trX %.3e |y| %.3e\n",
                   it, mu, sol.gap, prim_res, dual_res, ap, ad, sigma, dX.norm(), dZ.norm(),
                   dy.norm(), esM.eigenvalues().minCoeff(), esM.eigenvalues().maxCoeff(),
                   sol.X.trace(), sol.y.norm());
    }

    // both cone steps collapsing means the iterate is wedged (typically a
    // primal recession ray when the optimal face is unbounded); further
    // iterations cannot move, so stop and keep the dual bound gathered so far
    if (ap < 1e-8 && ad < 1e-8) {
      if (++stalled >= 3) break;
    } else {
      stalled = 0;
    }

    sol.X += ap * dX;
    s += ap * ds;
    sol.y += ad * dy;
    Z += ad * dZ;
    z += ad * dz;
    // rounding can leave a -1e-16-level eigenvalue that would freeze every
    // later cone step; nudge the iterate back inside
    auto repair = [&](RealMatrix& S) {
      double delta = 1e-15 * std::max(1.0, S.trace() / double(m));
      for (int k = 0; k < 4 && Eigen::LLT<RealMatrix>(S).info() != Eigen::Success; ++k) {
        S.diagonal().array() += delta;
        delta *= 100.0;
      }
    };
    repair(sol.X);
    repair(Z);
    mu = (sol.X.cwiseProduct(Z).sum() + s.dot(z)) / double(m + p);
    sol.iterations = it;
    } catch (const NumericalError&) {
      // cone geometry break-down this late is an endgame wedge, not a setup
      // error; keep the dual bound gathered so far
      if (it <= 3) throw;
      break;
    }
  }

  if (!sol.converged) {
    // endgame polish: roundoff in the ill-conditioned Schur solves can freeze
    // a tiny primal residual that inflates the value gap through b^T y;
    // project X back onto the affine constraint set and re-test convergence
    RealVector rp = b - constraint_traces(prob.constraints, prob.pool, sol.X) -
                    ineq.cwiseProduct(s);
    if (rp.norm() / bnorm < 1e-5) {
      if (ldlt0.info() == Eigen::Success) {
        const RealVector target = b - ineq.cwiseProduct(s);
        for (int round = 0; round < 3; ++round) {
          // clip into the cone, then restore the affine constraints
          Eigen::SelfAdjointEigenSolver<RealMatrix> esx(sol.X);
          sol.X = esx.eigenvectors() * esx.eigenvalues().cwiseMax(0.0).asDiagonal() *
                  esx.eigenvectors().transpose();
          affine_correct(sol.X, target);
        }
        rp = b - constraint_traces(prob.constraints, prob.pool, sol.X) - ineq.cwiseProduct(s);
        RealMatrix Rd = prob.P - weighted_sum(prob.constraints, sol.y, prob.pool) + Z;
        double rc_max = 0.0;
        for (Index i = 0; i < nc; ++i)
          if (ineq(i) > 0) rc_max = std::max(rc_max, std::abs(sol.y(i) - z(i)));
        sol.primal_value = prob.P.cwiseProduct(sol.X).sum();
        sol.dual_value = b.dot(sol.y);
        sol.gap = std::abs(sol.dual_value - sol.primal_value) /
                  (1.0 + std::abs(sol.primal_value) + std::abs(sol.dual_value));
        sol.converged = sol.gap <= opt.tol && rp.norm() / bnorm <= opt.tol &&
                        Rd.norm() / pnorm <= opt.tol && rc_max <= opt.tol;
      }
    }
  }

  sol.slack = ineq.cwiseProduct(s);
  return sol;
}

CertificateReport verify_certificate(const SdpProblem& prob, const SdpSolution& sol, double tol) {
  prob.validate();
  CertificateReport rep;
  const Index nc = prob.constraints.size();

  const RealVector trX = constraint_traces(prob.constraints, prob.pool, sol.X);
  rep.max_primal_residual = 0.0;
  bool feas = true;
  for (Index i = 0; i < nc; ++i) {
    const double r = trX(i) - prob.constraints[i].rhs;
    if (prob.constraints[i].sense == '=') {
      rep.max_primal_residual = std::max(rep.max_primal_residual, std::abs(r));
      if (std::abs(r) > tol) feas = false;
    } else {
      rep.max_primal_residual = std::max(rep.max_primal_residual, std::max(r, 0.0));
      if (r > tol) feas = false;
    }
  }
  rep.primal_feasible = feas;

  const double xscale = std::max(1.0, sol.X.trace());
  rep.min_eig_x = sym_eig(RealMatrix(0.5 * (sol.X + sol.X.transpose()))).values.minCoeff();
  rep.x_psd = rep.min_eig_x >= -tol * xscale;

  RealVector w = sol.y;
  RealMatrix Zc = weighted_sum(prob.constraints, w, prob.pool) - prob.P;
  Zc = 0.5 * (Zc + Zc.transpose());
  rep.min_eig_z = sym_eig(Zc).values.minCoeff();
  bool dual_ok = rep.min_eig_z >= -tol * std::max(1.0, Zc.trace());
  for (Index i = 0; i < nc; ++i)
    if (prob.constraints[i].sense == '<' && sol.y(i) < -tol) dual_ok = false;
  rep.dual_feasible = dual_ok;

  const double pobj = prob.P.cwiseProduct(sol.X).sum();
  double dobj = 0.0;
  for (Index i = 0; i < nc; ++i) dobj += prob.constraints[i].rhs * sol.y(i);
  rep.gap = std::abs(dobj - pobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  rep.gap_ok = rep.gap <= 10 * tol;

  rep.complementarity = Zc.cwiseProduct(sol.X).sum();
  rep.complementarity_ok = std::abs(rep.complementarity) <= 10 * tol * xscale;
  return rep;
}

void export_sdp(const SdpProblem& prob, std::ostream& out) {
  prob.validate();
  out << "# sparse-triple SDP export\n";
  out << "# max tr(P X) s.t. tr(A_i X) (<=|=) rhs_i, X psd\n";
  out << "# size " << prob.m << " constraints " << prob.constraints.size() << "\n";
  out << "# `meta i sense rhs` per constraint; matrix blocks as `block row col value`\n";
  out << "# block 0 is the objective, block i+1 is constraint i; upper triangle only\n";
  for (Index i = 0; i < Index(prob.constraints.size()); ++i)
    out << "meta " << i << ' ' << prob.constraints[i].sense << ' ' << prob.constraints[i].rhs
        << '\n';
  auto dump = [&out](Index block, const RealMatrix& M) {
    for (Index r = 0; r < M.rows(); ++r)
      for (Index c = r; c < M.cols(); ++c)
        if (M(r, c) != 0.0) out << block << ' ' << r << ' ' << c << ' ' << M(r, c) << '\n';
  };
  dump(0, prob.P);
  for (Index i = 0; i < Index(prob.constraints.size()); ++i) dump(i + 1, prob.densify(i));
}

}  // namespace tb
