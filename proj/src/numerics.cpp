#include "topobound/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace tb {

RealMatrix require_symmetric(const RealMatrix& S, const char* where) {
  if (S.rows() != S.cols())
    throw InvalidArgument(std::string(where) + ": matrix not square");
  const double scale = S.norm();
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && asym > kSymmetryTol * scale)
    throw InvalidArgument(std::string(where) + ": matrix not symmetric (asymmetry " +
                          std::to_string(asym / scale) + " relative)");
  return 0.5 * (S + S.transpose());
}

ComplexVector solve_complex_linear(const ComplexMatrix& A, const ComplexVector& b) {
  if (A.rows() != A.cols())
    throw InvalidArgument("solve_complex_linear: A not square");
  if (A.rows() != b.size())
    throw InvalidArgument("solve_complex_linear: size mismatch between A and b");
  Eigen::PartialPivLU<ComplexMatrix> lu(A);
  const double normA = A.norm();
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot > 1e-14 * normA))
    throw NumericalError("solve_complex_linear: matrix singular to working precision");
  return lu.solve(b);
}

EigResult sym_eig(const RealMatrix& S) {
  const RealMatrix Ssym = require_symmetric(S, "sym_eig");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(Ssym);
  if (es.info() != Eigen::Success)
    throw NumericalError("sym_eig: eigensolver did not converge");
  const Index m = Ssym.rows();
  EigResult out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse().eval();
  (void)m;
  return out;
}

EigResult gen_sym_eig(const RealMatrix& A, const RealMatrix& B) {
  const RealMatrix As = require_symmetric(A, "gen_sym_eig");
  const RealMatrix Bs = require_symmetric(B, "gen_sym_eig (B)");
  Eigen::LLT<RealMatrix> llt(Bs);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gen_sym_eig: B is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<RealMatrix> es(As, Bs);
  if (es.info() != Eigen::Success)
    throw NumericalError("gen_sym_eig: eigensolver did not converge");
  EigResult out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse().eval();
  return out;
}

RealMatrix chol_spd_solve(const RealMatrix& S, const RealMatrix& rhs) {
  const RealMatrix Ssym = require_symmetric(S, "chol_spd_solve");
  if (Ssym.rows() != rhs.rows())
    throw InvalidArgument("chol_spd_solve: rhs size mismatch");
  Eigen::LLT<RealMatrix> llt(Ssym);
  if (llt.info() != Eigen::Success)
    throw NumericalError("chol_spd_solve: non-SPD pivot encountered");
  return llt.solve(rhs);
}

RealVector chol_spd_solve(const RealMatrix& S, const RealVector& rhs) {
  return RealVector(chol_spd_solve(S, RealMatrix(rhs)));
}

}  // namespace tb
