#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace tb {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Thrown on violated preconditions (bad sizes, out-of-box designs, bad config values).
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical operation fails (singular matrix, non-SPD pivot, divergence).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Affine design-dependent system A(theta) = C + diag(theta) * diag(d), A(theta) z = b.
/// All blocks complex; theta is real with entries in [-1, 1].
struct AffineSystem {
  ComplexMatrix C;
  ComplexVector d;
  ComplexVector b;

  Index size() const { return C.rows(); }

  /// Assemble A(theta) explicitly.
  ComplexMatrix assemble(const RealVector& theta) const {
    if (theta.size() != d.size())
      throw InvalidArgument("AffineSystem::assemble: theta size mismatch");
    ComplexMatrix A = C;
    A.diagonal() += theta.cast<Complex>().cwiseProduct(d);
    return A;
  }
};

/// Max asymmetry allowed by the SymMatrix-style contracts, relative to ||S||_F.
inline constexpr double kSymmetryTol = 1e-12;

/// Validate that S is symmetric to kSymmetryTol * ||S||_F and return the
/// exactly symmetrized copy used downstream.
RealMatrix require_symmetric(const RealMatrix& S, const char* where);

/// Componentwise clamp to [-1, 1].
inline RealVector clamp_box(RealVector theta) {
  return theta.cwiseMax(-1.0).cwiseMin(1.0);
}

inline bool in_box(const RealVector& theta, double tol = 0.0) {
  return (theta.array() >= -1.0 - tol).all() && (theta.array() <= 1.0 + tol).all();
}

}  // namespace tb
