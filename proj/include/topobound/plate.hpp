#pragma once

#include <memory>

#include "topobound/fem.hpp"
#include "topobound/objectives.hpp"
#include "topobound/types.hpp"

namespace tb {

/// Harmonically forced square Kirchhoff plate on spring-dashpot supports,
/// design-dependent lumped point masses, unit out-of-plane center load.
struct PlateConfig {
  double L = 0.5, t = 0.01;   // side and thickness, m
  double E_kPa = 1.0;         // Young's modulus, kPa
  double nu = 0.4;
  double rho_lower = 10.0, rho_upper = 100.0;  // kg/m^3
  double s = 1e-2;            // boundary spring stiffness, N/m^2
  double gamma = 50.0;        // damping ratio of the boundary dashpots
  double omega = 10.0;        // excitation frequency, rad/s
  int nx = 30, ny = 30;

  double flexural_rigidity() const {
    return E_kPa * 1e3 * t * t * t / (12.0 * (1.0 - nu * nu));
  }
  void validate() const;
};

/// 12-dof non-conforming rectangular Kirchhoff (ACM) element on a dx x dy
/// rectangle; nodal dofs (w, dw/dx, dw/dy), nodes counter-clockwise from the
/// lower-left corner.
RealMatrix acm_stiffness(double dx, double dy, double D_flex, double nu);

/// Consistent unit-density element mass (thickness t), same dof layout.
RealMatrix acm_consistent_mass(double dx, double dy, double t);

/// Full-dof affine split: C-part = K + C_spring + i D_damp - w^2 rho_mid M0,
/// d_j = -w^2 (rho_upper - rho_lower)/2 M0_jj (zero on rotational dofs).
/// Dofs are ordered (w, dw/dx, dw/dy) per node, node-major.
struct SparsePlateSystem {
  SparseComplexMatrix C;
  ComplexVector d;
  ComplexVector b;
  RealVector M0;              // HRZ lumped unit-density mass diagonal
  std::vector<char> rotational;
};
SparsePlateSystem build_plate_system_sparse(const PlateConfig& cfg);
AffineSystem build_plate_system(const PlateConfig& cfg);

/// Prepared plate problem: rotational dofs condensed away (their theta is
/// prescribed zero and they carry no mass), leaving one design variable per
/// node. The condensed blocks split as A~(theta, w) = Ks - w^2 M(theta) with
/// Ks independent of the excitation frequency.
struct PlateProblem {
  PlateConfig cfg;
  StructuredMesh mesh;
  DofPartition part;           // passive = rotational dofs
  SparsePlateSystem full;
  AffineSystem condensed;      // at cfg.omega
  std::shared_ptr<SparseCondenser> cond;
  ComplexMatrix Ks;            // condensed K + spring terms, frequency-free
  RealVector M0_f;             // lumped masses on the w dofs
  QuadraticObjective center_magnitude;  // |w_center|^2, condensed
  Index center_free;           // free index of the center w dof
  RealVector design_xy;        // (x0,y0,x1,y1,...) of the w dofs

  /// Condensed system matrix at an arbitrary frequency.
  ComplexMatrix assemble_at(const RealVector& theta_f, double omega) const;
  ComplexVector solve_condensed(const RealVector& theta_f) const;
  ComplexVector expand(const ComplexVector& z_f) const { return cond->expand(z_f); }
};

PlateProblem build_plate(const PlateConfig& cfg);

/// Mean |w|^2 over the translational dofs, one value per grid frequency.
RealVector frequency_response(const PlateProblem& prob, const RealVector& theta_f,
                              const RealVector& omega_grid);

/// Half-power-bandwidth quality factor of a response curve.
double q_factor(const RealVector& omega_grid, const RealVector& curve);

}  // namespace tb
