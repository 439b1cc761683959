#pragma once

#include <cmath>
#include <memory>

#include "topobound/fem.hpp"
#include "topobound/objectives.hpp"
#include "topobound/types.hpp"

namespace tb {

/// TM Helmholtz mode converter: straight high-index channel through a
/// rectangular domain, centered square design region, first-order absorbing
/// boundaries top/bottom and modal in/out boundaries left/right.
struct ModeConverterConfig {
  double L = 4.0, H = 2.0;  // domain, micrometers
  int nx = 336, ny = 168;
  double wavelength = 0.8;  // free-space, micrometers
  double eps_r = 10.0;      // high-index permittivity
  double L_d = 0.5;         // design square side
  double H_c = 1.0 / 6.0;   // channel height
  int in_mode = 1;          // input mode order (1 = fundamental)
  int out_mode = 2;         // target output mode order

  double k() const { return 2.0 * M_PI / wavelength; }
  void validate() const;
};

struct WaveguideMode {
  double beta = 0.0;    // propagation constant, 1/um
  RealVector profile;   // nodal profile on the 1D boundary grid, ||.||_2 = 1
  int order = 0;        // 1-based
};

/// Guided modes of the 1D slab cross-section with perfectly conducting ends
/// (Dirichlet), sorted by descending beta^2. The transverse discretization
/// matches the 2D stencil (lumped nodal-permittivity mass against a
/// consistent-mass beta^2 term); with dx > 0 the x-direction Bloch dispersion
/// of the bilinear-quad grid is folded in, so the profile is an exact
/// transverse mode of the 2D operator at spacing dx.
std::vector<WaveguideMode> waveguide_modes(const RealVector& y, double k,
                                           const RealVector& eps_nodal, int count,
                                           double dx = 0.0);

/// Full (uncondensed) affine split of Eq.-level system
///   A(theta) = K + i D(k) - k^2 M(theta),  A(theta) z = b,
/// with C = K + i D - k^2 (eps_r+1)/2 M0 and d_j = -k^2 (eps_r-1)/2 M0_jj.
/// Dense; intended for moderate meshes and consistency checks.
AffineSystem build_system(const ModeConverterConfig& cfg);

/// Sparse variant of the same split.
struct SparseAffineSystem {
  SparseComplexMatrix C;
  ComplexVector d;
  ComplexVector b;
};
SparseAffineSystem build_system_sparse(const ModeConverterConfig& cfg);

/// Fully prepared problem: background theta, design partition, condensed
/// system and condensed objectives.
struct ModeConverterProblem {
  ModeConverterConfig cfg;
  StructuredMesh mesh;
  WaveguideMode mode_in, mode_out;
  RealVector theta_background;       // +-1 pattern, 0 in the design region
  std::vector<char> is_design;       // per node
  DofPartition part;                 // free = design nodes
  SparseAffineSystem full;           // before folding passive theta
  AffineSystem condensed;            // C~, d_f, b~
  std::shared_ptr<SparseCondenser> cond;
  QuadraticObjective overlap;        // normalized overlap, condensed
  QuadraticObjective magnitude;      // overlap magnitude, condensed
  IndexList out_nodes;               // S: right boundary node ids
  RealVector design_xy;              // flattened design-node coordinates (x0,y0,x1,y1,...)

  /// Solve the condensed state problem at a free-dof design.
  ComplexVector solve_condensed(const RealVector& theta_f) const;
  /// Expand a condensed solution to the full mesh.
  ComplexVector expand(const ComplexVector& z_f) const { return cond->expand(z_f); }
  /// Full design vector from a free design (background elsewhere).
  RealVector full_theta(const RealVector& theta_f) const;
};

ModeConverterProblem build_mode_converter(const ModeConverterConfig& cfg);

/// Power transmittance into the target output mode for a full-mesh field.
double transmittance(const ModeConverterProblem& prob, const ComplexVector& z_full);

}  // namespace tb
