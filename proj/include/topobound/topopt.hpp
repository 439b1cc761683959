#pragma once

#include "topobound/mode_converter.hpp"
#include "topobound/objectives.hpp"
#include "topobound/types.hpp"

namespace tb {

struct TopoptConfig {
  int max_iters = 1000;
  double move_tol = 1e-3;       // stop when max |dtheta| drops below this
  double asymptote_init = 0.5;  // times the box range
  double asymptote_shrink = 0.7;
  double asymptote_grow = 1.2;
  double move_limit = 0.2;
  bool maximize = true;
  int snapshot_every = 0;  // 0 = keep only the final design

  void validate() const;
};

struct OptimizationHistory {
  std::vector<double> objective;
  std::vector<double> max_change;
  std::vector<RealVector> snapshots;
};

struct TopoptResult {
  RealVector theta;
  OptimizationHistory history;
  int iterations = 0;
  bool converged = false;
};

/// Sensitivities of obj(z(theta)) for A(theta) z = b with the diagonal design
/// dependency dA/dtheta_j = d_j e_j e_j^T, via the adjoint method. A(theta)
/// must be complex symmetric (it is for both physics backends), which lets the
/// adjoint solve reuse the state operator.
RealVector adjoint_sensitivities(const AffineSystem& sys, const RealVector& theta,
                                 const ComplexVector& z, const QuadraticObjective& obj);

/// MMA iterate state (asymptotes and the two previous designs).
struct MmaState {
  int iter = 0;
  RealVector low, upp, prev1, prev2;
};

/// One MMA design update on the box [-1,1]^n (no extra constraints, so the
/// separable subproblem solves in closed form per variable).
RealVector mma_step(const RealVector& theta, const RealVector& dfdtheta, MmaState& state,
                    const TopoptConfig& cfg);

/// Staggered topology optimization on an affine system: solve the state, form
/// adjoint sensitivities, take an MMA step, repeat.
TopoptResult run_topopt(const AffineSystem& sys, const QuadraticObjective& obj,
                        const RealVector& theta0, const TopoptConfig& cfg);

/// Normalized cone filter weights H_jk = max(0, r - |x_j - x_k|) over the
/// points given as (x0,y0,x1,y1,...); rows sum to one.
RealMatrix build_cone_filter(const RealVector& xy, double radius);

/// Smoothed Heaviside projection around zero, mapping [-1,1] to [-1,1].
RealVector heaviside_projection(const RealVector& theta_tilde, double beta);
RealVector heaviside_derivative(const RealVector& theta_tilde, double beta);

/// Artificial damping (pamping) attenuation eta (1+theta)(1-theta), the
/// magnitude of the negative imaginary permittivity shift.
RealVector pamping_attenuation(const RealVector& theta_bar, double eta);

struct RegularizedConfig {
  double radius_elems = 3.0;  // cone filter radius in element lengths
  double beta0 = 1.0;
  double beta_max = 8.0;
  int beta_every = 50;  // double beta every this many iterations
  double eta = 1.0;
  TopoptConfig opt;
};

struct RegularizedResult {
  TopoptResult raw;        // theta = unfiltered design variables
  RealVector theta_bar;    // filtered + projected physical design
};

/// Conventional regularized variant for the mode converter: cone density
/// filter, Heaviside projection with a beta continuation schedule, and pamping
/// of the intermediate permittivities.
RegularizedResult run_topopt_regularized(const ModeConverterProblem& prob,
                                         const QuadraticObjective& obj, const RealVector& theta0,
                                         const RegularizedConfig& cfg);

}  // namespace tb
