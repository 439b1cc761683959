#include "topobound/topopt.hpp"

#include <Eigen/LU>
#include <cmath>

#include "topobound/numerics.hpp"

namespace tb {

namespace {

void check_symmetric_operator(const ComplexMatrix& A, const char* where) {
  if ((A - A.transpose()).norm() > 1e-8 * A.norm())
    throw InvalidArgument(std::string(where) +
                          ": adjoint shortcut requires a complex symmetric operator");
}

Eigen::PartialPivLU<ComplexMatrix> factorize(const ComplexMatrix& A, const char* where) {
  Eigen::PartialPivLU<ComplexMatrix> lu(A);
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-14 * A.norm()))
    throw NumericalError(std::string(where) + ": singular state operator");
  return lu;
}

/// df/dc_j = -2 Re(mu_j a_j z_j) for a diagonal dependency dA_jj/dc_j = a_j,
/// with mu solving A mu = (1/2) (g_re - i g_im). Valid for symmetric A, where
/// the adjoint operator A^T equals A and the factorization is shared.
RealVector diagonal_adjoint(const Eigen::PartialPivLU<ComplexMatrix>& lu, const ComplexVector& z,
                            const QuadraticObjective& obj, const ComplexVector& a) {
  const StateGradient g = state_gradient(obj, z);
  ComplexVector rhs(z.size());
  rhs.real() = 0.5 * g.re;
  rhs.imag() = -0.5 * g.im;
  const ComplexVector mu = lu.solve(rhs);
  RealVector df(z.size());
  for (Index j = 0; j < z.size(); ++j) df(j) = -2.0 * (mu(j) * a(j) * z(j)).real();
  return df;
}

}  // namespace

void TopoptConfig::validate() const {
  if (!(move_tol > 0)) throw InvalidArgument("topopt: move tolerance must be positive");
  if (max_iters < 1) throw InvalidArgument("topopt: need at least one iteration");
  if (!(move_limit > 0) || !(asymptote_init > 0))
    throw InvalidArgument("topopt: MMA parameters must be positive");
  if (!(asymptote_shrink > 0 && asymptote_shrink < 1) || !(asymptote_grow > 1))
    throw InvalidArgument("topopt: asymptote factors must shrink below and grow above one");
}

RealVector adjoint_sensitivities(const AffineSystem& sys, const RealVector& theta,
                                 const ComplexVector& z, const QuadraticObjective& obj) {
  const ComplexMatrix A = sys.assemble(theta);
  check_symmetric_operator(A, "adjoint_sensitivities");
  return diagonal_adjoint(factorize(A, "adjoint_sensitivities"), z, obj, sys.d);
}

RealVector mma_step(const RealVector& theta, const RealVector& dfdtheta, MmaState& state,
                    const TopoptConfig& cfg) {
  const Index n = theta.size();
  if (dfdtheta.size() != n) throw InvalidArgument("mma_step: gradient size mismatch");
  if (!in_box(theta, 1e-12)) throw InvalidArgument("mma_step: design outside [-1,1]");
  const double range = 2.0;

  if (state.iter < 2) {
    state.low = (theta.array() - cfg.asymptote_init * range).matrix();
    state.upp = (theta.array() + cfg.asymptote_init * range).matrix();
  } else {
    for (Index j = 0; j < n; ++j) {
      const double osc = (theta(j) - state.prev1(j)) * (state.prev1(j) - state.prev2(j));
      const double gam = osc < 0 ? cfg.asymptote_shrink : (osc > 0 ? cfg.asymptote_grow : 1.0);
      state.low(j) = theta(j) - gam * (state.prev1(j) - state.low(j));
      state.upp(j) = theta(j) + gam * (state.upp(j) - state.prev1(j));
      state.low(j) = std::min(std::max(state.low(j), theta(j) - 10.0 * range),
                              theta(j) - 0.01 * range);
      state.upp(j) = std::max(std::min(state.upp(j), theta(j) + 10.0 * range),
                              theta(j) + 0.01 * range);
    }
  }

  RealVector next(n);
  for (Index j = 0; j < n; ++j) {
    const double df = dfdtheta(j);
    const double eps = 0.001 * std::abs(df) + 1e-6 / range;
    const double p = (state.upp(j) - theta(j)) * (state.upp(j) - theta(j)) *
                     (std::max(df, 0.0) + eps);
    const double q = (theta(j) - state.low(j)) * (theta(j) - state.low(j)) *
                     (std::max(-df, 0.0) + eps);
    const double sp = std::sqrt(p), sq = std::sqrt(q);
    double cand = (state.low(j) * sp + state.upp(j) * sq) / (sp + sq);

    const double lo = std::max({-1.0, theta(j) - cfg.move_limit * range,
                                state.low(j) + 0.1 * (theta(j) - state.low(j))});
    const double hi = std::min({1.0, theta(j) + cfg.move_limit * range,
                                state.upp(j) - 0.1 * (state.upp(j) - theta(j))});
    next(j) = std::min(std::max(cand, lo), hi);
  }

  state.prev2 = state.iter < 1 ? theta : RealVector(state.prev1);
  state.prev1 = theta;
  ++state.iter;
  return next;
}

TopoptResult run_topopt(const AffineSystem& sys, const QuadraticObjective& obj,
                        const RealVector& theta0, const TopoptConfig& cfg) {
  cfg.validate();
  TopoptResult result;
  result.theta = clamp_box(theta0);
  if (result.theta.size() == 0 || sys.size() == 0) {
    result.iterations = 1;
    result.converged = true;
    return result;
  }
  if (result.theta.size() != sys.d.size())
    throw InvalidArgument("run_topopt: design size does not match the system");
  check_symmetric_operator(sys.C, "run_topopt");

  MmaState state;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const ComplexMatrix A = sys.assemble(result.theta);
    const auto lu = factorize(A, "run_topopt");
    const ComplexVector z = lu.solve(sys.b);
    const double f = evaluate(obj, z);

    RealVector df = diagonal_adjoint(lu, z, obj, sys.d);
    if (cfg.maximize) df = -df;

    const RealVector next = mma_step(result.theta, df, state, cfg);
    const double change = (next - result.theta).cwiseAbs().maxCoeff();
    result.history.objective.push_back(f);
    result.history.max_change.push_back(change);
    if (cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0)
      result.history.snapshots.push_back(next);

    result.theta = next;
    result.iterations = it;
    if (change < cfg.move_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

RealMatrix build_cone_filter(const RealVector& xy, double radius) {
  if (xy.size() % 2 != 0) throw InvalidArgument("build_cone_filter: bad coordinate list");
  if (radius < 0) throw InvalidArgument("build_cone_filter: radius must be nonnegative");
  const Index n = xy.size() / 2;
  RealMatrix H = RealMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < n; ++k) {
      const double dx = xy(2 * j) - xy(2 * k), dy = xy(2 * j + 1) - xy(2 * k + 1);
      H(j, k) = std::max(0.0, radius - std::sqrt(dx * dx + dy * dy));
    }
    const double row = H.row(j).sum();
    if (row <= 0.0) H(j, j) = 1.0;  // radius 0: identity
    else H.row(j) /= row;
  }
  return H;
}

RealVector heaviside_projection(const RealVector& theta_tilde, double beta) {
  if (!(beta > 0)) throw InvalidArgument("heaviside_projection: beta must be positive");
  return ((beta * theta_tilde.array()).tanh() / std::tanh(beta)).matrix();
}

RealVector heaviside_derivative(const RealVector& theta_tilde, double beta) {
  if (!(beta > 0)) throw InvalidArgument("heaviside_derivative: beta must be positive");
  const Eigen::ArrayXd t = (beta * theta_tilde.array()).tanh();
  return (beta * (1.0 - t.square()) / std::tanh(beta)).matrix();
}

RealVector pamping_attenuation(const RealVector& theta_bar, double eta) {
  return (eta * (1.0 + theta_bar.array()) * (1.0 - theta_bar.array())).matrix();
}

RegularizedResult run_topopt_regularized(const ModeConverterProblem& prob,
                                         const QuadraticObjective& obj, const RealVector& theta0,
                                         const RegularizedConfig& cfg) {
  cfg.opt.validate();
  const AffineSystem& sys = prob.condensed;
  const Index n = sys.size();
  if (theta0.size() != n) throw InvalidArgument("run_topopt_regularized: design size mismatch");
  check_symmetric_operator(sys.C, "run_topopt_regularized");

  const double radius = cfg.radius_elems * prob.mesh.dx();
  const RealMatrix H = build_cone_filter(prob.design_xy, radius);
  const double eps_half = 0.5 * (prob.cfg.eps_r - 1.0);

  RegularizedResult result;
  TopoptResult& raw = result.raw;
  raw.theta = clamp_box(theta0);
  MmaState state;
  double beta = cfg.beta0;

  for (int it = 1; it <= cfg.opt.max_iters; ++it) {
    const RealVector tilde = H * raw.theta;
    const RealVector bar = heaviside_projection(tilde, beta);

    // design-dependent diagonal: bar*d plus the pamping term
    // -i eta (1 - bar^2) d / eps_half (cast through k^2 M0 = -d/eps_half)
    ComplexMatrix A = sys.C;
    ComplexVector dA(n);
    for (Index j = 0; j < n; ++j) {
      const Complex pamp = Complex(0, -cfg.eta / eps_half) * (1.0 - bar(j) * bar(j)) * sys.d(j);
      A(j, j) += bar(j) * sys.d(j) + pamp;
      dA(j) = sys.d(j) * Complex(1.0, 2.0 * bar(j) * cfg.eta / eps_half);
    }
    const auto lu = factorize(A, "run_topopt_regularized");
    const ComplexVector z = lu.solve(sys.b);
    const double f = evaluate(obj, z);

    RealVector df_bar = diagonal_adjoint(lu, z, obj, dA);
    RealVector df = H.transpose() * heaviside_derivative(tilde, beta).cwiseProduct(df_bar);
    if (cfg.opt.maximize) df = -df;

    const RealVector next = mma_step(raw.theta, df, state, cfg.opt);
    const double change = (next - raw.theta).cwiseAbs().maxCoeff();
    raw.history.objective.push_back(f);
    raw.history.max_change.push_back(change);
    raw.theta = next;
    raw.iterations = it;
    if (change < cfg.opt.move_tol && beta >= cfg.beta_max) {
      raw.converged = true;
      break;
    }
    if (cfg.beta_every > 0 && it % cfg.beta_every == 0 && beta < cfg.beta_max)
      beta = std::min(2.0 * beta, cfg.beta_max);
  }
  result.theta_bar = heaviside_projection(RealVector(H * raw.theta), beta);
  return result;
}

}  // namespace tb
