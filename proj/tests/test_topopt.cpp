#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "topobound/plate.hpp"
#include "topobound/numerics.hpp"
#include "topobound/topopt.hpp"

using namespace tb;

namespace {

std::mt19937_64 rng(21);

ComplexVector random_cvec(Index n) {
  std::normal_distribution<double> g;
  ComplexVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

/// Small random complex-symmetric affine system.
AffineSystem random_system(Index n) {
  std::normal_distribution<double> g;
  ComplexMatrix C(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) C(i, j) = C(j, i) = Complex(g(rng), g(rng));
  C += 5.0 * ComplexMatrix::Identity(n, n);
  return {C, random_cvec(n), random_cvec(n)};
}

RealVector fd_sensitivities(const AffineSystem& sys, const RealVector& theta,
                            const QuadraticObjective& obj, double h) {
  RealVector out(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    RealVector tp = theta, tm = theta;
    tp(j) += h;
    tm(j) -= h;
    const double fp = evaluate(obj, solve_complex_linear(sys.assemble(tp), sys.b));
    const double fm = evaluate(obj, solve_complex_linear(sys.assemble(tm), sys.b));
    out(j) = (fp - fm) / (2 * h);
  }
  return out;
}

}  // namespace

TEST_CASE("adjoint sensitivities vanish for a state-independent objective") {
  AffineSystem sys = random_system(3);
  QuadraticObjective obj;
  obj.n = 3;
  obj.r = 5.0;
  obj.s = 1.0;
  RealVector theta = RealVector::Zero(3);
  ComplexVector z = solve_complex_linear(sys.assemble(theta), sys.b);
  CHECK(adjoint_sensitivities(sys, theta, z, obj).norm() == 0.0);
}

TEST_CASE("adjoint sensitivities match finite differences on a 2-dof system") {
  AffineSystem sys = random_system(2);
  ComplexVector c = random_cvec(2).normalized();
  QuadraticObjective obj = build_normalized_overlap(c, {0, 1}, 2);
  RealVector theta(2);
  theta << 0.3, -0.6;
  ComplexVector z = solve_complex_linear(sys.assemble(theta), sys.b);
  RealVector df = adjoint_sensitivities(sys, theta, z, obj);
  RealVector fd = fd_sensitivities(sys, theta, obj, 1e-7);
  for (Index j = 0; j < 2; ++j)
    CHECK(std::abs(df(j) - fd(j)) <= 1e-5 * std::max(1.0, std::abs(fd(j))));
}

TEST_CASE("adjoint sensitivities match finite differences on both backends") {
  // photonic backend (condensed mode converter)
  {
    ModeConverterConfig cfg;
    cfg.nx = 24;
    cfg.ny = 12;
    ModeConverterProblem prob = build_mode_converter(cfg);
    const Index n = prob.condensed.size();
    RealVector theta = RealVector::Constant(n, 0.1);
    ComplexVector z = prob.solve_condensed(theta);
    RealVector df = adjoint_sensitivities(prob.condensed, theta, z, prob.overlap);
    RealVector fd = fd_sensitivities(prob.condensed, theta, prob.overlap, 1e-6);
    for (Index j = 0; j < std::min<Index>(10, n); ++j)
      CHECK(std::abs(df(j) - fd(j)) <= 1e-5 * std::max(1.0, std::abs(fd(j))));
  }
  // elastic backend (condensed plate)
  {
    PlateConfig cfg;
    cfg.nx = cfg.ny = 4;
    PlateProblem prob = build_plate(cfg);
    const Index n = prob.condensed.size();
    RealVector theta = RealVector::Zero(n);
    ComplexVector z = prob.solve_condensed(theta);
    RealVector df = adjoint_sensitivities(prob.condensed, theta, z, prob.center_magnitude);
    RealVector fd = fd_sensitivities(prob.condensed, theta, prob.center_magnitude, 1e-6);
    for (Index j = 0; j < std::min<Index>(10, n); ++j)
      CHECK(std::abs(df(j) - fd(j)) <= 1e-5 * std::max(1.0, std::abs(fd(j))));
  }
}

TEST_CASE("adjoint sensitivities inherit the problem symmetry") {
  ModeConverterConfig cfg;
  cfg.nx = 24;
  cfg.ny = 12;
  ModeConverterProblem prob = build_mode_converter(cfg);
  const Index n = prob.condensed.size();
  RealVector theta = RealVector::Zero(n);
  ComplexVector z = prob.solve_condensed(theta);
  // |c^H z|^2 is mirror-invariant even for the antisymmetric target mode
  RealVector df = adjoint_sensitivities(prob.condensed, theta, z, prob.magnitude);

  for (Index i = 0; i < n; ++i) {
    const double x = prob.design_xy(2 * i), y = prob.design_xy(2 * i + 1);
    for (Index k = 0; k < n; ++k)
      if (std::abs(prob.design_xy(2 * k) - x) < 1e-12 &&
          std::abs(prob.design_xy(2 * k + 1) - (cfg.H - y)) < 1e-12)
        CHECK(df(i) == doctest::Approx(df(k)).epsilon(1e-6));
  }
}

TEST_CASE("mma_step leaves the design unchanged for zero gradient") {
  TopoptConfig cfg;
  MmaState state;
  RealVector theta(3);
  theta << -0.5, 0.0, 0.8;
  RealVector next = mma_step(theta, RealVector::Zero(3), state, cfg);
  CHECK((next - theta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mma_step descends a single-variable quadratic") {
  TopoptConfig cfg;
  cfg.maximize = false;
  MmaState state;
  RealVector theta = RealVector::Constant(1, 0.5);
  auto f = [](double x) { return (x - 0.1) * (x - 0.1); };
  double prev = f(theta(0));
  for (int it = 0; it < 30; ++it) {
    RealVector df(1);
    df << 2.0 * (theta(0) - 0.1);
    theta = mma_step(theta, df, state, cfg);
    CHECK(in_box(theta));
  }
  CHECK(f(theta(0)) < prev);
  CHECK(theta(0) == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("mma_step pins variables pushed out of the box") {
  TopoptConfig cfg;
  MmaState state;
  RealVector theta = RealVector::Constant(1, 0.95);
  RealVector df = RealVector::Constant(1, -100.0);  // strong push upward
  RealVector next = mma_step(theta, df, state, cfg);
  CHECK(next(0) == 1.0);
}

TEST_CASE("run_topopt improves the mode-converter overlap on a small mesh") {
  ModeConverterConfig mc;
  mc.nx = 56;
  mc.ny = 28;
  ModeConverterProblem prob = build_mode_converter(mc);
  TopoptConfig cfg;
  cfg.max_iters = 60;
  // tiny seeded perturbation: the symmetric uniform design is a stationary
  // point of the antisymmetric-target overlap
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  RealVector theta0(prob.condensed.size());
  for (Index i = 0; i < theta0.size(); ++i) theta0(i) = u(rng);
  TopoptResult res = run_topopt(prob.condensed, prob.overlap, theta0, cfg);

  CHECK(in_box(res.theta));
  CHECK(res.history.objective.size() == size_t(res.iterations));
  const double f0 = res.history.objective.front();
  const double f_final =
      evaluate(prob.overlap, prob.solve_condensed(res.theta));
  CHECK(f_final > f0);
  CHECK(f_final > 0.5);
}

TEST_CASE("run_topopt with no design freedom returns immediately") {
  AffineSystem sys{ComplexMatrix(0, 0), ComplexVector(0), ComplexVector(0)};
  QuadraticObjective obj;
  TopoptResult res = run_topopt(sys, obj, RealVector(0), TopoptConfig{});
  CHECK(res.iterations == 1);
  CHECK(res.converged);
}

TEST_CASE("cone filter is a convex combination and fixes uniform fields") {
  RealVector xy(8);
  xy << 0, 0, 1, 0, 0, 1, 1, 1;
  RealMatrix H = build_cone_filter(xy, 1.5);
  for (Index j = 0; j < 4; ++j) CHECK(H.row(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
  RealVector u = RealVector::Constant(4, 0.37);
  CHECK(((H * u).array() - 0.37).abs().maxCoeff() < 1e-12);
}

TEST_CASE("heaviside projection is odd, monotone and saturates with beta") {
  RealVector t = RealVector::LinSpaced(21, -1.0, 1.0);
  RealVector p = heaviside_projection(t, 2.0);
  CHECK(p(0) == doctest::Approx(-1.0));
  CHECK(p(20) == doctest::Approx(1.0));
  for (Index i = 0; i + 1 < 21; ++i) CHECK(p(i) < p(i + 1));
  RealVector podd = heaviside_projection(RealVector(-t), 2.0);
  CHECK((p + podd).cwiseAbs().maxCoeff() < 1e-12);

  RealVector sharp = heaviside_projection(t, 64.0);
  for (Index i = 0; i < 21; ++i)
    if (std::abs(t(i)) > 0.1) CHECK(sharp(i) == doctest::Approx(t(i) > 0 ? 1.0 : -1.0).epsilon(1e-5));

  RealVector u = RealVector::Constant(5, 0.2);
  RealVector pu = heaviside_projection(u, 3.0);
  CHECK((pu.array() == pu(0)).all());  // uniform maps to uniform
}

TEST_CASE("pamping attenuation vanishes at solid and void") {
  RealVector bar(3);
  bar << -1.0, 0.0, 1.0;
  RealVector a = pamping_attenuation(bar, 1.0);
  CHECK(a(0) == 0.0);
  CHECK(a(2) == 0.0);
  CHECK(a(1) == doctest::Approx(1.0));
}

TEST_CASE("regularized run improves the overlap and returns a physical design") {
  ModeConverterConfig mc;
  mc.nx = 56;
  mc.ny = 28;
  ModeConverterProblem prob = build_mode_converter(mc);
  RegularizedConfig cfg;
  cfg.opt.max_iters = 60;
  cfg.beta_every = 15;
  RealVector theta0 = RealVector::Zero(prob.condensed.size());
  RegularizedResult res = run_topopt_regularized(prob, prob.overlap, theta0, cfg);

  CHECK(in_box(res.raw.theta));
  CHECK(in_box(res.theta_bar, 1e-12));
  const double f_final = evaluate(prob.overlap, prob.solve_condensed(clamp_box(res.theta_bar)));
  CHECK(f_final > res.raw.history.objective.front());
}
