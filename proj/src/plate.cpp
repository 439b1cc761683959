#include "topobound/plate.hpp"

#include <Eigen/LU>
#include <cmath>

#include "topobound/numerics.hpp"

namespace tb {

namespace {

// 4-point Gauss rule on [0,1] (exact through degree 7, enough for the
// products of the cubic ACM basis).
constexpr double kGaussPts[4] = {0.06943184420297371, 0.33000947820757187,
                                 0.6699905217924281, 0.9305681557970263};
constexpr double kGaussWts[4] = {0.1739274225687269, 0.3260725774312731,
                                 0.3260725774312731, 0.1739274225687269};

using Vec12 = Eigen::Matrix<double, 12, 1>;

Vec12 acm_basis(double x, double y) {
  Vec12 p;
  p << 1, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y, x * x * x * y,
      x * y * y * y;
  return p;
}

Vec12 acm_basis_dx(double x, double y) {
  Vec12 p;
  p << 0, 1, 0, 2 * x, y, 0, 3 * x * x, 2 * x * y, y * y, 0, 3 * x * x * y, y * y * y;
  return p;
}

Vec12 acm_basis_dy(double x, double y) {
  Vec12 p;
  p << 0, 0, 1, 0, x, 2 * y, 0, x * x, 2 * x * y, 3 * y * y, x * x * x, 3 * x * y * y;
  return p;
}

/// Coefficients-from-dofs map: rows are (p, p_x, p_y) at each corner.
Eigen::Matrix<double, 12, 12> acm_dof_matrix(double dx, double dy) {
  const double xs[4] = {0, dx, dx, 0};
  const double ys[4] = {0, 0, dy, dy};
  Eigen::Matrix<double, 12, 12> C;
  for (int i = 0; i < 4; ++i) {
    C.row(3 * i) = acm_basis(xs[i], ys[i]).transpose();
    C.row(3 * i + 1) = acm_basis_dx(xs[i], ys[i]).transpose();
    C.row(3 * i + 2) = acm_basis_dy(xs[i], ys[i]).transpose();
  }
  return C;
}

Eigen::Matrix2d line2_mass(double h) {
  Eigen::Matrix2d M;
  M << 2, 1, 1, 2;
  return (h / 6.0) * M;
}

}  // namespace

void PlateConfig::validate() const {
  if (!(rho_upper > rho_lower) || !(rho_lower > 0))
    throw InvalidArgument("plate: need rho_upper > rho_lower > 0");
  if (gamma < 0) throw InvalidArgument("plate: damping ratio must be nonnegative");
  if (!(L > 0) || !(t > 0) || !(E_kPa > 0)) throw InvalidArgument("plate: bad geometry/material");
  if (nx < 2 || ny < 2) throw InvalidArgument("plate: mesh must be at least 2x2");
  if (nx % 2 != 0 || ny % 2 != 0)
    throw InvalidArgument("plate: center load requires even element counts");
}

RealMatrix acm_stiffness(double dx, double dy, double D_flex, double nu) {
  Eigen::Matrix3d Db;
  Db << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  Db *= D_flex;

  Eigen::Matrix<double, 12, 12> Kp = Eigen::Matrix<double, 12, 12>::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double x = kGaussPts[a] * dx, y = kGaussPts[b] * dy;
      const double w = kGaussWts[a] * kGaussWts[b] * dx * dy;
      Eigen::Matrix<double, 3, 12> B = Eigen::Matrix<double, 3, 12>::Zero();
      // curvatures (w_xx, w_yy, 2 w_xy) of the polynomial basis
      B(0, 3) = 2;
      B(0, 6) = 6 * x;
      B(0, 7) = 2 * y;
      B(0, 10) = 6 * x * y;
      B(1, 5) = 2;
      B(1, 8) = 2 * x;
      B(1, 9) = 6 * y;
      B(1, 11) = 6 * x * y;
      B(2, 4) = 2;
      B(2, 7) = 4 * x;
      B(2, 8) = 4 * y;
      B(2, 10) = 6 * x * x;
      B(2, 11) = 6 * y * y;
      Kp += w * B.transpose() * Db * B;
    }

  const Eigen::Matrix<double, 12, 12> Cinv = acm_dof_matrix(dx, dy).inverse();
  return Cinv.transpose() * Kp * Cinv;
}

RealMatrix acm_consistent_mass(double dx, double dy, double t) {
  Eigen::Matrix<double, 12, 12> Mp = Eigen::Matrix<double, 12, 12>::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double x = kGaussPts[a] * dx, y = kGaussPts[b] * dy;
      const double w = kGaussWts[a] * kGaussWts[b] * dx * dy;
      const Vec12 p = acm_basis(x, y);
      Mp += (w * t) * p * p.transpose();
    }
  const Eigen::Matrix<double, 12, 12> Cinv = acm_dof_matrix(dx, dy).inverse();
  return Cinv.transpose() * Mp * Cinv;
}

SparsePlateSystem build_plate_system_sparse(const PlateConfig& cfg) {
  cfg.validate();
  const StructuredMesh mesh = build_structured_mesh(cfg.nx, cfg.ny, cfg.L, cfg.L);
  const Index n_nodes = mesh.num_nodes();
  const Index n = 3 * n_nodes;
  const double dx = mesh.dx(), dy = mesh.dy();

  const RealMatrix Ke = acm_stiffness(dx, dy, cfg.flexural_rigidity(), cfg.nu);
  const RealMatrix Me = acm_consistent_mass(dx, dy, cfg.t);
  std::vector<char> rot_local = {0, 1, 1, 0, 1, 1, 0, 1, 1, 0, 1, 1};

  std::vector<ComplexTriplet> trip;
  trip.reserve(mesh.num_elems() * 144 + 16 * (cfg.nx + cfg.ny) + n);
  std::vector<ElementMass> lump;
  lump.reserve(mesh.num_elems());
  for (Index e = 0; e < mesh.num_elems(); ++e) {
    IndexList dofs(12);
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 3; ++c) dofs[3 * a + c] = 3 * Index(mesh.elems(e, a)) + c;
    for (int a = 0; a < 12; ++a)
      for (int b = 0; b < 12; ++b)
        if (Ke(a, b) != 0.0) trip.emplace_back(dofs[a], dofs[b], Complex(Ke(a, b), 0.0));
    lump.push_back({Me, cfg.t * dx * dy, rot_local, dofs});
  }
  const RealVector M0 = hrz_lump(lump, n);

  // Spring-dashpot supports s(1+i gamma) on the w dofs of every boundary edge.
  const Complex spring(cfg.s, cfg.s * cfg.gamma);
  auto add_springs = [&](const std::vector<StructuredMesh::Edge>& edges) {
    for (const auto& e : edges) {
      const double h = (mesh.nodes.row(e.b) - mesh.nodes.row(e.a)).norm();
      const Eigen::Matrix2d ml = line2_mass(h);
      const Index ids[2] = {3 * Index(e.a), 3 * Index(e.b)};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) trip.emplace_back(ids[a], ids[b], spring * ml(a, b));
    }
  };
  add_springs(mesh.in_edges);
  add_springs(mesh.out_edges);
  add_springs(mesh.abs_edges);

  const double w2 = cfg.omega * cfg.omega;
  const double rho_mid = 0.5 * (cfg.rho_upper + cfg.rho_lower);
  const double rho_half = 0.5 * (cfg.rho_upper - cfg.rho_lower);
  for (Index j = 0; j < n; ++j)
    if (M0(j) != 0.0) trip.emplace_back(j, j, Complex(-w2 * rho_mid * M0(j), 0.0));

  SparsePlateSystem out;
  out.C.resize(n, n);
  out.C.setFromTriplets(trip.begin(), trip.end());
  out.d = ComplexVector(n);
  for (Index j = 0; j < n; ++j) out.d(j) = Complex(-w2 * rho_half * M0(j), 0.0);
  out.b = ComplexVector::Zero(n);
  out.b(3 * mesh.node(cfg.nx / 2, cfg.ny / 2)) = 1.0;  // unit center point force
  out.M0 = M0;
  out.rotational.assign(n, 0);
  for (Index j = 0; j < n; ++j)
    if (j % 3 != 0) out.rotational[j] = 1;
  return out;
}

AffineSystem build_plate_system(const PlateConfig& cfg) {
  SparsePlateSystem s = build_plate_system_sparse(cfg);
  return {ComplexMatrix(s.C), s.d, s.b};
}

PlateProblem build_plate(const PlateConfig& cfg) {
  PlateProblem prob;
  prob.cfg = cfg;
  prob.full = build_plate_system_sparse(cfg);
  prob.mesh = build_structured_mesh(cfg.nx, cfg.ny, cfg.L, cfg.L);

  // Rotational dofs are passive with theta prescribed zero; they contribute
  // nothing to d (HRZ zeroes their mass), so folding is a no-op.
  prob.part = DofPartition::from_passive_mask(prob.full.rotational);
  prob.cond = std::make_shared<SparseCondenser>(prob.full.C, prob.full.b, prob.part);

  const Index nf = Index(prob.part.free_dofs.size());
  ComplexVector d_f(nf);
  prob.M0_f = RealVector(nf);
  for (Index i = 0; i < nf; ++i) {
    d_f(i) = prob.full.d(prob.part.free_dofs[i]);
    prob.M0_f(i) = prob.full.M0(prob.part.free_dofs[i]);
  }
  prob.condensed = {prob.cond->condensed_matrix(), d_f, prob.cond->condensed_rhs()};

  // The eliminated blocks are frequency-independent, so the condensed matrix
  // splits as Ks - w^2 rho(theta) diag(M0_f).
  const double w2mid = cfg.omega * cfg.omega * 0.5 * (cfg.rho_upper + cfg.rho_lower);
  prob.Ks = prob.condensed.C;
  prob.Ks.diagonal() += (w2mid * prob.M0_f).cast<Complex>();

  const Index center = 3 * prob.mesh.node(cfg.nx / 2, cfg.ny / 2);
  ComplexVector c(1);
  c(0) = 1.0;
  prob.center_magnitude =
      condense_objective(build_overlap_magnitude(c, {center}, prob.part.total()), *prob.cond);
  prob.center_free = -1;
  for (Index i = 0; i < nf; ++i)
    if (prob.part.free_dofs[i] == center) prob.center_free = i;

  prob.design_xy.resize(2 * nf);
  for (Index i = 0; i < nf; ++i) {
    const Index node = prob.part.free_dofs[i] / 3;
    prob.design_xy(2 * i) = prob.mesh.nodes(node, 0);
    prob.design_xy(2 * i + 1) = prob.mesh.nodes(node, 1);
  }
  return prob;
}

ComplexMatrix PlateProblem::assemble_at(const RealVector& theta_f, double omega) const {
  if (theta_f.size() != M0_f.size())
    throw InvalidArgument("PlateProblem::assemble_at: theta size mismatch");
  if (!in_box(theta_f, 1e-12))
    throw InvalidArgument("PlateProblem::assemble_at: theta outside [-1,1]");
  const double rho_mid = 0.5 * (cfg.rho_upper + cfg.rho_lower);
  const double rho_half = 0.5 * (cfg.rho_upper - cfg.rho_lower);
  ComplexMatrix A = Ks;
  A.diagonal() -= (omega * omega *
                   (rho_mid + rho_half * theta_f.array()).matrix().cwiseProduct(M0_f))
                      .cast<Complex>();
  return A;
}

ComplexVector PlateProblem::solve_condensed(const RealVector& theta_f) const {
  return solve_complex_linear(assemble_at(theta_f, cfg.omega), condensed.b);
}

RealVector frequency_response(const PlateProblem& prob, const RealVector& theta_f,
                              const RealVector& omega_grid) {
  if (omega_grid.size() == 0) throw InvalidArgument("frequency_response: empty frequency grid");
  RealVector curve(omega_grid.size());
  for (Index i = 0; i < omega_grid.size(); ++i) {
    try {
      const ComplexVector w = solve_complex_linear(prob.assemble_at(theta_f, omega_grid(i)),
                                                   prob.condensed.b);
      curve(i) = w.squaredNorm() / double(w.size());
    } catch (const NumericalError&) {
      curve(i) = std::numeric_limits<double>::quiet_NaN();  // undamped resonance, flagged
    }
  }
  return curve;
}

double q_factor(const RealVector& omega_grid, const RealVector& curve) {
  if (omega_grid.size() != curve.size() || curve.size() < 3)
    throw InvalidArgument("q_factor: need a curve on at least 3 frequencies");
  Index peak = 0;
  curve.maxCoeff(&peak);
  if (peak == 0 || peak == curve.size() - 1)
    throw NumericalError("q_factor: curve has no interior maximum");
  const double half = 0.5 * curve(peak);
  if (!(curve(peak) > curve(0) && curve(peak) > curve(curve.size() - 1)))
    throw NumericalError("q_factor: curve has no interior maximum");

  auto cross = [&](Index from, Index step) {
    for (Index i = from; i + step >= 0 && i + step < curve.size(); i += step) {
      const double a = curve(i), b = curve(i + step);
      if ((a - half) * (b - half) <= 0.0 && a != b) {
        const double t = (half - a) / (b - a);
        return omega_grid(i) + t * (omega_grid(i + step) - omega_grid(i));
      }
    }
    throw NumericalError("q_factor: half-power point outside the frequency grid");
  };
  const double lo = cross(peak, -1);
  const double hi = cross(peak, +1);
  return omega_grid(peak) / (hi - lo);
}

}  // namespace tb
