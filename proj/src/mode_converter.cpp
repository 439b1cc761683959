#include "topobound/mode_converter.hpp"

#include <Eigen/LU>
#include <cmath>

#include "topobound/numerics.hpp"

namespace tb {

namespace {

constexpr double kGauss = 0.5773502691896257;  // 1/sqrt(3)

/// Bilinear quad stiffness (grad-grad) on a dx x dy rectangle, 2x2 Gauss.
RealMatrix quad4_stiffness(double dx, double dy) {
  RealMatrix K = RealMatrix::Zero(4, 4);
  const double gp[2] = {-kGauss, kGauss};
  for (double xi : gp)
    for (double eta : gp) {
      Eigen::Matrix<double, 2, 4> B;
      // dN/dxi, dN/deta for nodes (-,-), (+,-), (+,+), (-,+)
      B << -(1 - eta), (1 - eta), (1 + eta), -(1 + eta),
           -(1 - xi), -(1 + xi), (1 + xi), (1 - xi);
      B *= 0.25;
      B.row(0) *= 2.0 / dx;
      B.row(1) *= 2.0 / dy;
      K += (dx * dy / 4.0) * B.transpose() * B;
    }
  return K;
}

/// Bilinear quad consistent (unit-density) mass, 2x2 Gauss.
RealMatrix quad4_mass(double dx, double dy) {
  RealMatrix M = RealMatrix::Zero(4, 4);
  const double gp[2] = {-kGauss, kGauss};
  for (double xi : gp)
    for (double eta : gp) {
      Eigen::Vector4d N;
      N << (1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta);
      N *= 0.25;
      M += (dx * dy / 4.0) * N * N.transpose();
    }
  return M;
}

/// Consistent mass of a 2-node line element of length h.
Eigen::Matrix2d line2_mass(double h) {
  Eigen::Matrix2d M;
  M << 2, 1, 1, 2;
  return (h / 6.0) * M;
}

Eigen::Matrix2d line2_stiffness(double h) {
  Eigen::Matrix2d K;
  K << 1, -1, -1, 1;
  return (1.0 / h) * K;
}

/// Consistent boundary mass over a chain of edges, as a dense matrix in the
/// local (sorted node list) numbering.
RealMatrix edge_chain_mass(const std::vector<StructuredMesh::Edge>& edges,
                           const StructuredMesh& mesh, IndexList& node_ids) {
  node_ids.clear();
  for (const auto& e : edges) {
    if (node_ids.empty()) node_ids.push_back(e.a);
    node_ids.push_back(e.b);
  }
  RealMatrix M = RealMatrix::Zero(node_ids.size(), node_ids.size());
  for (Index i = 0; i + 1 < Index(node_ids.size()); ++i) {
    const double h = (mesh.nodes.row(node_ids[i + 1]) - mesh.nodes.row(node_ids[i])).norm();
    M.block<2, 2>(i, i) += line2_mass(h);
  }
  return M;
}

RealVector eps_profile_1d(const ModeConverterConfig& cfg, const RealVector& y) {
  RealVector eps(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const bool in_channel = std::abs(y(i) - cfg.H / 2.0) <= cfg.H_c / 2.0 + 1e-12;
    eps(i) = in_channel ? cfg.eps_r : 1.0;
  }
  return eps;
}

void fix_mode_sign(RealVector& v) {
  Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0) v = -v;
}

}  // namespace

void ModeConverterConfig::validate() const {
  if (!(wavelength > 0)) throw InvalidArgument("mode_converter: wavelength must be positive");
  if (L_d > H + 1e-12) throw InvalidArgument("mode_converter: L_d must not exceed H");
  if (H_c > H + 1e-12) throw InvalidArgument("mode_converter: H_c must not exceed H");
  if (nx < 1 || ny < 1) throw InvalidArgument("mode_converter: mesh counts must be >= 1");
  if (in_mode < 1 || out_mode < 1) throw InvalidArgument("mode_converter: mode orders are 1-based");
}

std::vector<WaveguideMode> waveguide_modes(const RealVector& y, double k,
                                           const RealVector& eps_nodal, int count, double dx) {
  const Index n = y.size();
  if (n < 3) throw InvalidArgument("waveguide_modes: need at least 3 boundary nodes");
  if (eps_nodal.size() != n) throw InvalidArgument("waveguide_modes: eps profile size mismatch");

  // Dirichlet ends: interior dofs only. The k^2 term carries the lumped mass
  // with nodal permittivity (mirroring the HRZ-lumped 2D operator), the beta^2
  // term the consistent mass (mirroring the x-stiffness / y-mass pairing of
  // the tensor-product quad stencil).
  const Index ni = n - 2;
  RealMatrix K1 = RealMatrix::Zero(ni, ni), M1 = RealMatrix::Zero(ni, ni),
             Me = RealMatrix::Zero(ni, ni);
  for (Index e = 0; e + 1 < n; ++e) {
    const double h = y(e + 1) - y(e);
    const Eigen::Matrix2d ke = line2_stiffness(h);
    const Eigen::Matrix2d me = line2_mass(h);
    const Index dofs[2] = {e - 1, e};  // interior index of node e is e-1
    for (int a = 0; a < 2; ++a) {
      const Index ia = dofs[a];
      if (ia < 0 || ia >= ni) continue;
      Me(ia, ia) += eps_nodal(e + a) * 0.5 * h;
      for (int b = 0; b < 2; ++b) {
        const Index ib = dofs[b];
        if (ib < 0 || ib >= ni) continue;
        K1(ia, ib) += ke(a, b);
        M1(ia, ib) += me(a, b);
      }
    }
  }

  // Bloch ansatz e^(i beta x) on the quad grid: interior rows reduce to
  //   (s k^2 Me - K1) v = lambda M1 v,
  // with c = cos(beta dx), s(c) = 6/(4+2c) and lambda(c) = 6(2-2c)/(dx^2 (4+2c)).
  // The mode is the self-consistent c where the m-th eigenvalue meets
  // lambda(c); locate it by scan + bisection (monotone in c).
  auto solve_at = [&](double s) { return gen_sym_eig(s * k * k * Me - K1, M1); };
  EigResult eig = solve_at(1.0);
  int guided = 0;
  for (Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) > 0) ++guided;
  if (count > guided)
    throw NumericalError("waveguide_modes: fewer guided modes than requested (" +
                         std::to_string(guided) + " available)");

  std::vector<WaveguideMode> modes;
  for (int m = 0; m < count; ++m) {
    WaveguideMode mode;
    mode.order = m + 1;
    double lambda = eig.values(m);
    RealVector v = eig.vectors.col(m);
    if (dx > 0.0) {
      const auto lambda_of = [&](double c) { return 6.0 * (2.0 - 2.0 * c) / (dx * dx * (4.0 + 2.0 * c)); };
      const auto gap_at = [&](double c, EigResult& out) {
        out = solve_at(6.0 / (4.0 + 2.0 * c));
        return out.values(m) - lambda_of(c);
      };
      EigResult e2;
      double chi = 1.0, clo = 1.0;  // gap > 0 at c = 1 for a guided mode
      bool bracketed = false;
      for (int step = 1; step <= 64; ++step) {
        clo = 1.0 - 2.0 * (double(step) / 64.0) * (1.0 - 1e-9);
        if (gap_at(clo, e2) <= 0.0) { bracketed = true; break; }
        chi = clo;
      }
      if (bracketed) {
        for (int it = 0; it < 80; ++it) {
          const double cmid = 0.5 * (clo + chi);
          if (gap_at(cmid, e2) > 0.0) chi = cmid; else clo = cmid;
        }
        const double c = 0.5 * (clo + chi);
        gap_at(c, e2);
        lambda = e2.values(m);
        v = e2.vectors.col(m);
        mode.beta = std::acos(c) / dx;
      } else {
        // grid too coarse for a propagating Bloch mode; keep the uncorrected
        // transverse solution so coarse meshes still define valid objectives
        mode.beta = std::sqrt(lambda);
      }
    } else {
      mode.beta = std::sqrt(lambda);
    }
    mode.profile = RealVector::Zero(n);
    mode.profile.segment(1, ni) = v;
    mode.profile.normalize();
    fix_mode_sign(mode.profile);
    modes.push_back(std::move(mode));
  }
  return modes;
}

namespace {

struct Assembly {
  SparseComplexMatrix C;  // K + iD - k^2 (eps_r+1)/2 M0
  ComplexVector d, b;
  RealVector M0;
  WaveguideMode mode_in, mode_out;
};

Assembly assemble(const ModeConverterConfig& cfg, const StructuredMesh& mesh) {
  cfg.validate();
  const Index n = mesh.num_nodes();
  const double k = cfg.k();
  const double dx = mesh.dx(), dy = mesh.dy();

  // Boundary cross-section grid and modes (same profile left and right).
  RealVector ybnd(mesh.ny + 1);
  for (int iy = 0; iy <= mesh.ny; ++iy) ybnd(iy) = mesh.nodes(mesh.node(0, iy), 1);
  const RealVector eps1d = eps_profile_1d(cfg, ybnd);
  const int need = std::max(cfg.in_mode, cfg.out_mode);
  auto modes = waveguide_modes(ybnd, k, eps1d, need, dx);
  const WaveguideMode& min = modes[cfg.in_mode - 1];
  const WaveguideMode& mout = modes[cfg.out_mode - 1];

  // Volume terms.
  const RealMatrix Ke = quad4_stiffness(dx, dy);
  const RealMatrix Me = quad4_mass(dx, dy);
  std::vector<ElementMass> lump;
  lump.reserve(mesh.num_elems());
  std::vector<ComplexTriplet> trip;
  trip.reserve(mesh.num_elems() * 16 + 8 * (mesh.nx + mesh.ny));
  for (Index e = 0; e < mesh.num_elems(); ++e) {
    IndexList dofs(4);
    for (int a = 0; a < 4; ++a) dofs[a] = mesh.elems(e, a);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trip.emplace_back(dofs[a], dofs[b], Complex(Ke(a, b), 0.0));
    lump.push_back({Me, dx * dy, std::vector<char>(4, 0), dofs});
  }
  const RealVector M0 = hrz_lump(lump, n);

  // Boundary damping D(k): k on absorbing, beta_in / beta_out on ports.
  auto add_edges = [&](const std::vector<StructuredMesh::Edge>& edges, double coef) {
    for (const auto& e : edges) {
      const double h = (mesh.nodes.row(e.b) - mesh.nodes.row(e.a)).norm();
      const Eigen::Matrix2d me = coef * line2_mass(h);
      const Index ids[2] = {e.a, e.b};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) trip.emplace_back(ids[a], ids[b], Complex(0.0, me(a, b)));
    }
  };
  add_edges(mesh.abs_edges, k);
  add_edges(mesh.in_edges, min.beta);
  add_edges(mesh.out_edges, mout.beta);

  // Bulk -k^2 (eps_r+1)/2 M0 on the diagonal of C; design coupling in d.
  const double eps_mean = 0.5 * (cfg.eps_r + 1.0);
  const double eps_half = 0.5 * (cfg.eps_r - 1.0);
  for (Index j = 0; j < n; ++j)
    trip.emplace_back(j, j, Complex(-k * k * eps_mean * M0(j), 0.0));

  Assembly out;
  out.C.resize(n, n);
  out.C.setFromTriplets(trip.begin(), trip.end());
  out.d = ComplexVector(n);
  for (Index j = 0; j < n; ++j) out.d(j) = Complex(-k * k * eps_half * M0(j), 0.0);
  out.M0 = M0;

  // Excitation b = 2 i beta_in * (boundary mass) * mode profile.
  out.b = ComplexVector::Zero(n);
  IndexList in_ids;
  const RealMatrix Mb = edge_chain_mass(mesh.in_edges, mesh, in_ids);
  const RealVector w = Mb * min.profile;
  for (Index i = 0; i < Index(in_ids.size()); ++i)
    out.b(in_ids[i]) += Complex(0.0, 2.0 * min.beta) * w(i);

  out.mode_in = min;
  out.mode_out = mout;
  return out;
}

}  // namespace

SparseAffineSystem build_system_sparse(const ModeConverterConfig& cfg) {
  const StructuredMesh mesh = build_structured_mesh(cfg.nx, cfg.ny, cfg.L, cfg.H);
  Assembly a = assemble(cfg, mesh);
  return {std::move(a.C), std::move(a.d), std::move(a.b)};
}

AffineSystem build_system(const ModeConverterConfig& cfg) {
  SparseAffineSystem s = build_system_sparse(cfg);
  return {ComplexMatrix(s.C), s.d, s.b};
}

ModeConverterProblem build_mode_converter(const ModeConverterConfig& cfg) {
  ModeConverterProblem prob;
  prob.cfg = cfg;
  prob.mesh = build_structured_mesh(cfg.nx, cfg.ny, cfg.L, cfg.H);
  const StructuredMesh& mesh = prob.mesh;
  Assembly a = assemble(cfg, mesh);
  prob.mode_in = a.mode_in;
  prob.mode_out = a.mode_out;
  prob.full = {a.C, a.d, a.b};

  const Index n = mesh.num_nodes();
  prob.theta_background = RealVector(n);
  prob.is_design.assign(n, 0);
  std::vector<char> is_passive(n, 1);
  for (Index j = 0; j < n; ++j) {
    const double x = mesh.nodes(j, 0), y = mesh.nodes(j, 1);
    const bool in_channel = std::abs(y - cfg.H / 2.0) <= cfg.H_c / 2.0 + 1e-12;
    const bool in_design = std::abs(x - cfg.L / 2.0) <= cfg.L_d / 2.0 + 1e-12 &&
                           std::abs(y - cfg.H / 2.0) <= cfg.L_d / 2.0 + 1e-12;
    prob.theta_background(j) = in_design ? 0.0 : (in_channel ? 1.0 : -1.0);
    prob.is_design[j] = in_design;
    is_passive[j] = !in_design;
  }
  prob.part = DofPartition::from_passive_mask(is_passive);
  if (prob.part.free_dofs.empty())
    throw InvalidArgument("build_mode_converter: design region contains no nodes");

  // Fold fixed theta into C on passive dofs, then condense.
  SparseComplexMatrix Cfold = a.C;
  for (Index j = 0; j < n; ++j)
    if (!prob.is_design[j])
      Cfold.coeffRef(j, j) += prob.theta_background(j) * a.d(j);
  prob.cond = std::make_shared<SparseCondenser>(Cfold, a.b, prob.part);

  ComplexVector d_f(prob.part.free_dofs.size());
  for (Index i = 0; i < d_f.size(); ++i) d_f(i) = a.d(prob.part.free_dofs[i]);
  prob.condensed = {prob.cond->condensed_matrix(), d_f, prob.cond->condensed_rhs()};

  // Output set S: right-hand boundary nodes; target = out-mode profile.
  for (int iy = 0; iy <= mesh.ny; ++iy) prob.out_nodes.push_back(mesh.node(mesh.nx, iy));
  const ComplexVector c = prob.mode_out.profile.cast<Complex>();
  prob.overlap = condense_objective(build_normalized_overlap(c, prob.out_nodes, n), *prob.cond);
  prob.magnitude = condense_objective(build_overlap_magnitude(c, prob.out_nodes, n), *prob.cond);

  prob.design_xy.resize(2 * Index(prob.part.free_dofs.size()));
  for (Index i = 0; i < Index(prob.part.free_dofs.size()); ++i) {
    prob.design_xy(2 * i) = mesh.nodes(prob.part.free_dofs[i], 0);
    prob.design_xy(2 * i + 1) = mesh.nodes(prob.part.free_dofs[i], 1);
  }
  return prob;
}

ComplexVector ModeConverterProblem::solve_condensed(const RealVector& theta_f) const {
  if (!in_box(theta_f, 1e-12))
    throw InvalidArgument("ModeConverterProblem: theta outside [-1,1]");
  return solve_complex_linear(condensed.assemble(theta_f), condensed.b);
}

RealVector ModeConverterProblem::full_theta(const RealVector& theta_f) const {
  RealVector th = theta_background;
  for (Index i = 0; i < Index(part.free_dofs.size()); ++i) th(part.free_dofs[i]) = theta_f(i);
  return th;
}

double transmittance(const ModeConverterProblem& prob, const ComplexVector& z_full) {
  if (z_full.size() != prob.mesh.num_nodes())
    throw InvalidArgument("transmittance: expected a full-mesh field");
  IndexList out_ids;
  const RealMatrix Mb = edge_chain_mass(prob.mesh.out_edges, prob.mesh, out_ids);

  ComplexVector z_out(out_ids.size());
  for (Index i = 0; i < Index(out_ids.size()); ++i) z_out(i) = z_full(out_ids[i]);

  const RealVector& e_out = prob.mode_out.profile;
  const RealVector& e_in = prob.mode_in.profile;
  const double mass_out = e_out.dot(Mb * e_out);
  const double mass_in = e_in.dot(Mb * e_in);
  if (mass_out <= 0)
    throw NumericalError("transmittance: output mode unavailable");

  const Complex a_out = (e_out.cast<Complex>().dot(Mb.cast<Complex>() * z_out)) / mass_out;
  // Unit-amplitude injected mode: power ratio weighted by beta and modal mass.
  return (prob.mode_out.beta * std::norm(a_out) * mass_out) / (prob.mode_in.beta * mass_in);
}

}  // namespace tb
