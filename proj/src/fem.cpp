#include "topobound/fem.hpp"

#include <Eigen/LU>
#include <algorithm>

namespace tb {

StructuredMesh build_structured_mesh(int nx, int ny, double L, double H) {
  if (nx < 1 || ny < 1)
    throw InvalidArgument("build_structured_mesh: element counts must be >= 1");
  if (!(L > 0.0) || !(H > 0.0))
    throw InvalidArgument("build_structured_mesh: dimensions must be positive");

  StructuredMesh m;
  m.nx = nx;
  m.ny = ny;
  m.L = L;
  m.H = H;
  m.nodes.resize(m.num_nodes(), 2);
  for (int ix = 0; ix <= nx; ++ix)
    for (int iy = 0; iy <= ny; ++iy) {
      const Index n = m.node(ix, iy);
      m.nodes(n, 0) = L * double(ix) / nx;
      m.nodes(n, 1) = H * double(iy) / ny;
    }

  m.elems.resize(m.num_elems(), 4);
  Index e = 0;
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy, ++e) {
      m.elems(e, 0) = int(m.node(ix, iy));
      m.elems(e, 1) = int(m.node(ix + 1, iy));
      m.elems(e, 2) = int(m.node(ix + 1, iy + 1));
      m.elems(e, 3) = int(m.node(ix, iy + 1));
    }

  for (int iy = 0; iy < ny; ++iy) {
    m.in_edges.push_back({int(m.node(0, iy)), int(m.node(0, iy + 1))});
    m.out_edges.push_back({int(m.node(nx, iy)), int(m.node(nx, iy + 1))});
  }
  for (int ix = 0; ix < nx; ++ix) {
    m.abs_edges.push_back({int(m.node(ix, 0)), int(m.node(ix + 1, 0))});
    m.abs_edges.push_back({int(m.node(ix, ny)), int(m.node(ix + 1, ny))});
  }
  return m;
}

DofPartition DofPartition::from_passive_mask(const std::vector<char>& is_passive) {
  DofPartition p;
  for (Index i = 0; i < Index(is_passive.size()); ++i)
    (is_passive[i] ? p.passive : p.free_dofs).push_back(i);
  return p;
}

RealVector hrz_lump_element(const RealMatrix& consistent, double total_mass,
                            const std::vector<char>& rotational) {
  const Index n = consistent.rows();
  if (Index(rotational.size()) != n)
    throw InvalidArgument("hrz_lump_element: rotational mask length mismatch");
  double trans_sum = 0.0;
  for (Index i = 0; i < n; ++i)
    if (!rotational[i]) trans_sum += consistent(i, i);

  RealVector diag = RealVector::Zero(n);
  if (trans_sum <= 0.0) return diag;  // zero-mass element lumps to zero
  const double scale = total_mass / trans_sum;
  for (Index i = 0; i < n; ++i)
    if (!rotational[i]) diag(i) = scale * consistent(i, i);
  return diag;
}

RealVector hrz_lump(const std::vector<ElementMass>& elements, Index n_dofs) {
  RealVector M = RealVector::Zero(n_dofs);
  for (const auto& el : elements) {
    const RealVector local = hrz_lump_element(el.consistent, el.total_mass, el.rotational);
    if (Index(el.dofs.size()) != local.size())
      throw InvalidArgument("hrz_lump: dof map length mismatch");
    for (Index i = 0; i < local.size(); ++i) M(el.dofs[i]) += local(i);
  }
  return M;
}

namespace {

template <typename Mat>
Mat gather(const Mat& A, const IndexList& rows, const IndexList& cols) {
  Mat out(rows.size(), cols.size());
  for (Index i = 0; i < Index(rows.size()); ++i)
    for (Index j = 0; j < Index(cols.size()); ++j) out(i, j) = A(rows[i], cols[j]);
  return out;
}

ComplexVector gather_vec(const ComplexVector& v, const IndexList& idx) {
  ComplexVector out(idx.size());
  for (Index i = 0; i < Index(idx.size()); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace

CondensedSystem condense_passive(const ComplexMatrix& A, const ComplexVector& b,
                                 const DofPartition& part) {
  if (A.rows() != A.cols() || A.rows() != b.size() || part.total() != A.rows())
    throw InvalidArgument("condense_passive: inconsistent sizes");
  if (part.passive.empty()) return {A, b};

  const ComplexMatrix Acc = gather(A, part.passive, part.passive);
  const ComplexMatrix Acf = gather(A, part.passive, part.free_dofs);
  const ComplexMatrix Afc = gather(A, part.free_dofs, part.passive);
  const ComplexMatrix Aff = gather(A, part.free_dofs, part.free_dofs);
  const ComplexVector bc = gather_vec(b, part.passive);
  const ComplexVector bf = gather_vec(b, part.free_dofs);

  Eigen::PartialPivLU<ComplexMatrix> lu(Acc);
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-14 * Acc.norm()))
    throw NumericalError("condense_passive: A_cc singular");

  CondensedSystem out;
  out.A = Aff - Afc * lu.solve(Acf);
  out.b = bf - Afc * lu.solve(bc);
  return out;
}

ComplexVector expand_condensed_solution(const ComplexVector& z_f, const ComplexMatrix& A,
                                        const ComplexVector& b, const DofPartition& part) {
  if (Index(part.free_dofs.size()) != z_f.size() || part.total() != A.rows())
    throw InvalidArgument("expand_condensed_solution: inconsistent sizes");
  ComplexVector z(A.rows());
  for (Index i = 0; i < z_f.size(); ++i) z(part.free_dofs[i]) = z_f(i);
  if (part.passive.empty()) return z;

  const ComplexMatrix Acc = gather(A, part.passive, part.passive);
  const ComplexMatrix Acf = gather(A, part.passive, part.free_dofs);
  const ComplexVector bc = gather_vec(b, part.passive);
  Eigen::PartialPivLU<ComplexMatrix> lu(Acc);
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-14 * Acc.norm()))
    throw NumericalError("expand_condensed_solution: A_cc singular");
  const ComplexVector zc = lu.solve(bc - Acf * z_f);
  for (Index i = 0; i < zc.size(); ++i) z(part.passive[i]) = zc(i);
  return z;
}

SparseCondenser::SparseCondenser(const SparseComplexMatrix& A, const ComplexVector& b,
                                 DofPartition part)
    : part_(std::move(part)) {
  const Index n = A.rows();
  if (A.cols() != n || b.size() != n || part_.total() != n)
    throw InvalidArgument("SparseCondenser: inconsistent sizes");

  const Index nc = Index(part_.passive.size());
  const Index nf = Index(part_.free_dofs.size());

  // Map global dof -> (block, local index).
  std::vector<Index> local(n);
  std::vector<char> is_passive(n, 0);
  for (Index i = 0; i < nc; ++i) {
    local[part_.passive[i]] = i;
    is_passive[part_.passive[i]] = 1;
  }
  for (Index i = 0; i < nf; ++i) local[part_.free_dofs[i]] = i;

  std::vector<ComplexTriplet> tcc, tcf, tfc;
  ComplexMatrix Aff = ComplexMatrix::Zero(nf, nf);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseComplexMatrix::InnerIterator it(A, k); it; ++it) {
      const Index r = it.row(), c = it.col();
      if (is_passive[r] && is_passive[c])
        tcc.emplace_back(local[r], local[c], it.value());
      else if (is_passive[r])
        tcf.emplace_back(local[r], local[c], it.value());
      else if (is_passive[c])
        tfc.emplace_back(local[r], local[c], it.value());
      else
        Aff(local[r], local[c]) += it.value();
    }

  SparseComplexMatrix Acc(nc, nc), Acf(nc, nf), Afc(nf, nc);
  Acc.setFromTriplets(tcc.begin(), tcc.end());
  Acf.setFromTriplets(tcf.begin(), tcf.end());
  Afc.setFromTriplets(tfc.begin(), tfc.end());

  ComplexVector bc(nc), bf(nf);
  for (Index i = 0; i < nc; ++i) bc(i) = b(part_.passive[i]);
  for (Index i = 0; i < nf; ++i) bf(i) = b(part_.free_dofs[i]);

  if (nc == 0) {
    A_tilde_ = Aff;
    b_tilde_ = bf;
    G_.resize(0, nf);
    g0_.resize(0);
    return;
  }

  Eigen::SparseLU<SparseComplexMatrix> lu;
  lu.compute(Acc);
  if (lu.info() != Eigen::Success)
    throw NumericalError("SparseCondenser: A_cc factorization failed");

  G_ = lu.solve(ComplexMatrix(Acf));
  g0_ = lu.solve(bc);
  A_tilde_ = Aff - Afc * G_;
  b_tilde_ = bf - Afc * g0_;
}

ComplexVector SparseCondenser::expand(const ComplexVector& z_f) const {
  if (z_f.size() != Index(part_.free_dofs.size()))
    throw InvalidArgument("SparseCondenser::expand: size mismatch");
  ComplexVector z(part_.total());
  for (Index i = 0; i < z_f.size(); ++i) z(part_.free_dofs[i]) = z_f(i);
  const ComplexVector zc = g0_ - G_ * z_f;
  for (Index i = 0; i < zc.size(); ++i) z(part_.passive[i]) = zc(i);
  return z;
}

}  // namespace tb
