#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "topobound/types.hpp"

namespace tb {

using SparseComplexMatrix = Eigen::SparseMatrix<Complex>;
using ComplexTriplet = Eigen::Triplet<Complex>;

/// Structured grid of 4-node quadrilaterals on [0,L] x [0,H].
/// Node numbering is column-major in x: node(ix, iy) = ix*(ny+1) + iy.
struct StructuredMesh {
  int nx = 0, ny = 0;
  double L = 0.0, H = 0.0;
  RealMatrix nodes;                              // num_nodes x 2 coordinates
  Eigen::Matrix<int, Eigen::Dynamic, 4> elems;   // counter-clockwise node ids

  struct Edge {
    int a, b;  // boundary node pair
  };
  std::vector<Edge> in_edges;    // x = 0
  std::vector<Edge> out_edges;   // x = L
  std::vector<Edge> abs_edges;   // y = 0 and y = H

  Index node(int ix, int iy) const { return Index(ix) * (ny + 1) + iy; }
  Index num_nodes() const { return Index(nx + 1) * (ny + 1); }
  Index num_elems() const { return Index(nx) * ny; }
  double dx() const { return L / nx; }
  double dy() const { return H / ny; }
};

StructuredMesh build_structured_mesh(int nx, int ny, double L, double H);

/// Disjoint split of the dof range into constrained/passive (c) and free (f) sets.
struct DofPartition {
  IndexList passive;
  IndexList free_dofs;

  Index total() const { return Index(passive.size() + free_dofs.size()); }
  static DofPartition from_passive_mask(const std::vector<char>& is_passive);
};

/// One element's contribution to the lumped mass matrix.
struct ElementMass {
  RealMatrix consistent;         // local consistent mass matrix
  double total_mass = 0.0;       // integral of density over the element
  std::vector<char> rotational;  // local mask, true on rotational dofs
  IndexList dofs;                // local-to-global dof map
};

/// HRZ lumping of a single element: translational diagonal entries of the
/// consistent matrix are rescaled so they sum to the element's total mass;
/// rotational entries are set to zero.
RealVector hrz_lump_element(const RealMatrix& consistent, double total_mass,
                            const std::vector<char>& rotational);

/// Assemble the global diagonal lumped mass matrix.
RealVector hrz_lump(const std::vector<ElementMass>& elements, Index n_dofs);

struct CondensedSystem {
  ComplexMatrix A;  // A_ff - A_fc A_cc^{-1} A_cf
  ComplexVector b;  // b_f - A_fc A_cc^{-1} b_c
};

/// Schur-complement elimination of the passive dofs.
CondensedSystem condense_passive(const ComplexMatrix& A, const ComplexVector& b,
                                 const DofPartition& part);

/// Back-substitution: given z_f, recover the full solution with
/// z_c = A_cc^{-1} (b_c - A_cf z_f).
ComplexVector expand_condensed_solution(const ComplexVector& z_f, const ComplexMatrix& A,
                                        const ComplexVector& b, const DofPartition& part);

/// Sparse-backed condensation used by the problem builders. Factorizes A_cc
/// once; exposes the affine map z_c = passive_offset() - coupling() * z_f
/// needed to push objectives restricted to passive dofs into the free space.
class SparseCondenser {
 public:
  SparseCondenser(const SparseComplexMatrix& A, const ComplexVector& b, DofPartition part);

  const ComplexMatrix& condensed_matrix() const { return A_tilde_; }
  const ComplexVector& condensed_rhs() const { return b_tilde_; }
  const ComplexMatrix& coupling() const { return G_; }
  const ComplexVector& passive_offset() const { return g0_; }
  const DofPartition& partition() const { return part_; }

  ComplexVector expand(const ComplexVector& z_f) const;

 private:
  DofPartition part_;
  ComplexMatrix A_tilde_;
  ComplexVector b_tilde_;
  ComplexMatrix G_;   // A_cc^{-1} A_cf, n_c x n_f
  ComplexVector g0_;  // A_cc^{-1} b_c
};

}  // namespace tb
