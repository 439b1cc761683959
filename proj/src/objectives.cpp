#include "topobound/objectives.hpp"

#include <cmath>

namespace tb {

namespace {

double herm_quad(const ComplexMatrix& M, const ComplexVector& z) {
  if (M.size() == 0) return 0.0;
  return (z.adjoint() * M * z).value().real();
}

double lin_term(const ComplexVector& v, const ComplexVector& z) {
  if (v.size() == 0) return 0.0;
  return 2.0 * v.dot(z).real();  // v.dot(z) = v^H z
}

// Numerator/denominator values together with the affine residuals
// M z + m for the gradient, computed from the factored form when present so
// the dense n x n blocks are never required.
struct Parts {
  double num, den;
  ComplexVector Pzp, Qzq;  // P z + p, Q z + q
};

Parts split_parts(const QuadraticObjective& obj, const ComplexVector& z) {
  Parts out;
  if (obj.has_factors) {
    const Complex w = obj.num_u.size() ? obj.num_t0 - obj.num_u.dot(z) : obj.num_t0;
    out.num = std::norm(w);
    out.Pzp = obj.num_u.size() ? ComplexVector(-w * obj.num_u) : ComplexVector::Zero(obj.n);
    if (obj.den_F.rows() > 0) {
      const ComplexVector res = obj.den_f0 - obj.den_F * z;
      out.den = res.squaredNorm() + obj.den_const;
      out.Qzq = -obj.den_F.adjoint() * res;
    } else {
      out.den = obj.den_const;
      out.Qzq = ComplexVector::Zero(obj.n);
    }
    return out;
  }
  out.num = herm_quad(obj.P, z) + lin_term(obj.p, z) + obj.r;
  out.den = herm_quad(obj.Q, z) + lin_term(obj.q, z) + obj.s;
  out.Pzp = obj.P.size() ? ComplexVector(obj.P * z) : ComplexVector::Zero(obj.n);
  out.Qzq = obj.Q.size() ? ComplexVector(obj.Q * z) : ComplexVector::Zero(obj.n);
  if (obj.p.size()) out.Pzp += obj.p;
  if (obj.q.size()) out.Qzq += obj.q;
  return out;
}

}  // namespace

void refresh_dense_from_factors(QuadraticObjective& obj) {
  const Index n = obj.n;
  if (obj.num_u.size() > 0) {
    obj.P = obj.num_u * obj.num_u.adjoint();
    obj.p = -obj.num_t0 * obj.num_u;
  } else {
    obj.P = ComplexMatrix::Zero(n, n);
    obj.p = ComplexVector::Zero(n);
  }
  obj.r = std::norm(obj.num_t0);
  if (obj.den_F.rows() > 0) {
    obj.Q = obj.den_F.adjoint() * obj.den_F;
    obj.q = -obj.den_F.adjoint() * obj.den_f0;
    obj.s = obj.den_f0.squaredNorm() + obj.den_const;
  } else {
    obj.Q = ComplexMatrix::Zero(n, n);
    obj.q = ComplexVector::Zero(n);
    obj.s = obj.den_const;
  }
}

QuadraticObjective build_normalized_overlap(const ComplexVector& c, const IndexList& S, Index n) {
  if (Index(S.size()) != c.size())
    throw InvalidArgument("build_normalized_overlap: |S| must match c");
  if (std::abs(c.norm() - 1.0) > 1e-10)
    throw InvalidArgument("build_normalized_overlap: target profile c must have unit norm");
  for (Index j : S)
    if (j < 0 || j >= n) throw InvalidArgument("build_normalized_overlap: S index out of range");

  QuadraticObjective obj;
  obj.n = n;
  obj.has_factors = true;
  obj.num_u = ComplexVector::Zero(n);
  for (Index i = 0; i < Index(S.size()); ++i) obj.num_u(S[i]) = c(i);
  obj.num_t0 = 0.0;
  obj.den_F = ComplexMatrix::Zero(S.size(), n);
  for (Index i = 0; i < Index(S.size()); ++i) obj.den_F(i, S[i]) = 1.0;
  obj.den_f0 = ComplexVector::Zero(S.size());
  obj.den_const = 0.0;
  return obj;
}

QuadraticObjective build_overlap_magnitude(const ComplexVector& c, const IndexList& S, Index n) {
  if (Index(S.size()) != c.size())
    throw InvalidArgument("build_overlap_magnitude: |S| must match c");
  for (Index j : S)
    if (j < 0 || j >= n) throw InvalidArgument("build_overlap_magnitude: S index out of range");

  QuadraticObjective obj;
  obj.n = n;
  obj.has_factors = true;
  obj.num_u = ComplexVector::Zero(n);
  for (Index i = 0; i < Index(S.size()); ++i) obj.num_u(S[i]) = c(i);
  obj.num_t0 = 0.0;
  obj.den_F.resize(0, n);
  obj.den_f0.resize(0);
  obj.den_const = 1.0;  // Q = 0, s = 1
  return obj;
}

double evaluate(const QuadraticObjective& obj, const ComplexVector& z) {
  if (z.size() != obj.n) throw InvalidArgument("evaluate: state size mismatch");
  const Parts parts = split_parts(obj, z);
  if (std::abs(parts.den) < 1e-300) throw NumericalError("evaluate: zero objective denominator");
  return parts.num / parts.den;
}

StateGradient state_gradient(const QuadraticObjective& obj, const ComplexVector& z) {
  if (z.size() != obj.n) throw InvalidArgument("state_gradient: state size mismatch");
  const Parts parts = split_parts(obj, z);
  if (std::abs(parts.den) < 1e-300)
    throw NumericalError("state_gradient: zero objective denominator");

  StateGradient g;
  const double den = parts.den, ratio = parts.num / (den * den);
  g.re = (2.0 * parts.Pzp.real()) / den - (2.0 * parts.Qzq.real()) * ratio;
  g.im = (2.0 * parts.Pzp.imag()) / den - (2.0 * parts.Qzq.imag()) * ratio;
  return g;
}

QuadraticObjective condense_objective(const QuadraticObjective& obj, const SparseCondenser& cond) {
  if (!obj.has_factors)
    throw InvalidArgument("condense_objective: objective lacks factored form");
  const DofPartition& part = cond.partition();
  if (obj.n != part.total())
    throw InvalidArgument("condense_objective: objective size does not match partition");

  const Index nf = Index(part.free_dofs.size());
  const Index nc = Index(part.passive.size());
  const ComplexMatrix& G = cond.coupling();      // nc x nf
  const ComplexVector& g0 = cond.passive_offset();

  // z = T z_f + t with T = I on free rows, -G on passive rows; t = scatter(g0).
  auto map_vector = [&](const ComplexVector& u) {
    ComplexVector u_f(nf), u_c(nc);
    for (Index i = 0; i < nf; ++i) u_f(i) = u(part.free_dofs[i]);
    for (Index i = 0; i < nc; ++i) u_c(i) = u(part.passive[i]);
    ComplexVector out = u_f - G.adjoint() * u_c;  // T^H u
    const Complex shift = u_c.dot(g0);            // u^H t
    return std::make_pair(out, shift);
  };

  QuadraticObjective out;
  out.n = nf;
  out.has_factors = true;
  if (obj.num_u.size() > 0) {
    auto [u_f, shift] = map_vector(obj.num_u);
    out.num_u = u_f;
    out.num_t0 = obj.num_t0 - shift;
  }
  if (obj.den_F.rows() > 0) {
    const Index k = obj.den_F.rows();
    out.den_F.resize(k, nf);
    out.den_f0.resize(k);
    for (Index i = 0; i < k; ++i) {
      auto [row_f, shift] = map_vector(obj.den_F.row(i).adjoint());
      out.den_F.row(i) = row_f.adjoint();
      out.den_f0(i) = obj.den_f0(i) - shift;
    }
  } else {
    out.den_F.resize(0, nf);
    out.den_f0.resize(0);
  }
  out.den_const = obj.den_const;
  return out;
}

}  // namespace tb
