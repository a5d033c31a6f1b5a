#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uzawa/lu.hpp"
#include "uzawa/sparse.hpp"

namespace uzawa {

/// The block system
///
///     [ A  B^T ] [x]   [f]
///     [ B  -C  ] [y] = [h]
///
/// with A (n x n), B (m x n), C (m x m, symmetric) and n >= m.
template <typename Scalar>
struct SaddleSystem {
  SparseMatrix<Scalar> A;
  SparseMatrix<Scalar> B;
  SparseMatrix<Scalar> C;
  VectorX<Scalar> f;
  VectorX<Scalar> h;

  Index n() const { return A.rows(); }
  Index m() const { return B.rows(); }
};

/// Checks dimensions, n >= m and exact symmetry of C.
template <typename Scalar>
void validate(const SaddleSystem<Scalar>& sys) {
  const Index n = sys.A.rows(), m = sys.B.rows();
  if (sys.A.cols() != n) throw DimensionError("A must be square");
  if (sys.B.cols() != n)
    throw DimensionError("B has " + std::to_string(sys.B.cols()) + " columns, expected n = " +
                         std::to_string(n));
  if (sys.C.rows() != m || sys.C.cols() != m)
    throw DimensionError("C must be m x m with m = " + std::to_string(m));
  if (sys.f.size() != n) throw DimensionError("f must have length n = " + std::to_string(n));
  if (sys.h.size() != m) throw DimensionError("h must have length m = " + std::to_string(m));
  if (n < m)
    throw DimensionError("saddle system requires n >= m (n = " + std::to_string(n) +
                         ", m = " + std::to_string(m) + ")");
  if (!(transpose(sys.C) == sys.C)) throw HypothesisError("C is not symmetric");
}

template <typename Scalar>
SaddleSystem<Scalar> make_saddle_system(SparseMatrix<Scalar> A, SparseMatrix<Scalar> B,
                                        SparseMatrix<Scalar> C, VectorX<Scalar> f,
                                        VectorX<Scalar> h) {
  SaddleSystem<Scalar> sys{std::move(A), std::move(B), std::move(C), std::move(f), std::move(h)};
  validate(sys);
  return sys;
}

template <typename Scalar>
struct BlockResidual {
  VectorX<Scalar> top;     ///< A x + B^T y - f
  VectorX<Scalar> bottom;  ///< B x - C y - h

  /// Euclidean norm of the stacked vector.
  Scalar norm() const { return std::sqrt(dot(top, top) + dot(bottom, bottom)); }
  Scalar inf_norm() const {
    Scalar r(0);
    if (top.size()) r = top.cwiseAbs().maxCoeff();
    if (bottom.size()) r = std::max(r, bottom.cwiseAbs().maxCoeff());
    return r;
  }
};

template <typename Scalar>
BlockResidual<Scalar> residual(const SaddleSystem<Scalar>& sys, const VectorX<Scalar>& x,
                               const VectorX<Scalar>& y) {
  if (x.size() != sys.n() || y.size() != sys.m())
    throw DimensionError("residual: iterate lengths do not match the system");
  BlockResidual<Scalar> r;
  r.top = spmv(sys.A, x) + spmv_transpose(sys.B, y) - sys.f;
  r.bottom = spmv(sys.B, x) - spmv(sys.C, y) - sys.h;
  return r;
}

/// The (n+m) x (n+m) KKT matrix [[A, B^T], [B, -C]].
template <typename Scalar>
SparseMatrix<Scalar> assemble_kkt(const SaddleSystem<Scalar>& sys) {
  const Index n = sys.n(), m = sys.m();
  std::vector<Triplet<Scalar>> t;
  t.reserve(static_cast<std::size_t>(sys.A.nonZeros() + 2 * sys.B.nonZeros() + sys.C.nonZeros()));
  for (const auto& e : to_triplets(sys.A)) t.push_back(e);
  for (const auto& e : to_triplets(sys.B)) {
    t.push_back({n + e.row, e.col, e.value});
    t.push_back({e.col, n + e.row, e.value});
  }
  for (const auto& e : to_triplets(sys.C)) t.push_back({n + e.row, n + e.col, -e.value});
  return from_triplets(n + m, n + m, t);
}

/// Implicit S = B A^{-1} B^T + C together with b = B A^{-1} f - h.
///
/// A is factored once at construction. The operator keeps a pointer to the
/// system, which must outlive it.
template <typename Scalar>
class SchurOperator {
 public:
  explicit SchurOperator(const SaddleSystem<Scalar>& sys, Scalar pivot_threshold = Scalar(1))
      : sys_(&sys), factors_(lu_factor(sys.A, pivot_threshold)) {
    rhs_ = spmv(sys.B, lu_solve(factors_, sys.f)) - sys.h;
  }

  const SaddleSystem<Scalar>& system() const { return *sys_; }
  const LUFactors<Scalar>& factors() const { return factors_; }
  const VectorX<Scalar>& rhs() const { return rhs_; }

  Index size() const { return sys_->m(); }

  VectorX<Scalar> apply(const VectorX<Scalar>& v) const {
    if (v.size() != size()) throw DimensionError("schur_apply: vector length mismatch");
    return spmv(sys_->B, lu_solve(factors_, spmv_transpose(sys_->B, v))) + spmv(sys_->C, v);
  }

 private:
  const SaddleSystem<Scalar>* sys_;
  LUFactors<Scalar> factors_;
  VectorX<Scalar> rhs_;
};

template <typename Scalar>
VectorX<Scalar> schur_apply(const SchurOperator<Scalar>& op, const VectorX<Scalar>& v) {
  return op.apply(v);
}

template <typename Scalar>
const VectorX<Scalar>& schur_rhs(const SchurOperator<Scalar>& op) {
  return op.rhs();
}

}  // namespace uzawa
