#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uzawa/sparse.hpp"

namespace uzawa {

/// P A = L U with L unit lower triangular (ones stored) and U upper
/// triangular, both in CSR form indexed by pivot position.
template <typename Scalar>
struct LUFactors {
  SparseMatrix<Scalar> lower;
  SparseMatrix<Scalar> upper;
  /// row_permutation[k] is the row of A that became pivot row k.
  std::vector<Index> row_permutation;

  Index size() const { return static_cast<Index>(row_permutation.size()); }
};

namespace detail {

// Column-compressed factor under construction. Row indices of L are kept in
// the original numbering of A until the end, U rows are pivot positions.
template <typename Scalar>
struct ColumnFactor {
  std::vector<Index> ptr{0};
  std::vector<Index> idx;
  std::vector<Scalar> val;

  Index begin(Index j) const { return ptr[j]; }
  Index end(Index j) const { return ptr[j + 1]; }
  void close_column() { ptr.push_back(static_cast<Index>(idx.size())); }
};

// Converts a column-compressed n x n factor to CSR, remapping row indices.
template <typename Scalar>
SparseMatrix<Scalar> columns_to_csr(Index n, const ColumnFactor<Scalar>& f,
                                    const std::vector<Index>& row_map) {
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
  for (const Index r : f.idx) ++offsets[row_map[r] + 1];
  for (Index i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<Index> cols(f.idx.size());
  std::vector<Scalar> vals(f.idx.size());
  auto next = offsets;
  for (Index j = 0; j < n; ++j) {
    for (Index p = f.begin(j); p < f.end(j); ++p) {
      const Index dst = next[row_map[f.idx[p]]]++;
      cols[dst] = j;
      vals[dst] = f.val[p];
    }
  }
  return SparseMatrix<Scalar>::from_csr(n, n, std::move(offsets), std::move(cols),
                                        std::move(vals));
}

}  // namespace detail

/// Left-looking sparse LU with threshold partial pivoting.
///
/// Column j is computed by a sparse triangular solve against the already
/// factored columns of L; the nonzero pattern comes from a depth-first search
/// over the graph of L. With `pivot_threshold == 1` the largest candidate in
/// magnitude is chosen (ties go to the first candidate in topological order);
/// a smaller threshold keeps the diagonal candidate whenever it is within that
/// factor of the largest.
///
/// Throws SingularMatrixError when every candidate pivot of a column is
/// smaller than 1e-13 * max|A_ij|.
template <typename Scalar>
LUFactors<Scalar> lu_factor(const SparseMatrix<Scalar>& a, Scalar pivot_threshold = Scalar(1)) {
  if (a.rows() != a.cols()) throw DimensionError("lu_factor: matrix must be square");
  if (!(pivot_threshold > Scalar(0) && pivot_threshold <= Scalar(1)))
    throw Error("lu_factor: pivot threshold must lie in (0, 1]");

  const Index n = a.rows();
  const SparseMatrix<Scalar> at = transpose(a);  // row j of at is column j of a
  const Scalar singular_tol = Scalar(1e-13) * a.max_abs();

  detail::ColumnFactor<Scalar> lower, upper;
  std::vector<Index> pinv(static_cast<std::size_t>(n), -1);
  std::vector<Scalar> x(static_cast<std::size_t>(n), Scalar(0));
  std::vector<Index> mark(static_cast<std::size_t>(n), -1);
  std::vector<Index> reach, stack, cursor;
  reach.reserve(static_cast<std::size_t>(n));
  stack.reserve(static_cast<std::size_t>(n));
  cursor.reserve(static_cast<std::size_t>(n));

  for (Index j = 0; j < n; ++j) {
    // Pattern of L \ A(:,j) in reverse topological order (postorder).
    reach.clear();
    for (const Index start : at.row_cols(j)) {
      if (mark[start] == j) continue;
      stack.push_back(start);
      cursor.push_back(-1);
      mark[start] = j;
      while (!stack.empty()) {
        const Index node = stack.back();
        const Index col = pinv[node];
        Index p = cursor.back();
        if (p < 0) p = col >= 0 ? lower.begin(col) + 1 : 0;
        const Index stop = col >= 0 ? lower.end(col) : 0;
        bool descended = false;
        for (; p < stop; ++p) {
          const Index next = lower.idx[p];
          if (mark[next] != j) {
            mark[next] = j;
            cursor.back() = p + 1;
            stack.push_back(next);
            cursor.push_back(-1);
            descended = true;
            break;
          }
        }
        if (!descended) {
          stack.pop_back();
          cursor.pop_back();
          reach.push_back(node);
        }
      }
    }

    {
      const auto rc = at.row_cols(j);
      const auto rv = at.row_values(j);
      for (std::size_t p = 0; p < rc.size(); ++p) x[rc[p]] = rv[p];
    }

    for (auto it = reach.rbegin(); it != reach.rend(); ++it) {
      const Index col = pinv[*it];
      if (col < 0) continue;
      const Scalar xj = x[*it];
      if (xj == Scalar(0)) continue;
      for (Index p = lower.begin(col) + 1; p < lower.end(col); ++p)
        x[lower.idx[p]] -= lower.val[p] * xj;
    }

    Index pivot = -1;
    Scalar pivot_mag(-1);
    for (auto it = reach.rbegin(); it != reach.rend(); ++it) {
      const Index row = *it;
      if (pinv[row] >= 0) {
        if (x[row] != Scalar(0)) {
          upper.idx.push_back(pinv[row]);
          upper.val.push_back(x[row]);
        }
      } else if (std::abs(x[row]) > pivot_mag) {
        pivot_mag = std::abs(x[row]);
        pivot = row;
      }
    }
    if (pivot_threshold < Scalar(1) && pinv[j] < 0 && mark[j] == j &&
        std::abs(x[j]) >= pivot_threshold * pivot_mag)
      pivot = j;

    if (pivot < 0 || std::abs(x[pivot]) <= singular_tol || !std::isfinite(x[pivot])) {
      for (const Index r : reach) x[r] = Scalar(0);
      throw SingularMatrixError("lu_factor: matrix is singular to working precision at pivot row " +
                                    std::to_string(j),
                                j);
    }
    const Scalar diag = x[pivot];
    upper.idx.push_back(j);
    upper.val.push_back(diag);
    upper.close_column();

    pinv[pivot] = j;
    lower.idx.push_back(pivot);
    lower.val.push_back(Scalar(1));
    for (auto it = reach.rbegin(); it != reach.rend(); ++it) {
      const Index row = *it;
      if (pinv[row] < 0 && x[row] != Scalar(0)) {
        lower.idx.push_back(row);
        lower.val.push_back(x[row] / diag);
      }
    }
    lower.close_column();
    for (const Index r : reach) x[r] = Scalar(0);
  }

  LUFactors<Scalar> f;
  f.row_permutation.assign(static_cast<std::size_t>(n), 0);
  for (Index r = 0; r < n; ++r) f.row_permutation[pinv[r]] = r;
  std::vector<Index> identity(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) identity[r] = r;
  f.lower = detail::columns_to_csr(n, lower, pinv);
  f.upper = detail::columns_to_csr(n, upper, identity);
  return f;
}

/// Solves A q = rhs with the factors of A.
template <typename Scalar>
VectorX<Scalar> lu_solve(const LUFactors<Scalar>& f, const VectorX<Scalar>& rhs) {
  const Index n = f.size();
  if (rhs.size() != n) throw DimensionError("lu_solve: right-hand side length mismatch");
  VectorX<Scalar> z(n);
  for (Index i = 0; i < n; ++i) z[i] = rhs[f.row_permutation[i]];
  for (Index i = 0; i < n; ++i) {
    const auto cols = f.lower.row_cols(i);
    const auto vals = f.lower.row_values(i);
    Scalar s = z[i];
    for (std::size_t p = 0; p + 1 < cols.size(); ++p) s -= vals[p] * z[cols[p]];
    z[i] = s;
  }
  for (Index i = n - 1; i >= 0; --i) {
    const auto cols = f.upper.row_cols(i);
    const auto vals = f.upper.row_values(i);
    Scalar s = z[i];
    for (std::size_t p = 1; p < cols.size(); ++p) s -= vals[p] * z[cols[p]];
    z[i] = s / vals[0];
  }
  return z;
}

/// Solves A^T z = rhs with the factors of A.
template <typename Scalar>
VectorX<Scalar> lu_solve_transpose(const LUFactors<Scalar>& f, const VectorX<Scalar>& rhs) {
  const Index n = f.size();
  if (rhs.size() != n) throw DimensionError("lu_solve_transpose: right-hand side length mismatch");
  // A^T = U^T L^T P: forward with U^T, backward with L^T, then undo P.
  VectorX<Scalar> w = rhs;
  for (Index i = 0; i < n; ++i) {
    const auto cols = f.upper.row_cols(i);
    const auto vals = f.upper.row_values(i);
    const Scalar t = w[i] / vals[0];
    w[i] = t;
    for (std::size_t p = 1; p < cols.size(); ++p) w[cols[p]] -= vals[p] * t;
  }
  for (Index i = n - 1; i >= 0; --i) {
    const auto cols = f.lower.row_cols(i);
    const auto vals = f.lower.row_values(i);
    const Scalar s = w[i];
    for (std::size_t p = 0; p + 1 < cols.size(); ++p) w[cols[p]] -= vals[p] * s;
  }
  VectorX<Scalar> z(n);
  for (Index i = 0; i < n; ++i) z[f.row_permutation[i]] = w[i];
  return z;
}

}  // namespace uzawa
