#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uzawa/errors.hpp"

namespace uzawa {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Triplet {
  Index row;
  Index col;
  Scalar value;
};

/// Default cap on rows*cols for dense conversions. Overridable through the
/// UZAWA_DENSE_LIMIT environment variable.
inline Index dense_entry_limit() {
  static const Index limit = [] {
    if (const char* env = std::getenv("UZAWA_DENSE_LIMIT")) {
      char* end = nullptr;
      const double v = std::strtod(env, &end);
      if (end != env && v > 0) return static_cast<Index>(v);
    }
    return Index{4'000'000};
  }();
  return limit;
}

/// Compressed-row real sparse matrix.
///
/// Immutable once built. Column indices are strictly increasing within each
/// row and no exact zero is stored.
template <typename Scalar>
class SparseMatrix {
 public:
  SparseMatrix() : row_offsets_(1, 0) {}
  SparseMatrix(Index rows, Index cols)
      : rows_(rows), cols_(cols), row_offsets_(static_cast<std::size_t>(rows) + 1, 0) {
    if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
  }

  /// Adopts raw CSR arrays, checking every structural invariant.
  static SparseMatrix from_csr(Index rows, Index cols, std::vector<Index> row_offsets,
                               std::vector<Index> col_indices, std::vector<Scalar> values) {
    SparseMatrix m(rows, cols);
    if (row_offsets.size() != static_cast<std::size_t>(rows) + 1 || row_offsets.front() != 0 ||
        static_cast<std::size_t>(row_offsets.back()) != col_indices.size() ||
        col_indices.size() != values.size())
      throw DimensionError("inconsistent CSR arrays");
    for (Index i = 0; i < rows; ++i) {
      const auto b = row_offsets[i], e = row_offsets[i + 1];
      if (e < b) throw DimensionError("row offsets must be non-decreasing");
      for (auto p = b; p < e; ++p) {
        if (col_indices[p] < 0 || col_indices[p] >= cols)
          throw IndexError("column index out of range in row " + std::to_string(i));
        if (p > b && col_indices[p] <= col_indices[p - 1])
          throw IndexError("column indices not strictly increasing in row " + std::to_string(i));
        if (values[p] == Scalar(0))
          throw DimensionError("explicit zero stored in row " + std::to_string(i));
      }
    }
    m.row_offsets_ = std::move(row_offsets);
    m.col_indices_ = std::move(col_indices);
    m.values_ = std::move(values);
    return m;
  }

  static SparseMatrix identity(Index n) {
    std::vector<Index> off(static_cast<std::size_t>(n) + 1), cols(static_cast<std::size_t>(n));
    std::iota(off.begin(), off.end(), Index{0});
    std::iota(cols.begin(), cols.end(), Index{0});
    return from_csr(n, n, std::move(off), std::move(cols),
                    std::vector<Scalar>(static_cast<std::size_t>(n), Scalar(1)));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nonZeros() const { return static_cast<Index>(values_.size()); }

  std::span<const Index> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return col_indices_; }
  std::span<const Scalar> values() const { return values_; }

  std::span<const Index> row_cols(Index i) const {
    return {col_indices_.data() + row_offsets_[i], col_indices_.data() + row_offsets_[i + 1]};
  }
  std::span<const Scalar> row_values(Index i) const {
    return {values_.data() + row_offsets_[i], values_.data() + row_offsets_[i + 1]};
  }

  /// Entry lookup by binary search; 0 for structural zeros.
  Scalar coeff(Index i, Index j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return Scalar(0);
    return values_[row_offsets_[i] + (it - cols.begin())];
  }

  Scalar max_abs() const {
    Scalar m(0);
    for (const auto& v : values_) m = std::max(m, Scalar(std::abs(v)));
    return m;
  }

  Scalar frobenius_norm() const {
    Scalar s(0);
    for (const auto& v : values_) s += v * v;
    return std::sqrt(s);
  }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_offsets_ == b.row_offsets_ &&
           a.col_indices_ == b.col_indices_ && a.values_ == b.values_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<Scalar> values_;
};

/// Builds a CSR matrix from coordinate entries. Duplicates are summed and
/// entries that end up exactly zero are dropped.
template <typename Scalar>
SparseMatrix<Scalar> from_triplets(Index rows, Index cols,
                                   std::span<const Triplet<Scalar>> entries) {
  if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
  for (const auto& t : entries) {
    if (t.row < 0 || t.row >= rows)
      throw IndexError("row index out of range: entry (" + std::to_string(t.row) + ", " +
                       std::to_string(t.col) + ")");
    if (t.col < 0 || t.col >= cols)
      throw IndexError("column index out of range: entry (" + std::to_string(t.row) + ", " +
                       std::to_string(t.col) + ")");
  }
  // Stable counting sort by row keeps input order within a row, so the sum of
  // duplicates is taken in input order.
  std::vector<Index> count(static_cast<std::size_t>(rows) + 1, 0);
  for (const auto& t : entries) ++count[t.row + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<Index> order(entries.size());
  {
    auto next = count;
    for (std::size_t e = 0; e < entries.size(); ++e) order[next[entries[e].row]++] = Index(e);
  }

  std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> out_cols;
  std::vector<Scalar> out_vals;
  out_cols.reserve(entries.size());
  out_vals.reserve(entries.size());
  std::vector<std::pair<Index, Scalar>> row;
  for (Index i = 0; i < rows; ++i) {
    row.clear();
    for (Index p = count[i]; p < count[i + 1]; ++p) {
      const auto& t = entries[order[p]];
      row.emplace_back(t.col, t.value);
    }
    std::stable_sort(row.begin(), row.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t p = 0; p < row.size();) {
      const Index c = row[p].first;
      Scalar s(0);
      for (; p < row.size() && row[p].first == c; ++p) s += row[p].second;
      if (s != Scalar(0)) {
        out_cols.push_back(c);
        out_vals.push_back(s);
      }
    }
    offsets[i + 1] = static_cast<Index>(out_cols.size());
  }
  return SparseMatrix<Scalar>::from_csr(rows, cols, std::move(offsets), std::move(out_cols),
                                        std::move(out_vals));
}

template <typename Scalar>
SparseMatrix<Scalar> from_triplets(Index rows, Index cols,
                                   const std::vector<Triplet<Scalar>>& entries) {
  return from_triplets(rows, cols, std::span<const Triplet<Scalar>>(entries));
}

/// Dense to CSR, keeping every nonzero entry.
template <typename Derived>
SparseMatrix<typename Derived::Scalar> from_dense(const Eigen::MatrixBase<Derived>& dense) {
  using Scalar = typename Derived::Scalar;
  const Index rows = dense.rows(), cols = dense.cols();
  std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> out_cols;
  std::vector<Scalar> out_vals;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const Scalar v = dense(i, j);
      if (v != Scalar(0)) {
        out_cols.push_back(j);
        out_vals.push_back(v);
      }
    }
    offsets[i + 1] = static_cast<Index>(out_cols.size());
  }
  return SparseMatrix<Scalar>::from_csr(rows, cols, std::move(offsets), std::move(out_cols),
                                        std::move(out_vals));
}

template <typename Scalar>
std::vector<Triplet<Scalar>> to_triplets(const SparseMatrix<Scalar>& m) {
  std::vector<Triplet<Scalar>> out;
  out.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (Index i = 0; i < m.rows(); ++i) {
    const auto cols = m.row_cols(i);
    const auto vals = m.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) out.push_back({i, cols[p], vals[p]});
  }
  return out;
}

template <typename Scalar>
SparseMatrix<Scalar> transpose(const SparseMatrix<Scalar>& m) {
  const Index rows = m.rows(), cols = m.cols();
  std::vector<Index> offsets(static_cast<std::size_t>(cols) + 1, 0);
  for (const Index c : m.col_indices()) ++offsets[c + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<Index> out_cols(static_cast<std::size_t>(m.nonZeros()));
  std::vector<Scalar> out_vals(static_cast<std::size_t>(m.nonZeros()));
  auto next = offsets;
  for (Index i = 0; i < rows; ++i) {
    const auto rc = m.row_cols(i);
    const auto rv = m.row_values(i);
    for (std::size_t p = 0; p < rc.size(); ++p) {
      const Index dst = next[rc[p]]++;
      out_cols[dst] = i;
      out_vals[dst] = rv[p];
    }
  }
  return SparseMatrix<Scalar>::from_csr(cols, rows, std::move(offsets), std::move(out_cols),
                                        std::move(out_vals));
}

/// y = M v, each row summed in ascending column order.
template <typename Scalar>
VectorX<Scalar> spmv(const SparseMatrix<Scalar>& m, const VectorX<Scalar>& v) {
  if (v.size() != m.cols())
    throw DimensionError("spmv: vector length " + std::to_string(v.size()) +
                         " does not match matrix columns " + std::to_string(m.cols()));
  VectorX<Scalar> out(m.rows());
  const auto off = m.row_offsets();
  const auto ci = m.col_indices();
  const auto vals = m.values();
  for (Index i = 0; i < m.rows(); ++i) {
    Scalar s(0);
    for (Index p = off[i]; p < off[i + 1]; ++p) s += vals[p] * v[ci[p]];
    out[i] = s;
  }
  return out;
}

/// y = M^T v without forming M^T.
///
/// Each output entry accumulates in ascending row order starting from zero,
/// which is the order spmv uses on the explicit transpose, so the two agree
/// bit for bit.
template <typename Scalar>
VectorX<Scalar> spmv_transpose(const SparseMatrix<Scalar>& m, const VectorX<Scalar>& v) {
  if (v.size() != m.rows())
    throw DimensionError("spmv_transpose: vector length " + std::to_string(v.size()) +
                         " does not match matrix rows " + std::to_string(m.rows()));
  VectorX<Scalar> out = VectorX<Scalar>::Zero(m.cols());
  const auto off = m.row_offsets();
  const auto ci = m.col_indices();
  const auto vals = m.values();
  for (Index i = 0; i < m.rows(); ++i) {
    const Scalar vi = v[i];
    for (Index p = off[i]; p < off[i + 1]; ++p) out[ci[p]] += vals[p] * vi;
  }
  return out;
}

template <typename Scalar>
MatrixX<Scalar> to_dense(const SparseMatrix<Scalar>& m, Index max_entries = dense_entry_limit()) {
  if (m.rows() * m.cols() > max_entries)
    throw DenseLimitError("dense conversion of " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + " exceeds the limit of " +
                          std::to_string(max_entries) + " entries");
  MatrixX<Scalar> d = MatrixX<Scalar>::Zero(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const auto rc = m.row_cols(i);
    const auto rv = m.row_values(i);
    for (std::size_t p = 0; p < rc.size(); ++p) d(i, rc[p]) = rv[p];
  }
  return d;
}

template <typename Scalar>
Scalar dot(const VectorX<Scalar>& u, const VectorX<Scalar>& v) {
  if (u.size() != v.size()) throw DimensionError("dot: length mismatch");
  Scalar s(0);
  for (Index i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

template <typename Scalar>
Scalar norm2(const VectorX<Scalar>& v) {
  return std::sqrt(dot(v, v));
}

/// alpha * u + v
template <typename Scalar>
VectorX<Scalar> axpy(Scalar alpha, const VectorX<Scalar>& u, const VectorX<Scalar>& v) {
  if (u.size() != v.size()) throw DimensionError("axpy: length mismatch");
  return alpha * u + v;
}

}  // namespace uzawa
