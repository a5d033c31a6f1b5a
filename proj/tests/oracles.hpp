#pragma once

// Reference computations for tests. Plain nested vectors and textbook
// algorithms, sharing no code with the library or with Eigen.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "uzawa/saddle_system.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat dense(const uzawa::SparseMatrix<double>& m) {
  Mat d = zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  const auto off = m.row_offsets();
  const auto col = m.col_indices();
  const auto val = m.values();
  for (std::size_t i = 0; i + 1 < off.size(); ++i)
    for (auto p = off[i]; p < off[i + 1]; ++p) d[i][static_cast<std::size_t>(col[p])] += val[p];
  return d;
}

inline Vec vec(const uzawa::VectorX<double>& v) { return Vec(v.data(), v.data() + v.size()); }

inline Vec matvec(const Mat& a, const Vec& x) {
  Vec y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  return y;
}

inline Mat transpose(const Mat& a) {
  if (a.empty()) return {};
  Mat t = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b.empty() ? 0 : b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < c[i].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline double norm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline Vec sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

// Gaussian elimination with row partial pivoting.
inline Vec solve(Mat a, Vec b) {
  const std::size_t n = a.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    if (a[p][k] == 0.0) throw std::runtime_error("oracle::solve: singular");
    std::swap(a[p], a[k]);
    std::swap(b[p], b[k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = a[i][k] / a[k][k];
      if (l == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i][j] -= l * a[k][j];
      b[i] -= l * b[k];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

// Columns of A^{-1} B^T, one elimination per column.
inline Mat solve_columns(const Mat& a, const Mat& rhs_cols) {
  Mat out;
  for (const auto& c : rhs_cols) out.push_back(solve(a, c));
  return out;  // out[k] = A^{-1} rhs_cols[k]
}

// S = B A^{-1} B^T + C.
inline Mat schur(const uzawa::SaddleSystem<double>& sys) {
  const Mat a = dense(sys.A), b = dense(sys.B), c = dense(sys.C);
  const Mat cols = solve_columns(a, b);  // cols[k] = A^{-1} (row k of B)
  Mat s = zeros(b.size(), b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) {
      double v = c[i][k];
      for (std::size_t j = 0; j < a.size(); ++j) v += b[i][j] * cols[k][j];
      s[i][k] = v;
    }
  return s;
}

// Solution of the full KKT system by elimination on the assembled matrix.
inline std::pair<Vec, Vec> kkt_solve(const uzawa::SaddleSystem<double>& sys) {
  const std::size_t n = static_cast<std::size_t>(sys.n()), m = static_cast<std::size_t>(sys.m());
  const Mat a = dense(sys.A), b = dense(sys.B), c = dense(sys.C);
  Mat k = zeros(n + m, n + m);
  Vec rhs(n + m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i][j] = a[i][j];
    rhs[i] = sys.f[static_cast<Eigen::Index>(i)];
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      k[n + i][j] = b[i][j];
      k[j][n + i] = b[i][j];
    }
    for (std::size_t j = 0; j < m; ++j) k[n + i][n + j] = -c[i][j];
    rhs[n + i] = sys.h[static_cast<Eigen::Index>(i)];
  }
  const Vec z = solve(k, rhs);
  return {Vec(z.begin(), z.begin() + static_cast<long>(n)), Vec(z.begin() + static_cast<long>(n), z.end())};
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline Vec sym_eigenvalues(Mat a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  Vec ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline Mat sym_part(const Mat& a) {
  Mat s = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) s[i][j] = 0.5 * (a[i][j] + a[j][i]);
  return s;
}

// Largest singular value via the eigenvalues of M^T M.
inline double spectral_norm(const Mat& m) {
  if (m.empty()) return 0;
  return std::sqrt(std::max(0.0, sym_eigenvalues(matmul(transpose(m), m)).back()));
}

// c0 = beta^2 / (gamma^4 |S|^2) with gamma = |A| / lambda_min(A_s) and
// beta = lambda_min(B A_s^{-1} B^T + C).
inline double contraction_constant(const uzawa::SaddleSystem<double>& sys) {
  const Mat a = dense(sys.A), b = dense(sys.B), c = dense(sys.C);
  const Mat as = sym_part(a);
  const double lambda_m = sym_eigenvalues(as).front();
  const double gamma = spectral_norm(a) / lambda_m;
  const Mat cols = solve_columns(as, b);
  Mat ss = zeros(b.size(), b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) {
      double v = c[i][k];
      for (std::size_t j = 0; j < a.size(); ++j) v += b[i][j] * cols[k][j];
      ss[i][k] = v;
    }
  const double beta = sym_eigenvalues(sym_part(ss)).front();
  const double ns = spectral_norm(schur(sys));
  return beta * beta / (std::pow(gamma, 4) * ns * ns);
}

}  // namespace oracle
