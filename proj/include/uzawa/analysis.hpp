#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "uzawa/random.hpp"
#include "uzawa/saddle_system.hpp"
#include "uzawa/solvers.hpp"

// Dense oracles for the convergence theory. Everything here works on explicit
// dense matrices factored with Eigen, independently of the sparse LU used by
// the solvers, and is only meant for desk-sized systems.

namespace uzawa {

struct DenseLimits {
  Index max_entries = dense_entry_limit();
  Index max_eigen_dim = 2000;  ///< n for eigenvalue work on A
  Index max_schur_dim = 500;   ///< m for explicit S
};

template <typename Scalar>
bool dense_eligible(const SaddleSystem<Scalar>& sys, const DenseLimits& limits = {}) {
  return sys.n() <= limits.max_eigen_dim && sys.m() <= limits.max_schur_dim &&
         sys.n() * sys.n() <= limits.max_entries;
}

template <typename Scalar>
struct SpectralBounds {
  Scalar lambda_m = 0;  ///< min eigenvalue of A_s = (A + A^T)/2
  Scalar norm_A = 0;    ///< |A|_2
  Scalar gamma = 0;     ///< norm_A / lambda_m
  Scalar beta = 0;      ///< min eigenvalue of S_s = B A_s^{-1} B^T + C
  Scalar norm_S = 0;    ///< |S|_2
  Scalar c0 = 0;        ///< beta^2 / (gamma^4 |S|^2)
};

namespace detail {

template <typename Scalar>
void require_schur_size(const SaddleSystem<Scalar>& sys, const DenseLimits& limits) {
  if (sys.m() > limits.max_schur_dim)
    throw DenseLimitError("explicit Schur complement needs m <= " +
                          std::to_string(limits.max_schur_dim) + " (m = " +
                          std::to_string(sys.m()) + ")");
  if (sys.n() > limits.max_eigen_dim)
    throw DenseLimitError("dense analysis needs n <= " + std::to_string(limits.max_eigen_dim) +
                          " (n = " + std::to_string(sys.n()) + ")");
}

template <typename Scalar>
Scalar min_eigenvalue(const MatrixX<Scalar>& sym) {
  if (sym.rows() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

template <typename Scalar>
Scalar spectral_norm(const MatrixX<Scalar>& m) {
  if (m.size() == 0) return Scalar(0);
  Eigen::BDCSVD<MatrixX<Scalar>> svd(m);
  return svd.singularValues()(0);
}

// B M^{-1} B^T for a dense factorization `solver` of M.
template <typename Scalar, typename Solver>
MatrixX<Scalar> congruence(const MatrixX<Scalar>& b, const Solver& solver) {
  const MatrixX<Scalar> bt = b.transpose();
  return b * solver.solve(bt);
}

}  // namespace detail

/// Explicit S = B A^{-1} B^T + C from m dense solves.
template <typename Scalar>
MatrixX<Scalar> form_dense_schur(const SaddleSystem<Scalar>& sys, const DenseLimits& limits = {}) {
  detail::require_schur_size(sys, limits);
  const MatrixX<Scalar> a = to_dense(sys.A, limits.max_entries);
  const MatrixX<Scalar> b = to_dense(sys.B, limits.max_entries);
  const Eigen::PartialPivLU<MatrixX<Scalar>> lu(a);
  return detail::congruence(b, lu) + to_dense(sys.C, limits.max_entries);
}

/// Dense direct solve of the KKT system with one step of iterative refinement.
template <typename Scalar>
std::pair<VectorX<Scalar>, VectorX<Scalar>> dense_kkt_solve(const SaddleSystem<Scalar>& sys,
                                                            const DenseLimits& limits = {}) {
  const Index n = sys.n(), m = sys.m();
  const MatrixX<Scalar> k = to_dense(assemble_kkt(sys), limits.max_entries);
  VectorX<Scalar> rhs(n + m);
  rhs << sys.f, sys.h;
  const Eigen::PartialPivLU<MatrixX<Scalar>> lu(k);
  VectorX<Scalar> z = lu.solve(rhs);
  const VectorX<Scalar> r = rhs - k * z;
  z += lu.solve(r);
  return {z.head(n), z.tail(m)};
}

/// Convergence constants with gamma = |A|/lambda_m and beta = lambda_min(S_s),
/// the tightest values the hypotheses admit.
///
/// Throws HypothesisError when A_s is not positive definite or when
/// lambda_min(S_s) <= 1e-12 |S_s| (stabilizing condition fails).
template <typename Scalar>
SpectralBounds<Scalar> spectral_bounds(const SaddleSystem<Scalar>& sys,
                                       const DenseLimits& limits = {}) {
  detail::require_schur_size(sys, limits);
  const MatrixX<Scalar> a = to_dense(sys.A, limits.max_entries);
  const MatrixX<Scalar> b = to_dense(sys.B, limits.max_entries);
  const MatrixX<Scalar> c = to_dense(sys.C, limits.max_entries);
  const MatrixX<Scalar> as = Scalar(0.5) * (a + a.transpose());

  SpectralBounds<Scalar> sb;
  sb.lambda_m = detail::min_eigenvalue(as);
  if (!(sb.lambda_m > 0))
    throw HypothesisError("A not positive definite: lambda_min(A_s) = " +
                          std::to_string(sb.lambda_m));
  sb.norm_A = detail::spectral_norm(a);
  sb.gamma = sb.norm_A / sb.lambda_m;

  const Eigen::LLT<MatrixX<Scalar>> as_llt(as);
  const MatrixX<Scalar> ss = detail::congruence(b, as_llt) + c;
  sb.beta = detail::min_eigenvalue(MatrixX<Scalar>(Scalar(0.5) * (ss + ss.transpose())));
  const Scalar ss_norm = ss.size() ? ss.cwiseAbs().rowwise().sum().maxCoeff() : Scalar(0);
  if (!(sb.beta > Scalar(1e-12) * ss_norm))
    throw HypothesisError("stabilizing condition fails: lambda_min(B A_s^-1 B^T + C) = " +
                          std::to_string(sb.beta));

  const Eigen::PartialPivLU<MatrixX<Scalar>> a_lu(a);
  const MatrixX<Scalar> s = detail::congruence(b, a_lu) + c;
  sb.norm_S = detail::spectral_norm(s);
  const Scalar g2 = sb.gamma * sb.gamma;
  sb.c0 = (sb.beta * sb.beta) / (g2 * g2 * sb.norm_S * sb.norm_S);
  return sb;
}

template <typename Scalar>
struct CoercivityResult {
  /// min over probes of (Sv, v) / (gamma^-2 beta |v|^2)
  Scalar worst_margin = std::numeric_limits<Scalar>::infinity();
  Index trials = 0;
  Index failures = 0;
  bool pass = true;
};

/// Probes (Sv, v) >= gamma^-2 beta |v|^2 on `trials` random unit vectors.
template <typename Scalar>
CoercivityResult<Scalar> verify_coercivity(const SaddleSystem<Scalar>& sys,
                                   const SpectralBounds<Scalar>& bounds, Index trials,
                                   std::uint64_t seed = 1, const DenseLimits& limits = {}) {
  const MatrixX<Scalar> s = form_dense_schur(sys, limits);
  const Scalar rhs = bounds.beta / (bounds.gamma * bounds.gamma);
  Rng rng(seed, 0x1e77a1);
  CoercivityResult<Scalar> out;
  out.trials = trials;
  for (Index t = 0; t < trials; ++t) {
    const VectorX<Scalar> v = random_unit<Scalar>(rng, sys.m());
    const Scalar margin = v.dot(s * v) / (rhs * v.squaredNorm());
    out.worst_margin = std::min(out.worst_margin, margin);
    if (!(margin >= Scalar(1) - Scalar(1e-8))) ++out.failures;
  }
  out.pass = out.failures == 0;
  return out;
}

template <typename Scalar>
struct TheoremRecord {
  static constexpr Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
  Index k = 0;
  Scalar q_ratio = nan;     ///< Q(y_{k+1}) / Q(y_k)
  Scalar bound = nan;       ///< 1 - c0
  Scalar coercivity_lhs = nan;  ///< (S d_k, d_k)
  Scalar coercivity_rhs = nan;  ///< gamma^-2 beta |d_k|^2
  Scalar error_lhs = nan;    ///< |B e^x_k - C e^y_k|
  Scalar error_rhs = nan;    ///< |B e^x_0 - C e^y_0| sqrt(1 - c0)^k
  Scalar identity_rel_err = nan;  ///< | |B e^x_k - C e^y_k| - |d_k| | / |d_k|
};

/// Outcome of the post-hoc checks. A flag is empty when its check was not run.
template <typename Scalar>
struct TheoremReport {
  Scalar c0 = std::numeric_limits<Scalar>::quiet_NaN();
  std::vector<TheoremRecord<Scalar>> records;
  std::optional<bool> contraction_pass;     ///< Q ratio <= 1 - c0 + 1e-8
  std::optional<bool> ratio_range_pass;  ///< Q ratio in [0, 1 + 1e-12]
  std::optional<bool> alpha_positive_pass;
  std::optional<bool> error_bound_pass;   ///< geometric bound, factor 1 + 1e-8
  std::optional<bool> identity_pass;   ///< |B e^x - C e^y| = |d|, 1e-8 relative
  std::optional<bool> coercivity_pass;     ///< along the search directions d_k
  Scalar worst_contraction_excess = -std::numeric_limits<Scalar>::infinity();
  Scalar worst_error_bound_ratio = 0;  ///< max lhs / rhs
  Scalar worst_identity_err = 0;
  std::vector<std::string> failures;

  bool all_pass() const {
    for (const auto& f : {contraction_pass, ratio_range_pass, alpha_positive_pass, error_bound_pass,
                          identity_pass, coercivity_pass})
      if (f && !*f) return false;
    return true;
  }

  TheoremRecord<Scalar>& record(Index k) {
    auto it = std::lower_bound(records.begin(), records.end(), k,
                               [](const auto& r, Index key) { return r.k < key; });
    if (it == records.end() || it->k != k) {
      TheoremRecord<Scalar> r;
      r.k = k;
      it = records.insert(it, r);
    }
    return *it;
  }
};

/// Combines two reports on the same run; each field keeps whichever side set it.
template <typename Scalar>
TheoremReport<Scalar> merge(TheoremReport<Scalar> a, const TheoremReport<Scalar>& b) {
  for (const auto& rb : b.records) {
    auto& ra = a.record(rb.k);
    auto take = [](Scalar& dst, Scalar src) {
      if (std::isnan(dst)) dst = src;
    };
    take(ra.q_ratio, rb.q_ratio);
    take(ra.bound, rb.bound);
    take(ra.coercivity_lhs, rb.coercivity_lhs);
    take(ra.coercivity_rhs, rb.coercivity_rhs);
    take(ra.error_lhs, rb.error_lhs);
    take(ra.error_rhs, rb.error_rhs);
    take(ra.identity_rel_err, rb.identity_rel_err);
  }
  auto flag = [](std::optional<bool>& dst, const std::optional<bool>& src) {
    if (src) dst = dst ? (*dst && *src) : *src;
  };
  flag(a.contraction_pass, b.contraction_pass);
  flag(a.ratio_range_pass, b.ratio_range_pass);
  flag(a.alpha_positive_pass, b.alpha_positive_pass);
  flag(a.error_bound_pass, b.error_bound_pass);
  flag(a.identity_pass, b.identity_pass);
  flag(a.coercivity_pass, b.coercivity_pass);
  if (std::isnan(a.c0)) a.c0 = b.c0;
  a.worst_contraction_excess = std::max(a.worst_contraction_excess, b.worst_contraction_excess);
  a.worst_error_bound_ratio = std::max(a.worst_error_bound_ratio, b.worst_error_bound_ratio);
  a.worst_identity_err = std::max(a.worst_identity_err, b.worst_identity_err);
  a.failures.insert(a.failures.end(), b.failures.begin(), b.failures.end());
  return a;
}

/// Per-iteration contraction of Q. Ratios are only formed where Q(y_k) > 1e-20.
template <typename Scalar>
TheoremReport<Scalar> verify_contraction(const ConvergenceHistory<Scalar>& history,
                                      const SpectralBounds<Scalar>& bounds) {
  TheoremReport<Scalar> rep;
  rep.c0 = bounds.c0;
  rep.contraction_pass = true;
  rep.ratio_range_pass = true;
  rep.alpha_positive_pass = true;
  const Scalar bound = Scalar(1) - bounds.c0;
  const auto& recs = history.records;
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    const auto& cur = recs[i];
    const auto& nxt = recs[i + 1];
    if (cur.d_norm > 0 && !(cur.alpha > 0)) {
      rep.alpha_positive_pass = false;
      rep.failures.push_back("alpha <= 0 at k = " + std::to_string(cur.k));
    }
    if (!(cur.q_value > Scalar(1e-20))) continue;
    auto& r = rep.record(cur.k);
    r.q_ratio = nxt.q_value / cur.q_value;
    r.bound = bound;
    rep.worst_contraction_excess = std::max(rep.worst_contraction_excess, r.q_ratio - bound);
    if (!(r.q_ratio <= bound + Scalar(1e-8))) {
      rep.contraction_pass = false;
      rep.failures.push_back("Q ratio " + std::to_string(r.q_ratio) + " exceeds 1 - c0 at k = " +
                             std::to_string(cur.k));
    }
    if (!(r.q_ratio >= 0 && r.q_ratio <= Scalar(1) + Scalar(1e-12))) {
      rep.ratio_range_pass = false;
      rep.failures.push_back("Q ratio outside [0, 1] at k = " + std::to_string(cur.k));
    }
  }
  return rep;
}

/// Geometric error bound |B e^x_k - C e^y_k| <= |B e^x_0 - C e^y_0| sqrt(1 - c0)^k.
///
/// With recorded iterates the left side is formed from the errors against the
/// dense solution, the identity |B e^x_k - C e^y_k| = |d_k| is checked, and
/// coercivity of S is evaluated along every d_k. Without iterates the left side is
/// taken as |d_k| from the records and only the bound is checked.
template <typename Scalar>
TheoremReport<Scalar> verify_error_bound(
    const ConvergenceHistory<Scalar>& history, const SaddleSystem<Scalar>& sys,
    const std::pair<VectorX<Scalar>, VectorX<Scalar>>& dense_solution,
    const SpectralBounds<Scalar>& bounds, const DenseLimits& limits = {}) {
  TheoremReport<Scalar> rep;
  rep.c0 = bounds.c0;
  rep.error_bound_pass = true;
  const auto& recs = history.records;
  const bool have_iterates = history.x_iterates.size() == recs.size() && !recs.empty();
  if (have_iterates) {
    rep.identity_pass = true;
    rep.coercivity_pass = true;
  }
  const Scalar rate = std::sqrt(std::max(Scalar(0), Scalar(1) - bounds.c0));
  std::optional<MatrixX<Scalar>> s;
  if (have_iterates) s = form_dense_schur(sys, limits);
  const Scalar coercivity_scale = bounds.beta / (bounds.gamma * bounds.gamma);

  Scalar base = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto& r = rep.record(recs[i].k);
    Scalar lhs = recs[i].d_norm;
    if (have_iterates) {
      const VectorX<Scalar> ex = history.x_iterates[i] - dense_solution.first;
      const VectorX<Scalar> ey = history.y_iterates[i] - dense_solution.second;
      lhs = norm2(VectorX<Scalar>(spmv(sys.B, ex) - spmv(sys.C, ey)));
      const Scalar dn = recs[i].d_norm;
      const Scalar err = dn > 0 ? std::abs(lhs - dn) / dn : std::abs(lhs);
      r.identity_rel_err = err;
      rep.worst_identity_err = std::max(rep.worst_identity_err, err);
      if (!(err <= Scalar(1e-8))) {
        rep.identity_pass = false;
        rep.failures.push_back("error identity off by " + std::to_string(err) + " at k = " +
                               std::to_string(recs[i].k));
      }
      const VectorX<Scalar> d = spmv(sys.B, history.x_iterates[i]) -
                                spmv(sys.C, history.y_iterates[i]) - sys.h;
      if (d.squaredNorm() > 0) {
        r.coercivity_lhs = d.dot(*s * d);
        r.coercivity_rhs = coercivity_scale * d.squaredNorm();
        if (!(r.coercivity_lhs >= (Scalar(1) - Scalar(1e-8)) * r.coercivity_rhs)) {
          rep.coercivity_pass = false;
          rep.failures.push_back("coercivity bound fails along d at k = " + std::to_string(recs[i].k));
        }
      }
    }
    if (i == 0) base = lhs;
    r.error_lhs = lhs;
    r.error_rhs = base * std::pow(rate, Scalar(recs[i].k));
    if (r.error_rhs > 0)
      rep.worst_error_bound_ratio = std::max(rep.worst_error_bound_ratio, lhs / r.error_rhs);
    if (!(lhs <= r.error_rhs * (Scalar(1) + Scalar(1e-8)))) {
      rep.error_bound_pass = false;
      rep.failures.push_back("error bound violated at k = " + std::to_string(recs[i].k));
    }
  }
  return rep;
}

template <typename Scalar>
struct LbbResult {
  Scalar c_estimate = 0;  ///< lambda_min(B A_s^{-1} B^T)
  bool pass = false;      ///< c_estimate > 1e-10
  Scalar worst_probe_ratio = std::numeric_limits<Scalar>::infinity();
};

/// Inf-sup constant of B against A_s, plus `trials` random probes of
/// (B A_s^{-1} B^T v, v) / |v|^2 that must not undercut it.
template <typename Scalar>
LbbResult<Scalar> verify_lbb(const SaddleSystem<Scalar>& sys, Index trials,
                             std::uint64_t seed = 1, const DenseLimits& limits = {}) {
  detail::require_schur_size(sys, limits);
  const MatrixX<Scalar> a = to_dense(sys.A, limits.max_entries);
  const MatrixX<Scalar> b = to_dense(sys.B, limits.max_entries);
  const MatrixX<Scalar> as = Scalar(0.5) * (a + a.transpose());
  const Eigen::LLT<MatrixX<Scalar>> llt(as);
  if (llt.info() != Eigen::Success) throw HypothesisError("A_s is not positive definite");
  MatrixX<Scalar> g = detail::congruence(b, llt);
  g = Scalar(0.5) * (g + g.transpose()).eval();
  LbbResult<Scalar> out;
  out.c_estimate = detail::min_eigenvalue(g);
  out.pass = out.c_estimate > Scalar(1e-10);
  Rng rng(seed, 0x1bb);
  for (Index t = 0; t < trials; ++t) {
    const VectorX<Scalar> v = random_unit<Scalar>(rng, sys.m());
    out.worst_probe_ratio = std::min(out.worst_probe_ratio, v.dot(g * v));
  }
  if (trials > 0 && out.worst_probe_ratio < out.c_estimate * (Scalar(1) - Scalar(1e-8)))
    out.pass = false;
  return out;
}

struct ConditionOptions {
  Index max_dim = 4000;
  Index max_iterations = 300;
  double rel_change_tol = 1e-7;
  std::uint64_t seed = 7;
};

/// 2-norm condition number estimate: power iteration on M^T M for sigma_max and
/// inverse iteration through the sparse LU of M for sigma_min. Reporting only.
/// Returns +infinity when M is singular to working precision.
template <typename Scalar>
Scalar condition_estimate(const SparseMatrix<Scalar>& m, const ConditionOptions& opts = {}) {
  if (m.rows() != m.cols()) throw DimensionError("condition_estimate: matrix must be square");
  if (m.rows() > opts.max_dim)
    throw DenseLimitError("condition_estimate: dimension " + std::to_string(m.rows()) +
                          " exceeds the budget " + std::to_string(opts.max_dim));
  const Index n = m.rows();
  if (n == 0) return Scalar(1);
  LUFactors<Scalar> f;
  try {
    f = lu_factor(m);
  } catch (const SingularMatrixError&) {
    return std::numeric_limits<Scalar>::infinity();
  }

  // Returns the converged Rayleigh quotient of v -> op(v) (symmetric PSD op).
  auto power = [&](auto&& op) {
    Rng rng(opts.seed, 0xc0d);
    VectorX<Scalar> v = random_unit<Scalar>(rng, n);
    Scalar lambda = 0;
    for (Index it = 0; it < opts.max_iterations; ++it) {
      VectorX<Scalar> w = op(v);
      const Scalar next = v.dot(w);
      const Scalar wn = w.norm();
      if (!(wn > 0) || !std::isfinite(wn)) return next;
      v = w / wn;
      const bool done = it > 0 && std::abs(next - lambda) <= Scalar(opts.rel_change_tol) * next;
      lambda = next;
      if (done) break;
    }
    return lambda;
  };

  const Scalar smax2 = power([&](const VectorX<Scalar>& v) {
    return VectorX<Scalar>(spmv_transpose(m, VectorX<Scalar>(spmv(m, v))));
  });
  const Scalar inv_smin2 = power([&](const VectorX<Scalar>& v) {
    return VectorX<Scalar>(lu_solve(f, VectorX<Scalar>(lu_solve_transpose(f, v))));
  });
  if (!std::isfinite(inv_smin2)) return std::numeric_limits<Scalar>::infinity();
  return std::sqrt(smax2 * inv_smin2);
}

}  // namespace uzawa
