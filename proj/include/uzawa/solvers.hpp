#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uzawa/saddle_system.hpp"

namespace uzawa {

enum class TerminationReason { converged, stalled, max_iterations, breakdown };

inline std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::converged: return "converged";
    case TerminationReason::stalled: return "stalled";
    case TerminationReason::max_iterations: return "max_iterations";
    case TerminationReason::breakdown: return "breakdown";
  }
  return "unknown";
}

/// p_k^T p_k vanished while d_k did not.
class BreakdownError : public Error {
 public:
  BreakdownError(const std::string& what, Index k) : Error(what), k_(k) {}
  Index iteration() const { return k_; }

 private:
  Index k_;
};

template <typename Scalar>
struct SolverConfig {
  Scalar rel_residual_tol = Scalar(1e-6);
  /// Bound on |ratio_k - ratio_{k-1}| for consecutive residual ratios.
  Scalar ratio_stall_tol = Scalar(1e-7);
  Index max_iterations = 2000;
  /// Presence selects the classical fixed-step iteration.
  std::optional<Scalar> fixed_alpha;
  /// Keep every record; otherwise only the trailing window needed to stop.
  bool record_history = true;
  /// Also keep x_k and y_k for every k (post-hoc error analysis).
  bool record_iterates = false;
  /// Consecutive flat iterations (see check_stop) before a run is declared
  /// stalled.
  Index stall_window = 10;

  void validate() const {
    if (!(rel_residual_tol > 0) || !(ratio_stall_tol > 0))
      throw Error("solver tolerances must be positive");
    if (max_iterations < 1) throw Error("max_iterations must be at least 1");
    if (fixed_alpha && !(*fixed_alpha > 0)) throw Error("fixed stepsize must be positive");
    if (stall_window < 1) throw Error("stall window must be at least 1");
  }
};

/// Vectors and scalars of one iterate. `q`, `p` and `alpha` belong to the step
/// that produced this state (empty / zero for the initial state).
template <typename Scalar>
struct IterationState {
  Index k = 0;
  VectorX<Scalar> x;
  VectorX<Scalar> y;
  VectorX<Scalar> d;  ///< B x_k - C y_k - h, equal to b - S y_k
  VectorX<Scalar> q;
  VectorX<Scalar> p;
  Scalar alpha = Scalar(0);
  Scalar residual_norm = Scalar(0);
  Scalar residual_inf = Scalar(0);
  Scalar initial_residual_norm = Scalar(0);
  Scalar residual_ratio = Scalar(0);
  /// d was exactly zero on entry to the last step, nothing moved.
  bool at_fixed_point = false;
};

template <typename Scalar>
struct IterationRecord {
  Index k = 0;
  Scalar residual_norm = Scalar(0);
  Scalar residual_inf = Scalar(0);
  Scalar residual_ratio = Scalar(0);
  /// Stepsize taken from iterate k (0 when no step followed).
  Scalar alpha = Scalar(0);
  Scalar d_norm = Scalar(0);
  /// Q(y_k) = 1/2 |S y_k - b|^2 = 1/2 |d_k|^2
  Scalar q_value = Scalar(0);
};

template <typename Scalar>
class ConvergenceHistory {
 public:
  std::vector<IterationRecord<Scalar>> records;
  std::vector<VectorX<Scalar>> x_iterates;
  std::vector<VectorX<Scalar>> y_iterates;

  const std::optional<TerminationReason>& termination_reason() const { return reason_; }
  void set_termination(TerminationReason r) {
    if (reason_) throw Error("termination reason already set");
    reason_ = r;
  }
  /// Number of steps taken.
  Index iterations() const { return records.empty() ? 0 : records.back().k; }

 private:
  std::optional<TerminationReason> reason_;
};

template <typename Scalar>
struct SolveResult {
  VectorX<Scalar> x;
  VectorX<Scalar> y;
  ConvergenceHistory<Scalar> history;
};

namespace detail {

template <typename Scalar>
void fill_residual(const SaddleSystem<Scalar>& sys, IterationState<Scalar>& s) {
  auto r = residual(sys, s.x, s.y);
  s.residual_norm = r.norm();
  s.residual_inf = r.inf_norm();
  s.d = std::move(r.bottom);
  if (s.k == 0) s.initial_residual_norm = s.residual_norm;
  s.residual_ratio =
      s.initial_residual_norm > 0 ? s.residual_norm / s.initial_residual_norm : Scalar(0);
}

template <typename Scalar>
IterationRecord<Scalar> make_record(const IterationState<Scalar>& s) {
  IterationRecord<Scalar> r;
  r.k = s.k;
  r.residual_norm = s.residual_norm;
  r.residual_inf = s.residual_inf;
  r.residual_ratio = s.residual_ratio;
  r.d_norm = norm2(s.d);
  r.q_value = Scalar(0.5) * dot(s.d, s.d);
  return r;
}

template <typename Scalar>
void push_record(ConvergenceHistory<Scalar>& h, const IterationState<Scalar>& s,
                 const SolverConfig<Scalar>& cfg) {
  if (!h.records.empty()) h.records.back().alpha = s.alpha;
  h.records.push_back(make_record(s));
  if (!cfg.record_history) {
    const auto keep = static_cast<std::size_t>(cfg.stall_window + 1);
    if (h.records.size() > keep) h.records.erase(h.records.begin());
  }
  if (cfg.record_iterates) {
    h.x_iterates.push_back(s.x);
    h.y_iterates.push_back(s.y);
  }
}

}  // namespace detail

/// x_0 = A^{-1}(f - B^T y_0) and its residual.
template <typename Scalar>
IterationState<Scalar> initial_state(const SchurOperator<Scalar>& op, const VectorX<Scalar>& y0) {
  const auto& sys = op.system();
  if (y0.size() != sys.m()) throw DimensionError("initial y has the wrong length");
  IterationState<Scalar> s;
  s.y = y0;
  s.x = lu_solve(op.factors(), VectorX<Scalar>(sys.f - spmv_transpose(sys.B, y0)));
  detail::fill_residual(sys, s);
  return s;
}

/// One exact-line-search step:
///
///     A q = B^T d,  p = B q + C d,  alpha = d.p / p.p,
///     y <- y + alpha d,  x <- x - alpha q
///
/// d of the new state is recomputed from the updated iterates.
template <typename Scalar>
IterationState<Scalar> step_exact(const IterationState<Scalar>& state,
                                  const SchurOperator<Scalar>& op) {
  const auto& sys = op.system();
  IterationState<Scalar> next = state;
  if (state.d.size() != sys.m()) throw DimensionError("step_exact: state does not match system");
  if ((state.d.array() == Scalar(0)).all()) {
    next.at_fixed_point = true;
    return next;
  }
  next.q = lu_solve(op.factors(), spmv_transpose(sys.B, state.d));
  next.p = spmv(sys.B, next.q) + spmv(sys.C, state.d);
  const Scalar pp = dot(next.p, next.p);
  if (!(pp >= Scalar(1e-300)))
    throw BreakdownError("breakdown: p^T p vanished at iteration " + std::to_string(state.k),
                         state.k);
  next.alpha = dot(state.d, next.p) / pp;
  next.y = state.y + next.alpha * state.d;
  next.x = state.x - next.alpha * next.q;
  next.k = state.k + 1;
  next.at_fixed_point = false;
  detail::fill_residual(sys, next);
  return next;
}

/// Stopping test on the latest record.
///
/// Converged needs both ratio_k < tol and |ratio_k - ratio_{k-1}| < stall
/// tol, so it is never reported from a single record. Stalled means that for
/// `stall_window` consecutive iterations the ratio stayed above tol while its
/// change was below stall tol both absolutely and relative to the ratio
/// itself. The relative test keeps slow but steady linear convergence (which
/// moves the ratio by less than 1e-7 per step once it nears 1e-6) from being
/// reported as a plateau. A non-finite residual counts as breakdown.
template <typename Scalar>
std::optional<TerminationReason> check_stop(const ConvergenceHistory<Scalar>& history,
                                            const SolverConfig<Scalar>& cfg) {
  const auto& recs = history.records;
  if (recs.empty()) throw Error("check_stop: empty history");
  const auto& last = recs.back();
  if (!std::isfinite(last.residual_ratio) || !std::isfinite(last.q_value))
    return TerminationReason::breakdown;
  if (recs.size() >= 2) {
    const Scalar change = std::abs(last.residual_ratio - recs[recs.size() - 2].residual_ratio);
    if (last.residual_ratio < cfg.rel_residual_tol && change < cfg.ratio_stall_tol)
      return TerminationReason::converged;
  }
  if (last.k >= cfg.max_iterations) return TerminationReason::max_iterations;
  Index flat = 0;
  for (std::size_t i = recs.size() - 1; i >= 1; --i) {
    const Scalar change = std::abs(recs[i].residual_ratio - recs[i - 1].residual_ratio);
    const Scalar prev = recs[i - 1].residual_ratio;
    if (!(change < cfg.ratio_stall_tol && change < cfg.ratio_stall_tol * prev &&
          recs[i].residual_ratio >= cfg.rel_residual_tol))
      break;
    if (++flat >= cfg.stall_window) return TerminationReason::stalled;
  }
  return std::nullopt;
}

/// Uzawa iteration with the exact line-search stepsize on the least-squares
/// objective Q(y) = 1/2 |S y - b|^2.
template <typename Scalar>
SolveResult<Scalar> uzawa_exact_solve(const SaddleSystem<Scalar>& sys, const VectorX<Scalar>& y0,
                                      const SolverConfig<Scalar>& cfg) {
  cfg.validate();
  const SchurOperator<Scalar> op(sys);
  SolveResult<Scalar> out;
  auto& hist = out.history;
  IterationState<Scalar> state = initial_state(op, y0);
  detail::push_record(hist, state, cfg);

  if (state.initial_residual_norm == Scalar(0) || (state.d.array() == Scalar(0)).all()) {
    hist.set_termination(TerminationReason::converged);
  } else {
    while (true) {
      if (const auto reason = check_stop(hist, cfg)) {
        hist.set_termination(*reason);
        break;
      }
      try {
        state = step_exact(state, op);
      } catch (const BreakdownError&) {
        hist.set_termination(TerminationReason::breakdown);
        break;
      }
      if (state.at_fixed_point) {
        hist.set_termination(TerminationReason::converged);
        break;
      }
      detail::push_record(hist, state, cfg);
      if (state.residual_norm == Scalar(0)) {
        hist.set_termination(TerminationReason::converged);
        break;
      }
    }
  }
  out.x = std::move(state.x);
  out.y = std::move(state.y);
  return out;
}

/// Classical Uzawa: A x_k = f - B^T y_k, y_{k+1} = y_k + alpha (B x_k - C y_k - h)
/// with the fixed stepsize from the configuration.
template <typename Scalar>
SolveResult<Scalar> uzawa_classical_solve(const SaddleSystem<Scalar>& sys,
                                          const VectorX<Scalar>& y0,
                                          const SolverConfig<Scalar>& cfg) {
  cfg.validate();
  if (!cfg.fixed_alpha) throw Error("classical Uzawa needs a fixed stepsize");
  const Scalar alpha = *cfg.fixed_alpha;
  const SchurOperator<Scalar> op(sys);
  SolveResult<Scalar> out;
  auto& hist = out.history;
  IterationState<Scalar> state = initial_state(op, y0);
  detail::push_record(hist, state, cfg);

  if (state.initial_residual_norm == Scalar(0)) {
    hist.set_termination(TerminationReason::converged);
  } else {
    while (true) {
      if (const auto reason = check_stop(hist, cfg)) {
        hist.set_termination(*reason);
        break;
      }
      IterationState<Scalar> next;
      next.k = state.k + 1;
      next.alpha = alpha;
      next.initial_residual_norm = state.initial_residual_norm;
      next.y = state.y + alpha * state.d;
      next.x = lu_solve(op.factors(), VectorX<Scalar>(sys.f - spmv_transpose(sys.B, next.y)));
      detail::fill_residual(sys, next);
      state = std::move(next);
      detail::push_record(hist, state, cfg);
      if (state.residual_norm == Scalar(0)) {
        hist.set_termination(TerminationReason::converged);
        break;
      }
    }
  }
  out.x = std::move(state.x);
  out.y = std::move(state.y);
  return out;
}

/// Dispatches on the presence of a fixed stepsize.
template <typename Scalar>
SolveResult<Scalar> solve(const SaddleSystem<Scalar>& sys, const VectorX<Scalar>& y0,
                          const SolverConfig<Scalar>& cfg) {
  return cfg.fixed_alpha ? uzawa_classical_solve(sys, y0, cfg) : uzawa_exact_solve(sys, y0, cfg);
}

}  // namespace uzawa
