#include "uzawa/problem_gen.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "uzawa/lu.hpp"
#include "uzawa/random.hpp"

namespace uzawa {

namespace {

constexpr Index kDenseEigenLimit = 2000;
constexpr int kRankAttempts = 5;

// Stream tags, one per generated quantity.
enum : std::uint64_t { kTagR = 1, kTagG = 2, kTagRhs = 4, kTagForcing = 5, kTagB = 16 };

Eigen::MatrixXd normal_matrix(Rng& rng, Index rows, Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Lower bound on lambda_min of a symmetric matrix from Gershgorin discs.
double gershgorin_min(const Eigen::MatrixXd& sym) {
  double lo = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < sym.rows(); ++i) {
    const double off = sym.row(i).cwiseAbs().sum() - std::abs(sym(i, i));
    lo = std::min(lo, sym(i, i) - off);
  }
  return lo;
}

double lambda_min_lower(const Eigen::MatrixXd& sym) {
  if (sym.rows() <= kDenseEigenLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
  return gershgorin_min(sym);
}

}  // namespace

SaddleSystem<double> gen_linear_vi(const VIGenConfig& cfg) {
  const Index n = cfg.n, m = cfg.rows();
  if (m < 1 || n < m)
    throw Error("VI generator needs n >= m >= 1 (n = " + std::to_string(n) +
                ", m = " + std::to_string(m) + ")");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  Rng r_rng(cfg.seed, kTagR), g_rng(cfg.seed, kTagG);
  const Eigen::MatrixXd r = normal_matrix(r_rng, n, n, scale);
  const Eigen::MatrixXd g = normal_matrix(g_rng, n, n, scale);
  Eigen::MatrixXd a = r + cfg.skew_scale * 0.5 * (g - g.transpose());

  const Eigen::MatrixXd rs = 0.5 * (r + r.transpose());
  const double lam = lambda_min_lower(rs);
  double shift;
  if (cfg.shift) {
    shift = *cfg.shift;
    if (!(lam + shift > 0))
      throw HypothesisError("VI generator: shift " + std::to_string(shift) +
                            " does not make A_s positive definite (lower bound " +
                            std::to_string(lam + shift) + ")");
  } else {
    shift = std::max(0.0, 0.1 - lam + 1e-12);
  }
  a.diagonal().array() += shift;

  SparseMatrix<double> b_sparse;
  bool full_rank = false;
  for (int attempt = 0; attempt < kRankAttempts && !full_rank; ++attempt) {
    Rng b_rng(cfg.seed, kTagB + static_cast<std::uint64_t>(attempt));
    const Eigen::MatrixXd b = normal_matrix(b_rng, m, n, scale);
    try {
      lu_factor(from_dense(Eigen::MatrixXd(b * b.transpose())));
      full_rank = true;
      b_sparse = from_dense(b);
    } catch (const SingularMatrixError&) {
    }
  }
  if (!full_rank) throw Error("VI generator: could not draw a full row rank B");

  Rng rhs_rng(cfg.seed, kTagRhs);
  VectorX<double> f = random_normal<double>(rhs_rng, n);
  VectorX<double> h = random_normal<double>(rhs_rng, m);
  return make_saddle_system(from_dense(a), std::move(b_sparse), SparseMatrix<double>(m, m),
                            std::move(f), std::move(h));
}

std::string to_string(WindField w) {
  return w == WindField::constant ? "constant" : "recirculating";
}

WindField parse_wind(const std::string& name) {
  if (name == "constant") return WindField::constant;
  if (name == "recirculating") return WindField::recirculating;
  throw Error("unknown wind field '" + name + "' (expected constant or recirculating)");
}

namespace {

void check_oseen(const OseenGenConfig& cfg) {
  if (cfg.grid_nx < 4 || cfg.grid_ny < 4) throw Error("Oseen grid must be at least 4 x 4");
  if (!(cfg.viscosity > 0)) throw Error("viscosity must be positive");
  if (!(cfg.stabilization >= 0)) throw Error("stabilization must be non-negative");
}

struct MacGrid {
  Index nx, ny;
  double hx, hy;
  Index nu, nv;

  explicit MacGrid(const OseenGenConfig& cfg)
      : nx(cfg.grid_nx),
        ny(cfg.grid_ny),
        hx(cfg.width() / double(cfg.grid_nx)),
        hy(cfg.height() / double(cfg.grid_ny)),
        nu((cfg.grid_nx - 1) * cfg.grid_ny),
        nv(cfg.grid_nx * cfg.grid_ny) {}

  // u lives on interior vertical faces x = i hx, i = 1..nx-1; v on horizontal
  // faces y = j hy, j = 1..ny, the top row sitting on the open edge.
  Index u(Index i, Index j) const { return j * (nx - 1) + (i - 1); }
  Index v(Index i, Index j) const { return nu + (j - 1) * nx + i; }
  Index cell(Index i, Index j) const { return j * nx + i; }
};

std::pair<double, double> wind_at(const OseenGenConfig& cfg, double x, double y) {
  if (cfg.wind == WindField::constant) return {0.0, cfg.wind_scale};
  const double pi = std::numbers::pi;
  return {cfg.wind_scale * std::sin(pi * x) * std::cos(pi * y),
          -cfg.wind_scale * std::cos(pi * x) * std::sin(pi * y)};
}

}  // namespace

Index oseen_u_count(const OseenGenConfig& cfg) { return MacGrid(cfg).nu; }
Index oseen_v_count(const OseenGenConfig& cfg) { return MacGrid(cfg).nv; }

SparseMatrix<double> oseen_divergence(const OseenGenConfig& cfg) {
  check_oseen(cfg);
  const MacGrid g(cfg);
  std::vector<Triplet<double>> t;
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      const Index c = g.cell(i, j);
      if (i + 1 <= g.nx - 1) t.push_back({c, g.u(i + 1, j), 1.0 / g.hx});
      if (i >= 1) t.push_back({c, g.u(i, j), -1.0 / g.hx});
      t.push_back({c, g.v(i, j + 1), 1.0 / g.hy});
      if (j >= 1) t.push_back({c, g.v(i, j), -1.0 / g.hy});
    }
  }
  return from_triplets(g.nx * g.ny, g.nu + g.nv, t);
}

SaddleSystem<double> gen_oseen(const OseenGenConfig& cfg) {
  check_oseen(cfg);
  const MacGrid g(cfg);
  const double nu = cfg.viscosity;
  const double area = g.hx * g.hy;
  const double dxx = nu / (g.hx * g.hx), dyy = nu / (g.hy * g.hy);
  const double cx = 0.5 / g.hx, cy = 0.5 / g.hy;
  const Index n = g.nu + g.nv;

  std::vector<Triplet<double>> at;
  at.reserve(static_cast<std::size_t>(5 * n));
  // Side walls hold u = 0 on the face itself. Tangential ghosts are reflected
  // at the bottom wall (no slip) and mirrored at the open top (zero normal
  // derivative). Convection drops neighbours outside the domain.
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 1; i < g.nx; ++i) {
      const Index row = g.u(i, j);
      const auto [wx, wy] = wind_at(cfg, i * g.hx, (j + 0.5) * g.hy);
      double diag = 2.0 * dxx + 2.0 * dyy;
      if (i + 1 <= g.nx - 1) at.push_back({row, g.u(i + 1, j), area * (-dxx + wx * cx)});
      if (i - 1 >= 1) at.push_back({row, g.u(i - 1, j), area * (-dxx - wx * cx)});
      if (j + 1 <= g.ny - 1)
        at.push_back({row, g.u(i, j + 1), area * (-dyy + wy * cy)});
      else
        diag -= dyy;
      if (j - 1 >= 0)
        at.push_back({row, g.u(i, j - 1), area * (-dyy - wy * cy)});
      else
        diag += dyy;
      at.push_back({row, row, area * diag});
    }
  }
  for (Index j = 1; j <= g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      const Index row = g.v(i, j);
      const auto [wx, wy] = wind_at(cfg, (i + 0.5) * g.hx, j * g.hy);
      double diag = 2.0 * dxx + 2.0 * dyy;
      if (j + 1 <= g.ny)
        at.push_back({row, g.v(i, j + 1), area * (-dyy + wy * cy)});
      else
        diag -= dyy;
      if (j - 1 >= 1) at.push_back({row, g.v(i, j - 1), area * (-dyy - wy * cy)});
      if (i + 1 <= g.nx - 1)
        at.push_back({row, g.v(i + 1, j), area * (-dxx + wx * cx)});
      else
        diag += dxx;
      if (i - 1 >= 0)
        at.push_back({row, g.v(i - 1, j), area * (-dxx - wx * cx)});
      else
        diag += dxx;
      at.push_back({row, row, area * diag});
    }
  }
  SparseMatrix<double> a = from_triplets(n, n, at);

  {
    // Positive definiteness of the symmetric part through a sparse Cholesky.
    std::vector<Eigen::Triplet<double>> st;
    for (const auto& e : at) {
      st.emplace_back(e.row, e.col, 0.5 * e.value);
      st.emplace_back(e.col, e.row, 0.5 * e.value);
    }
    Eigen::SparseMatrix<double> as(n, n);
    as.setFromTriplets(st.begin(), st.end());
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(as);
    if (llt.info() != Eigen::Success)
      throw HypothesisError("Oseen generator: A_s is indefinite at nu = " + std::to_string(nu) +
                            " on a " + std::to_string(g.nx) + "x" + std::to_string(g.ny) +
                            " grid (convection dominated); use a larger viscosity or a finer grid");
  }

  // Pressure of cell 0 is pinned: its row of B and row/column of C are dropped.
  const SparseMatrix<double> div = oseen_divergence(cfg);
  const Index m = g.nx * g.ny - 1;
  std::vector<Triplet<double>> bt;
  for (const auto& e : to_triplets(div))
    if (e.row > 0) bt.push_back({e.row - 1, e.col, -area * e.value});
  SparseMatrix<double> b = from_triplets(m, n, bt);

  std::vector<Triplet<double>> ct;
  if (cfg.stabilization > 0) {
    const double w = cfg.stabilization * area;
    auto edge = [&](Index c1, Index c2) {
      for (const auto& [r, c, v] : {Triplet<double>{c1, c1, w}, Triplet<double>{c2, c2, w},
                                    Triplet<double>{c1, c2, -w}, Triplet<double>{c2, c1, -w}})
        if (r > 0 && c > 0) ct.push_back({r - 1, c - 1, v});
    };
    for (Index j = 0; j < g.ny; ++j)
      for (Index i = 0; i < g.nx; ++i) {
        if (i + 1 < g.nx) edge(g.cell(i, j), g.cell(i + 1, j));
        if (j + 1 < g.ny) edge(g.cell(i, j), g.cell(i, j + 1));
      }
  }
  SparseMatrix<double> c = from_triplets(m, m, ct);

  Rng rng(cfg.seed, kTagForcing);
  const double two_pi = 2.0 * std::numbers::pi;
  double amp[3], phase[4];
  for (auto& x : amp) x = 0.5 + rng.uniform();
  for (auto& x : phase) x = two_pi * rng.uniform();
  const double wdt = cfg.width(), hgt = cfg.height();
  VectorX<double> f(n);
  for (Index j = 0; j < g.ny; ++j)
    for (Index i = 1; i < g.nx; ++i) {
      const double x = i * g.hx, y = (j + 0.5) * g.hy;
      f[g.u(i, j)] = area * (amp[0] * std::sin(two_pi * x / wdt + phase[0]) *
                                 std::cos(two_pi * y / hgt + phase[1]) +
                             amp[2] * std::sin(two_pi * y / hgt));
    }
  for (Index j = 1; j <= g.ny; ++j)
    for (Index i = 0; i < g.nx; ++i) {
      const double x = (i + 0.5) * g.hx, y = j * g.hy;
      f[g.v(i, j)] = area * amp[1] * std::cos(two_pi * x / wdt + phase[2]) *
                     std::sin(two_pi * y / hgt + phase[3]);
    }

  return make_saddle_system(std::move(a), std::move(b), std::move(c), std::move(f),
                            VectorX<double>(VectorX<double>::Zero(m)));
}

}  // namespace uzawa
