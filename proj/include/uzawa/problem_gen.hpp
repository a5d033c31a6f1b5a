#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "uzawa/saddle_system.hpp"

namespace uzawa {

/// Random equality-constrained linear variational inequality
/// F(x) = A x - f on D = {x : B x = h}. Its KKT system is the saddle system
/// with C = 0 and y = -lambda (lambda the multiplier).
struct VIGenConfig {
  Index n = 200;
  /// Defaults to n / 2.
  std::optional<Index> m;
  std::uint64_t seed = 1;
  /// Added to the diagonal of A. Unset: the smallest shift giving
  /// lambda_min(A_s) >= 0.1.
  std::optional<double> shift;
  /// Weight of the skew-symmetric part of A.
  double skew_scale = 1.0;

  Index rows() const { return m.value_or(n / 2); }
};

/// A = R + skew_scale K + shift I with R ~ N(0, 1/n) entrywise and
/// K = (G - G^T)/2, G ~ N(0, 1/n); B dense N(0, 1/n) with full row rank;
/// C = 0; f and h standard normal.
///
/// The default shift uses the exact lambda_min(R_s) for n <= 2000 and a
/// Gershgorin bound above that. Throws HypothesisError when an explicit shift
/// leaves A_s indefinite, and Error when five draws of B all fail the rank test.
SaddleSystem<double> gen_linear_vi(const VIGenConfig& cfg);

enum class WindField { constant, recirculating };

std::string to_string(WindField w);
WindField parse_wind(const std::string& name);

/// Oseen problem -nu Lap u + (w . grad) u + grad p = f, div u = 0 with no-slip
/// walls on the left, right and bottom edges and a traction-free outflow on
/// the top edge, discretized on a MAC staggered grid.
struct OseenGenConfig {
  Index grid_nx = 16;
  Index grid_ny = 16;
  double viscosity = 0.1;
  /// Weight of the pressure-jump stabilization block C.
  double stabilization = 0.0;
  WindField wind = WindField::recirculating;
  /// Multiplies the wind field; 0 gives Stokes.
  double wind_scale = 1.0;
  std::uint64_t seed = 1;

  /// Domain extent: the unit square for a recirculating wind, a 1 x 3 channel
  /// (long side along y, wind along the channel) for a constant wind.
  double width() const { return 1.0; }
  double height() const { return wind == WindField::constant ? 3.0 : 1.0; }
};

/// Assembles the stabilized MAC Oseen system scaled by the cell area:
///
///  - A: nu * (5-point vector Laplacian) + central convection by the frozen
///    wind. u lives on interior vertical faces, v on every horizontal face
///    above the bottom wall (the top row is the open edge). Tangential ghosts
///    are reflected at the bottom wall and mirrored at the top;
///  - B: minus the discrete divergence with the pressure of cell 0 removed;
///  - C: stabilization * area * (graph Laplacian of pressure jumps across
///    interior cell edges), pinned cell removed;
///  - f: smooth forcing with seeded amplitudes and phases, h = 0.
///
/// The constant wind gives an exactly skew convection block. Throws
/// HypothesisError when A_s is not positive definite (convection dominated).
SaddleSystem<double> gen_oseen(const OseenGenConfig& cfg);

/// Full (unpinned) discrete divergence D of the MAC grid, nx*ny rows. It has
/// full row rank because flux can leave through the top edge.
SparseMatrix<double> oseen_divergence(const OseenGenConfig& cfg);

/// Velocity unknown counts (u on vertical faces, v on horizontal faces).
Index oseen_u_count(const OseenGenConfig& cfg);
Index oseen_v_count(const OseenGenConfig& cfg);

}  // namespace uzawa
