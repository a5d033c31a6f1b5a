#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uzawa/matrix_market.hpp"
#include "uzawa/problem_gen.hpp"
#include "uzawa/solvers.hpp"

namespace uzawa::cli {

/// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNotConverged = 2,
  kBreakdown = 3,
  kTheoremViolation = 4,
};

struct ProblemSource {
  enum class Kind { bundle, vi, oseen } kind = Kind::vi;
  std::filesystem::path bundle;
  VIGenConfig vi;
  OseenGenConfig oseen;
  /// Text the source was parsed from; used as the problem name.
  std::string label;
};

/// Parses `n=200,m=100,seed=1[,shift=..][,skew=..]`.
ProblemSource parse_vi_source(const std::string& text);
/// Parses `nx=16,ny=48,nu=0.05,stab=0.25,wind=constant[,speed=..][,seed=..]`.
ProblemSource parse_oseen_source(const std::string& text);

SaddleSystem<double> load_system(const ProblemSource& src, BundleManifest* meta = nullptr);

struct RunSpec {
  enum class Command { gen, solve, verify, sweep } command = Command::solve;
  std::vector<ProblemSource> sources;
  SolverConfig<double> solver;
  std::filesystem::path out_dir = "uzawa_out";
  /// Seed of the uniform random starting multiplier y0.
  std::uint64_t seed = 0;
  bool force = false;
  /// verify only: check this history.csv instead of running the solver.
  std::optional<std::filesystem::path> history;
};

/// Starting point used by every command: y0 uniform on [0, 1)^m.
VectorX<double> default_start(Index m, std::uint64_t seed);

void write_history_csv(std::ostream& out, const ConvergenceHistory<double>& h);
ConvergenceHistory<double> read_history_csv(const std::filesystem::path& path);

int cmd_gen(const RunSpec& spec, std::ostream& out, std::ostream& err);
int cmd_solve(const RunSpec& spec, std::ostream& out, std::ostream& err);
int cmd_verify(const RunSpec& spec, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunSpec& spec, std::ostream& out, std::ostream& err);

/// Full command line entry point (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uzawa::cli
