#include "uzawa/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uzawa/analysis.hpp"
#include "uzawa/random.hpp"

namespace uzawa::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

constexpr std::uint64_t kStartTag = 0x57a27;
constexpr Index kVerifyTrials = 100;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

std::vector<std::pair<std::string, std::string>> split_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("expected key=value, got '" + item + "' in '" + text + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw UsageError("invalid value for " + key + ": '" + value + "'");
  return out;
}

}  // namespace

ProblemSource parse_vi_source(const std::string& text) {
  ProblemSource src;
  src.kind = ProblemSource::Kind::vi;
  src.label = "vi:" + text;
  for (const auto& [k, v] : split_pairs(text)) {
    if (k == "n") src.vi.n = parse_number<Index>(k, v);
    else if (k == "m") src.vi.m = parse_number<Index>(k, v);
    else if (k == "seed") src.vi.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "shift") src.vi.shift = parse_number<double>(k, v);
    else if (k == "skew") src.vi.skew_scale = parse_number<double>(k, v);
    else throw UsageError("unknown --gen-vi key '" + k + "'");
  }
  return src;
}

ProblemSource parse_oseen_source(const std::string& text) {
  ProblemSource src;
  src.kind = ProblemSource::Kind::oseen;
  src.label = "oseen:" + text;
  for (const auto& [k, v] : split_pairs(text)) {
    if (k == "nx") src.oseen.grid_nx = parse_number<Index>(k, v);
    else if (k == "ny") src.oseen.grid_ny = parse_number<Index>(k, v);
    else if (k == "nu") src.oseen.viscosity = parse_number<double>(k, v);
    else if (k == "stab") src.oseen.stabilization = parse_number<double>(k, v);
    else if (k == "speed") src.oseen.wind_scale = parse_number<double>(k, v);
    else if (k == "seed") src.oseen.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "wind") {
      try {
        src.oseen.wind = parse_wind(v);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    } else {
      throw UsageError("unknown --gen-oseen key '" + k + "'");
    }
  }
  return src;
}

SaddleSystem<double> load_system(const ProblemSource& src, BundleManifest* meta) {
  switch (src.kind) {
    case ProblemSource::Kind::bundle:
      return read_system(src.bundle, meta);
    case ProblemSource::Kind::vi: {
      auto sys = gen_linear_vi(src.vi);
      if (meta) {
        meta->name = "linear_vi";
        meta->params = {{"n", src.vi.n}, {"m", src.vi.rows()}, {"seed", src.vi.seed},
                        {"skew_scale", src.vi.skew_scale}};
        if (src.vi.shift) meta->params["shift"] = *src.vi.shift;
      }
      return sys;
    }
    case ProblemSource::Kind::oseen: {
      auto sys = gen_oseen(src.oseen);
      if (meta) {
        const auto& c = src.oseen;
        meta->name = "oseen";
        meta->params = {{"nx", c.grid_nx},         {"ny", c.grid_ny},
                        {"nu", c.viscosity},       {"stab", c.stabilization},
                        {"wind", to_string(c.wind)}, {"wind_scale", c.wind_scale},
                        {"seed", c.seed}};
      }
      return sys;
    }
  }
  throw UsageError("unknown problem source");
}

VectorX<double> default_start(Index m, std::uint64_t seed) {
  Rng rng(seed, kStartTag);
  return random_uniform<double>(rng, m);
}

void write_history_csv(std::ostream& out, const ConvergenceHistory<double>& h) {
  out << "k,residual_norm,residual_ratio,alpha,d_norm,Q\n";
  for (const auto& r : h.records)
    out << r.k << ',' << fmt(r.residual_norm) << ',' << fmt(r.residual_ratio) << ','
        << fmt(r.alpha) << ',' << fmt(r.d_norm) << ',' << fmt(r.q_value) << '\n';
}

ConvergenceHistory<double> read_history_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("history not found: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("k,residual_norm,residual_ratio,alpha,d_norm,Q", 0) != 0)
    throw ParseError(path.filename().string() + ": unexpected history header", 1);
  ConvergenceHistory<double> h;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw ParseError(path.filename().string() + ": expected 6 columns", lineno);
    auto real = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw ParseError(path.filename().string() + ": bad number '" + s + "'", lineno);
      }
    };
    IterationRecord<double> r;
    r.k = static_cast<Index>(real(cells[0]));
    r.residual_norm = real(cells[1]);
    r.residual_ratio = real(cells[2]);
    r.alpha = real(cells[3]);
    r.d_norm = real(cells[4]);
    r.q_value = real(cells[5]);
    h.records.push_back(r);
  }
  return h;
}

namespace {

int exit_code(TerminationReason r) {
  switch (r) {
    case TerminationReason::converged:
      return kOk;
    case TerminationReason::stalled:
    case TerminationReason::max_iterations:
      return kNotConverged;
    case TerminationReason::breakdown:
      return kBreakdown;
  }
  return kUsage;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
}

const ProblemSource& single_source(const RunSpec& spec) {
  if (spec.sources.size() != 1)
    throw UsageError("exactly one of --bundle, --gen-vi, --gen-oseen is required");
  return spec.sources.front();
}

json bounds_json(const SpectralBounds<double>& b) {
  return {{"lambda_m", num(b.lambda_m)}, {"norm_A", num(b.norm_A)}, {"gamma", num(b.gamma)},
          {"beta", num(b.beta)},         {"norm_S", num(b.norm_S)}, {"c0", num(b.c0)}};
}

json flag_json(const std::optional<bool>& f) { return f ? json(*f) : json(nullptr); }

json report_json(const TheoremReport<double>& rep) {
  json recs = json::array();
  for (const auto& r : rep.records)
    recs.push_back({{"k", r.k},
                    {"q_ratio", num(r.q_ratio)},
                    {"bound", num(r.bound)},
                    {"coercivity_lhs", num(r.coercivity_lhs)},
                    {"coercivity_rhs", num(r.coercivity_rhs)},
                    {"error_lhs", num(r.error_lhs)},
                    {"error_rhs", num(r.error_rhs)},
                    {"identity_rel_err", num(r.identity_rel_err)}});
  return {{"c0", num(rep.c0)},
          {"contraction_pass", flag_json(rep.contraction_pass)},
          {"ratio_range_pass", flag_json(rep.ratio_range_pass)},
          {"alpha_positive_pass", flag_json(rep.alpha_positive_pass)},
          {"error_bound_pass", flag_json(rep.error_bound_pass)},
          {"identity_pass", flag_json(rep.identity_pass)},
          {"coercivity_pass", flag_json(rep.coercivity_pass)},
          {"worst_contraction_excess", num(rep.worst_contraction_excess)},
          {"worst_error_bound_ratio", num(rep.worst_error_bound_ratio)},
          {"worst_identity_err", num(rep.worst_identity_err)},
          {"failures", rep.failures},
          {"records", recs}};
}

struct FullCheck {
  SpectralBounds<double> bounds;
  CoercivityResult<double> coercivity;
  LbbResult<double> lbb;
  TheoremReport<double> report;

  bool pass() const { return report.all_pass() && coercivity.pass && lbb.pass; }

  json to_json() const {
    json j = report_json(report);
    j["bounds"] = bounds_json(bounds);
    j["coercivity_probe"] = {{"trials", coercivity.trials},
                             {"failures", coercivity.failures},
                             {"worst_margin", num(coercivity.worst_margin)},
                             {"pass", coercivity.pass}};
    j["lbb"] = {{"c_estimate", num(lbb.c_estimate)},
                {"worst_probe", num(lbb.worst_probe_ratio)},
                {"pass", lbb.pass}};
    j["all_pass"] = pass();
    return j;
  }
};

// Throws HypothesisError when the system violates the convergence hypotheses.
FullCheck check_history(const SaddleSystem<double>& sys, const ConvergenceHistory<double>& h,
                        std::uint64_t seed, const DenseLimits& limits) {
  FullCheck out;
  out.bounds = spectral_bounds(sys, limits);
  out.lbb = verify_lbb(sys, kVerifyTrials, seed, limits);
  out.coercivity = verify_coercivity(sys, out.bounds, kVerifyTrials, seed, limits);
  const auto dense = dense_kkt_solve(sys, limits);
  out.report = merge(verify_contraction(h, out.bounds),
                     verify_error_bound(h, sys, dense, out.bounds, limits));
  return out;
}

std::string worst_record(const TheoremReport<double>& rep) {
  const TheoremRecord<double>* worst = nullptr;
  double score = -std::numeric_limits<double>::infinity();
  for (const auto& r : rep.records) {
    double s = -std::numeric_limits<double>::infinity();
    if (!std::isnan(r.q_ratio)) s = std::max(s, r.q_ratio - r.bound);
    if (!std::isnan(r.error_rhs) && r.error_rhs > 0) s = std::max(s, r.error_lhs / r.error_rhs - 1);
    if (!std::isnan(r.identity_rel_err)) s = std::max(s, r.identity_rel_err);
    if (!std::isnan(r.coercivity_lhs) && r.coercivity_rhs > 0)
      s = std::max(s, 1 - r.coercivity_lhs / r.coercivity_rhs);
    if (s > score) score = s, worst = &r;
  }
  if (!worst) return "no records";
  return "k=" + std::to_string(worst->k) + " q_ratio=" + fmt(worst->q_ratio) +
         " bound=" + fmt(worst->bound) + " error_lhs=" + fmt(worst->error_lhs) +
         " error_rhs=" + fmt(worst->error_rhs) + " identity_rel_err=" +
         fmt(worst->identity_rel_err) + " coercivity_lhs=" + fmt(worst->coercivity_lhs) +
         " coercivity_rhs=" + fmt(worst->coercivity_rhs);
}

}  // namespace

int cmd_gen(const RunSpec& spec, std::ostream& out, std::ostream&) {
  BundleManifest meta;
  const auto sys = load_system(single_source(spec), &meta);
  write_system(sys, spec.out_dir, meta, spec.force);
  out << "wrote " << spec.out_dir.string() << " (n=" << sys.n() << ", m=" << sys.m() << ")\n";
  return kOk;
}

int cmd_solve(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  const auto sys = load_system(single_source(spec));
  const DenseLimits limits;
  const bool exact = !spec.solver.fixed_alpha;
  const bool dense = exact && dense_eligible(sys, limits);
  SolverConfig<double> cfg = spec.solver;
  cfg.record_history = true;
  cfg.record_iterates = dense;

  const VectorX<double> y0 = default_start(sys.m(), spec.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = solve(sys, y0, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& h = res.history;
  const auto reason = h.termination_reason().value();
  const auto& last = h.records.back();

  prepare_out_dir(spec.out_dir);
  std::ostringstream csv;
  write_history_csv(csv, h);
  write_text(spec.out_dir / "history.csv", csv.str());

  json summary = {{"n", sys.n()},
                  {"m", sys.m()},
                  {"method", exact ? "uzawa_exact" : "uzawa_classical"},
                  {"iterations", h.iterations()},
                  {"final_residual_inf", num(last.residual_inf)},
                  {"final_residual_norm", num(last.residual_norm)},
                  {"final_residual_ratio", num(last.residual_ratio)},
                  {"wall_time_seconds", wall},
                  {"termination_reason", std::string(to_string(reason))}};
  if (!exact) summary["alpha"] = *spec.solver.fixed_alpha;

  if (dense) {
    try {
      const auto check = check_history(sys, h, spec.seed, limits);
      write_text(spec.out_dir / "theorem_report.json", check.to_json().dump(2) + "\n");
      summary["theorem_report"] = check.pass() ? "pass" : "fail";
    } catch (const HypothesisError& e) {
      summary["theorem_report"] = std::string("skipped: ") + e.what();
      err << "theorem report skipped: " << e.what() << '\n';
    }
  }
  write_text(spec.out_dir / "summary.json", summary.dump(2) + "\n");

  out << to_string(reason) << " after " << h.iterations() << " iterations, residual ratio "
      << fmt(last.residual_ratio) << '\n';
  return exit_code(reason);
}

int cmd_verify(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  const auto sys = load_system(single_source(spec));
  const DenseLimits limits;
  if (!dense_eligible(sys, limits))
    throw UsageError("verify needs a dense-eligible system (n=" + std::to_string(sys.n()) +
                     ", m=" + std::to_string(sys.m()) + ")");

  ConvergenceHistory<double> history;
  if (spec.history) {
    history = read_history_csv(*spec.history);
    if (history.records.empty()) throw UsageError("history has no records");
  } else {
    SolverConfig<double> cfg = spec.solver;
    cfg.fixed_alpha.reset();
    cfg.record_history = true;
    cfg.record_iterates = true;
    history = uzawa_exact_solve(sys, default_start(sys.m(), spec.seed), cfg).history;
  }

  const auto check = check_history(sys, history, spec.seed, limits);
  if (!spec.out_dir.empty()) {
    prepare_out_dir(spec.out_dir);
    write_text(spec.out_dir / "theorem_report.json", check.to_json().dump(2) + "\n");
  }

  const auto line = [&](const char* name, const std::optional<bool>& f) {
    out << name << ": " << (!f ? "not run" : *f ? "pass" : "FAIL") << '\n';
  };
  out << "c0 = " << fmt(check.bounds.c0) << '\n';
  line("contraction", check.report.contraction_pass);
  line("ratio range", check.report.ratio_range_pass);
  line("alpha positive", check.report.alpha_positive_pass);
  line("error bound", check.report.error_bound_pass);
  line("error identity", check.report.identity_pass);
  line("coercivity along d", check.report.coercivity_pass);
  line("coercivity probe", check.coercivity.pass);
  line("lbb", check.lbb.pass);
  if (check.pass()) return kOk;
  for (const auto& f : check.report.failures) err << f << '\n';
  err << "worst record: " << worst_record(check.report) << '\n';
  if (!check.coercivity.pass)
    err << "coercivity probe worst margin " << fmt(check.coercivity.worst_margin) << '\n';
  return kTheoremViolation;
}

int cmd_sweep(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  prepare_out_dir(spec.out_dir);
  std::ostringstream table;
  table << "index,name,n,m,cond_A,cond_KKT,residual_inf,iterations,cpu_seconds,status\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    const auto& src = spec.sources[i];
    const std::string name = src.kind == ProblemSource::Kind::bundle
                                 ? "bundle:" + src.bundle.string()
                                 : src.label;
    std::string n = "", m = "", status;
    double cond_a = nan, cond_kkt = nan, r_inf = nan, seconds = nan;
    std::string iters = "";
    try {
      const auto sys = load_system(src);
      n = std::to_string(sys.n());
      m = std::to_string(sys.m());
      const ConditionOptions copts;
      if (sys.n() <= copts.max_dim) cond_a = condition_estimate(sys.A, copts);
      if (sys.n() + sys.m() <= copts.max_dim) cond_kkt = condition_estimate(assemble_kkt(sys), copts);

      SolverConfig<double> cfg = spec.solver;
      cfg.record_history = true;
      cfg.record_iterates = false;
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = solve(sys, default_start(sys.m(), spec.seed), cfg);
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto& h = res.history;
      r_inf = h.records.back().residual_inf;
      iters = std::to_string(h.iterations());
      status = std::string(to_string(h.termination_reason().value()));

      std::ostringstream csv;
      write_history_csv(csv, h);
      write_text(spec.out_dir / ("history_" + std::to_string(i) + ".csv"), csv.str());
    } catch (const std::exception& e) {
      status = std::string("error: ") + e.what();
      err << "problem " << i << " (" << name << "): " << e.what() << '\n';
    }
    auto quote = [](std::string s) {
      std::string q = "\"";
      for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + "\"";
    };
    table << i << ',' << quote(name) << ',' << n << ',' << m << ',' << fmt(cond_a) << ','
          << fmt(cond_kkt) << ',' << fmt(r_inf) << ',' << iters << ',' << fmt(seconds) << ','
          << quote(status) << '\n';
  }
  write_text(spec.out_dir / "sweep.csv", table.str());
  out << "wrote " << (spec.out_dir / "sweep.csv").string() << " (" << spec.sources.size()
      << " problems)\n";
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Uzawa solvers for sparse saddle point systems"};
  app.require_subcommand(1);

  struct Options {
    std::vector<std::string> bundles, vi, oseen;
    double tol = 1e-6, stall = 1e-7;
    Index max_iter = 2000;
    std::optional<double> alpha;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool force = false;
    std::string history;
  } o;

  auto add_common = [&](CLI::App* sub, bool solver_flags) {
    sub->add_option("--bundle", o.bundles, "Matrix Market bundle directory");
    sub->add_option("--gen-vi", o.vi, "generate a linear VI: n=..,m=..,seed=..[,shift=..,skew=..]");
    sub->add_option("--gen-oseen", o.oseen,
                    "generate an Oseen system: nx=..,ny=..,nu=..,stab=..,wind=..[,speed=..,seed=..]");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "seed of the random starting multiplier");
    if (solver_flags) {
      sub->add_option("--tol", o.tol, "relative residual tolerance");
      sub->add_option("--stall", o.stall, "change in residual ratio counted as stagnation");
      sub->add_option("--max-iter", o.max_iter, "iteration cap");
      sub->add_option("--alpha", o.alpha, "fixed stepsize; selects classical Uzawa");
    }
  };
  auto* gen = app.add_subcommand("gen", "write a generated system as a bundle");
  add_common(gen, false);
  gen->add_flag("--force", o.force, "overwrite an existing bundle");
  auto* solve_cmd = app.add_subcommand("solve", "run a solver and write its history");
  add_common(solve_cmd, true);
  auto* verify = app.add_subcommand("verify", "check the convergence theory on a dense-eligible system");
  add_common(verify, true);
  verify->add_option("--history", o.history, "check this history.csv instead of solving");
  auto* sweep = app.add_subcommand("sweep", "solve a list of problems into one table");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o_help, e_help;
    const int code = app.exit(e, o_help, e_help);
    out << o_help.str();
    err << e_help.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunSpec spec;
    if (*gen) spec.command = RunSpec::Command::gen;
    else if (*verify) spec.command = RunSpec::Command::verify;
    else if (*sweep) spec.command = RunSpec::Command::sweep;
    else spec.command = RunSpec::Command::solve;

    // Sources keep their command-line order within each kind.
    for (const auto& b : o.bundles) {
      ProblemSource s;
      s.kind = ProblemSource::Kind::bundle;
      s.bundle = b;
      s.label = "bundle:" + b;
      spec.sources.push_back(std::move(s));
    }
    for (const auto& v : o.vi) spec.sources.push_back(parse_vi_source(v));
    for (const auto& v : o.oseen) spec.sources.push_back(parse_oseen_source(v));

    spec.solver.rel_residual_tol = o.tol;
    spec.solver.ratio_stall_tol = o.stall;
    spec.solver.max_iterations = o.max_iter;
    spec.solver.fixed_alpha = o.alpha;
    spec.seed = o.seed;
    spec.force = o.force;
    if (!o.history.empty()) spec.history = fs::path(o.history);
    if (!o.out_dir.empty()) spec.out_dir = o.out_dir;
    else if (spec.command == RunSpec::Command::verify) spec.out_dir.clear();
    try {
      spec.solver.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }

    switch (spec.command) {
      case RunSpec::Command::gen:
        return cmd_gen(spec, out, err);
      case RunSpec::Command::solve:
        return cmd_solve(spec, out, err);
      case RunSpec::Command::verify:
        return cmd_verify(spec, out, err);
      case RunSpec::Command::sweep:
        return cmd_sweep(spec, out, err);
    }
  } catch (const BreakdownError& e) {
    err << "error: " << e.what() << '\n';
    return kBreakdown;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace uzawa::cli
