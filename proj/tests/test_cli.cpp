#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uzawa/cli.hpp"

using namespace uzawa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "uzawa");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      else if (c == ',' && !quoted) row.push_back(cell), cell.clear();
      else cell += c;
    }
    row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uzawa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SolveViConverges) {
  const auto r = run_cli({"solve", "--gen-vi", "n=200,m=100,seed=1", "--out", path("run")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::ifstream in(dir_ / "run" / "summary.json");
  const auto s = nlohmann::json::parse(in);
  EXPECT_EQ(s["n"], 200);
  EXPECT_EQ(s["m"], 100);
  EXPECT_EQ(s["method"], "uzawa_exact");
  EXPECT_EQ(s["termination_reason"], "converged");
  EXPECT_LT(s["final_residual_ratio"].get<double>(), 1e-6);
  EXPECT_EQ(s["theorem_report"], "pass");
  EXPECT_TRUE(fs::exists(dir_ / "run" / "theorem_report.json"));

  const auto rows = read_csv(dir_ / "run" / "history.csv");
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"k", "residual_norm", "residual_ratio", "alpha", "d_norm", "Q"}));
  EXPECT_EQ(rows.size() - 2, s["iterations"].get<std::size_t>());
  for (std::size_t i = 2; i < rows.size(); ++i)
    EXPECT_LE(std::stod(rows[i][5]), std::stod(rows[i - 1][5])) << "row " << i;
}

TEST_F(CliTest, HistoryIsDeterministic) {
  const std::vector<std::string> base = {"solve", "--gen-oseen", "nx=8,ny=8,nu=0.1,stab=0.25", "--seed", "3"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", path("a")});
  b.insert(b.end(), {"--out", path("b")});
  ASSERT_EQ(run_cli(a).code, cli::kOk);
  ASSERT_EQ(run_cli(b).code, cli::kOk);
  EXPECT_EQ(slurp(dir_ / "a" / "history.csv"), slurp(dir_ / "b" / "history.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "theorem_report.json"), slurp(dir_ / "b" / "theorem_report.json"));
}

TEST_F(CliTest, IterationCapExitsTwo) {
  const auto r = run_cli({"solve", "--gen-vi", "n=50,seed=2", "--max-iter", "1", "--out", path("r")});
  EXPECT_EQ(r.code, cli::kNotConverged);
  std::ifstream in(dir_ / "r" / "summary.json");
  EXPECT_EQ(nlohmann::json::parse(in)["termination_reason"], "max_iterations");
}

TEST_F(CliTest, ClassicalStepsizeIsRecorded) {
  const auto r = run_cli({"solve", "--gen-vi", "n=40,seed=2", "--alpha", "0.01", "--max-iter", "5",
                          "--out", path("r")});
  EXPECT_EQ(r.code, cli::kNotConverged);
  std::ifstream in(dir_ / "r" / "summary.json");
  const auto s = nlohmann::json::parse(in);
  EXPECT_EQ(s["method"], "uzawa_classical");
  EXPECT_EQ(s["alpha"], 0.01);
  EXPECT_FALSE(s.contains("theorem_report"));
}

TEST_F(CliTest, MissingBundleIsAUsageError) {
  const auto r = run_cli({"solve", "--bundle", path("absent"), "--out", path("r")});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("bundle not found"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({"solve"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--gen-vi", "n=10", "--gen-vi", "n=12"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--gen-vi", "n=10,bogus=1"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--gen-vi", "n=ten"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--gen-oseen", "nx=8,wind=gusty"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--gen-vi", "n=10", "--tol", "-1"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({}).code, cli::kUsage);
}

TEST_F(CliTest, GenThenSolveFromBundle) {
  ASSERT_EQ(run_cli({"gen", "--gen-oseen", "nx=8,ny=8,nu=0.2,stab=1", "--out", path("bundle")}).code,
            cli::kOk);
  EXPECT_TRUE(fs::exists(dir_ / "bundle" / "C.mtx"));
  EXPECT_EQ(run_cli({"gen", "--gen-oseen", "nx=8,ny=8,nu=0.2,stab=1", "--out", path("bundle")}).code,
            cli::kUsage);
  EXPECT_EQ(run_cli({"gen", "--gen-oseen", "nx=8,ny=8,nu=0.2,stab=1", "--out", path("bundle"), "--force"}).code,
            cli::kOk);

  ASSERT_EQ(run_cli({"solve", "--bundle", path("bundle"), "--out", path("from_bundle")}).code, cli::kOk);
  ASSERT_EQ(run_cli({"solve", "--gen-oseen", "nx=8,ny=8,nu=0.2,stab=1", "--out", path("direct")}).code,
            cli::kOk);
  EXPECT_EQ(slurp(dir_ / "from_bundle" / "history.csv"), slurp(dir_ / "direct" / "history.csv"));
}

TEST_F(CliTest, VerifyPassesOnGeneratedSystem) {
  const auto r = run_cli({"verify", "--gen-vi", "n=100,m=50,seed=4"});
  EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("contraction: pass"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, VerifyDetectsTamperedHistory) {
  ASSERT_EQ(run_cli({"solve", "--gen-vi", "n=100,m=50,seed=4", "--out", path("run")}).code, cli::kOk);
  EXPECT_EQ(run_cli({"verify", "--gen-vi", "n=100,m=50,seed=4", "--history", path("run/history.csv")}).code,
            cli::kOk);

  // Raise Q at the third record so that the objective increases.
  auto rows = read_csv(dir_ / "run" / "history.csv");
  ASSERT_GT(rows.size(), 4u);
  rows[3][5] = std::to_string(10 * std::stod(rows[1][5]));
  {
    std::ofstream out(dir_ / "tampered.csv");
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << '\n';
    }
  }
  const auto r = run_cli({"verify", "--gen-vi", "n=100,m=50,seed=4", "--history", path("tampered.csv"),
                          "--out", path("report")});
  EXPECT_EQ(r.code, cli::kTheoremViolation);
  EXPECT_NE(r.out.find("contraction: FAIL"), std::string::npos);
  EXPECT_NE(r.err.find("worst record: k="), std::string::npos);
  std::ifstream in(dir_ / "report" / "theorem_report.json");
  EXPECT_FALSE(nlohmann::json::parse(in).empty());
}

TEST_F(CliTest, VerifyRejectsRankDeficientCoupling) {
  const std::string bundle = path("deficient");
  fs::create_directories(bundle);
  std::ofstream(bundle + "/A.mtx") << "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 2\n2 2 2\n3 3 2\n";
  std::ofstream(bundle + "/B.mtx")
      << "%%MatrixMarket matrix coordinate real general\n2 3 4\n1 1 1\n1 2 1\n2 1 2\n2 2 2\n";
  std::ofstream(bundle + "/f.mtx") << "%%MatrixMarket matrix array real general\n3 1\n1\n2\n3\n";
  std::ofstream(bundle + "/h.mtx") << "%%MatrixMarket matrix array real general\n2 1\n0\n0\n";
  std::ofstream(bundle + "/manifest.json") << R"({"name": "deficient", "C": "zero"})";
  const auto r = run_cli({"verify", "--bundle", bundle, "--max-iter", "50"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(CliTest, VerifyNeedsDenseEligibleSystem) {
  const auto r = run_cli({"verify", "--gen-vi", "n=2400,m=1200,seed=1"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("dense-eligible"), std::string::npos);
}

TEST_F(CliTest, EmptySweepWritesHeaderOnly) {
  ASSERT_EQ(run_cli({"sweep", "--out", path("sw")}).code, cli::kOk);
  EXPECT_EQ(slurp(dir_ / "sw" / "sweep.csv"),
            "index,name,n,m,cond_A,cond_KKT,residual_inf,iterations,cpu_seconds,status\n");
}

TEST_F(CliTest, ViSweep) {
  ASSERT_EQ(run_cli({"sweep", "--gen-vi", "n=100,seed=1", "--gen-vi", "n=200,seed=1", "--gen-vi",
                     "n=400,seed=1", "--out", path("sw")})
                .code,
            cli::kOk);
  const auto rows = read_csv(dir_ / "sw" / "sweep.csv");
  ASSERT_EQ(rows.size(), 4u);
  const std::vector<std::string> sizes = {"100", "200", "400"};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][2], sizes[i - 1]);
    EXPECT_EQ(rows[i][9], "converged");
    EXPECT_GT(std::stod(rows[i][4]), 1.0);
    EXPECT_GT(std::stod(rows[i][5]), 1.0);
    EXPECT_TRUE(fs::exists(dir_ / "sw" / ("history_" + std::to_string(i - 1) + ".csv")));
  }
}

TEST_F(CliTest, OseenSweepAndFailedRow) {
  std::vector<std::string> args = {"sweep", "--out", path("sw")};
  for (const char* stab : {"0.25", "1"})
    for (const char* nu : {"0.02", "0.2"}) {
      args.push_back("--gen-oseen");
      args.push_back(std::string("nx=8,ny=8,wind=recirculating,stab=") + stab + ",nu=" + nu);
    }
  args.insert(args.end(), {"--bundle", path("absent")});
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto rows = read_csv(dir_ / "sw" / "sweep.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1][1], "bundle:" + path("absent"));
  EXPECT_EQ(rows[1][9].rfind("error: bundle not found", 0), 0u);
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_EQ(rows[i][9], "converged") << rows[i][1];
}

TEST(CliSources, ParseKeys) {
  const auto vi = cli::parse_vi_source("n=20,m=7,seed=3,shift=1.5,skew=2");
  EXPECT_EQ(vi.vi.n, 20);
  EXPECT_EQ(vi.vi.rows(), 7);
  EXPECT_EQ(vi.vi.seed, 3u);
  EXPECT_EQ(*vi.vi.shift, 1.5);
  EXPECT_EQ(vi.vi.skew_scale, 2.0);
  const auto os = cli::parse_oseen_source("nx=16,ny=48,nu=0.05,stab=0.25,wind=constant,speed=2,seed=9");
  EXPECT_EQ(os.oseen.grid_nx, 16);
  EXPECT_EQ(os.oseen.grid_ny, 48);
  EXPECT_EQ(os.oseen.viscosity, 0.05);
  EXPECT_EQ(os.oseen.stabilization, 0.25);
  EXPECT_EQ(os.oseen.wind, WindField::constant);
  EXPECT_EQ(os.oseen.wind_scale, 2.0);
  EXPECT_EQ(os.oseen.seed, 9u);
}

TEST(CliSources, StartIsReproducibleUniform) {
  const auto a = cli::default_start(50, 4), b = cli::default_start(50, 4);
  EXPECT_EQ(a, b);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LT(a.maxCoeff(), 1.0);
  EXPECT_FALSE(a == cli::default_start(50, 5));
}
