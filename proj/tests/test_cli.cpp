#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "manyineq/dependent.hpp"
#include "manyineq/inference.hpp"
#include "manyineq/io.hpp"
#include "manyineq/sn.hpp"
#include "manyineq/threestep.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace manyineq;
using manyineq::testing::random_matrix;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr discarded.
Run cli(const std::string& args) {
  const std::string cmd = std::string(MANYINEQ_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("manyineq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const Eigen::MatrixXd& m, bool header = false) const {
    std::ofstream f(path(name));
    if (header) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f << (j ? "," : "") << "c" << j + 1;
      f << "\n";
    }
    char buf[40];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        f << (j ? "," : "") << buf;
      }
      f << "\n";
    }
    return path(name);
  }

  std::string write_text(const std::string& name, const std::string& text) const {
    std::ofstream f(path(name));
    f << text;
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, Sn1CriticalValueMatchesFormula) {
  const auto file = write("x.csv", random_matrix(400, 200, 1, -0.2), true);
  const auto r = cli("test " + file + " --header --method sn1 --alpha 0.05");
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["critical_value"].get<double>(), sn_one_step(0.05, 200, 400), 1e-9);
  EXPECT_EQ(j["method"], "sn1");
  EXPECT_EQ(j["selected"].size(), 200u);
  EXPECT_EQ(j["selected"][0], 1);
  EXPECT_FALSE(j["reject"].get<bool>());
}

TEST_F(CliTest, TestMatchesLibraryDecision) {
  const Eigen::MatrixXd x = random_matrix(120, 15, 2, 0.05);
  const auto file = write("x.csv", x);
  const auto r = cli("test --input " + file + " --method eb2 --reps 400 --seed 9 --beta 0.002");
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  const auto d = run_test(SampleMatrix(x), CriticalValueSpec{Method::EB2, 0.05, 0.002, 400, 9});
  EXPECT_EQ(j["critical_value"].get<double>(), round12(d.critical_value));
  EXPECT_EQ(j["statistic"].get<double>(), round12(d.statistic));
  EXPECT_EQ(j["reject"].get<bool>(), d.reject);
  EXPECT_EQ(j["selected"].size(), d.selected.size());
}

TEST_F(CliTest, SeededOutputIsByteIdentical) {
  const auto file = write("x.csv", random_matrix(200, 40, 3));
  const std::string args = "test " + file + " --method mb2 --reps 1000 --beta 0.001 --seed 7";
  const auto a = cli(args);
  const auto b = cli(args);
  const auto c = cli(args + " --threads 4");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  EXPECT_NE(a.out, cli("test " + file + " --method mb2 --seed 8").out);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli("test " + path("missing.csv")).status, 2);
  EXPECT_EQ(cli("test " + write_text("bad.csv", "1,2\n3,x\n")).status, 2);
  EXPECT_EQ(cli("test " + write_text("ragged.csv", "1,2\n3\n")).status, 2);
  std::string rows;
  for (int i = 0; i < 50; ++i) rows += "0," + std::to_string(i) + "\n";
  const auto flat = write_text("flat.csv", rows);
  EXPECT_EQ(cli("test " + flat + " --method mb1").status, 3);
  EXPECT_EQ(cli("test " + flat + " --method sn1").status, 0);
  EXPECT_EQ(cli("test " + flat + " --method nope").status, 64);
  EXPECT_EQ(cli("test " + flat + " --alpha 0.6").status, 64);
  EXPECT_EQ(cli("test " + flat + " --method mb2 --beta 0.04").status, 64);
  EXPECT_EQ(cli("test " + flat + " --unknown").status, 64);
  EXPECT_EQ(cli("").status, 64);
  EXPECT_EQ(cli("frobnicate").status, 64);
  EXPECT_EQ(cli("--help").status, 0);
}

TEST_F(CliTest, DegenerateColumnsAreNamed) {
  const auto flat = write_text("flat.csv", "1,5,0\n2,5,0\n3,5,0\n");
  const std::string cmd = std::string(MANYINEQ_CLI) + " test " + flat + " --method mb1 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[512] = {};
  const std::size_t got = fread(buf, 1, sizeof buf - 1, pipe);
  pclose(pipe);
  EXPECT_NE(std::string(buf, got).find("column(s): 2, 3"), std::string::npos);
}

TEST_F(CliTest, McDeterministicAcrossThreadsAndRoundTrips) {
  const std::string base = "mc --design 2 --n 100 --p 30 --rho 0.5 --dist uniform --sims 30 --reps 200 --seed 5";
  ASSERT_EQ(cli(base + " --threads 1 --out " + path("a.csv")).status, 0);
  ASSERT_EQ(cli(base + " --threads 3 --out " + path("b.csv")).status, 0);
  const auto read = [](const std::string& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(read(path("a.csv")), read(path("b.csv")));
  EXPECT_EQ(read(path("a.json")), read(path("b.json")));

  McConfig mc;
  mc.sims = 30;
  mc.bootstrap_reps = 200;
  mc.seed = 5;
  const auto lib = run_mc(DesignSpec{2, 100, 30, 0.5, Dist::UNIFORM}, mc);
  const auto rows = read_mc_csv(path("a.csv"));
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].method, method_name(lib.rates[k].method));
    EXPECT_EQ(rows[k].rejections, lib.rates[k].rejections);
    EXPECT_EQ(rows[k].rejection_rate, round12(lib.rates[k].rate()));
  }
  const auto side = json::parse(read(path("a.json")));
  EXPECT_EQ(side["design"], 2);
  EXPECT_EQ(side["dist"], "uniform");
  EXPECT_EQ(side["results"].size(), 6u);
  EXPECT_EQ(side["results"][0]["rejections"], rows[0].rejections);
}

TEST_F(CliTest, McUsageErrors) {
  EXPECT_EQ(cli("mc --sims 0 --out " + path("c.csv")).status, 64);
  EXPECT_EQ(cli("mc --design 9 --out " + path("c.csv")).status, 64);
  EXPECT_EQ(cli("mc --dist cauchy --out " + path("c.csv")).status, 64);
  EXPECT_EQ(cli("mc --methods mb2,xx --out " + path("c.csv")).status, 64);
  EXPECT_EQ(cli("mc --sims 5").status, 64);
}

TEST_F(CliTest, InvertLocationGridMatchesClosedForm) {
  const Eigen::VectorXd xi = random_matrix(400, 1, 4, 0.3);
  fs::create_directories(dir_ / "grid");
  std::ostringstream grid;
  grid << "label,theta\n";
  std::vector<double> thetas;
  for (int k = 0; k <= 40; ++k) {
    const double t = 0.1 + 0.01 * k;
    thetas.push_back(t);
    grid << "t" << k << "," << format_number(t) << "\n";
    write("grid/point_t" + std::to_string(k) + ".csv", (xi.array() - t).matrix());
  }
  write_text("grid/grid.csv", grid.str());
  const auto r = cli("invert --grid " + path("grid") + " --method sn1");
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  const auto s = summarize(SampleMatrix(Eigen::MatrixXd(xi)));
  std::vector<std::string> expected;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const Eigen::MatrixXd g = (xi.array() - thetas[k]).matrix();
    const auto gs = summarize(SampleMatrix(g));
    if (20.0 * gs.means[0] / gs.sds[0] <= sn_one_step(0.05, 1, 400)) expected.push_back("t" + std::to_string(k));
  }
  EXPECT_EQ(j["accepted"].get<std::vector<std::string>>(), expected);
  EXPECT_FALSE(expected.empty());
  EXPECT_LT(expected.size(), thetas.size());
  EXPECT_EQ(j["points"].size(), thetas.size());
  EXPECT_GT(s.means[0], 0.1);
}

TEST_F(CliTest, InvertErrors) {
  fs::create_directories(dir_ / "empty");
  write_text("empty/grid.csv", "");
  const auto r = cli("invert --grid " + path("empty"));
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(json::parse(r.out)["accepted"].empty());

  fs::create_directories(dir_ / "bad");
  write_text("bad/grid.csv", "a,0\nb,1\n");
  write("bad/point_a.csv", random_matrix(20, 2, 5));
  write_text("bad/point_b.csv", "1,2\nzz,3\n");
  const std::string cmd = std::string(MANYINEQ_CLI) + " invert --grid " + path("bad") + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[512] = {};
  const std::size_t got = fread(buf, 1, sizeof buf - 1, pipe);
  EXPECT_EQ(WEXITSTATUS(pclose(pipe)), 2);
  EXPECT_NE(std::string(buf, got).find("point_b.csv"), std::string::npos);

  write("bad/point_b.csv", random_matrix(21, 2, 6));
  EXPECT_EQ(cli("invert --grid " + path("bad")).status, 2);
  write_text("bad/grid.csv", "a,0\n");
  EXPECT_EQ(cli("invert --grid " + path("bad")).status, 0);
  EXPECT_EQ(cli("invert --grid " + path("nowhere")).status, 2);
}

TEST_F(CliTest, ThreeStepMatchesLibrary) {
  const Eigen::MatrixXd g = random_matrix(100, 6, 7, -0.05);
  Eigen::MatrixXd v = random_matrix(100, 12, 8, 1.0);
  v.col(5) = random_matrix(100, 1, 9, -2.0);
  const auto r = cli("threestep --g " + write("g.csv", g) + " --v " + write("v.csv", v) +
                     " --r 2 --reps 500 --seed 11 --scheme eb");
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  ThreeStepConfig cfg;
  cfg.scheme = Scheme::EB;
  cfg.replications = 500;
  cfg.stream = scheme_stream(SeededStream(11), Scheme::EB);
  const auto lib = three_step_test(ParametricMomentData(g, v, 2), cfg);
  EXPECT_EQ(j["j_prime"].get<std::vector<int>>(), (std::vector<int>{1, 2, 4, 5, 6}));
  EXPECT_EQ(j["j_b"].size(), lib.sets.j_b.size());
  EXPECT_EQ(j["j_double_prime"].size(), lib.sets.j_double_prime.size());
  EXPECT_EQ(j["critical_value"].get<double>(), round12(lib.decision.critical_value));
  EXPECT_EQ(j["reject"].get<bool>(), lib.decision.reject);
  EXPECT_EQ(j["method"], "eb2");

  EXPECT_EQ(cli("threestep --g " + path("g.csv") + " --v " + path("v.csv") + " --r 3").status, 2);
  EXPECT_EQ(cli("threestep --g " + path("g.csv") + " --v " + path("v.csv") + " --r 2 --scheme xb").status, 64);
  EXPECT_EQ(cli("threestep --g " + path("g.csv") + " --v " + path("v.csv") + " --r 2 --beta 0.02").status, 64);
}

TEST_F(CliTest, BmbAndDiagnoseMatchLibrary) {
  const Eigen::MatrixXd x = random_matrix(200, 10, 12, -0.1);
  const auto file = write("x.csv", x);
  const auto r = cli("bmb " + file + " --reps 300 --seed 13");
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  const auto plan = default_block_plan(200);
  const auto d = bmb_test(SampleMatrix(x), plan, 0.05, 300, SeededStream(13));
  EXPECT_EQ(j["q"], 5);
  EXPECT_EQ(j["r"], 2);
  EXPECT_EQ(j["critical_value"].get<double>(), round12(d.critical_value));
  EXPECT_EQ(j["statistic"].get<double>(), round12(d.statistic));
  EXPECT_EQ(cli("bmb " + file + " --q 3 --r 3").status, 64);
  EXPECT_EQ(cli("bmb " + file + " --q 20 --r 4").status, 0);

  const auto dj = json::parse(cli("diagnose " + file).out);
  const auto diag = regularity_diagnostics(SampleMatrix(x));
  EXPECT_EQ(dj["m4"].get<double>(), round12(diag.m4));
  EXPECT_EQ(dj["n"], 200);
  EXPECT_EQ(cli("diagnose " + write_text("flat.csv", "1,0\n2,0\n")).status, 3);
}
