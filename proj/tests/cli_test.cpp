// End-to-end checks of the command-line tool: exit codes, output files and
// byte-level determinism. The binary path is injected by the build.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("icpm_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  void TearDown() override { fs::remove_all(dir_); }

  RunResult run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(ICPM_CLI_PATH) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.stdout_text = slurp(out);
    r.stderr_text = slurp(err);
    return r;
  }

  fs::path write_config(const std::string& name, const std::string& body) {
    fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  fs::path dir_;
};

TEST_F(CliTest, UnknownKeyIsRejectedWithoutOutputs) {
  fs::path cfg = write_config("bad.json", R"({"modle": "cart-pendulum"})");
  fs::path out = dir_ / "out";
  RunResult r = run("--config " + cfg.string() + " design --out " + out.string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.stderr_text.find("config-error"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "design_report.json"));
}

TEST_F(CliTest, MissingInitialStateIsAConfigError) {
  RunResult r = run("simulate --out " + (dir_ / "out").string());
  EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliTest, DesignProducesAReport) {
  fs::path out = dir_ / "out";
  RunResult r = run("design --model cart-pendulum --anchor 0 0.45 --section 0 --out " +
                    out.string());
  EXPECT_EQ(r.exit_code, 0) << r.stderr_text;
  ASSERT_TRUE(fs::exists(out / "design_report.json"));
  const std::string report = slurp(out / "design_report.json");
  for (const char* key : {"\"A\"", "\"B\"", "\"K\"", "\"z_star\"", "\"floquet_open_loop\"",
                          "\"floquet_closed_loop\"", "\"eps1\"", "\"tolerances\""})
    EXPECT_NE(report.find(key), std::string::npos) << key;
}

TEST_F(CliTest, SimulateFromDesignReportAndDeterminism) {
  fs::path out = dir_ / "out";
  ASSERT_EQ(run("design --model cart-pendulum --out " + out.string()).exit_code, 0);

  const std::string sim_args =
      " simulate --model cart-pendulum --design " + (out / "design_report.json").string() +
      " --x0 0.1 0.4 -0.1 -0.2 --t-end 3 --mode jump";
  fs::path run1 = dir_ / "run1";
  fs::path run2 = dir_ / "run2";
  RunResult r1 = run(sim_args + " --out " + run1.string());
  EXPECT_EQ(r1.exit_code, 0) << r1.stderr_text;
  RunResult r2 = run(sim_args + " --out " + run2.string());
  EXPECT_EQ(r2.exit_code, 0);

  for (const char* f : {"trajectory.csv", "events.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(run1 / f)) << f;
    EXPECT_EQ(slurp(run1 / f), slurp(run2 / f)) << f << " differs between identical runs";
  }

  const std::string traj = slurp(run1 / "trajectory.csv");
  EXPECT_EQ(traj.find("# icpm"), 0u);
  EXPECT_NE(traj.find("config-hash"), std::string::npos);
  EXPECT_NE(traj.find("t,x,theta,dx,dtheta,rho_1,E,event_flag"), std::string::npos);
}

TEST_F(CliTest, DivergenceExitsFiveButWritesOutputs) {
  fs::path out = dir_ / "out";
  RunResult r = run("simulate --model cart-pendulum --x0 0.1 0.4 -0.1 -0.2 --t-end 20 "
                    "--mode jump --divergence-bound 0.5 --out " +
                    out.string());
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
  const std::string summary = slurp(out / "summary.json");
  EXPECT_NE(summary.find("\"diverged\": true"), std::string::npos);
}

TEST_F(CliTest, PhasePortraitGridAndEmptyGrid) {
  fs::path out = dir_ / "out";
  RunResult r = run("phase-portrait --model tiptoebot --pp-q2 -1 1 21 --pp-q2d -4 4 11 --out " +
                    out.string());
  EXPECT_EQ(r.exit_code, 0) << r.stderr_text;
  const std::string portrait = slurp(out / "portrait.csv");
  EXPECT_NE(portrait.find("q2,q2d,E"), std::string::npos);
  EXPECT_NE(portrait.find("c_d:"), std::string::npos);
  // 21 * 11 data rows plus comments and header
  int rows = 0;
  for (char ch : portrait)
    if (ch == '\n') ++rows;
  EXPECT_GT(rows, 21 * 11);
  EXPECT_TRUE(fs::exists(out / "reduced_tables.csv"));

  fs::path empty_out = dir_ / "empty";
  r = run("phase-portrait --model tiptoebot --pp-q2 -1 1 0 --pp-q2d -4 4 0 --out " +
          empty_out.string());
  EXPECT_EQ(r.exit_code, 0);
  const std::string portrait_empty = slurp(empty_out / "portrait.csv");
  EXPECT_NE(portrait_empty.find("q2,q2d,E"), std::string::npos);
  EXPECT_EQ(portrait_empty.find("\n0."), std::string::npos);  // no data rows
}

TEST_F(CliTest, PortraitIsByteDeterministic) {
  fs::path a = dir_ / "a";
  fs::path b = dir_ / "b";
  const std::string args = "phase-portrait --model cart-pendulum --pp-q2 -0.5 0.5 31 "
                           "--pp-q2d -1 1 31";
  ASSERT_EQ(run(args + " --out " + a.string()).exit_code, 0);
  ASSERT_EQ(run(args + " --out " + b.string()).exit_code, 0);
  EXPECT_EQ(slurp(a / "portrait.csv"), slurp(b / "portrait.csv"));
}

}  // namespace
