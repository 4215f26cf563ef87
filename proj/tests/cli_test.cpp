#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kSource = DENDRITE_SOURCE_DIR;

struct Outcome {
  int code;
  std::string out;
};

Outcome cli(const std::string& args) {
  const auto log = fs::temp_directory_path() / ("dendrite_cli_test_" + std::to_string(::getpid()) + ".log");
  const std::string cmd = std::string("\"") + DENDRITE_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(log);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string config(const std::string& name) { return "--config \"" + (kSource / "configs" / (name + ".ini")).string() + "\""; }

fs::path fresh_dir(const std::string& tag) {
  auto d = fs::temp_directory_path() / ("dendrite_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

const std::string kSmall = " --set grid.n=32 --set time.T=0.5";

}  // namespace

TEST(Cli, HelpAndInfo) {
  EXPECT_EQ(cli("--help").code, 0);
  const auto info = cli("info " + config("fourfold") + " --preset desk");
  EXPECT_EQ(info.code, 0);
  EXPECT_NE(info.out.find("fftw"), std::string::npos);
  EXPECT_NE(info.out.find("steps=500"), std::string::npos);
}

TEST(Cli, BuiltInChecksPass) {
  const auto r = cli("check");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("run --config /nonexistent.ini --out /tmp/x").code, 2);
  EXPECT_EQ(cli("run " + config("stability")).code, 2);  // --out is required
  const auto bad = cli("run " + config("stability") + " --out " + fresh_dir("bad").string() + " --set model.sigma=0.4");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("model.sigma"), std::string::npos);
  EXPECT_EQ(cli("run " + config("stability") + " --out /tmp/x --set model.tua=1").code, 2);
  EXPECT_EQ(cli("run " + config("stability") + " --out /tmp/x --k 4").code, 2);
}

TEST(Cli, RunWritesOnlyUnderOut) {
  const auto out = fresh_dir("run");
  const auto r = cli("run " + config("stability") + " --out " + out.string() + kSmall + " --set output.snapshot_every=2");
  ASSERT_EQ(r.code, 0) << r.out;
  std::size_t n_bin = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    EXPECT_TRUE(e.is_regular_file()) << e.path();
    if (e.path().extension() == ".bin") ++n_bin;
  }
  // phi and u at steps 0, 2, 4 and the final step 5.
  EXPECT_EQ(n_bin, 8u);
  EXPECT_TRUE(fs::exists(out / "phi_000005.json"));
  EXPECT_TRUE(fs::exists(out / "diagnostics.csv"));
  std::ifstream in(out / "run_summary.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["status"], 0);
  EXPECT_EQ(j["steps"], 5);
  fs::remove_all(out);
}

TEST(Cli, SetOverridesAreApplied) {
  const auto out = fresh_dir("set");
  const auto r = cli("run " + config("stability") + " --out " + out.string() + kSmall + " --set time.dt=0.05 --k 2");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("dt=0.05 steps=10"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("order=2"), std::string::npos) << r.out;
  fs::remove_all(out);
}

TEST(Cli, DivergenceExitsThreeAndKeepsOutput) {
  const auto out = fresh_dir("div");
  const auto r = cli("run " + config("stability") + " --out " + out.string() + kSmall + " --set initial.u_cold=-1e200");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("diverged at step 1"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(out / "diagnostics.csv"));
  std::ifstream in(out / "run_summary.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["status"], 3);
  fs::remove_all(out);
}

TEST(Cli, ConvergeRejectsPhysicalConfig) {
  EXPECT_EQ(cli("converge " + config("stability") + " --out " + fresh_dir("conv").string()).code, 2);
}

TEST(Cli, ConvergeWritesCsv) {
  const auto out = fresh_dir("conv_ok");
  const auto r = cli("converge " + config("isotropic") + " --out " + out.string() + " --k 1 --set grid.n=32");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto csv = out / "convergence_isotropic_k1.csv";
  ASSERT_TRUE(fs::exists(csv));
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "dt,err_phi,err_u");
  fs::remove_all(out);
}
