#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = st1::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string preset(const std::string& name) { return (fs::path(ST1_CONFIG_SOURCE_DIR) / name).string(); }

class CliFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("st1_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

}  // namespace

TEST(Cli, FermiDipolarText) {
  const auto o = run_cli({"analyze", "fermi-dipolar", "--azz", "-117", "--aperp", "-94"});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, "f_MHz = -101.67, d_MHz = -7.67\n");
}

TEST(Cli, SpinDensityAndSeparation) {
  const auto sd = run_cli({"analyze", "spin-density", "--azz", "-117", "--aperp", "-94", "--format", "json"});
  ASSERT_EQ(sd.code, 0) << sd.err;
  EXPECT_NE(sd.out.find("\"cs2\""), std::string::npos);
  const auto r = run_cli({"analyze", "r12", "--D", "2870"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "r12_angstrom = 3.007\n");
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"bogus"}).code, 1);
  EXPECT_EQ(run_cli({"analyze", "fermi-dipolar", "--azz", "-117"}).code, 1);
  EXPECT_EQ(run_cli({"analyze", "fermi-dipolar", "--azz", "x", "--aperp", "1"}).code, 1);
  EXPECT_EQ(run_cli({"analyze", "fermi-dipolar", "--azz", "1", "--aperp", "1", "--convention", "odd"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "rate", "--format", "xml"}).code, 1);
  EXPECT_EQ(run_cli({"analyze", "spin-density", "--f", "-100"}).code, 1);
}

TEST(Cli, HelpExitsZero) {
  const auto o = run_cli({"--help"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("simulate"), std::string::npos);
}

TEST_F(CliFiles, DataErrorsExitTwoWithLineNumbers) {
  const auto missing = run_cli({"fit", "multiexp", "--data", path("absent.csv")});
  EXPECT_EQ(missing.code, 2);
  const auto bad = write("bad.csv", "t_ns,counts\n1,2\n2,oops\n");
  const auto o = run_cli({"fit", "multiexp", "--data", bad});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("bad.csv:3:"), std::string::npos) << o.err;
  const auto cfg = write("bad.cfg", "[rates]\nunit = ns\nspeed = 3\n");
  const auto c = run_cli({"simulate", "rate", "--config", cfg});
  EXPECT_EQ(c.code, 2);
  EXPECT_NE(c.err.find("bad.cfg:3:"), std::string::npos) << c.err;
  EXPECT_EQ(run_cli({"analyze", "spin-density", "--f", "-100", "--d", "7"}).code, 2);
}

TEST_F(CliFiles, NonConvergenceExitsThree) {
  const auto data = path("trace.csv");
  ASSERT_EQ(run_cli({"simulate", "recovery", "--counts", "17000", "--seed", "3", "--out", data}).code, 0);
  const auto cfg = write("short.cfg", "[fit]\nmax_iterations = 1\n");
  const auto o = run_cli({"fit", "multiexp", "--data", data, "--components", "2", "--config", cfg});
  EXPECT_EQ(o.code, 3) << o.out << o.err;
  EXPECT_NE(o.out.find("max_iterations"), std::string::npos);
  EXPECT_EQ(run_cli({"fit", "multiexp", "--data", data, "--components", "2"}).code, 0);
}

TEST_F(CliFiles, DryRunValidatesWithoutWriting) {
  const auto out = path("never.csv");
  const auto o = run_cli({"simulate", "rate", "--config", preset("fig_s6.cfg"), "--dry-run", "--out", out});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out.rfind("dry-run ok", 0), 0u);
  EXPECT_FALSE(fs::exists(out));
  const auto cfg = write("bad.cfg", "[rates]\nunit = ns\nradiative = -1\n");
  EXPECT_EQ(run_cli({"simulate", "rate", "--config", cfg, "--dry-run"}).code, 2);
}

TEST_F(CliFiles, EverySubcommandSupportsDryRun) {
  const auto trace = write("t.csv", "t_ns,counts\n1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n7,8\n");
  const auto g2 = write("g.csv", "tau_ns,g2\n0,0\n3,0.2\n6,0.4\n");
  const auto res = write("r.csv", "Bz_mT,freq_MHz\n0,995.7\n0,1273.7\n10,1000\n10,1250\n20,1010\n");
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "rate"},
      {"simulate", "recovery"},
      {"simulate", "g2"},
      {"simulate", "pulse-response"},
      {"simulate", "field-scan"},
      {"simulate", "lac-map"},
      {"simulate", "resonances"},
      {"simulate", "onp"},
      {"fit", "multiexp", "--data", trace},
      {"fit", "g2", "--data", g2},
      {"fit", "hyperfine", "--data", res},
      {"fit", "assign-lifetimes", "--trace", "none=" + trace, "--trace", "D+E=" + trace},
      {"analyze", "fermi-dipolar", "--azz", "-117", "--aperp", "-94"},
      {"analyze", "spin-density", "--f", "-101", "--d", "-7.8"},
      {"analyze", "r12", "--D", "1134.7"},
  };
  for (auto args : commands) {
    args.push_back("--dry-run");
    const auto o = run_cli(args);
    EXPECT_EQ(o.code, 0) << args[0] << " " << args[1] << ": " << o.err;
    EXPECT_EQ(o.out.rfind("dry-run ok", 0), 0u) << args[1];
  }
}

TEST_F(CliFiles, SeededOutputIsByteIdentical) {
  const std::vector<std::string> base{"simulate", "recovery", "--counts", "17000", "--pulse", "D+E"};
  auto with = [&](const std::string& seed, const std::string& name) {
    auto args = base;
    args.insert(args.end(), {"--seed", seed, "--out", path(name)});
    EXPECT_EQ(run_cli(args).code, 0);
    return read(path(name));
  };
  const auto a = with("7", "a.csv");
  const auto b = with("7", "b.csv");
  const auto c = with("8", "c.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);

  const auto fit1 = run_cli({"fit", "multiexp", "--data", path("a.csv"), "--bootstrap", "20", "--seed", "4",
                             "--format", "json"});
  const auto fit2 = run_cli({"fit", "multiexp", "--data", path("a.csv"), "--bootstrap", "20", "--seed", "4",
                             "--format", "json"});
  EXPECT_EQ(fit1.code, 0) << fit1.err;
  EXPECT_EQ(fit1.out, fit2.out);
}

TEST(Cli, CurveOutputHasHeaderPlusRows) {
  const auto o = run_cli({"simulate", "rate", "--config", preset("fig_s6.cfg")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(std::count(o.out.begin(), o.out.end(), '\n'), 61);
  EXPECT_EQ(o.out.substr(0, 8), "dark_ns,");
}

TEST(Cli, PresetsLoadAndReproduceReferenceNumbers) {
  const auto fd = run_cli({"analyze", "spin-density", "--config", preset("table_s3.cfg"), "--azz", "-117", "--aperp", "-94"});
  EXPECT_EQ(fd.code, 0) << fd.err;
  EXPECT_EQ(fd.out, "cs2 = 0.274, cp2 = 0.726, eta = 0.098\n");
  const auto r = run_cli({"analyze", "r12", "--config", preset("table_s3.cfg")});
  EXPECT_EQ(r.out, "r12_angstrom = 4.097\n");
  const auto onp = run_cli({"simulate", "onp", "--config", preset("onp_basic.cfg"), "--format", "json"});
  ASSERT_EQ(onp.code, 0) << onp.err;
  EXPECT_NE(onp.out.find("\"polarization\": 0.58"), std::string::npos) << onp.out;
}

TEST(Cli, ConfigDirectoryFromEnvironment) {
  ::setenv("ST1_CONFIG_DIR", ST1_CONFIG_SOURCE_DIR, 1);
  const auto o = run_cli({"analyze", "r12", "--config", "table_s3.cfg"});
  ::unsetenv("ST1_CONFIG_DIR");
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, "r12_angstrom = 4.097\n");
}

TEST_F(CliFiles, AssignLifetimesFromSimulatedTraces) {
  std::vector<std::string> args{"fit", "assign-lifetimes"};
  int seed = 100;
  for (const std::string pulse : {"none", "D+E", "D-E", "2E"}) {
    const auto file = path("trace_" + std::to_string(seed) + ".csv");
    ASSERT_EQ(run_cli({"simulate", "recovery", "--counts", "17000", "--pulse", pulse, "--seed", std::to_string(seed++),
                       "--out", file})
                  .code,
              0);
    args.insert(args.end(), {"--trace", pulse + "=" + file});
  }
  args.insert(args.end(), {"--format", "json"});
  const auto o = run_cli(args);
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("\"ambiguous\": false"), std::string::npos) << o.out;
}
