#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "estatcom/cli.hpp"

namespace fs = std::filesystem;
using estatcom::cli::dispatch;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "estatcom");
  std::ostringstream out, err;
  CliRun r;
  r.code = dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("estatcom_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

double report_value(const std::string& text, const std::string& key) {
  const auto at = text.find(key + ": ");
  if (at == std::string::npos) return std::nan("");
  return std::stod(text.substr(at + key.size() + 2));
}

}  // namespace

TEST(Cli, MarginsStableCase) {
  const CliRun r = run({"margins", "--apc-bw", "3", "--tec-bw", "0.3", "--zeta", "0.707"});
  EXPECT_EQ(r.code, 0);
  const double pm = report_value(r.out, "phase_margin_deg");
  EXPECT_GE(pm, 70.8);
  EXPECT_LE(pm, 80.8);
  EXPECT_NE(r.out.find("stable: true"), std::string::npos);
}

TEST(Cli, MarginsUnstableCase) {
  const CliRun r = run({"margins", "--apc-bw", "3", "--tec-bw", "10"});
  EXPECT_EQ(r.code, 0);
  const double pm = report_value(r.out, "phase_margin_deg");
  EXPECT_GE(pm, -6.7);
  EXPECT_LE(pm, 3.3);
  EXPECT_NE(r.out.find("stable: false"), std::string::npos);
}

TEST(Cli, SimulateTripExitsTwo) {
  const fs::path dir = scratch("trip");
  const CliRun r = run({"simulate", "--preset", "fig12a-noff", "--out", dir.string()});
  EXPECT_EQ(r.code, estatcom::cli::kTrip);
  EXPECT_TRUE(fs::exists(dir / "fig12a-noff.csv"));
  EXPECT_TRUE(fs::exists(dir / "fig12a-noff_summary.txt"));
  EXPECT_EQ(first_line(dir / "fig12a-noff.csv").substr(0, 7), "t,P_ac,");
}

TEST(Cli, SimulateCompletes) {
  const fs::path dir = scratch("ok");
  EXPECT_EQ(run({"simulate", "--preset", "fig12a-noff", "--feedforward", "on", "--out", dir.string()}).code, 0);
}

TEST(Cli, SimulateFromConfigFile) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  const fs::path cfg = dir / "c.json";
  std::ofstream(cfg) << R"({"preset": "fig12b-ff", "name": "short", "solver": {"t_end_s": 0.2}, "checks": []})";
  const CliRun r = run({"simulate", "--config", cfg.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "short.csv"));
}

TEST(Cli, BodeEmptyOutIsValidationError) {
  const CliRun r = run({"bode", "--case", "apc", "--bw", "3", "--out", ""});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--out"), std::string::npos);
  EXPECT_EQ(run({"bode", "--case", "apc", "--bw", "3"}).code, 1);
}

TEST(Cli, BodeWritesCsv) {
  const fs::path dir = scratch("bode");
  for (const char* kind : {"apc", "loop", "tec-ff", "tec-noff", "inertial"}) {
    const fs::path out = dir / (std::string(kind) + ".csv");
    const CliRun r = run({"bode", "--case", kind, "--out", out.string(), "--points", "50"});
    EXPECT_EQ(r.code, 0) << kind << r.err;
    EXPECT_EQ(first_line(out), "freq_hz,mag_db,phase_deg");
  }
  EXPECT_EQ(run({"bode", "--case", "inertial", "--H", "20", "--out", (dir / "h.csv").string()}).code, 0);
}

TEST(Cli, ValidationNamesOffendingFlag) {
  CliRun r = run({"margins", "--apc-bw", "-3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--apc-bw"), std::string::npos);
  r = run({"margins", "--bogus", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  r = run({"bode", "--case", "nyquist", "--out", "x.csv"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--case"), std::string::npos);
  r = run({"simulate", "--preset", "nope", "--out", "x"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--preset"), std::string::npos);
  r = run({"simulate", "--config", "/nonexistent/c.json", "--out", "x"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--config"), std::string::npos);
}

TEST(Cli, UnknownSubcommandAndMissingSubcommand) {
  CliRun r = run({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
}

TEST(Cli, HelpIsSuccess) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST(Cli, SweepWritesSummary) {
  const fs::path dir = scratch("sweep");
  const CliRun r = run({"sweep", "--param", "tec_bw", "--values", "1,10", "--preset", "fig12b-ff", "--out",
                     dir.string(), "--jobs", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(first_line(dir / "sweep_summary.csv").substr(0, 7), "tec_bw,");
  EXPECT_TRUE(fs::exists(dir / "fig12b-ff_tec_bw_10.csv"));
  EXPECT_EQ(run({"sweep", "--param", "H", "--values", "0", "--preset", "fig14-h10", "--out", dir.string()}).code,
            1);
}

TEST(Cli, VerifySmallSignal) {
  const CliRun r = run({"verify", "--suite", "smallsignal"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
