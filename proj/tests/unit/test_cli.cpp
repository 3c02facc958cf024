#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

using std::string;
namespace fs = std::filesystem;

namespace {

const char* kCli = ABANDONQ_CLI_PATH;

int run_cmd(const string& cmd) {
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

string tmp_dir(const string& name) {
  fs::path p = fs::temp_directory_path() / "abq_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

string slurp(const string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const string& path, const string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// fast scenario: single small n, linear hazard rate
string small_scenario(const string& dir, const string& extra_gates = "") {
  string cfg = R"({
  "schema_version": 1,
  "scenario": "cli_small",
  "model": {
    "lambda": 1.0, "theta": 0.0, "p": 4.0,
    "interarrival": {"kind": "exponential"},
    "service": {"kind": "exponential"},
    "patience": {"variant": "hazard_poly", "coeffs": [1.0]}
  },
  "experiment": {
    "n_grid": [4], "arrivals_per_n": 20000, "seeds_per_n": 2,
    "base_seed": 5, "num_batches": 8, "moment_orders": [1.0],
    "cdf_grid": [0.5, 1.0, 2.0], "x_max": 50.0, "quad_tol": 1e-10
  },
  "gates": {)" + extra_gates + R"(},
  "output_dir": ")" + dir + R"(/out"
})";
  string path = dir + "/scenario.json";
  spit(path, cfg);
  return path;
}

}  // namespace

TEST_CASE("help exits cleanly") {
  CHECK(run_cmd(string(kCli) + " --help > /dev/null 2>&1") == 0);
  CHECK(run_cmd(string(kCli) + " run --help > /dev/null 2>&1") == 0);
}

TEST_CASE("missing or malformed configs exit with the config code") {
  string dir = tmp_dir("badcfg");
  CHECK(run_cmd(string(kCli) + " run --config /no/such/file.json > /dev/null 2>&1") == 2);
  spit(dir + "/garbage.json", "{ not json");
  CHECK(run_cmd(string(kCli) + " run --config " + dir + "/garbage.json > /dev/null 2>&1") == 2);
  // no subcommand at all is a usage error
  CHECK(run_cmd(string(kCli) + " > /dev/null 2>&1") == 2);
}

TEST_CASE("run: small scenario passes and writes its report") {
  string dir = tmp_dir("run_ok");
  string cfg = small_scenario(dir);
  string log = dir + "/log.txt";
  CHECK(run_cmd(string(kCli) + " run --config " + cfg + " > " + log + " 2>&1") == 0);
  CHECK(fs::exists(dir + "/out/report.csv"));
  CHECK(fs::exists(dir + "/out/report.json"));
  string text = slurp(log);
  CHECK(text.find("all gates passed") != string::npos);
}

TEST_CASE("run: --out overrides the config's output directory") {
  string dir = tmp_dir("run_out");
  string cfg = small_scenario(dir);
  string alt = dir + "/alt";
  CHECK(run_cmd(string(kCli) + " run --config " + cfg + " --out " + alt +
                " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(alt + "/report.csv"));
  CHECK(!fs::exists(dir + "/out/report.csv"));
}

TEST_CASE("run: impossible gate exits 1 but the report survives") {
  string dir = tmp_dir("run_gate");
  string cfg = small_scenario(dir, "\"moment_rel_err\": 1e-6");
  string log = dir + "/log.txt";
  CHECK(run_cmd(string(kCli) + " run --config " + cfg + " > " + log + " 2>&1") == 1);
  CHECK(fs::exists(dir + "/out/report.csv"));
  CHECK(slurp(log).find("GATES FAILED") != string::npos);
}

TEST_CASE("run: unstable model exits 3") {
  string dir = tmp_dir("run_unstable");
  string cfg = dir + "/unstable.json";
  spit(cfg, R"({
  "schema_version": 1,
  "scenario": "unstable",
  "model": {
    "lambda": 1.0, "theta": 0.5, "p": 4.0,
    "interarrival": {"kind": "exponential"},
    "service": {"kind": "exponential"},
    "patience": {"variant": "none"}
  },
  "experiment": {
    "n_grid": [4], "arrivals_per_n": 20000, "seeds_per_n": 2,
    "base_seed": 5, "num_batches": 8, "moment_orders": [1.0],
    "cdf_grid": [0.5, 1.0], "x_max": 50.0, "quad_tol": 1e-10
  },
  "gates": {},
  "output_dir": ")" + dir + R"(/out"
})");
  CHECK(run_cmd(string(kCli) + " run --config " + cfg + " > /dev/null 2>&1") == 3);
}

TEST_CASE("seed override from the environment") {
  string dir = tmp_dir("seed_env");
  string cfg = small_scenario(dir);
  // garbage seed is a config error
  CHECK(run_cmd("ABANDONQ_SEED=abc " + string(kCli) + " run --config " + cfg +
                " > /dev/null 2>&1") == 2);
  // numeric override changes the estimates
  string out1 = dir + "/s1", out2 = dir + "/s2", out3 = dir + "/s3";
  CHECK(run_cmd("ABANDONQ_SEED=101 " + string(kCli) + " run --config " + cfg +
                " --out " + out1 + " > /dev/null 2>&1") == 0);
  CHECK(run_cmd("ABANDONQ_SEED=202 " + string(kCli) + " run --config " + cfg +
                " --out " + out2 + " > /dev/null 2>&1") == 0);
  CHECK(run_cmd("ABANDONQ_SEED=101 " + string(kCli) + " run --config " + cfg +
                " --out " + out3 + " > /dev/null 2>&1") == 0);
  CHECK(slurp(out1 + "/report.csv") != slurp(out2 + "/report.csv"));
  CHECK(slurp(out1 + "/report.csv") == slurp(out3 + "/report.csv"));
}

TEST_CASE("validate: shipped scenarios are clean") {
  string log = tmp_dir("validate") + "/log.txt";
  CHECK(run_cmd(string(kCli) + " validate --config " ABANDONQ_SCENARIO_DIR
                "/mm1m_interchange.json > " + log + " 2>&1") == 0);
  string text = slurp(log);
  CHECK(text.find("moments_finite") != string::npos);
  CHECK(text.find("diffusion_stability") != string::npos);
}

TEST_CASE("validate: stability failure exits 3, config failure exits 2") {
  string dir = tmp_dir("validate_bad");
  string unstable = dir + "/unstable.json";
  spit(unstable, R"({
  "schema_version": 1,
  "scenario": "unstable",
  "model": {
    "lambda": 1.0, "theta": 0.5, "p": 4.0,
    "interarrival": {"kind": "exponential"},
    "service": {"kind": "exponential"},
    "patience": {"variant": "none"}
  },
  "experiment": {
    "n_grid": [4], "arrivals_per_n": 20000, "seeds_per_n": 2,
    "base_seed": 5, "num_batches": 8, "moment_orders": [1.0],
    "cdf_grid": [0.5, 1.0], "x_max": 50.0, "quad_tol": 1e-10
  },
  "gates": {},
  "output_dir": ")" + dir + R"(/out"
})");
  CHECK(run_cmd(string(kCli) + " validate --config " + unstable + " > /dev/null 2>&1") == 3);

  string bounded = dir + "/bounded.json";
  spit(bounded, R"({
  "schema_version": 1,
  "scenario": "bounded",
  "model": {
    "lambda": 1.0, "theta": 0.0, "p": 4.0,
    "interarrival": {"kind": "uniform", "width": 2.0},
    "service": {"kind": "exponential"},
    "patience": {"variant": "hazard_poly", "coeffs": [1.0]}
  },
  "experiment": {
    "n_grid": [4], "arrivals_per_n": 20000, "seeds_per_n": 2,
    "base_seed": 5, "num_batches": 8, "moment_orders": [1.0],
    "cdf_grid": [0.5, 1.0], "x_max": 50.0, "quad_tol": 1e-10
  },
  "gates": {},
  "output_dir": ")" + dir + R"(/out"
})");
  CHECK(run_cmd(string(kCli) + " validate --config " + bounded + " > /dev/null 2>&1") == 2);
  // the waiver turns the hard failure into a warning
  CHECK(run_cmd(string(kCli) + " validate --config " + bounded +
                " --waive-a5 > /dev/null 2>&1") == 0);
}

TEST_CASE("diffusion: summary and csv exports") {
  string dir = tmp_dir("diffusion");
  string cfg = small_scenario(dir);
  string log = dir + "/log.txt";
  string dcsv = dir + "/density.csv", ccsv = dir + "/cdf.csv";
  CHECK(run_cmd(string(kCli) + " diffusion --config " + cfg + " --density-csv " + dcsv +
                " --cdf-csv " + ccsv + " --points 51 > " + log + " 2>&1") == 0);
  string text = slurp(log);
  CHECK(text.find("sigma^2") != string::npos);
  string density = slurp(dcsv);
  CHECK(density.rfind("x,", 0) == 0);
  int lines = 0;
  for (char c : density)
    if (c == '\n') ++lines;
  CHECK(lines == 52);  // header + 51 rows
  CHECK(slurp(ccsv).rfind("x,", 0) == 0);
}

TEST_CASE("plot: renders from a report, rejects a missing one") {
  string dir = tmp_dir("plot");
  string cfg = small_scenario(dir);
  REQUIRE(run_cmd(string(kCli) + " run --config " + cfg + " > /dev/null 2>&1") == 0);
  CHECK(run_cmd(string(kCli) + " plot --report " + dir + "/out/report.json > /dev/null 2>&1") == 0);
  CHECK(fs::exists(dir + "/out/error_vs_n.svg"));
  CHECK(fs::exists(dir + "/out/cdf_overlay.svg"));
  CHECK(fs::exists(dir + "/out/abandonment.svg"));
  string alt = dir + "/plots";
  CHECK(run_cmd(string(kCli) + " plot --report " + dir + "/out/report.json --out " + alt +
                " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(alt + "/error_vs_n.svg"));
  CHECK(run_cmd(string(kCli) + " plot --report /no/such/report.json > /dev/null 2>&1") == 2);
}
