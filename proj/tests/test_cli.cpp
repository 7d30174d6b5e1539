// End-to-end tests for the regretlab command-line tool, driven through a
// subprocess so the exit codes, stdout/stderr split, and on-disk artifacts
// are exercised exactly as a user sees them.  The binary path arrives in the
// REGRETLAB_CLI environment variable (set by ctest); falls back to ./regretlab
// next to the test binary for manual runs.
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "regretlab/csv.hpp"
#include "regretlab/experiment_config.hpp"
#include "regretlab/monte_carlo.hpp"

namespace {

const std::string& cli_path() {
  static const std::string path = [] {
    if (const char* env = std::getenv("REGRETLAB_CLI")) {
      return std::string(env);
    }
    for (const char* candidate : {"./regretlab", "./build/regretlab"}) {
      if (::access(candidate, X_OK) == 0) {
        return std::string(candidate);
      }
    }
    return std::string();
  }();
  REQUIRE_MESSAGE(!path.empty(), ("regretlab binary not found; set REGRETLAB_CLI"));
  return path;
}

const std::string& scratch_dir() {
  static const std::string dir = [] {
    char tmpl[] = "/tmp/regretlab_cli_XXXXXX";
    char* made = ::mkdtemp(tmpl);
    REQUIRE_MESSAGE(made != nullptr, "mkdtemp failed");
    return std::string(made);
  }();
  return dir;
}

std::string scratch_path(const std::string& name) {
  static int counter = 0;
  return scratch_dir() + "/" + std::to_string(counter++) + "_" + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("cannot open " + path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI through the shell; `env_prefix` may carry VAR=value overrides.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string out_file = scratch_path("stdout.txt");
  const std::string err_file = scratch_path("stderr.txt");
  std::string command;
  if (!env_prefix.empty()) {
    command += env_prefix + " ";
  }
  command += cli_path() + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(command.c_str());
  RunResult result;
  REQUIRE_MESSAGE(WIFEXITED(status), ("command did not exit normally: " + command));
  result.code = WEXITSTATUS(status);
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

std::string write_config(const std::string& name, const std::string& json_text) {
  const std::string path = scratch_path(name);
  write_file(path, json_text);
  return path;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::size_t column_index(const regretlab::io::CsvTable& table, const std::string& name) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == name) {
      return i;
    }
  }
  REQUIRE_MESSAGE(false, ("column not found: " + name));
  return 0;
}

}  // namespace

TEST_CASE("theory subcommand reproduces the pinned scalar reports") {
  const std::string spec2 = write_config("spec2.json", R"({"S": 1, "W": 1, "Z": 1, "T": 2})");
  const std::string report = scratch_path("report.json");
  const RunResult run = run_cli("theory --config " + spec2 + " --out " + report);
  REQUIRE(run.code == 0);

  const nlohmann::json j = nlohmann::json::parse(run.out);
  CHECK(j.at("case") == "case2_immediate");
  CHECK(j.at("c_T").get<double>() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(j.at("lower_bound").get<double>() == doctest::Approx(1.44).epsilon(1e-12));
  CHECK(j.at("upper_bound").get<double>() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(j.at("regret").get<double>() == doctest::Approx(1.4844353317658567).epsilon(1e-12));
  REQUIRE(j.at("x1").is_array());
  CHECK(j.at("x1").size() == 1);
  CHECK(j.at("x1")[0][0].get<double>() == doctest::Approx(0.13224188190125158).epsilon(1e-9));
  CHECK(j.at("schedule").at("kind") == "one_pulse");

  // --out mirrors stdout byte for byte
  CHECK(slurp(report) == run.out);

  // singular-information closed form: x1 = sqrt(T) * sqrt(W), regret = 2 sqrt(T) tr(sqrt(W))
  const std::string spec0 = write_config("spec0.json", R"({"S": 0, "W": 4, "T": 100})");
  const RunResult zero = run_cli("theory --config " + spec0);
  REQUIRE(zero.code == 0);
  const nlohmann::json j0 = nlohmann::json::parse(zero.out);
  CHECK(j0.at("case") == "case3_immediate");
  CHECK_FALSE(j0.contains("c_T"));  // undefined when S is singular
  CHECK(j0.at("x1")[0][0].get<double>() == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(j0.at("regret").get<double>() == doctest::Approx(40.0).epsilon(1e-9));
}

TEST_CASE("model-regret evaluates schedules and round-trips theory reports") {
  const std::string spec2 = write_config("mr_spec.json", R"({"S": 1, "W": 1, "Z": 1, "T": 2})");

  // lazy (zero excitation): sum_t tr(W (tS)^-1) = 1 + 1/2
  const std::string zero_sched = write_config("sched_zero.json", R"({"kind": "zero"})");
  const RunResult lazy = run_cli("model-regret --config " + spec2 + " --schedule " + zero_sched);
  REQUIRE(lazy.code == 0);
  const nlohmann::json jl = nlohmann::json::parse(lazy.out);
  CHECK(jl.at("schedule_kind") == "zero");
  CHECK(jl.at("regret").get<double>() == doctest::Approx(1.5).epsilon(1e-12));

  // a theory report is itself a valid schedule file (the embedded one-pulse)
  const std::string report = scratch_path("rt_report.json");
  const RunResult solved = run_cli("theory --config " + spec2 + " --out " + report);
  REQUIRE(solved.code == 0);
  const double solved_regret = nlohmann::json::parse(solved.out).at("regret").get<double>();
  const RunResult round = run_cli("model-regret --config " + spec2 + " --schedule " + report);
  REQUIRE(round.code == 0);
  const double round_regret = nlohmann::json::parse(round.out).at("regret").get<double>();
  CHECK(round_regret == doctest::Approx(solved_regret).epsilon(1e-9));

  // any admissible schedule is dominated by the solved optimum
  const std::string decay = write_config("sched_decay.json", R"({"kind": "decaying", "alpha": 0.5})");
  const RunResult decayed = run_cli("model-regret --config " + spec2 + " --schedule " + decay);
  REQUIRE(decayed.code == 0);
  CHECK(nlohmann::json::parse(decayed.out).at("regret").get<double>() >= solved_regret);
}

TEST_CASE("malformed inputs exit with the config error code") {
  const auto expect_config_error = [](const std::string& args, const std::string& env = "") {
    const RunResult run = run_cli(args, env);
    CHECK(run.code == 2);
    CHECK_MESSAGE(!run.err.empty(), ("no diagnostic on stderr for: " + args));
  };

  const std::string unknown = write_config("unknown_key.json", R"({"horizon": 100, "bogus": 1})");
  expect_config_error("mvac-sweep --config " + unknown);

  const std::string bad_grid =
      write_config("bad_grid.json", R"({"sigma_grid": {"min": 1.0, "max": 0.1, "count": 5}})");
  expect_config_error("mvac-sweep --config " + bad_grid);

  const std::string no_t = write_config("no_t.json", R"({"S": 1, "W": 1})");
  expect_config_error("theory --config " + no_t);

  const std::string spec2 = write_config("ce_spec.json", R"({"S": 1, "W": 1, "Z": 1, "T": 2})");
  const std::string bad_kind = write_config("bad_kind.json", R"({"kind": "nonsense"})");
  expect_config_error("model-regret --config " + spec2 + " --schedule " + bad_kind);

  expect_config_error("theory --config /nonexistent/spec.json");

  // environment seed override must be a nonnegative integer
  const std::string tiny = write_config(
      "seed_env.json", R"({"horizon": 100, "mc_reps_mvac": 5, "sigma_grid": {"min": 0.01, "max": 0.01, "count": 1}})");
  expect_config_error("single-run --config " + tiny + " --policy lazy --sigma-e2 0.01 --index 0",
                      "REGRETLAB_SEED=abc");

  // realization index must stay inside the configured repetition count
  expect_config_error("single-run --config " + tiny + " --policy lazy --sigma-e2 0.01 --index 7");
  expect_config_error("single-run --config " + tiny + " --policy lazy --sigma-e2 -1 --index 0");

  // command-line parse failures use the same code
  expect_config_error("single-run --policy bogus --sigma-e2 1 --index 0");
  expect_config_error("theory");
  expect_config_error("no-such-subcommand");
  expect_config_error("mvac-sweep --config " + tiny + " --winsorize 60");
  expect_config_error("mvac-sweep --config " + tiny + " --threads -1");
}

TEST_CASE("solver non-convergence surfaces as exit code 3") {
  const std::string starved = write_config(
      "starved.json", R"({"S": 1, "W": 1, "Z": 1, "T": 2, "solver": {"max_iterations": 3}})");
  const RunResult run = run_cli("theory --config " + starved);
  CHECK(run.code == 3);
  CHECK_MESSAGE(contains(run.err, "iterations"), ("stderr was: " + run.err));
}

TEST_CASE("mvac-sweep writes a re-parseable CSV with the documented columns") {
  const std::string config = write_config("mvac_tiny.json", R"({
    "horizon": 500,
    "sigma_grid": {"min": 0.001, "max": 0.01, "count": 3},
    "beta_grid": {"min": 0.01, "max": 1.0, "count": 5},
    "mc_reps_mvac": 20
  })");
  const std::string out = scratch_path("mvac_tiny.csv");
  const RunResult run = run_cli("mvac-sweep --config " + config + " --threads 2 --out " + out);
  REQUIRE(run.code == 0);
  CHECK(contains(run.out, "wrote "));
  CHECK(contains(run.err, "crossover: sigma_e2="));

  const regretlab::io::CsvTable table = regretlab::io::read_csv(out);
  const std::vector<std::string> expected_header = {
      "sigma_e2",           "regret_lazy", "stderr_lazy",   "regret_immediate",
      "stderr_immediate",   "beta_star",   "diverged_lazy", "diverged_immediate"};
  CHECK(table.header == expected_header);
  REQUIRE(table.rows.size() == 3);

  REQUIRE(!table.comments.empty());
  CHECK(table.comments.front().rfind("regretlab ", 0) == 0);
  bool saw_command = false, saw_seed = false;
  for (const auto& comment : table.comments) {
    saw_command = saw_command || contains(comment, "command: mvac-sweep");
    saw_seed = saw_seed || contains(comment, "\"seed\":1");
  }
  CHECK(saw_command);
  CHECK(saw_seed);

  const auto sigma_points = regretlab::mc::Grid(0.001, 0.01, 3).points();
  const std::size_t sigma_col = column_index(table, "sigma_e2");
  const std::size_t beta_col = column_index(table, "beta_star");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    REQUIRE(table.rows[i].size() == expected_header.size());
    CHECK(table.rows[i][sigma_col] ==
          doctest::Approx(sigma_points[i]).epsilon(1e-9));
    CHECK(table.rows[i][beta_col] >= 0.01);
    CHECK(table.rows[i][beta_col] <= 1.0);
    for (const double cell : table.rows[i]) {
      CHECK(std::isfinite(cell));
    }
  }

  // the environment seed override is echoed in the metadata and changes the data
  const std::string out7 = scratch_path("mvac_seed7.csv");
  const RunResult run7 =
      run_cli("mvac-sweep --config " + config + " --threads 2 --out " + out7, "REGRETLAB_SEED=7");
  REQUIRE(run7.code == 0);
  const regretlab::io::CsvTable table7 = regretlab::io::read_csv(out7);
  bool saw_seed7 = false;
  for (const auto& comment : table7.comments) {
    saw_seed7 = saw_seed7 || contains(comment, "\"seed\":7");
  }
  CHECK(saw_seed7);
  CHECK(table7.rows[0][1] != table.rows[0][1]);

  // identical bytes regardless of the thread count
  const std::string out1 = scratch_path("mvac_t1.csv");
  const std::string out4 = scratch_path("mvac_t4.csv");
  REQUIRE(run_cli("mvac-sweep --config " + config + " --threads 1 --out " + out1).code == 0);
  REQUIRE(run_cli("mvac-sweep --config " + config + " --threads 4 --out " + out4).code == 0);
  CHECK(slurp(out1) == slurp(out4));
  CHECK(slurp(out1) == slurp(out));
}

TEST_CASE("lqac-sweep writes the documented column set") {
  const std::string config = write_config("lqac_tiny.json", R"({
    "horizon": 400,
    "sigma_grid": {"min": 0.001, "max": 0.01, "count": 2},
    "beta_grid": {"min": 0.01, "max": 1.0, "count": 3},
    "alpha_grid": {"min": 0.01, "max": 1.0, "count": 3},
    "mc_reps_lqac": 10
  })");
  const std::string out = scratch_path("lqac_tiny.csv");
  const RunResult run = run_cli("lqac-sweep --config " + config + " --threads 2 --out " + out);
  REQUIRE(run.code == 0);
  CHECK(contains(run.err, "immediate <= decaying at "));

  const regretlab::io::CsvTable table = regretlab::io::read_csv(out);
  const std::vector<std::string> expected_header = {
      "sigma_e2",         "regret_decaying", "stderr_decaying",   "alpha_star",
      "regret_immediate", "stderr_immediate", "beta_star",        "diverged_decaying",
      "diverged_immediate"};
  CHECK(table.header == expected_header);
  REQUIRE(table.rows.size() == 2);
  for (const auto& row : table.rows) {
    REQUIRE(row.size() == expected_header.size());
    for (const double cell : row) {
      CHECK(std::isfinite(cell));
    }
  }
}

TEST_CASE("single-run traces satisfy the plant recurrence and are deterministic") {
  const std::string config = write_config("sr_config.json", R"({
    "horizon": 300,
    "mc_reps_mvac": 10
  })");
  const std::string out = scratch_path("sr_trace.csv");
  const std::string args = "single-run --config " + config +
                           " --policy decaying --alpha 0.3 --sigma-e2 0.01 --index 2 --out " + out;
  const RunResult run = run_cli(args);
  REQUIRE(run.code == 0);

  const regretlab::io::CsvTable table = regretlab::io::read_csv(out);
  const std::vector<std::string> expected_header = {"t", "y", "u", "w", "e", "cumulative_regret"};
  CHECK(table.header == expected_header);
  REQUIRE(table.rows.size() == 300);

  const double a0 = -0.45, b0 = 0.67;
  long nonzero_w = 0;
  double prev_cum = 0.0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    CHECK(row[0] == static_cast<double>(i + 1));
    if (i == 0) {
      CHECK(row[1] == row[4]);  // y(1) = e(1) from rest
      CHECK(row[5] == 0.0);
    } else {
      const auto& prev = table.rows[i - 1];
      const double predicted = -a0 * prev[1] + b0 * prev[2] + row[4];
      CHECK(row[1] == doctest::Approx(predicted).epsilon(1e-6));
      CHECK(row[5] >= prev_cum);  // squared residuals only accumulate
    }
    if (row[3] != 0.0) {
      ++nonzero_w;
    }
    prev_cum = row[5];
  }
  CHECK(nonzero_w >= 290);  // decaying policy excites nearly every step

  // byte-for-byte repeatability
  const std::string again = scratch_path("sr_trace_again.csv");
  REQUIRE(run_cli("single-run --config " + config +
                  " --policy decaying --alpha 0.3 --sigma-e2 0.01 --index 2 --out " + again)
              .code == 0);
  CHECK(slurp(again) == slurp(out));

  // the lazy policy never injects exploration
  const std::string lazy_out = scratch_path("sr_lazy.csv");
  REQUIRE(run_cli("single-run --config " + config +
                  " --policy lazy --sigma-e2 0.01 --index 0 --out " + lazy_out)
              .code == 0);
  const regretlab::io::CsvTable lazy_table = regretlab::io::read_csv(lazy_out);
  for (const auto& row : lazy_table.rows) {
    CHECK(row[3] == 0.0);
  }
}

TEST_CASE("single-run with the exact frozen model reports zero regret") {
  // b0 = 0.5 makes the certainty-equivalence cancellation exact in binary,
  // and p_init_scale = 0 pins the identifier at the truth
  const std::string config = write_config("sr_exact.json", R"({
    "system": {"a0": -0.45, "b0": 0.5},
    "horizon": 200,
    "mc_reps_mvac": 5,
    "init": {"a_init": -0.45, "b_init": 0.5, "p_init_scale": 0.0, "n_i": 3}
  })");
  const std::string out = scratch_path("sr_exact.csv");
  REQUIRE(run_cli("single-run --config " + config +
                  " --policy lazy --sigma-e2 1.0 --index 0 --out " + out)
              .code == 0);
  const regretlab::io::CsvTable table = regretlab::io::read_csv(out);
  REQUIRE(table.rows.size() == 200);
  for (const auto& row : table.rows) {
    CHECK(row[5] == 0.0);
    CHECK(row[1] == row[4]);  // y tracks the noise exactly
  }
}

TEST_CASE("a high-noise lazy realization exhibits a regret burst") {
  // at the top of the noise grid at least one of the first 20 lazy traces
  // shows a cumulative-regret jump at least ten times its median increment
  const std::string config = write_config("sr_burst.json", R"({
    "horizon": 10000,
    "mc_reps_mvac": 20
  })");
  bool found_burst = false;
  for (int index = 0; index < 20 && !found_burst; ++index) {
    const std::string out = scratch_path("burst_" + std::to_string(index) + ".csv");
    const RunResult run = run_cli("single-run --config " + config +
                                  " --policy lazy --sigma-e2 1.0 --index " +
                                  std::to_string(index) + " --out " + out);
    REQUIRE(run.code == 0);
    const regretlab::io::CsvTable table = regretlab::io::read_csv(out);
    std::vector<double> steps;
    steps.reserve(table.rows.size());
    double prev = 0.0;
    for (const auto& row : table.rows) {
      steps.push_back(row[5] - prev);
      prev = row[5];
    }
    if (steps.size() < 100) {
      continue;
    }
    std::vector<double> sorted = steps;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double peak = *std::max_element(steps.begin(), steps.end());
    if (median > 0.0 && peak >= 10.0 * median) {
      found_burst = true;
    }
  }
  CHECK(found_burst);
}

TEST_CASE("paper-scale flag overrides the resolved configuration") {
  const std::string config = write_config("ps_config.json", R"({
    "horizon": 50,
    "mc_reps_mvac": 2
  })");
  const std::string out = scratch_path("ps_trace.csv");
  const RunResult run = run_cli("single-run --config " + config +
                                " --paper-scale --policy lazy --sigma-e2 0.0001 --index 0 --out " +
                                out);
  REQUIRE(run.code == 0);
  const regretlab::io::CsvTable table = regretlab::io::read_csv(out);
  CHECK(table.rows.size() == 100000);
  bool saw_horizon = false;
  for (const auto& comment : table.comments) {
    saw_horizon = saw_horizon || contains(comment, "\"horizon\":100000");
  }
  CHECK(saw_horizon);
}

TEST_CASE("experiment config parsing applies defaults and rejects bad fields") {
  using regretlab::io::ConfigError;
  using regretlab::io::ExperimentConfig;

  const ExperimentConfig defaults = ExperimentConfig::from_json_text("{}", "inline");
  CHECK(defaults.horizon == 100000);
  CHECK(defaults.mc_reps_mvac == 1000);
  CHECK(defaults.mc_reps_lqac == 100);
  CHECK(defaults.seed == 1);
  CHECK(defaults.sigma_grid.count == 100);
  defaults.validate();  // the defaults must be self-consistent

  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(R"({"bogus": 1})", "inline"),
                       doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(R"({"seed": -4})", "inline"),
                       doctest::Contains("seed"), ConfigError);

  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(R"({"init": {"n_i": 1}})", "inline"),
                       doctest::Contains("n_i"), ConfigError);
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_json_text(R"({"horizon": 3, "init": {"n_i": 3}})", "inline"),
      doctest::Contains("horizon"), ConfigError);

  // to_json round-trips every resolved field
  const ExperimentConfig custom = ExperimentConfig::from_json_text(
      R"({"horizon": 1234, "seed": 9, "init": {"p_init_scale": 7.5}})", "inline");
  const ExperimentConfig reparsed =
      ExperimentConfig::from_json_text(custom.to_json(), "inline");
  CHECK(reparsed.horizon == 1234);
  CHECK(reparsed.seed == 9);
  CHECK(reparsed.p_init_scale == 7.5);
  CHECK(reparsed.to_json() == custom.to_json());
}

TEST_CASE("theory specs and schedules parse with dimension checks") {
  using regretlab::io::ConfigError;

  const auto spec = regretlab::io::theory_spec_from_text(R"({"S": 1, "W": 1, "T": 2})", "inline");
  CHECK(spec.spec.horizon == 2);
  CHECK(spec.spec.dim() == 1);  // Z defaulted to the identity

  CHECK_THROWS_WITH_AS(regretlab::io::theory_spec_from_text(
                           R"({"S": [[1, 0], [0, 1]], "W": 1, "T": 2})", "inline"),
                       doctest::Contains("dimension"), ConfigError);
  CHECK_THROWS_WITH_AS(
      regretlab::io::theory_spec_from_text(R"({"S": 1, "W": 1, "T": 2.5})", "inline"),
      doctest::Contains("T"), ConfigError);
  CHECK_THROWS_WITH_AS(regretlab::io::theory_spec_from_text(
                           R"({"S": [[1, 0.2], [0.1, 1]], "W": 1, "T": 2})", "inline"),
                       doctest::Contains("symmetric"), ConfigError);

  const auto zero =
      regretlab::io::schedule_from_text(R"({"kind": "zero"})", "inline", spec.spec);
  CHECK(zero.kind == "zero");
  CHECK(zero.schedule.entries.size() == 2);

  CHECK_THROWS_WITH_AS(
      regretlab::io::schedule_from_text(R"({"kind": "mystery"})", "inline", spec.spec),
      doctest::Contains("kind"), ConfigError);
}

TEST_CASE("csv text round-trips through the reader") {
  using regretlab::io::CsvTable;

  CsvTable table;
  table.comments = {"regretlab test", "rows: 2"};
  table.header = {"alpha", "beta"};
  table.rows = {{0.1, -2.5e-7}, {3.0, 12345.678}};
  const std::string text = regretlab::io::csv_to_string(table);
  const CsvTable parsed = regretlab::io::csv_from_string(text);
  CHECK(parsed.comments == table.comments);
  CHECK(parsed.header == table.header);
  REQUIRE(parsed.rows.size() == 2);
  for (std::size_t i = 0; i < parsed.rows.size(); ++i) {
    for (std::size_t j = 0; j < parsed.rows[i].size(); ++j) {
      CHECK(parsed.rows[i][j] == doctest::Approx(table.rows[i][j]).epsilon(1e-11));
    }
  }

  CHECK_THROWS_WITH_AS(regretlab::io::csv_from_string("# only a comment\n"),
                       doctest::Contains("header"), std::runtime_error);
  CHECK_THROWS_WITH_AS(regretlab::io::csv_from_string("a,b\n1.0\n"),
                       doctest::Contains("fields"), std::runtime_error);
  CHECK_THROWS_WITH_AS(regretlab::io::csv_from_string("a,b\n1.0,zebra\n"),
                       doctest::Contains("non-numeric"), std::runtime_error);
}
