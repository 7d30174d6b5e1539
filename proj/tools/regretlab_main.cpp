#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "regretlab/csv.hpp"
#include "regretlab/experiment_config.hpp"
#include "regretlab/monte_carlo.hpp"
#include "regretlab/version.hpp"

namespace {

using nlohmann::ordered_json;
using regretlab::io::ConfigError;
using regretlab::io::CsvTable;
using regretlab::io::ExperimentConfig;
using regretlab::io::format_number;

std::optional<std::uint64_t> seed_override_from_env() {
  const char* env = std::getenv("REGRETLAB_SEED");
  if (env == nullptr) return std::nullopt;
  const std::string text(env);
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("REGRETLAB_SEED: must be a nonnegative integer, got \"" + text + "\"");
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(text.c_str(), &end, 10);
  if (errno != 0 || end != text.c_str() + text.size()) {
    throw ConfigError("REGRETLAB_SEED: invalid integer \"" + text + "\"");
  }
  return value;
}

ExperimentConfig load_experiment_config(const std::string& path, bool paper_scale) {
  ExperimentConfig config =
      path.empty() ? ExperimentConfig{} : ExperimentConfig::from_json_file(path);
  if (const auto seed = seed_override_from_env()) {
    config.seed = *seed;
  }
  if (paper_scale) {
    config.apply_paper_scale();
  }
  config.validate();
  return config;
}

int resolve_threads(int requested) {
  if (requested < 0) {
    throw ConfigError("--threads: must be >= 0");
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

double winsorize_fraction_from_pct(double pct) {
  if (!std::isfinite(pct) || pct < 0.0 || pct >= 50.0) {
    throw ConfigError("--winsorize: percentage must lie in [0, 50)");
  }
  return pct / 100.0;
}

ordered_json matrix_to_json(const regretlab::linalg::SymMatrix& m) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < m.dim(); ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < m.dim(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("cannot open \"" + path + "\" for writing");
  }
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) {
    throw std::runtime_error("failed writing \"" + path + "\"");
  }
}

int run_theory(const std::string& spec_path, const std::string& out_path) {
  const regretlab::io::TheorySpecFile file = regretlab::io::theory_spec_from_file(spec_path);
  const regretlab::model::ProblemOneSolution solution =
      regretlab::model::solve_problem_one(file.spec, file.solve);
  ordered_json report;
  report["case"] = regretlab::model::case_name(solution.case_label);
  if (!std::isnan(solution.c_t)) {
    report["c_T"] = solution.c_t;
  }
  report["x1"] = matrix_to_json(solution.x1.sym());
  report["regret"] = solution.regret;
  report["lower_bound"] = solution.lower_bound;
  report["upper_bound"] = solution.upper_bound;
  report["iterations"] = solution.iterations;
  report["grad_norm"] = solution.grad_norm;
  report["schedule"] = ordered_json{{"kind", "one_pulse"},
                                    {"x1", matrix_to_json(solution.x1.sym())}};
  report["version"] = regretlab::kVersion;
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text_file(out_path, text);
  }
  return 0;
}

int run_model_regret(const std::string& spec_path, const std::string& schedule_path,
                     const std::string& out_path) {
  const regretlab::io::TheorySpecFile file = regretlab::io::theory_spec_from_file(spec_path);
  const regretlab::io::ScheduleFile schedule =
      regretlab::io::schedule_from_file(schedule_path, file.spec);
  double regret = 0.0;
  try {
    regret = regretlab::model::evaluate_schedule(file.spec, schedule.schedule);
  } catch (const std::runtime_error& e) {
    // A schedule that leaves some information matrix singular is a user
    // input problem, not a solver failure.
    throw ConfigError(schedule_path + ": " + e.what());
  }
  ordered_json report;
  report["schedule_kind"] = schedule.kind;
  report["regret"] = regret;
  report["version"] = regretlab::kVersion;
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text_file(out_path, text);
  }
  return 0;
}

std::vector<std::string> sweep_comments(const char* command, const ExperimentConfig& config,
                                        double winsorize_fraction) {
  return {std::string("regretlab ") + regretlab::kVersion, std::string("command: ") + command,
          "config: " + config.to_json(),
          "winsorize_fraction: " + format_number(winsorize_fraction)};
}

int run_mvac_sweep(const std::string& config_path, std::string out_path, bool paper_scale,
                   int threads, double winsorize_pct) {
  const ExperimentConfig config = load_experiment_config(config_path, paper_scale);
  const double winsorize = winsorize_fraction_from_pct(winsorize_pct);
  regretlab::mc::SweepConfig sweep = to_sweep_config(config, config.mc_reps_mvac);
  sweep.threads = resolve_threads(threads);
  sweep.winsorize_fraction = winsorize;
  const std::vector<regretlab::mc::MvacRow> rows = regretlab::mc::sweep_mvac(sweep);

  CsvTable table;
  table.comments = sweep_comments("mvac-sweep", config, winsorize);
  table.header = {"sigma_e2",         "regret_lazy",      "stderr_lazy",
                  "regret_immediate", "stderr_immediate", "beta_star",
                  "diverged_lazy",    "diverged_immediate"};
  long boundary_count = 0;
  for (const auto& row : rows) {
    table.rows.push_back({row.sigma_e2, row.lazy_mean, row.lazy_stderr, row.immediate_mean,
                          row.immediate_stderr, row.beta_star,
                          static_cast<double>(row.lazy_diverged),
                          static_cast<double>(row.immediate_diverged)});
    boundary_count += row.beta_boundary ? 1 : 0;
  }
  if (out_path.empty()) out_path = config.output.empty() ? "mvac_sweep.csv" : config.output;
  regretlab::io::write_csv(out_path, table);

  bool crossed = false;
  for (const auto& row : rows) {
    if (row.immediate_mean < row.lazy_mean) {
      std::fprintf(stderr,
                   "crossover: sigma_e2=%s (regret_immediate=%s < regret_lazy=%s)\n",
                   format_number(row.sigma_e2).c_str(), format_number(row.immediate_mean).c_str(),
                   format_number(row.lazy_mean).c_str());
      crossed = true;
      break;
    }
  }
  if (!crossed) {
    std::fprintf(stderr, "crossover: none\n");
  }
  if (boundary_count > 0) {
    std::fprintf(stderr,
                 "note: beta_star sits on a grid endpoint at %ld of %zu sigma points "
                 "(grid may be too narrow)\n",
                 boundary_count, rows.size());
  }
  std::printf("wrote %s (%zu rows)\n", out_path.c_str(), rows.size());
  return 0;
}

int run_lqac_sweep(const std::string& config_path, std::string out_path, bool paper_scale,
                   int threads, double winsorize_pct) {
  const ExperimentConfig config = load_experiment_config(config_path, paper_scale);
  const double winsorize = winsorize_fraction_from_pct(winsorize_pct);
  regretlab::mc::SweepConfig sweep = to_sweep_config(config, config.mc_reps_lqac);
  sweep.threads = resolve_threads(threads);
  sweep.winsorize_fraction = winsorize;
  const std::vector<regretlab::mc::LqacRow> rows = regretlab::mc::sweep_lqac(sweep);

  CsvTable table;
  table.comments = sweep_comments("lqac-sweep", config, winsorize);
  table.header = {"sigma_e2",  "regret_decaying",  "stderr_decaying",
                  "alpha_star", "regret_immediate", "stderr_immediate",
                  "beta_star",  "diverged_decaying", "diverged_immediate"};
  long beta_boundary_count = 0;
  long alpha_boundary_count = 0;
  long immediate_wins = 0;
  for (const auto& row : rows) {
    table.rows.push_back({row.sigma_e2, row.decaying_mean, row.decaying_stderr, row.alpha_star,
                          row.immediate_mean, row.immediate_stderr, row.beta_star,
                          static_cast<double>(row.decaying_diverged),
                          static_cast<double>(row.immediate_diverged)});
    beta_boundary_count += row.beta_boundary ? 1 : 0;
    alpha_boundary_count += row.alpha_boundary ? 1 : 0;
    immediate_wins += row.immediate_mean <= row.decaying_mean ? 1 : 0;
  }
  if (out_path.empty()) out_path = config.output.empty() ? "lqac_sweep.csv" : config.output;
  regretlab::io::write_csv(out_path, table);

  std::fprintf(stderr, "immediate <= decaying at %ld of %zu sigma points\n", immediate_wins,
               rows.size());
  if (beta_boundary_count > 0 || alpha_boundary_count > 0) {
    std::fprintf(stderr,
                 "note: optimum on a grid endpoint (beta: %ld, alpha: %ld of %zu sigma "
                 "points; grid may be too narrow)\n",
                 beta_boundary_count, alpha_boundary_count, rows.size());
  }
  std::printf("wrote %s (%zu rows)\n", out_path.c_str(), rows.size());
  return 0;
}

int run_single_run(const std::string& config_path, std::string out_path, bool paper_scale,
                   const std::string& policy_name, double sigma_e2, long index, double beta,
                   double alpha) {
  const ExperimentConfig config = load_experiment_config(config_path, paper_scale);
  if (!std::isfinite(sigma_e2) || sigma_e2 < 0.0) {
    throw ConfigError("--sigma-e2: must be >= 0");
  }
  if (index < 0 || index >= config.mc_reps_mvac) {
    throw ConfigError("--index: must lie in [0, mc_reps_mvac) = [0, " +
                      std::to_string(config.mc_reps_mvac) + ")");
  }

  regretlab::sim::ExplorationPolicy policy = regretlab::sim::ExplorationPolicy::lazy();
  try {
    if (policy_name == "immediate") {
      policy = regretlab::sim::ExplorationPolicy::immediate(beta, config.n_i);
    } else if (policy_name == "decaying") {
      policy = regretlab::sim::ExplorationPolicy::decaying(alpha, config.n_i);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }

  std::optional<regretlab::sim::ArxSystem> system;
  try {
    system.emplace(config.a0, config.b0, sigma_e2);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }

  const long count = index + 1;
  const regretlab::noise::NoiseBank e_bank(config.seed, 0, count, config.horizon,
                                           /*cache=*/false);
  std::vector<double> e_bar;
  e_bank.fill(index, e_bar);
  std::vector<double> w_bar;
  const std::vector<double>* w_ptr = nullptr;
  if (policy.kind == regretlab::sim::ExplorationPolicy::Kind::kDecaying) {
    const regretlab::noise::NoiseBank w_bank(config.seed, 1, count, config.horizon,
                                             /*cache=*/false);
    w_bank.fill(index, w_bar);
    w_ptr = &w_bar;
  }

  regretlab::sim::SimConfig sim_config;
  sim_config.a_init = config.a_init;
  sim_config.b_init = config.b_init;
  sim_config.p_init_scale = config.p_init_scale;
  sim_config.q = config.q;
  sim_config.r = config.r;
  sim_config.record_trace = true;
  const regretlab::sim::SimResult result =
      regretlab::sim::simulate_mvac(*system, policy, e_bar, sim_config, w_ptr);

  CsvTable table;
  table.comments = {std::string("regretlab ") + regretlab::kVersion,
                    "command: single-run",
                    "config: " + config.to_json(),
                    "policy: " + policy_name,
                    "sigma_e2: " + format_number(sigma_e2),
                    "realization_index: " + std::to_string(index)};
  if (policy_name == "immediate") {
    table.comments.push_back("beta: " + format_number(beta));
  } else if (policy_name == "decaying") {
    table.comments.push_back("alpha: " + format_number(alpha));
  }
  table.comments.push_back("regret_sample: " + format_number(result.regret_sample));
  table.header = {"t", "y", "u", "w", "e", "cumulative_regret"};
  double cumulative = 0.0;
  for (std::size_t i = 0; i < result.trace.y.size(); ++i) {
    cumulative += result.trace.instant_regret[i];
    table.rows.push_back({static_cast<double>(i + 1), result.trace.y[i], result.trace.u[i],
                          result.trace.w[i], result.trace.e[i], cumulative});
  }
  if (out_path.empty()) out_path = config.output.empty() ? "single_run.csv" : config.output;
  regretlab::io::write_csv(out_path, table);

  if (result.diverged) {
    std::fprintf(stderr, "note: realization diverged at t=%ld; trace truncated\n",
                 result.diverged_at);
  }
  std::printf("wrote %s (%zu rows)\n", out_path.c_str(), table.rows.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regretlab: exploration-design regret model and adaptive-control experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string schedule_path;
  std::string out_path;
  bool paper_scale = false;
  int threads = 0;
  double winsorize_pct = 0.0;
  std::string policy_name;
  double sigma_e2 = 0.0;
  long index = 0;
  double beta = 0.0;
  double alpha = 0.0;

  CLI::App* theory = app.add_subcommand(
      "theory", "Solve the abstract exploration-design problem for a spec file");
  theory->add_option("--config", config_path, "Problem spec JSON {S, W, Z, T, solver}")
      ->required();
  theory->add_option("--out", out_path, "Write the JSON report here as well");

  CLI::App* model_regret = app.add_subcommand(
      "model-regret", "Evaluate an excitation schedule under the abstract model");
  model_regret->add_option("--config", config_path, "Problem spec JSON {S, W, Z, T}")
      ->required();
  model_regret
      ->add_option("--schedule", schedule_path,
                   "Schedule JSON (zero | one_pulse | decaying | explicit, or a theory report)")
      ->required();
  model_regret->add_option("--out", out_path, "Write the JSON report here as well");

  const auto add_sweep_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config JSON (defaults: full scale)");
    cmd->add_option("--out", out_path, "Output CSV path");
    cmd->add_option("--threads", threads, "Worker threads (0 = auto)");
    cmd->add_flag("--paper-scale", paper_scale,
                  "Override horizon/grids/repetitions with the full-scale constants");
    cmd->add_option("--winsorize", winsorize_pct,
                    "Winsorize each tail by this percentage of samples");
  };
  CLI::App* mvac = app.add_subcommand(
      "mvac-sweep", "Lazy vs optimal-immediate minimum-variance sweep over sigma_e^2");
  add_sweep_flags(mvac);
  CLI::App* lqac = app.add_subcommand(
      "lqac-sweep", "Optimal-decaying vs optimal-immediate linear-quadratic sweep");
  add_sweep_flags(lqac);

  CLI::App* single = app.add_subcommand(
      "single-run", "Trace one minimum-variance realization (per-step cumulative regret)");
  single->add_option("--config", config_path, "Experiment config JSON (defaults: full scale)");
  single->add_option("--out", out_path, "Output CSV path");
  single->add_flag("--paper-scale", paper_scale,
                   "Override horizon/grids/repetitions with the full-scale constants");
  single->add_option("--policy", policy_name, "lazy | immediate | decaying")
      ->required()
      ->check(CLI::IsMember({"lazy", "immediate", "decaying"}));
  single->add_option("--sigma-e2", sigma_e2, "Noise variance sigma_e^2")->required();
  single->add_option("--index", index, "Realization index into the noise bank")->required();
  single->add_option("--beta", beta, "Pulse height for --policy immediate (default 0)");
  single->add_option("--alpha", alpha, "Decay scale for --policy decaying (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the CLI11 diagnostic
    return 2;     // command-line problems are config errors
  }

  try {
    if (theory->parsed()) {
      return run_theory(config_path, out_path);
    }
    if (model_regret->parsed()) {
      return run_model_regret(config_path, schedule_path, out_path);
    }
    if (mvac->parsed()) {
      return run_mvac_sweep(config_path, out_path, paper_scale, threads, winsorize_pct);
    }
    if (lqac->parsed()) {
      return run_lqac_sweep(config_path, out_path, paper_scale, threads, winsorize_pct);
    }
    if (single->parsed()) {
      return run_single_run(config_path, out_path, paper_scale, policy_name, sigma_e2, index,
                            beta, alpha);
    }
    std::fprintf(stderr, "error: no subcommand selected\n");
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const regretlab::model::SolverNonConvergence& e) {
    std::fprintf(stderr,
                 "solver error: %s (gradient norm %s after %ld iterations)\n", e.what(),
                 format_number(e.grad_norm).c_str(), e.iterations);
    return 3;
  } catch (const regretlab::mc::AllRealizationsDiverged& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
