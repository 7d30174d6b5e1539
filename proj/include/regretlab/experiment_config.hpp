#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "regretlab/monte_carlo.hpp"
#include "regretlab/regret_model.hpp"

// JSON ingestion for the command-line tool: the experiment configuration
// (defaults reproduce the published full-scale protocol), the abstract-model
// problem spec, and excitation schedule files.  Unknown keys are rejected so
// typos fail loudly instead of silently running defaults.
namespace regretlab::io {

// User-input problem (unreadable file, malformed JSON, unknown key, invalid
// value).  The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  double a0 = -0.45;
  double b0 = 0.67;
  long horizon = 100000;
  mc::Grid sigma_grid{1e-5, 1.0, 100};
  mc::Grid beta_grid{1e-5, 1.0, 100};
  mc::Grid alpha_grid{1e-5, 1.0, 100};
  long mc_reps_mvac = 1000;
  long mc_reps_lqac = 100;
  std::uint64_t seed = 1;
  double p_init_scale = 1e3;
  double a_init = -0.3;
  double b_init = 0.8;
  int n_i = 3;
  double q = 1.0;
  double r = 1.0;
  bool include_diverged = true;
  std::string output;  // default output path; empty = per-command default

  // Restores the full-scale constants (horizon 1e5, 100-point grids,
  // 1000/100 repetitions) on top of whatever was loaded.
  void apply_paper_scale();

  void validate() const;  // throws ConfigError naming the offending field

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text, const std::string& origin);

  // Single-line JSON echo of every resolved field (for output-file headers).
  std::string to_json() const;
};

// Converts to the Monte-Carlo sweep configuration; realizations chooses the
// per-experiment repetition count (mc_reps_mvac or mc_reps_lqac).
mc::SweepConfig to_sweep_config(const ExperimentConfig& config, long realizations);

struct TheorySpecFile {
  model::RegretModelSpec spec;
  model::SolveOptions solve;
};

// Parses {"S": ..., "W": ..., "Z": ..., "T": ..., "solver": {...}} where
// matrix values are either a scalar (1x1) or a square row-major array of
// arrays; Z defaults to the identity and solver overrides are optional.
TheorySpecFile theory_spec_from_file(const std::string& path);
TheorySpecFile theory_spec_from_text(const std::string& text, const std::string& origin);

struct ScheduleFile {
  model::ExcitationSchedule schedule;
  std::string kind;  // "zero", "one_pulse", "decaying", or "explicit"
};

// Parses a schedule document: {"kind": "zero"} | {"kind": "one_pulse",
// "x1": M} | {"kind": "decaying", "alpha": a} (L_{w,t} = (alpha/sqrt(t))*I)
// | {"kind": "explicit", "steps": [M...]}.  A document with a "schedule"
// key (a theory report) is unwrapped first, so theory output files round-trip
// directly into model-regret.
ScheduleFile schedule_from_file(const std::string& path, const model::RegretModelSpec& spec);
ScheduleFile schedule_from_text(const std::string& text, const std::string& origin,
                                const model::RegretModelSpec& spec);

}  // namespace regretlab::io
