#include "regretlab/experiment_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace regretlab::io {

namespace {

using nlohmann::ordered_json;

ordered_json parse_document(const std::string& text, const std::string& origin) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError(origin + ": top-level JSON value must be an object");
  }
  return doc;
}

std::string read_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw ConfigError("cannot open \"" + path + "\"");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
    }
  }
}

double require_number(const ordered_json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ConfigError(where + ": missing field \"" + key + "\"");
  }
  if (!obj[key].is_number()) {
    throw ConfigError(where + ": field \"" + key + "\" must be a number");
  }
  return obj[key].get<double>();
}

double optional_number(const ordered_json& obj, const std::string& key, double fallback,
                       const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw ConfigError(where + ": field \"" + key + "\" must be a number");
  }
  return obj[key].get<double>();
}

long optional_integer(const ordered_json& obj, const std::string& key, long fallback,
                      const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) {
    throw ConfigError(where + ": field \"" + key + "\" must be an integer");
  }
  return obj[key].get<long>();
}

bool optional_bool(const ordered_json& obj, const std::string& key, bool fallback,
                   const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) {
    throw ConfigError(where + ": field \"" + key + "\" must be a boolean");
  }
  return obj[key].get<bool>();
}

mc::Grid parse_grid(const ordered_json& obj, const std::string& key, const mc::Grid& fallback,
                    const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& g = obj[key];
  if (!g.is_object()) {
    throw ConfigError(where + ": field \"" + key + "\" must be an object {min, max, count}");
  }
  const std::string grid_where = where + "." + key;
  reject_unknown_keys(g, {"min", "max", "count"}, grid_where);
  const double min_value = require_number(g, "min", grid_where);
  const double max_value = require_number(g, "max", grid_where);
  const long count = optional_integer(g, "count", -1, grid_where);
  if (count < 0) {
    throw ConfigError(grid_where + ": missing field \"count\"");
  }
  try {
    return mc::Grid(min_value, max_value, count);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(grid_where + ": " + e.what());
  }
}

// Matrix values are a scalar (1x1) or a square array of row arrays; the
// result must be symmetric and positive semidefinite.
linalg::PsdMatrix parse_psd(const ordered_json& value, const std::string& where) {
  linalg::SymMatrix sym = linalg::SymMatrix::identity(1);
  if (value.is_number()) {
    sym = linalg::SymMatrix::diag({value.get<double>()});
  } else if (value.is_array()) {
    std::vector<std::vector<double>> rows;
    for (const auto& row : value) {
      if (!row.is_array()) {
        throw ConfigError(where + ": matrix rows must be arrays");
      }
      std::vector<double> out_row;
      for (const auto& cell : row) {
        if (!cell.is_number()) {
          throw ConfigError(where + ": matrix entries must be numbers");
        }
        out_row.push_back(cell.get<double>());
      }
      rows.push_back(std::move(out_row));
    }
    if (rows.empty()) {
      throw ConfigError(where + ": matrix must not be empty");
    }
    for (const auto& row : rows) {
      if (row.size() != rows.size()) {
        throw ConfigError(where + ": matrix must be square");
      }
    }
    const int n = static_cast<int>(rows.size());
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] !=
            rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
          throw ConfigError(where + ": matrix is not symmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
        }
      }
    }
    try {
      sym = linalg::SymMatrix::from_rows(rows);
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  } else {
    throw ConfigError(where + ": must be a number or an array of row arrays");
  }
  try {
    return linalg::PsdMatrix(sym);
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::apply_paper_scale() {
  horizon = 100000;
  sigma_grid = mc::Grid(1e-5, 1.0, 100);
  beta_grid = mc::Grid(1e-5, 1.0, 100);
  alpha_grid = mc::Grid(1e-5, 1.0, 100);
  mc_reps_mvac = 1000;
  mc_reps_lqac = 100;
}

void ExperimentConfig::validate() const {
  if (!std::isfinite(a0) || std::fabs(a0) >= 1.0) {
    throw ConfigError("config: system.a0 must satisfy |a0| < 1");
  }
  if (!std::isfinite(b0) || b0 == 0.0) {
    throw ConfigError("config: system.b0 must be nonzero");
  }
  if (n_i < 2) {
    throw ConfigError("config: init.n_i must be >= 2");
  }
  if (horizon < static_cast<long>(n_i) + 1) {
    throw ConfigError("config: horizon must be >= n_i + 1");
  }
  if (mc_reps_mvac < 1 || mc_reps_lqac < 1) {
    throw ConfigError("config: repetition counts must be >= 1");
  }
  if (!std::isfinite(p_init_scale) || p_init_scale < 0.0) {
    throw ConfigError("config: init.p_init_scale must be >= 0");
  }
  if (!std::isfinite(a_init) || !std::isfinite(b_init)) {
    throw ConfigError("config: init.a_init and init.b_init must be finite");
  }
  if (!std::isfinite(q) || q < 0.0) {
    throw ConfigError("config: lq_weights.q must be >= 0");
  }
  if (!std::isfinite(r) || r <= 0.0) {
    throw ConfigError("config: lq_weights.r must be > 0");
  }
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
  const ordered_json doc = parse_document(text, origin);
  reject_unknown_keys(doc,
                      {"system", "horizon", "sigma_grid", "beta_grid", "alpha_grid",
                       "mc_reps_mvac", "mc_reps_lqac", "seed", "init", "lq_weights",
                       "include_diverged", "output"},
                      origin);
  ExperimentConfig config;
  if (doc.contains("system")) {
    const auto& sys = doc["system"];
    if (!sys.is_object()) {
      throw ConfigError(origin + ": field \"system\" must be an object");
    }
    reject_unknown_keys(sys, {"a0", "b0"}, origin + ".system");
    config.a0 = optional_number(sys, "a0", config.a0, origin + ".system");
    config.b0 = optional_number(sys, "b0", config.b0, origin + ".system");
  }
  config.horizon = optional_integer(doc, "horizon", config.horizon, origin);
  config.sigma_grid = parse_grid(doc, "sigma_grid", config.sigma_grid, origin);
  config.beta_grid = parse_grid(doc, "beta_grid", config.beta_grid, origin);
  config.alpha_grid = parse_grid(doc, "alpha_grid", config.alpha_grid, origin);
  config.mc_reps_mvac = optional_integer(doc, "mc_reps_mvac", config.mc_reps_mvac, origin);
  config.mc_reps_lqac = optional_integer(doc, "mc_reps_lqac", config.mc_reps_lqac, origin);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0) {
      throw ConfigError(origin + ": field \"seed\" must be a nonnegative integer");
    }
    config.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("init")) {
    const auto& init = doc["init"];
    if (!init.is_object()) {
      throw ConfigError(origin + ": field \"init\" must be an object");
    }
    reject_unknown_keys(init, {"p_init_scale", "a_init", "b_init", "n_i"}, origin + ".init");
    config.p_init_scale = optional_number(init, "p_init_scale", config.p_init_scale,
                                          origin + ".init");
    config.a_init = optional_number(init, "a_init", config.a_init, origin + ".init");
    config.b_init = optional_number(init, "b_init", config.b_init, origin + ".init");
    config.n_i = static_cast<int>(optional_integer(init, "n_i", config.n_i, origin + ".init"));
  }
  if (doc.contains("lq_weights")) {
    const auto& weights = doc["lq_weights"];
    if (!weights.is_object()) {
      throw ConfigError(origin + ": field \"lq_weights\" must be an object");
    }
    reject_unknown_keys(weights, {"q", "r"}, origin + ".lq_weights");
    config.q = optional_number(weights, "q", config.q, origin + ".lq_weights");
    config.r = optional_number(weights, "r", config.r, origin + ".lq_weights");
  }
  config.include_diverged = optional_bool(doc, "include_diverged", config.include_diverged,
                                          origin);
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) {
      throw ConfigError(origin + ": field \"output\" must be a string");
    }
    config.output = doc["output"].get<std::string>();
  }
  config.validate();
  return config;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  return from_json_text(read_file(path), path);
}

std::string ExperimentConfig::to_json() const {
  ordered_json doc;
  doc["system"] = {{"a0", a0}, {"b0", b0}};
  doc["horizon"] = horizon;
  doc["sigma_grid"] = {{"min", sigma_grid.min_value},
                       {"max", sigma_grid.max_value},
                       {"count", sigma_grid.count}};
  doc["beta_grid"] = {{"min", beta_grid.min_value},
                      {"max", beta_grid.max_value},
                      {"count", beta_grid.count}};
  doc["alpha_grid"] = {{"min", alpha_grid.min_value},
                       {"max", alpha_grid.max_value},
                       {"count", alpha_grid.count}};
  doc["mc_reps_mvac"] = mc_reps_mvac;
  doc["mc_reps_lqac"] = mc_reps_lqac;
  doc["seed"] = seed;
  doc["init"] = {{"p_init_scale", p_init_scale},
                 {"a_init", a_init},
                 {"b_init", b_init},
                 {"n_i", n_i}};
  doc["lq_weights"] = {{"q", q}, {"r", r}};
  doc["include_diverged"] = include_diverged;
  if (!output.empty()) {
    doc["output"] = output;
  }
  return doc.dump();
}

mc::SweepConfig to_sweep_config(const ExperimentConfig& config, long realizations) {
  mc::SweepConfig sweep;
  sweep.seed = config.seed;
  sweep.a0 = config.a0;
  sweep.b0 = config.b0;
  sweep.horizon = config.horizon;
  sweep.realizations = realizations;
  sweep.sigma_grid = config.sigma_grid;
  sweep.beta_grid = config.beta_grid;
  sweep.alpha_grid = config.alpha_grid;
  sweep.sim.a_init = config.a_init;
  sweep.sim.b_init = config.b_init;
  sweep.sim.p_init_scale = config.p_init_scale;
  sweep.sim.q = config.q;
  sweep.sim.r = config.r;
  sweep.n_i = config.n_i;
  sweep.include_diverged = config.include_diverged;
  // Cached banks hold realizations x horizon doubles; switch to on-demand
  // generation beyond ~256 MB so full-scale sweeps fit in memory.
  sweep.streaming = realizations * config.horizon > (1L << 25);
  return sweep;
}

TheorySpecFile theory_spec_from_text(const std::string& text, const std::string& origin) {
  const ordered_json doc = parse_document(text, origin);
  reject_unknown_keys(doc, {"S", "W", "Z", "T", "solver"}, origin);
  for (const char* field : {"S", "W", "T"}) {
    if (!doc.contains(field)) {
      throw ConfigError(origin + ": missing field \"" + std::string(field) + "\"");
    }
  }
  const linalg::PsdMatrix w = parse_psd(doc["W"], origin + ".W");
  const linalg::PsdMatrix s = parse_psd(doc["S"], origin + ".S");
  if (s.dim() != w.dim()) {
    throw ConfigError(origin + ": S and W must share the same dimension");
  }
  linalg::PsdMatrix z = linalg::PsdMatrix::identity(w.dim());
  if (doc.contains("Z")) {
    z = parse_psd(doc["Z"], origin + ".Z");
    if (z.dim() != w.dim()) {
      throw ConfigError(origin + ": Z and W must share the same dimension");
    }
  }
  if (!doc["T"].is_number_integer()) {
    throw ConfigError(origin + ": field \"T\" must be an integer");
  }
  const long horizon = doc["T"].get<long>();
  model::SolveOptions solve;
  if (doc.contains("solver")) {
    const auto& solver = doc["solver"];
    if (!solver.is_object()) {
      throw ConfigError(origin + ": field \"solver\" must be an object");
    }
    reject_unknown_keys(solver, {"max_iterations", "grad_tol", "force_numeric"},
                        origin + ".solver");
    solve.max_iterations = optional_integer(solver, "max_iterations", solve.max_iterations,
                                            origin + ".solver");
    solve.grad_tol = optional_number(solver, "grad_tol", solve.grad_tol, origin + ".solver");
    if (solver.contains("force_numeric")) {
      if (!solver["force_numeric"].is_boolean()) {
        throw ConfigError(origin + ".solver: field \"force_numeric\" must be a boolean");
      }
      solve.force_numeric = solver["force_numeric"].get<bool>();
    }
  }
  try {
    return TheorySpecFile{model::RegretModelSpec(w, z, s, horizon), solve};
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

TheorySpecFile theory_spec_from_file(const std::string& path) {
  return theory_spec_from_text(read_file(path), path);
}

ScheduleFile schedule_from_text(const std::string& text, const std::string& origin,
                                const model::RegretModelSpec& spec) {
  ordered_json doc = parse_document(text, origin);
  if (doc.contains("schedule")) {
    // A theory report embeds its optimal schedule; unwrap it.
    doc = doc["schedule"];
    if (!doc.is_object()) {
      throw ConfigError(origin + ": field \"schedule\" must be an object");
    }
  }
  if (!doc.contains("kind") || !doc["kind"].is_string()) {
    throw ConfigError(origin + ": missing string field \"kind\"");
  }
  const std::string kind = doc["kind"].get<std::string>();
  const int dim = spec.dim();
  const long horizon = spec.horizon;
  if (kind == "zero") {
    reject_unknown_keys(doc, {"kind"}, origin);
    return ScheduleFile{model::ExcitationSchedule::zero(dim, horizon), kind};
  }
  if (kind == "one_pulse") {
    reject_unknown_keys(doc, {"kind", "x1"}, origin);
    if (!doc.contains("x1")) {
      throw ConfigError(origin + ": missing field \"x1\"");
    }
    const linalg::PsdMatrix x1 = parse_psd(doc["x1"], origin + ".x1");
    if (x1.dim() != dim) {
      throw ConfigError(origin + ": x1 dimension does not match the problem spec");
    }
    return ScheduleFile{model::ExcitationSchedule::one_pulse(x1, horizon), kind};
  }
  if (kind == "decaying") {
    reject_unknown_keys(doc, {"kind", "alpha"}, origin);
    const double alpha = require_number(doc, "alpha", origin);
    if (!std::isfinite(alpha) || alpha < 0.0) {
      throw ConfigError(origin + ": field \"alpha\" must be >= 0");
    }
    return ScheduleFile{
        model::ExcitationSchedule::sqrt_decay(linalg::PsdMatrix::identity(dim), alpha, horizon),
        kind};
  }
  if (kind == "explicit") {
    reject_unknown_keys(doc, {"kind", "steps"}, origin);
    if (!doc.contains("steps") || !doc["steps"].is_array()) {
      throw ConfigError(origin + ": missing array field \"steps\"");
    }
    const auto& steps = doc["steps"];
    if (static_cast<long>(steps.size()) != horizon) {
      throw ConfigError(origin + ": \"steps\" must have exactly T = " + std::to_string(horizon) +
                        " entries, got " + std::to_string(steps.size()));
    }
    model::ExcitationSchedule schedule;
    schedule.entries.reserve(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const linalg::PsdMatrix entry =
          parse_psd(steps[t], origin + ".steps[" + std::to_string(t) + "]");
      if (entry.dim() != dim) {
        throw ConfigError(origin + ".steps[" + std::to_string(t) +
                          "]: dimension does not match the problem spec");
      }
      schedule.entries.push_back(entry);
    }
    return ScheduleFile{std::move(schedule), kind};
  }
  throw ConfigError(origin + ": unknown schedule kind \"" + kind +
                    "\" (expected zero, one_pulse, decaying, or explicit)");
}

ScheduleFile schedule_from_file(const std::string& path, const model::RegretModelSpec& spec) {
  return schedule_from_text(read_file(path), path, spec);
}

}  // namespace regretlab::io
