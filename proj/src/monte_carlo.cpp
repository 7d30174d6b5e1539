#include "regretlab/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

namespace regretlab::mc {

namespace {

// Fixed-shape pairwise summation: the result depends only on the array
// contents and order, never on how the work that produced it was scheduled.
double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

MeanStderr mean_stderr(const std::vector<double>& samples) {
  MeanStderr out;
  const std::size_t n = samples.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(samples.data(), n) / static_cast<double>(n);
  if (n == 1) return out;
  std::vector<double> dev_sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = samples[i] - out.mean;
    dev_sq[i] = d * d;
  }
  const double var =
      pairwise_sum(dev_sq.data(), n) / static_cast<double>(n - 1);
  out.stderr_mean = std::sqrt(var / static_cast<double>(n));
  return out;
}

std::uint64_t chain_checksums(const std::vector<std::uint64_t>& parts) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const std::uint64_t part : parts) {
    hash ^= part;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

struct RealizationOutcome {
  double regret = 0.0;
  bool diverged = false;
  std::uint64_t checksum = 0;
};

void run_range(ControllerKind kind, const sim::ArxSystem& system,
               const sim::ExplorationPolicy& policy, const noise::NoiseBank& bank,
               const noise::NoiseBank* w_bank, const sim::SimConfig& sim_config, long lo,
               long hi, std::vector<RealizationOutcome>* outcomes) {
  const bool needs_w = policy.kind == sim::ExplorationPolicy::Kind::kDecaying;
  std::vector<double> e_local, w_local;
  for (long i = lo; i < hi; ++i) {
    const std::vector<double>* e_arr;
    if (bank.cached()) {
      e_arr = &bank.view(i);
    } else {
      bank.fill(i, e_local);
      e_arr = &e_local;
    }
    const std::vector<double>* w_arr = nullptr;
    if (needs_w) {
      if (w_bank->cached()) {
        w_arr = &w_bank->view(i);
      } else {
        w_bank->fill(i, w_local);
        w_arr = &w_local;
      }
    }
    const sim::SimResult result =
        kind == ControllerKind::kMv
            ? sim::simulate_mvac(system, policy, *e_arr, sim_config, w_arr)
            : sim::simulate_lqac(system, policy, *e_arr, sim_config, w_arr);
    auto& slot = (*outcomes)[static_cast<std::size_t>(i)];
    slot.regret = result.regret_sample;
    slot.diverged = result.diverged;
    slot.checksum = noise::array_checksum(*e_arr);
  }
}

}  // namespace

Grid::Grid(double min_value_in, double max_value_in, long count_in)
    : min_value(min_value_in), max_value(max_value_in), count(count_in) {
  if (count < 1) {
    throw std::invalid_argument("Grid: count must be >= 1, got " + std::to_string(count));
  }
  if (!(min_value > 0.0) || !std::isfinite(min_value)) {
    throw std::invalid_argument("Grid: logarithmic spacing requires min > 0, got " +
                                std::to_string(min_value));
  }
  if (!(max_value >= min_value) || !std::isfinite(max_value)) {
    throw std::invalid_argument("Grid: max must be >= min");
  }
}

std::vector<double> Grid::points() const {
  std::vector<double> pts(static_cast<std::size_t>(count));
  if (count == 1) {
    pts[0] = min_value;
    return pts;
  }
  const double log_min = std::log(min_value);
  const double log_max = std::log(max_value);
  const double denom = static_cast<double>(count - 1);
  for (long k = 0; k < count; ++k) {
    pts[static_cast<std::size_t>(k)] =
        std::exp(log_min + (log_max - log_min) * static_cast<double>(k) / denom);
  }
  pts.front() = min_value;  // pin the endpoints against rounding drift
  pts.back() = max_value;
  return pts;
}

MeanStderr winsorized_mean_stderr(std::vector<double> samples, double fraction) {
  if (!(fraction >= 0.0) || fraction >= 0.5) {
    throw std::invalid_argument("winsorized_mean_stderr: fraction must be in [0, 0.5), got " +
                                std::to_string(fraction));
  }
  if (samples.empty()) {
    throw std::invalid_argument("winsorized_mean_stderr: no samples");
  }
  const std::size_t n = samples.size();
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (k > 0) {
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double low = sorted[k];
    const double high = sorted[n - 1 - k];
    for (auto& x : samples) x = std::clamp(x, low, high);
  }
  return mean_stderr(samples);
}

EstimateResult estimate_regret(ControllerKind kind, const sim::ArxSystem& system,
                               const sim::ExplorationPolicy& policy,
                               const noise::NoiseBank& bank, const EstimateOptions& options) {
  if (policy.kind == sim::ExplorationPolicy::Kind::kDecaying) {
    if (options.w_bank == nullptr) {
      throw std::invalid_argument(
          "estimate_regret: decaying policy requires an exploration noise bank");
    }
    if (options.w_bank->horizon() != bank.horizon()) {
      throw std::invalid_argument("estimate_regret: exploration bank horizon " +
                                  std::to_string(options.w_bank->horizon()) +
                                  " does not match noise bank horizon " +
                                  std::to_string(bank.horizon()));
    }
    if (options.w_bank->count() < bank.count()) {
      throw std::invalid_argument(
          "estimate_regret: exploration bank has fewer realizations than the noise bank");
    }
  }
  if (!(options.winsorize_fraction >= 0.0) || options.winsorize_fraction >= 0.5) {
    throw std::invalid_argument("estimate_regret: winsorize fraction must be in [0, 0.5)");
  }

  const long m = bank.count();
  std::vector<RealizationOutcome> outcomes(static_cast<std::size_t>(m));
  const long threads = std::clamp<long>(options.threads, 1, m);
  if (threads == 1) {
    run_range(kind, system, policy, bank, options.w_bank, options.sim, 0, m, &outcomes);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    const long chunk = (m + threads - 1) / threads;
    for (long w = 0; w < threads; ++w) {
      const long lo = w * chunk;
      const long hi = std::min(m, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, w, lo, hi] {
        try {
          run_range(kind, system, policy, bank, options.w_bank, options.sim, lo, hi,
                    &outcomes);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  EstimateResult result;
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(m));
  std::vector<std::uint64_t> checksums(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) {
    const auto& slot = outcomes[static_cast<std::size_t>(i)];
    if (slot.diverged) ++result.diverged;
    if (!slot.diverged || options.include_diverged) samples.push_back(slot.regret);
    checksums[static_cast<std::size_t>(i)] = slot.checksum;
  }
  result.checksum = chain_checksums(checksums);
  if (samples.empty()) {
    throw AllRealizationsDiverged("estimate_regret: all " + std::to_string(m) +
                                  " realizations diverged and diverged runs are excluded");
  }
  result.used = static_cast<long>(samples.size());
  const MeanStderr ms = options.winsorize_fraction > 0.0
                            ? winsorized_mean_stderr(samples, options.winsorize_fraction)
                            : mean_stderr(samples);
  result.mean = ms.mean;
  result.stderr_mean = ms.stderr_mean;
  return result;
}

namespace {

// Shared exhaustive-search loop: evaluate the estimate at every grid point,
// keep the strictly smallest mean (ties fall to the smaller parameter), and
// optionally polish an interior optimum with a golden-section pass.
template <typename Evaluate>
SearchResult grid_search(const Grid& grid, bool refine, const Evaluate& evaluate) {
  const auto pts = grid.points();
  SearchResult out;
  out.grid_regrets.reserve(pts.size());
  EstimateResult best;
  std::size_t best_idx = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const EstimateResult est = evaluate(pts[k]);
    out.grid_regrets.push_back(est.mean);
    if (k == 0 || est.mean < best.mean) {
      best = est;
      best_idx = k;
    }
  }
  out.parameter = pts[best_idx];
  out.regret = best.mean;
  out.stderr_mean = best.stderr_mean;
  out.diverged = best.diverged;
  out.checksum = best.checksum;
  out.boundary = pts.size() > 1 && (best_idx == 0 || best_idx + 1 == pts.size());

  if (refine && pts.size() >= 3 && !out.boundary) {
    // golden-section in log space between the grid neighbors of the argmin
    const double inv_phi = 0.6180339887498949;
    double lo = std::log(pts[best_idx - 1]);
    double hi = std::log(pts[best_idx + 1]);
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    EstimateResult f1 = evaluate(std::exp(x1));
    EstimateResult f2 = evaluate(std::exp(x2));
    for (int iter = 0; iter < 24; ++iter) {
      if (f1.mean <= f2.mean) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = evaluate(std::exp(x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = evaluate(std::exp(x2));
      }
    }
    const double x_best = f1.mean <= f2.mean ? x1 : x2;
    const EstimateResult& f_best = f1.mean <= f2.mean ? f1 : f2;
    if (f_best.mean < out.regret) {
      out.parameter = std::exp(x_best);
      out.regret = f_best.mean;
      out.stderr_mean = f_best.stderr_mean;
      out.diverged = f_best.diverged;
    }
  }
  return out;
}

}  // namespace

SearchResult optimize_pulse(ControllerKind kind, const sim::ArxSystem& system,
                            const noise::NoiseBank& bank, const Grid& beta_grid,
                            const SearchOptions& options) {
  return grid_search(beta_grid, options.refine, [&](double beta) {
    const auto policy = sim::ExplorationPolicy::immediate(beta, options.n_i);
    return estimate_regret(kind, system, policy, bank, options.estimate);
  });
}

SearchResult optimize_decay(const sim::ArxSystem& system, const noise::NoiseBank& e_bank,
                            const noise::NoiseBank& w_bank, const Grid& alpha_grid,
                            const SearchOptions& options) {
  EstimateOptions with_w = options.estimate;
  with_w.w_bank = &w_bank;
  return grid_search(alpha_grid, options.refine, [&](double alpha) {
    const auto policy = sim::ExplorationPolicy::decaying(alpha, options.n_i);
    return estimate_regret(ControllerKind::kLq, system, policy, e_bank, with_w);
  });
}

namespace {

EstimateOptions base_estimate_options(const SweepConfig& config) {
  EstimateOptions options;
  options.sim = config.sim;
  options.include_diverged = config.include_diverged;
  options.winsorize_fraction = config.winsorize_fraction;
  options.threads = config.threads;
  return options;
}

}  // namespace

std::vector<MvacRow> sweep_mvac(const SweepConfig& config) {
  const noise::NoiseBank e_bank(config.seed, 0, config.realizations, config.horizon,
                                !config.streaming);
  const EstimateOptions base = base_estimate_options(config);
  SearchOptions search;
  search.estimate = base;
  search.n_i = config.n_i;
  const auto lazy = sim::ExplorationPolicy::lazy();

  std::vector<MvacRow> rows;
  for (const double sigma_e2 : config.sigma_grid.points()) {
    const sim::ArxSystem system(config.a0, config.b0, sigma_e2);
    const EstimateResult lz =
        estimate_regret(ControllerKind::kMv, system, lazy, e_bank, base);
    const SearchResult im =
        optimize_pulse(ControllerKind::kMv, system, e_bank, config.beta_grid, search);
    MvacRow row;
    row.sigma_e2 = sigma_e2;
    row.lazy_mean = lz.mean;
    row.lazy_stderr = lz.stderr_mean;
    row.lazy_diverged = lz.diverged;
    row.beta_star = im.parameter;
    row.immediate_mean = im.regret;
    row.immediate_stderr = im.stderr_mean;
    row.immediate_diverged = im.diverged;
    row.beta_boundary = im.boundary;
    row.lazy_checksum = lz.checksum;
    row.immediate_checksum = im.checksum;
    rows.push_back(row);
  }
  return rows;
}

std::vector<LqacRow> sweep_lqac(const SweepConfig& config) {
  const noise::NoiseBank e_bank(config.seed, 0, config.realizations, config.horizon,
                                !config.streaming);
  const noise::NoiseBank w_bank(config.seed, 1, config.realizations, config.horizon,
                                !config.streaming);
  const EstimateOptions base = base_estimate_options(config);
  SearchOptions search;
  search.estimate = base;
  search.n_i = config.n_i;

  std::vector<LqacRow> rows;
  for (const double sigma_e2 : config.sigma_grid.points()) {
    const sim::ArxSystem system(config.a0, config.b0, sigma_e2);
    const SearchResult im =
        optimize_pulse(ControllerKind::kLq, system, e_bank, config.beta_grid, search);
    const SearchResult de =
        optimize_decay(system, e_bank, w_bank, config.alpha_grid, search);
    LqacRow row;
    row.sigma_e2 = sigma_e2;
    row.beta_star = im.parameter;
    row.immediate_mean = im.regret;
    row.immediate_stderr = im.stderr_mean;
    row.immediate_diverged = im.diverged;
    row.beta_boundary = im.boundary;
    row.alpha_star = de.parameter;
    row.decaying_mean = de.regret;
    row.decaying_stderr = de.stderr_mean;
    row.decaying_diverged = de.diverged;
    row.alpha_boundary = de.boundary;
    row.immediate_checksum = im.checksum;
    row.decaying_checksum = de.checksum;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace regretlab::mc
