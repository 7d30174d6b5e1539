#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regretlab/adaptive_sim.hpp"
#include "regretlab/noise.hpp"

// Monte-Carlo machinery for the adaptive-control experiments: common-random-
// number noise banks feed regret estimation, exhaustive grid searches over
// the exploration parameters, and the sigma_e^2 sweeps behind the minimum-
// variance and linear-quadratic comparison figures. Every aggregate is
// reduced in fixed index order (pairwise summation), so results are
// bit-identical for any thread count.
namespace regretlab::mc {

struct Grid {
  double min_value;
  double max_value;
  long count;

  // logarithmic spacing; requires count >= 1, min > 0, max >= min
  Grid(double min_value_in, double max_value_in, long count_in);

  std::vector<double> points() const;  // ascending, endpoints exact
};

enum class ControllerKind { kMv, kLq };

class AllRealizationsDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimateOptions {
  sim::SimConfig sim;            // initial estimates, LQ weights, guards
  bool include_diverged = true;  // clipped samples enter the mean (default)
  double winsorize_fraction = 0.0;  // per-tail clamp fraction, 0 = off
  int threads = 1;
  const noise::NoiseBank* w_bank = nullptr;  // required for Decaying policies
};

struct EstimateResult {
  double mean = 0.0;
  double stderr_mean = 0.0;
  long diverged = 0;
  long used = 0;               // samples that entered the mean
  std::uint64_t checksum = 0;  // chained checksums of consumed e-realizations
};

// Mean regret over the bank's realizations, common random numbers by
// construction: realization i always maps to bank index i.
EstimateResult estimate_regret(ControllerKind kind, const sim::ArxSystem& system,
                               const sim::ExplorationPolicy& policy,
                               const noise::NoiseBank& bank,
                               const EstimateOptions& options = {});

struct SearchOptions {
  EstimateOptions estimate;
  int n_i = 3;          // open-loop fit length for the constructed policies
  bool refine = false;  // optional golden-section polish; off for reproduction
};

struct SearchResult {
  double parameter = 0.0;  // beta* (pulse) or alpha* (decay)
  double regret = 0.0;     // mean regret at the optimum
  double stderr_mean = 0.0;
  long diverged = 0;
  bool boundary = false;  // argmin sits on a grid endpoint: grid too narrow
  std::vector<double> grid_regrets;  // mean regret per grid point, grid order
  std::uint64_t checksum = 0;
};

// Exhaustive search for the best immediate pulse height; ties break toward
// the smaller beta.
SearchResult optimize_pulse(ControllerKind kind, const sim::ArxSystem& system,
                            const noise::NoiseBank& bank, const Grid& beta_grid,
                            const SearchOptions& options = {});

// Exhaustive search for the best 1/sqrt(t)-decay scale under LQ control,
// with the paired exploration-noise bank; ties break toward smaller alpha.
SearchResult optimize_decay(const sim::ArxSystem& system, const noise::NoiseBank& e_bank,
                            const noise::NoiseBank& w_bank, const Grid& alpha_grid,
                            const SearchOptions& options = {});

struct SweepConfig {
  std::uint64_t seed = 1;
  double a0 = -0.45;
  double b0 = 0.67;
  long horizon = 10000;
  long realizations = 200;
  Grid sigma_grid{1e-5, 1.0, 20};
  Grid beta_grid{1e-5, 1.0, 20};
  Grid alpha_grid{1e-5, 1.0, 20};
  sim::SimConfig sim;
  int n_i = 3;
  bool include_diverged = true;
  double winsorize_fraction = 0.0;
  int threads = 1;
  bool streaming = false;  // generate noise on demand instead of caching
};

struct MvacRow {
  double sigma_e2 = 0.0;
  double lazy_mean = 0.0;
  double lazy_stderr = 0.0;
  long lazy_diverged = 0;
  double beta_star = 0.0;
  double immediate_mean = 0.0;
  double immediate_stderr = 0.0;
  long immediate_diverged = 0;
  bool beta_boundary = false;
  std::uint64_t lazy_checksum = 0;
  std::uint64_t immediate_checksum = 0;
};

struct LqacRow {
  double sigma_e2 = 0.0;
  double beta_star = 0.0;
  double immediate_mean = 0.0;
  double immediate_stderr = 0.0;
  long immediate_diverged = 0;
  double alpha_star = 0.0;
  double decaying_mean = 0.0;
  double decaying_stderr = 0.0;
  long decaying_diverged = 0;
  bool beta_boundary = false;
  bool alpha_boundary = false;
  std::uint64_t immediate_checksum = 0;
  std::uint64_t decaying_checksum = 0;
};

// Lazy vs optimal-immediate comparison per sigma_e^2 grid point (the
// minimum-variance experiment); rows in grid order.
std::vector<MvacRow> sweep_mvac(const SweepConfig& config);

// Optimal-immediate vs optimal-decaying comparison per sigma_e^2 grid point
// (the linear-quadratic experiment); rows in grid order.
std::vector<LqacRow> sweep_lqac(const SweepConfig& config);

struct MeanStderr {
  double mean = 0.0;
  double stderr_mean = 0.0;
};

// Clamps floor(fraction * n) samples in each tail to the nearest kept order
// statistic, then averages in the original order. fraction in [0, 0.5).
MeanStderr winsorized_mean_stderr(std::vector<double> samples, double fraction);

}  // namespace regretlab::mc
