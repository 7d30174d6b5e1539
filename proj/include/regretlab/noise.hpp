#pragma once

#include <cstdint>
#include <vector>

// Reproducible banks of unit-variance Gaussian noise realizations. Each
// realization is a pure function of (seed, stream, index): evaluation order,
// caching mode, and thread count never change a single bit of it.
namespace regretlab::noise {

// Deterministic Gaussian stream for one realization. The generator state is
// derived by avalanche-mixing (seed, stream, index), then advanced with
// xoshiro256++; pairs of uniforms feed a Box-Muller transform.
class RealizationRng {
 public:
  RealizationRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

  double next_gaussian();
  std::uint64_t next_u64();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

class NoiseBank {
 public:
  // cache = true precomputes all `count` arrays on construction (fast reuse,
  // count*horizon doubles of memory); cache = false generates on demand into
  // caller-provided buffers, keeping memory flat for paper-scale runs.
  NoiseBank(std::uint64_t seed, std::uint64_t stream, long count, long horizon,
            bool cache = true);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  long count() const { return count_; }
  long horizon() const { return horizon_; }
  bool cached() const { return cached_; }

  // Cached mode only: a stable reference to realization i.
  const std::vector<double>& view(long i) const;

  // Works in both modes: regenerates (or copies) realization i into out.
  void fill(long i, std::vector<double>& out) const;

 private:
  void generate(long i, std::vector<double>& out) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  long count_;
  long horizon_;
  bool cached_;
  std::vector<std::vector<double>> storage_;
};

// FNV-1a over the raw 8-byte words of the array; used to log which noise
// realizations an estimate consumed (common-random-number audits).
std::uint64_t array_checksum(const std::vector<double>& values);

}  // namespace regretlab::noise
