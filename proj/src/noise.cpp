#include "regretlab/noise.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace regretlab::noise {

namespace {

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RealizationRng::RealizationRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  // avalanche the three keys into one SplitMix64 state, then draw the four
  // xoshiro256++ words from it
  std::uint64_t x = seed;
  x = splitmix64_finalize(x + 0x9E3779B97F4A7C15ULL * (stream + 1));
  x = splitmix64_finalize(x + 0x9E3779B97F4A7C15ULL * (index + 1));
  for (auto& word : s_) {
    x += 0x9E3779B97F4A7C15ULL;
    word = splitmix64_finalize(x);
  }
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
}

std::uint64_t RealizationRng::next_u64() {
  const std::uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl64(s_[3], 45);
  return result;
}

double RealizationRng::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1)
  const double u1 =
      static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = kTwoPi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

NoiseBank::NoiseBank(std::uint64_t seed, std::uint64_t stream, long count, long horizon,
                     bool cache)
    : seed_(seed), stream_(stream), count_(count), horizon_(horizon), cached_(cache) {
  if (count_ < 1) {
    throw std::invalid_argument("NoiseBank: count must be >= 1, got " + std::to_string(count_));
  }
  if (horizon_ < 1) {
    throw std::invalid_argument("NoiseBank: horizon must be >= 1, got " +
                                std::to_string(horizon_));
  }
  if (cached_) {
    storage_.resize(static_cast<std::size_t>(count_));
    for (long i = 0; i < count_; ++i) {
      generate(i, storage_[static_cast<std::size_t>(i)]);
    }
  }
}

const std::vector<double>& NoiseBank::view(long i) const {
  if (!cached_) {
    throw std::logic_error("NoiseBank: view() requires cached mode; use fill()");
  }
  if (i < 0 || i >= count_) {
    throw std::out_of_range("NoiseBank: realization index " + std::to_string(i) +
                            " outside [0, " + std::to_string(count_) + ")");
  }
  return storage_[static_cast<std::size_t>(i)];
}

void NoiseBank::fill(long i, std::vector<double>& out) const {
  if (i < 0 || i >= count_) {
    throw std::out_of_range("NoiseBank: realization index " + std::to_string(i) +
                            " outside [0, " + std::to_string(count_) + ")");
  }
  if (cached_ && !storage_.empty()) {
    out = storage_[static_cast<std::size_t>(i)];
    return;
  }
  generate(i, out);
}

void NoiseBank::generate(long i, std::vector<double>& out) const {
  out.resize(static_cast<std::size_t>(horizon_));
  RealizationRng rng(seed_, stream_, static_cast<std::uint64_t>(i));
  for (auto& x : out) x = rng.next_gaussian();
}

std::uint64_t array_checksum(const std::vector<double>& values) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;  // FNV offset basis
  for (const double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    hash ^= bits;
    hash *= 0x100000001B3ULL;  // FNV prime
  }
  return hash;
}

}  // namespace regretlab::noise
