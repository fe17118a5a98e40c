#pragma once

#include <cstdint>
#include <vector>

#include "mvi/matrix.hpp"

namespace mvi {

/// Counter-based random stream.
///
/// Draw k of stream (seed, id) is a fixed 64-bit mixing function of
/// (seed, id, k), so sequences are identical across runs and platforms and
/// independent streams can be derived without sharing state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal by Box-Muller.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream keyed by this stream's identity and `tag`.
  RngStream split(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Matrix of i.i.d. N(mean, stddev^2) draws.
Matrix gaussian(RngStream& rng, double mean, double stddev, std::size_t rows, std::size_t cols);
// Uniform permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> permutation(RngStream& rng, std::size_t n);

// Stable stream ids used across the library so that data, initialization and
// batch order never share random draws.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kBatches = 3;
inline constexpr std::uint64_t kGraph = 4;
inline constexpr std::uint64_t kTeacher = 5;
inline constexpr std::uint64_t kLabels = 6;
inline constexpr std::uint64_t kSelect = 7;
inline constexpr std::uint64_t kPerturb = 8;
}  // namespace streams

}  // namespace mvi
