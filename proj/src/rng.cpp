#include "mvi/rng.hpp"

#include <cmath>
#include <numbers>

#include "mvi/error.hpp"

namespace mvi {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t x) {
  // Stafford variant 13 finalizer.
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), key_(mix64(mix64(seed + kGolden) ^ (stream_id * kGolden))) {}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(mix64(key_ ^ (c * kGolden)) + c);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("RngStream::below(0)");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

RngStream RngStream::split(std::uint64_t tag) const {
  return RngStream(mix64(key_ ^ mix64(tag + kGolden)), stream_ * 31 + tag);
}

Matrix gaussian(RngStream& rng, double mean, double stddev, std::size_t rows, std::size_t cols) {
  if (!(stddev >= 0.0)) throw InvalidArgument("gaussian: stddev must be non-negative");
  Matrix m(rows, cols);
  for (double& v : m.values()) v = mean + stddev * rng.normal();
  return m;
}

std::vector<std::size_t> permutation(RngStream& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace mvi
