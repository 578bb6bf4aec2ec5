#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "smnist/canvas.hpp"

namespace smnist {

// Seeded generator with independent sub-streams. The same (seed, stream)
// pair always yields the same draw sequence on every platform: integer and
// real draws are derived from raw mt19937_64 output without going through
// the implementation-defined <random> distributions.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  // A child stream; stable function of (seed, stream, id).
  Rng split(std::uint64_t id) const;

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  int between(int lo, int hi);
  // Uniform real in [0, 1).
  double uniform01();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

enum class CountKind { kUniform, kPow102x };

inline constexpr double kDefaultUniformMix = 0.10;

struct CountDistribution {
  CountKind kind = CountKind::kUniform;
  int m = 9;
  double uniform_mix = kDefaultUniformMix;  // used by kPow102x only
  // kUniform draws from {min_count..m}; kPow102x always from {1..m}.
  int min_count = 0;
};

class SamplerError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// CDF of the pow-102x law: 0 for x<=1, 10^{2x}/10^{2m} on (1, m], 1 above.
double pow102x_cdf(double x, int m);
// Point probabilities P(n) for n = 0..9 under `dist` (zero outside its support).
std::array<double, 10> count_probabilities(const CountDistribution& dist);

int sample_count(const CountDistribution& dist, Rng& rng);

struct PixelPartition {
  std::vector<Point> universe;
  std::vector<Point> train_side;  // sorted
  std::vector<Point> test_side;   // sorted
};

PixelPartition partition_pixels(std::span<const Point> universe, std::size_t test_size, Rng& rng);

std::vector<Point> sample_centers(std::size_t n, std::span<const Point> allowed, bool distinct,
                                  Rng& rng);

// All positions of a row-major rectangle [row_lo, row_hi) x [col_lo, col_hi).
std::vector<Point> grid_positions(int row_lo, int row_hi, int col_lo, int col_hi);

}  // namespace smnist
