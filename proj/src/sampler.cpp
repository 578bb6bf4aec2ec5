#include "smnist/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace smnist {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

Rng Rng::split(std::uint64_t id) const {
  return Rng(seed_, splitmix64(stream_ * 0x9e3779b97f4a7c15ULL + id + 1));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw SamplerError("rng: below(0)");
  // Rejection on the top of the range removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

int Rng::between(int lo, int hi) {
  return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double pow102x_cdf(double x, int m) {
  if (x <= 1.0) return 0.0;
  if (x >= m) return 1.0;
  return std::pow(10.0, 2.0 * (x - m));
}

std::array<double, 10> count_probabilities(const CountDistribution& dist) {
  if (dist.m < 1 || dist.m > 9) {
    throw SamplerError("sampler: m must lie in 1..9, got " + std::to_string(dist.m));
  }
  std::array<double, 10> p{};
  if (dist.kind == CountKind::kUniform) {
    const int lo = dist.min_count;
    for (int n = lo; n <= dist.m; ++n) p[n] = 1.0 / (dist.m - lo + 1);
    return p;
  }
  const double mix = dist.uniform_mix;
  for (int n = 1; n <= dist.m; ++n) {
    const double pure = pow102x_cdf(n, dist.m) - pow102x_cdf(n - 1, dist.m);
    p[n] = (1.0 - mix) * pure + mix / dist.m;
  }
  return p;
}

int sample_count(const CountDistribution& dist, Rng& rng) {
  if (dist.kind == CountKind::kUniform) {
    return rng.between(dist.min_count, dist.m);
  }
  if (dist.uniform_mix > 0.0 && rng.uniform01() < dist.uniform_mix) {
    return rng.between(1, dist.m);
  }
  // Inverse CDF over the integer support {1..m}.
  const double u = rng.uniform01();
  for (int n = 1; n < dist.m; ++n) {
    if (u < pow102x_cdf(n, dist.m)) return n;
  }
  return dist.m;
}

PixelPartition partition_pixels(std::span<const Point> universe, std::size_t test_size, Rng& rng) {
  if (test_size == 0 || test_size >= universe.size()) {
    throw SamplerError("sampler: test side size " + std::to_string(test_size) +
                       " must lie strictly between 0 and " + std::to_string(universe.size()));
  }
  std::vector<Point> pool(universe.begin(), universe.end());
  // Partial Fisher-Yates: the first test_size slots become the test side.
  for (std::size_t i = 0; i < test_size; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  PixelPartition part;
  part.universe.assign(universe.begin(), universe.end());
  part.test_side.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(test_size));
  part.train_side.assign(pool.begin() + static_cast<std::ptrdiff_t>(test_size), pool.end());
  std::sort(part.test_side.begin(), part.test_side.end());
  std::sort(part.train_side.begin(), part.train_side.end());
  return part;
}

std::vector<Point> sample_centers(std::size_t n, std::span<const Point> allowed, bool distinct,
                                  Rng& rng) {
  std::vector<Point> out;
  out.reserve(n);
  if (!distinct) {
    if (n > 0 && allowed.empty()) throw SamplerError("sampler: no allowed positions");
    for (std::size_t i = 0; i < n; ++i) out.push_back(allowed[rng.below(allowed.size())]);
    return out;
  }
  if (n > allowed.size()) {
    throw SamplerError("sampler: cannot draw " + std::to_string(n) + " distinct centers from " +
                       std::to_string(allowed.size()) + " positions");
  }
  // Floyd's algorithm: n draws, no O(|allowed|) copy.
  std::vector<std::size_t> picked;
  picked.reserve(n);
  const std::size_t size = allowed.size();
  for (std::size_t j = size - n; j < size; ++j) {
    const std::size_t t = rng.below(j + 1);
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  for (auto idx : picked) out.push_back(allowed[idx]);
  return out;
}

std::vector<Point> grid_positions(int row_lo, int row_hi, int col_lo, int col_hi) {
  std::vector<Point> out;
  for (int r = row_lo; r < row_hi; ++r) {
    for (int c = col_lo; c < col_hi; ++c) out.push_back({r, c});
  }
  return out;
}

}  // namespace smnist
