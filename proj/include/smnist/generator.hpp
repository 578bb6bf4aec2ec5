#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "smnist/canvas.hpp"
#include "smnist/sampler.hpp"

namespace smnist {

// M1: 28x28 dots. M2: 10x10 single-pixel dots. A1: 10x10 'X' glyphs.
// A2: 10x10 glyphs drawn uniformly from {X, O, +, S} per object.
enum class Series { kM1, kM2, kA1, kA2 };
enum class Variant { kNaive, kNoCentering, kDisjunct, kHard };
enum class StampChoice { kDot3, kDot1, kGlyphs };

enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };

// How the 0-object label is produced.
enum class ZeroPolicy {
  kFree,         // ordinary label, exempt from uniqueness
  kCappedByOne,  // exempt from uniqueness, count never exceeds the split's 1-object count
  kSingle,       // exactly one all-zero image per split
};

using Histogram = std::array<std::size_t, 10>;

struct DatasetSpec {
  Series series = Series::kM1;
  Variant variant = Variant::kNaive;
  StampChoice stamp = StampChoice::kDot3;
  int m = 9;
  CountDistribution train_distribution{};  // test counts are always uniform over {0..m}
  std::size_t train_count = 60000;
  std::size_t test_count = 10000;
  std::size_t test_positions = 0;  // HARD only; 0 selects the series default
  std::uint64_t seed = 1;
  // Consecutive duplicate draws before a label switches to exact enumeration
  // of its remaining supply (or is declared exhausted when not enumerable).
  int rejection_limit = 1000;
  std::size_t enumeration_limit = 2'000'000;

  int width() const;
  int height() const;
  bool clip() const;
  bool centered() const;
  bool distinct_centers() const;
  bool unique() const;
  bool glyphs() const;
  // Uniqueness keyed on the anchor set instead of the rendered image.
  bool anchor_keyed() const;
  ZeroPolicy zero_policy() const;
  std::size_t resolved_test_positions() const;
  std::vector<Point> center_universe() const;
  CountDistribution test_distribution() const;
};

// Defaults for a catalog entry: stamp, distribution and partition follow the series.
DatasetSpec make_spec(Series series, Variant variant, int m = 9,
                      CountKind train_kind = CountKind::kUniform, std::uint64_t seed = 1);

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, int label)
      : std::runtime_error(what), label_(label) {}
  int label() const noexcept { return label_; }

 private:
  int label_;
};

void validate(const DatasetSpec& spec);

std::string_view to_string(Series s);
std::string_view to_string(Variant v);
std::string_view to_string(StampChoice s);
std::string_view to_string(CountKind k);
std::string_view to_string(Split s);
Series parse_series(std::string_view s);
Variant parse_variant(std::string_view s);
StampChoice parse_stamp(std::string_view s);
CountKind parse_count_kind(std::string_view s);

struct LabeledSet {
  int width = 0;
  int height = 0;
  std::vector<PixelGrid> images;
  std::vector<int> labels;
  // Stamped objects per image, post-centering; label == objects[i].size().
  std::vector<std::vector<PlacedObject>> objects;

  std::size_t size() const { return labels.size(); }
};

Histogram histogram(const LabeledSet& set);

enum class ExhaustionScope : std::uint8_t { kTrain, kTest, kShared };

struct Exhaustion {
  ExhaustionScope scope = ExhaustionScope::kShared;
  int label = 0;
  // True when the remaining supply was enumerated and drained, so the
  // produced count equals the combinatorial supply.
  bool complete = false;
};

struct DatasetPair {
  DatasetSpec spec;
  LabeledSet train;
  LabeledSet test;
  std::optional<PixelPartition> partition;  // HARD only
  std::vector<Exhaustion> exhausted;
  // Histograms as written to a manifest; set only for pairs loaded from disk.
  std::optional<std::array<Histogram, 2>> recorded_histograms;

  const LabeledSet& split(Split s) const { return s == Split::kTrain ? train : test; }
};

DatasetPair generate_pair(const DatasetSpec& spec);

// Named entries of the standard dataset family.
struct CatalogEntry {
  std::string name;
  DatasetSpec spec;
};
std::vector<CatalogEntry> catalog(std::uint64_t seed = 1);

}  // namespace smnist
