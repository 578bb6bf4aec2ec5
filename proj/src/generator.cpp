#include "smnist/generator.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

namespace smnist {

int DatasetSpec::width() const { return series == Series::kM1 ? 28 : 10; }
int DatasetSpec::height() const { return series == Series::kM1 ? 28 : 10; }
bool DatasetSpec::glyphs() const { return series == Series::kA1 || series == Series::kA2; }
bool DatasetSpec::clip() const { return glyphs(); }
bool DatasetSpec::centered() const { return variant == Variant::kNaive; }
bool DatasetSpec::distinct_centers() const {
  return variant == Variant::kDisjunct || variant == Variant::kHard;
}
bool DatasetSpec::unique() const { return distinct_centers(); }
bool DatasetSpec::anchor_keyed() const { return glyphs() && unique(); }

ZeroPolicy DatasetSpec::zero_policy() const {
  if (series != Series::kM1) return ZeroPolicy::kSingle;
  return variant == Variant::kDisjunct ? ZeroPolicy::kCappedByOne : ZeroPolicy::kFree;
}

std::size_t DatasetSpec::resolved_test_positions() const {
  if (test_positions > 0) return test_positions;
  if (series == Series::kM1) return 59;
  if (m <= 3) return 43;
  if (m >= 9) return 16;
  return 28;
}

std::vector<Point> DatasetSpec::center_universe() const {
  if (series == Series::kM1) return grid_positions(4, 26, 4, 26);
  return grid_positions(0, height(), 0, width());
}

CountDistribution DatasetSpec::test_distribution() const {
  return CountDistribution{CountKind::kUniform, m, 0.0, 0};
}

DatasetSpec make_spec(Series series, Variant variant, int m, CountKind train_kind,
                      std::uint64_t seed) {
  DatasetSpec spec;
  spec.series = series;
  spec.variant = variant;
  spec.m = m;
  spec.seed = seed;
  switch (series) {
    case Series::kM1: spec.stamp = StampChoice::kDot3; break;
    case Series::kM2: spec.stamp = StampChoice::kDot1; break;
    default: spec.stamp = StampChoice::kGlyphs; break;
  }
  spec.train_distribution = CountDistribution{train_kind, m, kDefaultUniformMix, 0};
  return spec;
}

void validate(const DatasetSpec& spec) {
  if (spec.m < 3 || spec.m > 9) {
    throw SpecError("spec: m must lie in 3..9 (labels are single digits), got " +
                    std::to_string(spec.m));
  }
  if (spec.train_distribution.m != spec.m) {
    throw SpecError("spec: train distribution m differs from dataset m");
  }
  const auto& d = spec.train_distribution;
  if (d.kind == CountKind::kPow102x && !(d.uniform_mix >= 0.0 && d.uniform_mix <= 1.0)) {
    throw SpecError("spec: uniform_mix must lie in [0,1]");
  }
  if (d.kind == CountKind::kUniform && (d.min_count < 0 || d.min_count > d.m)) {
    throw SpecError("spec: uniform min_count out of range");
  }
  switch (spec.series) {
    case Series::kM1:
      if (spec.stamp == StampChoice::kGlyphs) throw SpecError("spec: series m1 uses dot stamps");
      break;
    case Series::kM2:
      if (spec.stamp != StampChoice::kDot1) throw SpecError("spec: series m2 uses 1px dots");
      break;
    case Series::kA1:
    case Series::kA2:
      if (spec.stamp != StampChoice::kGlyphs) throw SpecError("spec: series a1/a2 use glyphs");
      if (spec.variant == Variant::kNaive) {
        throw SpecError("spec: centering is not defined for clipped glyph datasets");
      }
      break;
  }
  if (spec.variant == Variant::kHard) {
    const auto universe = spec.center_universe().size();
    const auto t = spec.resolved_test_positions();
    if (t == 0 || t >= universe) {
      throw SpecError("spec: test partition size " + std::to_string(t) +
                      " must lie strictly between 0 and " + std::to_string(universe));
    }
  }
  if (spec.rejection_limit <= 0) throw SpecError("spec: rejection_limit must be positive");
  if (spec.train_count > std::numeric_limits<std::uint32_t>::max() ||
      spec.test_count > std::numeric_limits<std::uint32_t>::max()) {
    throw SpecError("spec: image counts exceed the IDX header range");
  }
}

std::string_view to_string(Series s) {
  switch (s) {
    case Series::kM1: return "m1";
    case Series::kM2: return "m2";
    case Series::kA1: return "a1";
    case Series::kA2: return "a2";
  }
  return "?";
}
std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kNaive: return "naive";
    case Variant::kNoCentering: return "no-centering";
    case Variant::kDisjunct: return "disjunct";
    case Variant::kHard: return "hard";
  }
  return "?";
}
std::string_view to_string(StampChoice s) {
  switch (s) {
    case StampChoice::kDot3: return "3x3";
    case StampChoice::kDot1: return "1px";
    case StampChoice::kGlyphs: return "glyphs";
  }
  return "?";
}
std::string_view to_string(CountKind k) { return k == CountKind::kUniform ? "uniform" : "pow102x"; }
std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Series parse_series(std::string_view s) {
  for (auto v : {Series::kM1, Series::kM2, Series::kA1, Series::kA2}) {
    if (to_string(v) == s) return v;
  }
  throw SpecError("spec: unknown series '" + std::string(s) + "'");
}
Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::kNaive, Variant::kNoCentering, Variant::kDisjunct, Variant::kHard}) {
    if (to_string(v) == s) return v;
  }
  throw SpecError("spec: unknown variant '" + std::string(s) + "'");
}
StampChoice parse_stamp(std::string_view s) {
  for (auto v : {StampChoice::kDot3, StampChoice::kDot1, StampChoice::kGlyphs}) {
    if (to_string(v) == s) return v;
  }
  throw SpecError("spec: unknown stamp '" + std::string(s) + "'");
}
CountKind parse_count_kind(std::string_view s) {
  if (s == "uniform") return CountKind::kUniform;
  if (s == "pow102x") return CountKind::kPow102x;
  throw SpecError("spec: unknown distribution '" + std::string(s) + "'");
}

Histogram histogram(const LabeledSet& set) {
  Histogram h{};
  for (int l : set.labels) ++h.at(static_cast<std::size_t>(l));
  return h;
}

namespace {

std::uint64_t binomial_saturating(std::uint64_t p, std::uint64_t n) {
  if (n > p) return 0;
  n = std::min(n, p - n);
  long double r = 1;
  for (std::uint64_t i = 1; i <= n; ++i) r = r * static_cast<long double>(p - n + i) / i;
  if (r > static_cast<long double>(std::numeric_limits<std::uint64_t>::max() / 2)) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r + 0.5L);
}

std::string anchor_key(const std::vector<PlacedObject>& objects) {
  std::vector<Point> anchors;
  anchors.reserve(objects.size());
  for (const auto& o : objects) anchors.push_back(o.center);
  std::sort(anchors.begin(), anchors.end());
  std::string key;
  for (const auto& p : anchors) {
    key.push_back(static_cast<char>(p.row));
    key.push_back(static_cast<char>(p.col));
  }
  return key;
}

struct LabelState {
  int consecutive_rejects = 0;
  bool enumerated = false;
  bool exhausted = false;
  std::vector<std::vector<std::uint16_t>> candidates;  // index tuples into `allowed`
};

struct UniquenessScope {
  std::unordered_set<std::string> registry;
  std::array<LabelState, 10> labels{};
};

struct Instance {
  std::vector<PlacedObject> objects;
  PixelGrid image;
};

class Generator {
 public:
  explicit Generator(const DatasetSpec& spec) : spec_(spec), root_(spec.seed) {
    universe_ = spec.center_universe();
    if (spec.variant == Variant::kHard) {
      Rng prng = root_.split(7);
      partition_ = partition_pixels(universe_, spec.resolved_test_positions(), prng);
    }
    if (spec.unique()) scopes_.resize(spec.variant == Variant::kHard ? 2 : 1);
  }

  DatasetPair run() {
    DatasetPair out;
    out.spec = spec_;
    out.partition = partition_;
    for (auto* set : {&out.train, &out.test}) {
      set->width = spec_.width();
      set->height = spec_.height();
    }
    out.train.labels.reserve(spec_.train_count);
    out.test.labels.reserve(spec_.test_count);

    const std::array<std::size_t, 2> totals = {spec_.train_count, spec_.test_count};
    std::array<std::size_t, 2> zero_slot = {std::numeric_limits<std::size_t>::max(),
                                            std::numeric_limits<std::size_t>::max()};
    if (spec_.zero_policy() == ZeroPolicy::kSingle) {
      for (int s = 0; s < 2; ++s) {
        if (totals[s] == 0) continue;
        Rng zr = root_.split(11 + static_cast<std::uint64_t>(s));
        zero_slot[s] = zr.below(totals[s]);
      }
    }

    // Train and test slots interleave proportionally so that supply shared
    // between the splits (DISJUNCT) is consumed at matching rates.
    const std::size_t all = totals[0] + totals[1];
    std::array<std::size_t, 2> next = {0, 0};
    for (std::size_t k = 0; k < all; ++k) {
      const bool is_test = (k + 1) * totals[1] / all > k * totals[1] / all;
      const Split split = is_test ? Split::kTest : Split::kTrain;
      const int s = static_cast<int>(split);
      const std::size_t index = next[s]++;
      LabeledSet& set = is_test ? out.test : out.train;
      Rng rng = root_.split(1 + static_cast<std::uint64_t>(s)).split(index);
      Instance inst = index == zero_slot[s] ? blank() : draw(split, rng);
      ++counts_[s][inst.objects.size()];
      set.labels.push_back(static_cast<int>(inst.objects.size()));
      set.images.push_back(std::move(inst.image));
      set.objects.push_back(std::move(inst.objects));
    }
    out.exhausted = std::move(exhausted_);
    return out;
  }

 private:
  Instance blank() const { return Instance{{}, PixelGrid(spec_.width(), spec_.height())}; }

  UniquenessScope* scope_for(Split split) {
    if (scopes_.empty()) return nullptr;
    return scopes_.size() == 1 ? &scopes_[0] : &scopes_[static_cast<int>(split)];
  }

  ExhaustionScope exhaustion_scope(Split split) const {
    if (scopes_.size() == 1) return ExhaustionScope::kShared;
    return split == Split::kTrain ? ExhaustionScope::kTrain : ExhaustionScope::kTest;
  }

  const std::vector<Point>& allowed(Split split) const {
    if (!partition_) return universe_;
    return split == Split::kTrain ? partition_->train_side : partition_->test_side;
  }

  bool label_available(Split split, int n) {
    UniquenessScope* scope = scope_for(split);
    if (n == 0) {
      switch (spec_.zero_policy()) {
        case ZeroPolicy::kSingle: return false;
        case ZeroPolicy::kFree: return true;
        case ZeroPolicy::kCappedByOne: {
          const bool ones_done = scope != nullptr && scope->labels[1].exhausted;
          return !(ones_done && count(split, 0) >= count(split, 1));
        }
      }
    }
    return scope == nullptr || !scope->labels[n].exhausted;
  }

  std::size_t count(Split split, int label) const {
    return counts_[static_cast<int>(split)][static_cast<std::size_t>(label)];
  }

  Instance draw(Split split, Rng& rng) {
    const CountDistribution dist =
        split == Split::kTrain ? spec_.train_distribution : spec_.test_distribution();
    const auto probs = count_probabilities(dist);
    constexpr int kMaxLabelDraws = 1'000'000;
    for (int attempt = 0; attempt < kMaxLabelDraws; ++attempt) {
      const int n = sample_count(dist, rng);
      if (!label_available(split, n)) {
        ensure_feasible(split, probs, n);
        continue;
      }
      if (n == 0) {
        if (spec_.zero_policy() == ZeroPolicy::kCappedByOne && count(split, 0) >= count(split, 1)) {
          continue;
        }
        return blank();
      }
      if (auto inst = sample_instance(split, n, rng)) return std::move(*inst);
      ensure_feasible(split, probs, n);
    }
    throw GenerationError("generator: label draws did not converge", -1);
  }

  void ensure_feasible(Split split, const std::array<double, 10>& probs, int last) {
    for (int n = 0; n <= spec_.m; ++n) {
      if (probs[n] > 0.0 && label_available(split, n)) return;
    }
    throw GenerationError("generator: infeasible spec: label " + std::to_string(last) +
                              " exhausted and no label with remaining supply is left for the " +
                              std::string(to_string(split)) + " split",
                          last);
  }

  std::vector<PlacedObject> make_objects(const std::vector<Point>& centers, Rng& rng) const {
    std::vector<PlacedObject> objects;
    objects.reserve(centers.size());
    for (const auto& c : centers) {
      StampKind kind;
      switch (spec_.series) {
        case Series::kA1: kind = StampKind::kGlyphX; break;
        case Series::kA2: kind = kGlyphKinds[rng.below(kGlyphKinds.size())]; break;
        default: kind = spec_.stamp == StampChoice::kDot3 ? StampKind::kDot3 : StampKind::kDot1;
      }
      objects.push_back({c, kind});
    }
    return objects;
  }

  std::string key_of(const Instance& inst) const {
    return spec_.anchor_keyed() ? anchor_key(inst.objects) : canonical_key(inst.image);
  }

  Instance build(std::vector<Point> centers, Rng& rng) const {
    if (spec_.centered() && !centers.empty()) {
      const Stamp& stamp =
          Stamp::of(spec_.stamp == StampChoice::kDot3 ? StampKind::kDot3 : StampKind::kDot1);
      centers = center_pattern(centers, spec_.width(), spec_.height(), stamp);
    }
    Instance inst;
    inst.objects = make_objects(centers, rng);
    inst.image = render(spec_.width(), spec_.height(), inst.objects, spec_.clip());
    return inst;
  }

  std::optional<Instance> sample_instance(Split split, int n, Rng& rng) {
    const auto& pos = allowed(split);
    UniquenessScope* scope = scope_for(split);
    if (scope == nullptr) {
      return build(sample_centers(static_cast<std::size_t>(n), pos, false, rng), rng);
    }
    LabelState& st = scope->labels[n];
    if (static_cast<std::size_t>(n) > pos.size()) {
      mark_exhausted(split, n, true);
      return std::nullopt;
    }
    while (!st.enumerated) {
      Instance inst = build(sample_centers(static_cast<std::size_t>(n), pos, true, rng), rng);
      if (scope->registry.insert(key_of(inst)).second) {
        st.consecutive_rejects = 0;
        return inst;
      }
      if (++st.consecutive_rejects >= spec_.rejection_limit) {
        if (binomial_saturating(pos.size(), static_cast<std::uint64_t>(n)) >
            spec_.enumeration_limit) {
          mark_exhausted(split, n, false);
          return std::nullopt;
        }
        enumerate_remaining(*scope, st, pos, n, rng);
      }
    }
    while (!st.candidates.empty()) {
      const std::size_t pick = rng.below(st.candidates.size());
      std::swap(st.candidates[pick], st.candidates.back());
      const auto tuple = std::move(st.candidates.back());
      st.candidates.pop_back();
      std::vector<Point> centers;
      for (auto i : tuple) centers.push_back(pos[i]);
      Instance inst = build(std::move(centers), rng);
      if (scope->registry.insert(key_of(inst)).second) return inst;
    }
    mark_exhausted(split, n, true);
    return std::nullopt;
  }

  // Lists every n-subset of `pos` whose key is not yet registered.
  void enumerate_remaining(UniquenessScope& scope, LabelState& st, const std::vector<Point>& pos,
                           int n, Rng& rng) {
    st.enumerated = true;
    std::vector<std::uint16_t> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[i] = static_cast<std::uint16_t>(i);
    const int size = static_cast<int>(pos.size());
    while (true) {
      std::vector<Point> centers;
      centers.reserve(idx.size());
      for (auto i : idx) centers.push_back(pos[i]);
      // Glyph kinds don't affect the anchor key; dots need the rendered image.
      Instance inst = build(std::move(centers), rng);
      if (!scope.registry.contains(key_of(inst))) st.candidates.push_back(idx);
      int i = n - 1;
      while (i >= 0 && idx[i] == size - n + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int j = i + 1; j < n; ++j) idx[j] = static_cast<std::uint16_t>(idx[j - 1] + 1);
    }
  }

  void mark_exhausted(Split split, int n, bool complete) {
    UniquenessScope* scope = scope_for(split);
    if (scope->labels[n].exhausted) return;
    scope->labels[n].exhausted = true;
    scope->labels[n].candidates.clear();
    exhausted_.push_back({exhaustion_scope(split), n, complete});
  }

  const DatasetSpec& spec_;
  Rng root_;
  std::vector<Point> universe_;
  std::optional<PixelPartition> partition_;
  std::vector<UniquenessScope> scopes_;
  std::vector<Exhaustion> exhausted_;
  std::array<Histogram, 2> counts_{};
};

}  // namespace

DatasetPair generate_pair(const DatasetSpec& spec) {
  validate(spec);
  return Generator(spec).run();
}

std::vector<CatalogEntry> catalog(std::uint64_t seed) {
  auto one_px = [](DatasetSpec s) {
    s.stamp = StampChoice::kDot1;
    return s;
  };
  using enum Series;
  using enum Variant;
  return {
      {"m1-naive", make_spec(kM1, kNaive, 9, CountKind::kUniform, seed)},
      {"m1-no-centering", make_spec(kM1, kNoCentering, 9, CountKind::kUniform, seed)},
      {"m1-disjunct", make_spec(kM1, kDisjunct, 9, CountKind::kUniform, seed)},
      {"m1-disjunct-1px", one_px(make_spec(kM1, kDisjunct, 9, CountKind::kUniform, seed))},
      {"m1-hard", make_spec(kM1, kHard, 9, CountKind::kUniform, seed)},
      {"m1-hard-1px", one_px(make_spec(kM1, kHard, 9, CountKind::kUniform, seed))},
      {"m2-disjunct", make_spec(kM2, kDisjunct, 9, CountKind::kUniform, seed)},
      {"m2-hard", make_spec(kM2, kHard, 9, CountKind::kUniform, seed)},
      {"m2-disjunct-102x", make_spec(kM2, kDisjunct, 9, CountKind::kPow102x, seed)},
      {"m2-hard-102x", make_spec(kM2, kHard, 9, CountKind::kPow102x, seed)},
      {"a1-hard-102x", make_spec(kA1, kHard, 9, CountKind::kPow102x, seed)},
      {"a2-hard-102x", make_spec(kA2, kHard, 9, CountKind::kPow102x, seed)},
  };
}

}  // namespace smnist
