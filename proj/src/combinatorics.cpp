#include "smnist/combinatorics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace smnist {

BigInt n_choose_k(std::uint64_t p, std::uint64_t n) {
  if (n > p) {
    throw std::domain_error("n_choose_k: n=" + std::to_string(n) + " exceeds p=" +
                            std::to_string(p));
  }
  n = std::min(n, p - n);
  BigInt r = 1;
  // Each prefix product r * (p-n+i) / i is itself a binomial, so the division is exact.
  for (std::uint64_t i = 1; i <= n; ++i) {
    r *= (p - n + i);
    r /= i;
  }
  return r;
}

BigInt variations(std::uint64_t p, std::uint64_t n) {
  if (n > p) {
    throw std::domain_error("variations: n=" + std::to_string(n) + " exceeds p=" +
                            std::to_string(p));
  }
  BigInt r = 1;
  for (std::uint64_t i = 0; i < n; ++i) r *= (p - i);
  return r;
}

namespace {

std::string where(Split s, std::size_t i) {
  return std::string(to_string(s)) + "[" + std::to_string(i) + "]";
}

std::string point_str(Point p) {
  return "(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")";
}

std::string anchor_key(const std::vector<PlacedObject>& objects) {
  std::vector<Point> anchors;
  for (const auto& o : objects) anchors.push_back(o.center);
  std::sort(anchors.begin(), anchors.end());
  std::string key;
  for (const auto& p : anchors) {
    key.push_back(static_cast<char>(p.row));
    key.push_back(static_cast<char>(p.col));
  }
  return key;
}

// Single-pixel dots are recoverable from pixels: every foreground pixel is a center.
std::vector<PlacedObject> dots_from_pixels(const PixelGrid& g) {
  std::vector<PlacedObject> out;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (g.at(r, c) != kBackground) out.push_back({{r, c}, StampKind::kDot1});
    }
  }
  return out;
}

class Verifier {
 public:
  Verifier(const DatasetPair& pair, const DatasetSpec& spec) : pair_(pair), spec_(spec) {}

  VerificationReport run() {
    universe_ = spec_.center_universe();
    check_partition();
    for (Split s : {Split::kTrain, Split::kTest}) check_split(s);
    check_uniqueness();
    check_zero_rule();
    build_table();
    check_supply();
    check_recorded_histograms();
    report_.table = table_;
    return std::move(report_);
  }

 private:
  void fail(std::string msg) {
    constexpr std::size_t kMaxFailures = 200;
    if (report_.failures.size() < kMaxFailures) report_.failures.push_back(std::move(msg));
  }

  const std::vector<Point>& allowed(Split s) const {
    if (!pair_.partition) return universe_;
    return s == Split::kTrain ? pair_.partition->train_side : pair_.partition->test_side;
  }

  void check_partition() {
    if (spec_.variant != Variant::kHard) return;
    if (!pair_.partition) {
      fail("partition: HARD dataset carries no partition");
      return;
    }
    const auto& p = *pair_.partition;
    std::set<Point> train(p.train_side.begin(), p.train_side.end());
    std::set<Point> test(p.test_side.begin(), p.test_side.end());
    std::set<Point> uni(universe_.begin(), universe_.end());
    for (const auto& q : test) {
      if (train.contains(q)) fail("partition: position " + point_str(q) + " on both sides");
    }
    std::set<Point> joined = train;
    joined.insert(test.begin(), test.end());
    if (joined != uni) fail("partition: sides do not cover the center universe exactly");
    if (test.size() != spec_.resolved_test_positions()) {
      fail("partition: test side has " + std::to_string(test.size()) + " positions, expected " +
           std::to_string(spec_.resolved_test_positions()));
    }
  }

  void check_split(Split s) {
    const LabeledSet& set = pair_.split(s);
    const std::size_t expected = s == Split::kTrain ? spec_.train_count : spec_.test_count;
    if (set.labels.size() != expected) {
      fail(std::string(to_string(s)) + ": " + std::to_string(set.labels.size()) +
           " images, spec requests " + std::to_string(expected));
    }
    if (set.images.size() != set.labels.size()) {
      fail(std::string(to_string(s)) + ": image/label count mismatch");
      return;
    }
    const bool have_log = set.objects.size() == set.labels.size();
    const bool dot1 = spec_.stamp == StampChoice::kDot1;
    if (!have_log && !dot1) {
      fail(std::string(to_string(s)) + ": generation log missing; cannot validate " +
           std::string(to_string(spec_.stamp)) + " stamps from pixels");
      return;
    }
    std::set<Point> legal(allowed(s).begin(), allowed(s).end());
    auto& objs = objects_[static_cast<int>(s)];
    objs.resize(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      const PixelGrid& img = set.images[i];
      const int label = set.labels[i];
      if (img.width != spec_.width() || img.height != spec_.height()) {
        fail(where(s, i) + ": image is " + std::to_string(img.height) + "x" +
             std::to_string(img.width));
        continue;
      }
      if (label < 0 || label > spec_.m) {
        fail(where(s, i) + ": label " + std::to_string(label) + " outside 0.." +
             std::to_string(spec_.m));
        continue;
      }
      if (std::any_of(img.data.begin(), img.data.end(),
                      [](auto v) { return v != kBackground && v != kForeground; })) {
        fail(where(s, i) + ": pixel values outside {0,255}");
      }
      if (have_log) {
        objs[i] = set.objects[i];
        PixelGrid again;
        try {
          again = render(img.width, img.height, objs[i], spec_.clip());
        } catch (const CanvasError& e) {
          fail(where(s, i) + ": logged objects do not render: " + e.what());
          continue;
        }
        if (again != img) fail(where(s, i) + ": logged objects do not reproduce the image");
      }
      if (dot1) {
        auto from_pixels = dots_from_pixels(img);
        if (spec_.distinct_centers() && from_pixels.size() != static_cast<std::size_t>(label)) {
          fail(where(s, i) + ": label " + std::to_string(label) + " but " +
               std::to_string(from_pixels.size()) + " foreground pixels");
        }
        if (!have_log) objs[i] = std::move(from_pixels);
      }
      if (objs[i].size() != static_cast<std::size_t>(label)) {
        fail(where(s, i) + ": label " + std::to_string(label) + " but " +
             std::to_string(objs[i].size()) + " logged objects");
      }
      if (spec_.distinct_centers()) {
        std::set<Point> seen;
        for (const auto& o : objs[i]) {
          if (!seen.insert(o.center).second) {
            fail(where(s, i) + ": repeated center " + point_str(o.center));
          }
        }
      }
      if (!spec_.centered()) {
        for (const auto& o : objs[i]) {
          if (!legal.contains(o.center)) {
            fail(where(s, i) + ": center " + point_str(o.center) + " outside the " +
                 (pair_.partition ? std::string(to_string(s)) + " side of the partition"
                                  : std::string("center range")));
            break;
          }
        }
      }
    }
  }

  void check_uniqueness() {
    if (!spec_.unique()) return;
    std::unordered_map<std::string, std::pair<Split, std::size_t>> seen;
    for (Split s : {Split::kTrain, Split::kTest}) {
      const LabeledSet& set = pair_.split(s);
      const auto& objs = objects_[static_cast<int>(s)];
      for (std::size_t i = 0; i < set.size() && i < objs.size(); ++i) {
        if (set.labels[i] == 0) continue;
        std::string key =
            spec_.anchor_keyed() ? anchor_key(objs[i]) : canonical_key(set.images[i]);
        auto [it, fresh] = seen.try_emplace(std::move(key), s, i);
        if (!fresh) {
          fail("uniqueness: " + where(s, i) + " duplicates " +
               where(it->second.first, it->second.second) +
               (spec_.anchor_keyed() ? " (same anchor set)" : " (identical image)"));
        }
      }
    }
  }

  void check_zero_rule() {
    for (Split s : {Split::kTrain, Split::kTest}) {
      const auto h = histogram(pair_.split(s));
      const std::size_t total = pair_.split(s).size();
      switch (spec_.zero_policy()) {
        case ZeroPolicy::kSingle:
          if (total > 0 && h[0] != 1) {
            fail(std::string(to_string(s)) + ": " + std::to_string(h[0]) +
                 " zero-object images, expected exactly one");
          }
          break;
        case ZeroPolicy::kCappedByOne:
          if (h[0] > h[1]) {
            fail(std::string(to_string(s)) + ": " + std::to_string(h[0]) +
                 " zero-object images exceed the 1-object count " + std::to_string(h[1]));
          }
          break;
        case ZeroPolicy::kFree: break;
      }
    }
  }

  void build_table() {
    table_.shared = !pair_.partition.has_value();
    table_.train_positions = allowed(Split::kTrain).size();
    table_.test_positions = allowed(Split::kTest).size();
    const auto htrain = histogram(pair_.train);
    const auto htest = histogram(pair_.test);
    for (int n = 0; n <= spec_.m; ++n) {
      SupplyRow row;
      row.label = n;
      const auto un = static_cast<std::uint64_t>(n);
      row.theoretical_train =
          un <= table_.train_positions ? n_choose_k(table_.train_positions, un) : BigInt(0);
      row.theoretical_test =
          un <= table_.test_positions ? n_choose_k(table_.test_positions, un) : BigInt(0);
      row.observed_train = htrain[n];
      row.observed_test = htest[n];
      table_.rows.push_back(std::move(row));
    }
  }

  void check_supply() {
    if (!spec_.distinct_centers()) return;
    for (const auto& row : table_.rows) {
      if (row.label == 0) continue;
      const std::string lbl = "label " + std::to_string(row.label);
      if (table_.shared) {
        const BigInt both = BigInt(row.observed_train) + row.observed_test;
        if (both > row.theoretical_train) {
          fail("supply: " + lbl + " has " + both.str() + " images across splits, supply " +
               row.theoretical_train.str());
        }
      } else {
        if (BigInt(row.observed_train) > row.theoretical_train) {
          fail("supply: train " + lbl + " has " + std::to_string(row.observed_train) +
               " images, supply " + row.theoretical_train.str());
        }
        if (BigInt(row.observed_test) > row.theoretical_test) {
          fail("supply: test " + lbl + " has " + std::to_string(row.observed_test) +
               " images, supply " + row.theoretical_test.str());
        }
      }
    }
    for (const auto& ex : pair_.exhausted) {
      if (!ex.complete || ex.label <= 0 || ex.label > spec_.m) continue;
      const auto& row = table_.rows[static_cast<std::size_t>(ex.label)];
      BigInt observed;
      BigInt supply;
      std::string scope;
      switch (ex.scope) {
        case ExhaustionScope::kShared:
          observed = BigInt(row.observed_train) + row.observed_test;
          supply = row.theoretical_train;
          scope = "train+test";
          break;
        case ExhaustionScope::kTrain:
          observed = row.observed_train;
          supply = row.theoretical_train;
          scope = "train";
          break;
        case ExhaustionScope::kTest:
          observed = row.observed_test;
          supply = row.theoretical_test;
          scope = "test";
          break;
      }
      if (observed != supply) {
        fail("exhaustion: " + scope + " label " + std::to_string(ex.label) +
             " declared exhausted at " + observed.str() + " images, supply " + supply.str());
      }
    }
  }

  void check_recorded_histograms() {
    if (!pair_.recorded_histograms) return;
    for (Split s : {Split::kTrain, Split::kTest}) {
      if ((*pair_.recorded_histograms)[static_cast<int>(s)] != histogram(pair_.split(s))) {
        fail(std::string(to_string(s)) + ": manifest histogram disagrees with the label file");
      }
    }
  }

  const DatasetPair& pair_;
  const DatasetSpec& spec_;
  std::vector<Point> universe_;
  std::array<std::vector<std::vector<PlacedObject>>, 2> objects_;
  SupplyTable table_;
  VerificationReport report_;
};

}  // namespace

VerificationReport verify_dataset(const DatasetPair& pair, const DatasetSpec& spec) {
  return Verifier(pair, spec).run();
}

std::string render_supply_table(const SupplyTable& table) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({std::to_string(table.train_positions) + "/" +
                       std::to_string(table.test_positions),
                   "theoretical", "", "statistics", ""});
  cells.push_back({"dots", "train", "test", "train", "test"});
  for (const auto& r : table.rows) {
    cells.push_back({std::to_string(r.label), r.theoretical_train.str(), r.theoretical_test.str(),
                     std::to_string(r.observed_train), std::to_string(r.observed_test)});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& row = cells[i];
    out << std::left << std::setw(static_cast<int>(width[0])) << row[0];
    for (std::size_t c = 1; c < 5; ++c) {
      out << " | ";
      if (i < 2) {
        out << std::left;
      } else {
        out << std::right;
      }
      out << std::setw(static_cast<int>(width[c])) << row[c];
    }
    out << '\n';
  }
  return out.str();
}

std::string render_report(const VerificationReport& report) {
  std::string out = render_supply_table(report.table);
  if (report.passed()) {
    out += "verification: PASS\n";
  } else {
    out += "verification: FAIL (" + std::to_string(report.failures.size()) + " issues)\n";
    for (const auto& f : report.failures) out += "  - " + f + "\n";
  }
  return out;
}

}  // namespace smnist
