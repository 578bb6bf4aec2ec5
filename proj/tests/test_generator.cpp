#include <doctest.h>

#include <filesystem>
#include <set>

#include "smnist/combinatorics.hpp"
#include "smnist/dataset_io.hpp"
#include "smnist/generator.hpp"

using namespace smnist;
namespace fs = std::filesystem;

namespace {

DatasetSpec small(DatasetSpec s, std::size_t train = 3000, std::size_t test = 600) {
  s.train_count = train;
  s.test_count = test;
  return s;
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("smnist-test-gen-" + name);
  fs::remove_all(d);
  return d;
}

std::size_t zero_images(const LabeledSet& set) {
  std::size_t n = 0;
  for (const auto& g : set.images) n += g.foreground_count() == 0;
  return n;
}

}  // namespace

TEST_CASE("spec validation") {
  auto s = make_spec(Series::kM1, Variant::kNaive);
  CHECK_NOTHROW(validate(s));
  s.m = 12;
  CHECK_THROWS_AS(validate(s), SpecError);
  s.m = 2;
  CHECK_THROWS_AS(validate(s), SpecError);

  auto g = make_spec(Series::kA2, Variant::kHard);
  g.stamp = StampChoice::kDot3;
  CHECK_THROWS_AS(validate(g), SpecError);
  CHECK_THROWS_AS(validate(make_spec(Series::kA1, Variant::kNaive)), SpecError);

  auto h = make_spec(Series::kM2, Variant::kHard);
  h.test_positions = 100;
  CHECK_THROWS_AS(validate(h), SpecError);

  CHECK_THROWS_AS(parse_series("m3"), SpecError);
  CHECK(parse_variant("no-centering") == Variant::kNoCentering);
  CHECK(parse_stamp("1px") == StampChoice::kDot1);
  CHECK(parse_count_kind("pow102x") == CountKind::kPow102x);
}

TEST_CASE("series defaults") {
  const auto m1 = make_spec(Series::kM1, Variant::kHard);
  CHECK(m1.width() == 28);
  CHECK(m1.center_universe().size() == 484);
  CHECK(m1.resolved_test_positions() == 59);
  const auto m2 = make_spec(Series::kM2, Variant::kHard);
  CHECK(m2.width() == 10);
  CHECK(m2.center_universe().size() == 100);
  CHECK(m2.resolved_test_positions() == 16);
  CHECK(make_spec(Series::kM2, Variant::kHard, 4).resolved_test_positions() == 28);
  CHECK(make_spec(Series::kA2, Variant::kHard, 3).resolved_test_positions() == 43);
  CHECK(m2.zero_policy() == ZeroPolicy::kSingle);
}

TEST_CASE("generation is a pure function of the spec") {
  const auto s = small(make_spec(Series::kM2, Variant::kHard, 9, CountKind::kPow102x, 77));
  const auto a = generate_pair(s);
  const auto b = generate_pair(s);
  CHECK(to_idx_images(a.train) == to_idx_images(b.train));
  CHECK(to_idx_labels(a.test) == to_idx_labels(b.test));
  auto other = s;
  other.seed = 78;
  CHECK_FALSE(to_idx_images(generate_pair(other).train) == to_idx_images(a.train));
}

TEST_CASE("every catalog entry verifies at reduced size") {
  for (const auto& e : catalog(3)) {
    CAPTURE(e.name);
    const auto pair = generate_pair(small(e.spec));
    CHECK(pair.train.size() == 3000);
    CHECK(pair.test.size() == 600);
    const auto report = verify_dataset(pair);
    CHECK_MESSAGE(report.passed(), render_report(report));
  }
}

TEST_CASE("labels equal the number of placed objects") {
  const auto pair = generate_pair(small(make_spec(Series::kA2, Variant::kHard, 9,
                                                  CountKind::kPow102x, 5)));
  for (std::size_t i = 0; i < pair.train.size(); ++i) {
    CHECK(pair.train.objects[i].size() == static_cast<std::size_t>(pair.train.labels[i]));
  }
  std::set<StampKind> kinds;
  for (const auto& objs : pair.train.objects) {
    for (const auto& o : objs) kinds.insert(o.kind);
  }
  CHECK(kinds.size() == 4);
}

TEST_CASE("series 2 has exactly one zero image per split") {
  for (auto v : {Variant::kDisjunct, Variant::kHard}) {
    const auto pair = generate_pair(small(make_spec(Series::kM2, v, 9, CountKind::kUniform, 4)));
    CHECK(zero_images(pair.train) == 1);
    CHECK(zero_images(pair.test) == 1);
    CHECK(histogram(pair.train)[0] == 1);
  }
}

TEST_CASE("disjunct images are unique across train and test") {
  const auto pair = generate_pair(small(make_spec(Series::kM2, Variant::kDisjunct, 9,
                                                  CountKind::kUniform, 8)));
  std::set<std::string> keys;
  std::size_t nonzero = 0;
  for (const auto* set : {&pair.train, &pair.test}) {
    for (const auto& g : set->images) {
      if (g.foreground_count() == 0) continue;
      ++nonzero;
      keys.insert(canonical_key(g));
    }
  }
  CHECK(keys.size() == nonzero);
}

TEST_CASE("hard centers respect the partition") {
  const auto pair = generate_pair(small(make_spec(Series::kM1, Variant::kHard, 9,
                                                  CountKind::kUniform, 6)));
  REQUIRE(pair.partition);
  const std::set<Point> train(pair.partition->train_side.begin(),
                              pair.partition->train_side.end());
  const std::set<Point> test(pair.partition->test_side.begin(), pair.partition->test_side.end());
  for (const auto& objs : pair.train.objects) {
    for (const auto& o : objs) CHECK(train.count(o.center) == 1);
  }
  for (const auto& objs : pair.test.objects) {
    for (const auto& o : objs) CHECK(test.count(o.center) == 1);
  }
}

TEST_CASE("M1 disjunct keeps the zero label no larger than the one label") {
  const auto pair = generate_pair(small(make_spec(Series::kM1, Variant::kDisjunct), 6000, 1000));
  for (const auto* set : {&pair.train, &pair.test}) {
    const auto h = histogram(*set);
    CHECK(h[0] <= h[1]);
  }
}

TEST_CASE("naive test labels are roughly uniform") {
  const auto pair = generate_pair(small(make_spec(Series::kM1, Variant::kNaive), 1000, 10000));
  const auto h = histogram(pair.test);
  for (int n = 0; n <= 9; ++n) {
    CHECK(h[n] > 850);
    CHECK(h[n] < 1150);
  }
}

TEST_CASE("naive images are centered") {
  const auto pair = generate_pair(small(make_spec(Series::kM1, Variant::kNaive), 200, 10));
  for (std::size_t i = 0; i < pair.train.size(); ++i) {
    if (pair.train.labels[i] == 0) continue;
    const auto& g = pair.train.images[i];
    int top = 28, bottom = -1;
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) {
        if (g.at(r, c)) {
          top = std::min(top, r);
          bottom = std::max(bottom, r);
        }
      }
    }
    const int slack = (27 - bottom) - top;
    CHECK((slack == 0 || slack == 1));
  }
}

TEST_CASE("pow-102x training labels concentrate at m") {
  const auto pair = generate_pair(small(make_spec(Series::kM2, Variant::kHard, 9,
                                                  CountKind::kPow102x, 2), 20000, 1000));
  const auto h = histogram(pair.train);
  CHECK(h[9] > 17000);
  CHECK(h[9] < 18800);
  CHECK(h[1] <= 84);
}

TEST_CASE("small hard partitions hit their caps exactly") {
  auto s = make_spec(Series::kM2, Variant::kHard, 4, CountKind::kPow102x, 9);
  s.test_positions = 28;
  const auto pair = generate_pair(s);
  const auto test = histogram(pair.test);
  CHECK(test[0] == 1);
  CHECK(test[1] == 28);
  CHECK(test[2] == 378);
  CHECK(test[3] == 3276);
  CHECK(test[4] == 10000 - 1 - 28 - 378 - 3276);
  const auto train = histogram(pair.train);
  CHECK(train[1] == 72);
  CHECK(train[2] <= 2556);
}

TEST_CASE("dataset directories round-trip") {
  const auto s = small(make_spec(Series::kA2, Variant::kHard, 5, CountKind::kPow102x, 12), 500,
                       200);
  const auto pair = generate_pair(s);
  for (bool gz : {false, true}) {
    const auto dir = scratch_dir(gz ? "gz" : "plain");
    write_dataset(dir, pair, gz);
    CHECK(fs::exists(dir / (std::string(idx::kTrainImagesFile) + (gz ? ".gz" : ""))));
    const auto back = load_dataset(dir);
    CHECK(back.train.images == pair.train.images);
    CHECK(back.test.labels == pair.test.labels);
    CHECK(back.train.objects == pair.train.objects);
    REQUIRE(back.partition);
    CHECK(back.partition->test_side == pair.partition->test_side);
    CHECK(back.spec.seed == 12);
    CHECK(verify_dataset(back).passed());
  }
}

TEST_CASE("object log encoding") {
  const std::vector<PlacedObject> objs = {{{3, 4}, StampKind::kGlyphX},
                                          {{15, 0}, StampKind::kGlyphS},
                                          {{9, 9}, StampKind::kDot1}};
  const auto text = encode_objects(objs);
  CHECK(text == "X3,4 S15,0 .9,9");
  CHECK(decode_objects(text) == objs);
  CHECK(decode_objects("").empty());
  CHECK_THROWS(decode_objects("X3"));
}
