#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "smnist/canvas.hpp"

using namespace smnist;

namespace {

struct Box {
  int top, bottom, left, right;
};

// Bounding box of the foreground, computed from pixels alone.
Box foreground_box(const PixelGrid& g) {
  Box b{g.height, -1, g.width, -1};
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (g.at(r, c) == kBackground) continue;
      b.top = std::min(b.top, r);
      b.bottom = std::max(b.bottom, r);
      b.left = std::min(b.left, c);
      b.right = std::max(b.right, c);
    }
  }
  return b;
}

std::set<std::pair<int, int>> offsets(StampKind k) {
  std::set<std::pair<int, int>> out;
  for (auto o : Stamp::of(k).mask()) out.insert({o.dr, o.dc});
  return out;
}

}  // namespace

TEST_CASE("empty center list renders the all-zero grid") {
  const auto g = render(10, 10, std::vector<Point>{}, Stamp::of(StampKind::kDot1), false);
  CHECK(g.foreground_count() == 0);
  CHECK(g.data.size() == 100);
}

TEST_CASE("single 3x3 dot") {
  const std::vector<Point> c = {{4, 4}};
  const auto g = render(28, 28, c, Stamp::of(StampKind::kDot3), false);
  CHECK(g.foreground_count() == 9);
  for (int r = 3; r <= 5; ++r) {
    for (int col = 3; col <= 5; ++col) CHECK(g.at(r, col) == kForeground);
  }
  const Box b = foreground_box(g);
  CHECK(b.top == 3);
  CHECK(b.bottom == 5);
  CHECK(b.left == 3);
  CHECK(b.right == 5);
}

TEST_CASE("adjacent single pixels stay separate") {
  const std::vector<Point> c = {{0, 0}, {0, 1}};
  const auto g = render(10, 10, c, Stamp::of(StampKind::kDot1), false);
  CHECK(g.foreground_count() == 2);
  CHECK(g.at(0, 0) == 255);
  CHECK(g.at(0, 1) == 255);
}

TEST_CASE("overlapping dots merge") {
  const std::vector<Point> c = {{5, 5}, {5, 6}};
  const auto g = render(28, 28, c, Stamp::of(StampKind::kDot3), false);
  CHECK(g.foreground_count() == 12);
}

TEST_CASE("bounds checking") {
  const std::vector<Point> edge = {{0, 5}};
  CHECK_THROWS_AS(render(10, 10, edge, Stamp::of(StampKind::kDot3), false), CanvasError);
  const auto clipped = render(10, 10, edge, Stamp::of(StampKind::kGlyphS), true);
  CHECK(clipped.foreground_count() == 5);  // the top border row falls outside
  const std::vector<Point> outside = {{10, 0}};
  CHECK_THROWS_AS(render(10, 10, outside, Stamp::of(StampKind::kDot1), true), CanvasError);
  CHECK_THROWS_AS(PixelGrid(0, 5), CanvasError);
}

TEST_CASE("n distinct single-pixel centers give n foreground pixels") {
  std::mt19937 gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point> all;
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) all.push_back({r, c});
    }
    std::shuffle(all.begin(), all.end(), gen);
    const std::size_t n = trial % 10;
    all.resize(n);
    CHECK(render(10, 10, all, Stamp::of(StampKind::kDot1), false).foreground_count() == n);
  }
}

TEST_CASE("render ignores center order") {
  std::vector<Point> c = {{5, 6}, {10, 20}, {20, 8}, {12, 12}};
  const auto a = render(28, 28, c, Stamp::of(StampKind::kDot3), false);
  std::reverse(c.begin(), c.end());
  const auto b = render(28, 28, c, Stamp::of(StampKind::kDot3), false);
  CHECK(a == b);
  CHECK(canonical_key(a) == canonical_key(b));
}

TEST_CASE("glyph masks") {
  using P = std::pair<int, int>;
  CHECK(offsets(StampKind::kGlyphX) == std::set<P>{{-1, -1}, {-1, 1}, {0, 0}, {1, -1}, {1, 1}});
  CHECK(offsets(StampKind::kGlyphPlus) == std::set<P>{{-1, 0}, {0, -1}, {0, 0}, {0, 1}, {1, 0}});
  CHECK(offsets(StampKind::kGlyphO) == std::set<P>{{-1, 0}, {0, -1}, {0, 1}, {1, 0}});
  CHECK(offsets(StampKind::kGlyphS) ==
        std::set<P>{{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}});
  CHECK(offsets(StampKind::kDot3).size() == 9);
  CHECK(offsets(StampKind::kDot1).size() == 1);
  for (std::size_t a = 0; a < kGlyphKinds.size(); ++a) {
    for (const auto& [dr, dc] : offsets(kGlyphKinds[a])) {
      CHECK(std::abs(dr) <= 1);
      CHECK(std::abs(dc) <= 1);
    }
    for (std::size_t b = a + 1; b < kGlyphKinds.size(); ++b) {
      CHECK(offsets(kGlyphKinds[a]) != offsets(kGlyphKinds[b]));
    }
  }
}

TEST_CASE("stamp tags round-trip") {
  for (auto k : {StampKind::kDot3, StampKind::kDot1, StampKind::kGlyphX, StampKind::kGlyphO,
                 StampKind::kGlyphPlus, StampKind::kGlyphS}) {
    CHECK(stamp_from_tag(stamp_tag(k)) == k);
  }
  CHECK_THROWS_AS(stamp_from_tag('?'), CanvasError);
}

TEST_CASE("centering a single dot") {
  const std::vector<Point> c = {{4, 4}};
  const auto moved = center_pattern(c, 28, 28, Stamp::of(StampKind::kDot3));
  REQUIRE(moved.size() == 1);
  CHECK(moved[0] == Point{13, 13});
  const Box b = foreground_box(render(28, 28, moved, Stamp::of(StampKind::kDot3), false));
  CHECK(b.top == 12);
  CHECK(b.bottom == 14);
}

TEST_CASE("centered patterns are fixed points") {
  const std::vector<Point> c = {{13, 13}};
  CHECK(center_pattern(c, 28, 28, Stamp::of(StampKind::kDot3)) == c);
  const std::vector<Point> none;
  CHECK(center_pattern(none, 28, 28, Stamp::of(StampKind::kDot3)).empty());
}

TEST_CASE("centering is translation invariant and balances margins") {
  std::mt19937 gen(11);
  std::uniform_int_distribution<int> pos(4, 23);
  std::uniform_int_distribution<int> shift(-3, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Point> c(1 + trial % 6);
    for (auto& p : c) p = {pos(gen), pos(gen)};
    const auto centered = center_pattern(c, 28, 28, Stamp::of(StampKind::kDot3));

    const int dr = shift(gen), dc = shift(gen);
    std::vector<Point> moved = c;
    for (auto& p : moved) p = {p.row + dr, p.col + dc};
    CHECK(center_pattern(moved, 28, 28, Stamp::of(StampKind::kDot3)) == centered);

    // Relative layout preserved.
    for (std::size_t k = 1; k < c.size(); ++k) {
      CHECK(centered[k].row - centered[0].row == c[k].row - c[0].row);
      CHECK(centered[k].col - centered[0].col == c[k].col - c[0].col);
    }
    // Margins differ by at most one, with the extra pixel below/right.
    const Box b = foreground_box(render(28, 28, centered, Stamp::of(StampKind::kDot3), false));
    const int above = b.top, below = 27 - b.bottom;
    const int left = b.left, right = 27 - b.right;
    CHECK((below - above == 0 || below - above == 1));
    CHECK((right - left == 0 || right - left == 1));
  }
}

TEST_CASE("canonical keys identify grids") {
  PixelGrid a(10, 10), b(10, 10);
  CHECK(canonical_key(a) == canonical_key(b));
  const std::string zero_key = canonical_key(a);
  CHECK(canonical_key(PixelGrid(10, 10)) == zero_key);
  b.at(9, 9) = kForeground;
  CHECK(canonical_key(a) != canonical_key(b));
  // Same pixel count, different shape.
  CHECK(canonical_key(PixelGrid(10, 10)) != canonical_key(PixelGrid(20, 5)));
  // Non-binary grids still get exact keys.
  PixelGrid g1(4, 4), g2(4, 4);
  g1.at(0, 0) = 7;
  g2.at(0, 0) = 8;
  CHECK(canonical_key(g1) != canonical_key(g2));

  std::mt19937 gen(3);
  std::set<std::string> keys;
  std::set<std::vector<std::uint8_t>> grids;
  for (int i = 0; i < 2000; ++i) {
    PixelGrid g(10, 10);
    for (int k = 0; k < 3; ++k) g.data[gen() % 100] = kForeground;
    keys.insert(canonical_key(g));
    grids.insert(g.data);
  }
  CHECK(keys.size() == grids.size());
}

TEST_CASE("PGM export") {
  PixelGrid g(3, 2);
  g.at(1, 2) = 255;
  const std::string pgm = to_pgm(g);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 6);
  CHECK(pgm.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(pgm.back()) == 255);
}
