#include "smnist/canvas.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace smnist {

PixelGrid::PixelGrid(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) {
    throw CanvasError("canvas: grid dimensions must be positive");
  }
  data.assign(static_cast<std::size_t>(w) * h, kBackground);
}

std::size_t PixelGrid::foreground_count() const {
  return static_cast<std::size_t>(
      std::count_if(data.begin(), data.end(), [](auto v) { return v != kBackground; }));
}

const Stamp& Stamp::of(StampKind kind) {
  static const Stamp dot3(StampKind::kDot3, {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 0},
                                             {0, 1}, {1, -1}, {1, 0}, {1, 1}});
  static const Stamp dot1(StampKind::kDot1, {{0, 0}});
  static const Stamp x(StampKind::kGlyphX, {{-1, -1}, {-1, 1}, {0, 0}, {1, -1}, {1, 1}});
  static const Stamp o(StampKind::kGlyphO, {{-1, 0}, {0, -1}, {0, 1}, {1, 0}});
  static const Stamp plus(StampKind::kGlyphPlus, {{-1, 0}, {0, -1}, {0, 0}, {0, 1}, {1, 0}});
  static const Stamp s(StampKind::kGlyphS, {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1},
                                            {1, -1}, {1, 0}, {1, 1}});
  switch (kind) {
    case StampKind::kDot3: return dot3;
    case StampKind::kDot1: return dot1;
    case StampKind::kGlyphX: return x;
    case StampKind::kGlyphO: return o;
    case StampKind::kGlyphPlus: return plus;
    case StampKind::kGlyphS: return s;
  }
  throw CanvasError("canvas: unknown stamp kind");
}

int Stamp::min_dr() const {
  return std::min_element(mask_.begin(), mask_.end(), [](auto a, auto b) { return a.dr < b.dr; })->dr;
}
int Stamp::max_dr() const {
  return std::max_element(mask_.begin(), mask_.end(), [](auto a, auto b) { return a.dr < b.dr; })->dr;
}
int Stamp::min_dc() const {
  return std::min_element(mask_.begin(), mask_.end(), [](auto a, auto b) { return a.dc < b.dc; })->dc;
}
int Stamp::max_dc() const {
  return std::max_element(mask_.begin(), mask_.end(), [](auto a, auto b) { return a.dc < b.dc; })->dc;
}

std::string_view stamp_name(StampKind kind) {
  switch (kind) {
    case StampKind::kDot3: return "3x3";
    case StampKind::kDot1: return "1px";
    case StampKind::kGlyphX: return "X";
    case StampKind::kGlyphO: return "O";
    case StampKind::kGlyphPlus: return "+";
    case StampKind::kGlyphS: return "S";
  }
  return "?";
}

char stamp_tag(StampKind kind) {
  switch (kind) {
    case StampKind::kDot3: return '#';
    case StampKind::kDot1: return '.';
    case StampKind::kGlyphX: return 'X';
    case StampKind::kGlyphO: return 'O';
    case StampKind::kGlyphPlus: return '+';
    case StampKind::kGlyphS: return 'S';
  }
  return '?';
}

StampKind stamp_from_tag(char tag) {
  switch (tag) {
    case '#': return StampKind::kDot3;
    case '.': return StampKind::kDot1;
    case 'X': return StampKind::kGlyphX;
    case 'O': return StampKind::kGlyphO;
    case '+': return StampKind::kGlyphPlus;
    case 'S': return StampKind::kGlyphS;
  }
  throw CanvasError(std::string("canvas: unknown stamp tag '") + tag + "'");
}

namespace {

void stamp_onto(PixelGrid& grid, Point c, const Stamp& stamp, bool clip) {
  if (!grid.contains(c.row, c.col)) {
    throw CanvasError("canvas: center (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                      ") outside " + std::to_string(grid.height) + "x" +
                      std::to_string(grid.width) + " grid");
  }
  for (const auto& off : stamp.mask()) {
    const int r = c.row + off.dr;
    const int col = c.col + off.dc;
    if (!grid.contains(r, col)) {
      if (clip) continue;
      throw CanvasError("canvas: stamp at (" + std::to_string(c.row) + "," +
                        std::to_string(c.col) + ") spills outside the grid");
    }
    grid.at(r, col) = kForeground;
  }
}

}  // namespace

PixelGrid render(int width, int height, std::span<const Point> centers, const Stamp& stamp,
                 bool clip) {
  PixelGrid grid(width, height);
  for (const auto& c : centers) stamp_onto(grid, c, stamp, clip);
  return grid;
}

PixelGrid render(int width, int height, std::span<const PlacedObject> objects, bool clip) {
  PixelGrid grid(width, height);
  for (const auto& o : objects) stamp_onto(grid, o.center, Stamp::of(o.kind), clip);
  return grid;
}

std::vector<Point> center_pattern(std::span<const Point> centers, int width, int height,
                                  const Stamp& stamp) {
  std::vector<Point> out(centers.begin(), centers.end());
  if (out.empty()) return out;
  int top = std::numeric_limits<int>::max();
  int bottom = std::numeric_limits<int>::min();
  int left = top;
  int right = bottom;
  for (const auto& c : out) {
    top = std::min(top, c.row + stamp.min_dr());
    bottom = std::max(bottom, c.row + stamp.max_dr());
    left = std::min(left, c.col + stamp.min_dc());
    right = std::max(right, c.col + stamp.max_dc());
  }
  const int box_h = bottom - top + 1;
  const int box_w = right - left + 1;
  if (box_h > height || box_w > width) {
    throw CanvasError("canvas: pattern larger than grid, cannot center");
  }
  // Integer division floors here because both operands are non-negative.
  const int dr = (height - box_h) / 2 - top;
  const int dc = (width - box_w) / 2 - left;
  for (auto& c : out) {
    c.row += dr;
    c.col += dc;
  }
  return out;
}

std::string canonical_key(const PixelGrid& grid) {
  const bool binary = std::all_of(grid.data.begin(), grid.data.end(),
                                  [](auto v) { return v == kBackground || v == kForeground; });
  std::string key;
  key.reserve(9 + (binary ? grid.data.size() / 8 + 1 : grid.data.size()));
  key.push_back(binary ? 'b' : 'r');
  for (int dim : {grid.width, grid.height}) {
    for (int shift = 24; shift >= 0; shift -= 8) key.push_back(static_cast<char>(dim >> shift));
  }
  if (!binary) {
    key.append(grid.data.begin(), grid.data.end());
    return key;
  }
  unsigned char acc = 0;
  int bits = 0;
  for (auto v : grid.data) {
    acc = static_cast<unsigned char>((acc << 1) | (v == kForeground ? 1 : 0));
    if (++bits == 8) {
      key.push_back(static_cast<char>(acc));
      acc = 0;
      bits = 0;
    }
  }
  if (bits != 0) key.push_back(static_cast<char>(acc << (8 - bits)));
  return key;
}

std::string to_pgm(const PixelGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) +
                    "\n255\n";
  out.append(grid.data.begin(), grid.data.end());
  return out;
}

void write_pgm(const std::filesystem::path& path, const PixelGrid& grid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const auto pgm = to_pgm(grid);
  out.write(pgm.data(), static_cast<std::streamsize>(pgm.size()));
  if (!out) throw CanvasError("canvas: cannot write " + path.string());
}

}  // namespace smnist
