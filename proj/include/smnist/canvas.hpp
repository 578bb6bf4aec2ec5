#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smnist {

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kForeground = 255;

struct Point {
  int row = 0;
  int col = 0;
  auto operator<=>(const Point&) const = default;
};

struct PixelGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major, width*height

  PixelGrid() = default;
  PixelGrid(int w, int h);

  std::uint8_t at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < height && col < width; }
  std::size_t foreground_count() const;
  bool operator==(const PixelGrid&) const = default;
};

enum class StampKind : std::uint8_t { kDot3, kDot1, kGlyphX, kGlyphO, kGlyphPlus, kGlyphS };

struct Offset {
  int dr = 0;
  int dc = 0;
};

// A 3x3-bounded pixel pattern anchored at its center.
class Stamp {
 public:
  static const Stamp& of(StampKind kind);

  StampKind kind() const { return kind_; }
  std::span<const Offset> mask() const { return mask_; }
  // Row/column extents of the mask relative to the anchor.
  int min_dr() const;
  int max_dr() const;
  int min_dc() const;
  int max_dc() const;

 private:
  Stamp(StampKind kind, std::vector<Offset> mask) : kind_(kind), mask_(std::move(mask)) {}
  StampKind kind_;
  std::vector<Offset> mask_;
};

std::string_view stamp_name(StampKind kind);
// Single-character tag used in generation logs: '#', '.', 'X', 'O', '+', 'S'.
char stamp_tag(StampKind kind);
StampKind stamp_from_tag(char tag);

inline constexpr std::array<StampKind, 4> kGlyphKinds = {StampKind::kGlyphX, StampKind::kGlyphO,
                                                         StampKind::kGlyphPlus, StampKind::kGlyphS};

// One stamped object: where it is anchored and what it looks like.
struct PlacedObject {
  Point center;
  StampKind kind = StampKind::kDot1;
  bool operator==(const PlacedObject&) const = default;
};

class CanvasError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Union of `stamp` translated to each center. With clip=false every stamped
// pixel must land inside the grid; with clip=true only the centers must.
PixelGrid render(int width, int height, std::span<const Point> centers, const Stamp& stamp,
                 bool clip);
PixelGrid render(int width, int height, std::span<const PlacedObject> objects, bool clip);

// Translates a non-empty pattern so its stamped bounding box is centered.
// Odd leftover space puts the pattern one pixel up/left of exact center.
std::vector<Point> center_pattern(std::span<const Point> centers, int width, int height,
                                  const Stamp& stamp);

// Injective identity token: equal grids <-> equal keys.
std::string canonical_key(const PixelGrid& grid);

// Binary PGM (P5), maxval 255.
std::string to_pgm(const PixelGrid& grid);
void write_pgm(const std::filesystem::path& path, const PixelGrid& grid);

}  // namespace smnist
