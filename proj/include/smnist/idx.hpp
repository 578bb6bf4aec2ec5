#pragma once

// Reader/writer for the MNIST IDX container (rank-3 ubyte images, rank-1
// ubyte labels). Headers are big-endian u32; payload is raw bytes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smnist::idx {

inline constexpr std::uint32_t kImageMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kLabelMagic = 0x00000801;  // 2049
inline constexpr std::size_t kImageHeaderSize = 16;
inline constexpr std::size_t kLabelHeaderSize = 8;

inline constexpr const char* kTrainImagesFile = "train-images-idx3-ubyte";
inline constexpr const char* kTrainLabelsFile = "train-labels-idx1-ubyte";
inline constexpr const char* kTestImagesFile = "t10k-images-idx3-ubyte";
inline constexpr const char* kTestLabelsFile = "t10k-labels-idx1-ubyte";

enum class ErrorKind {
  kBadMagic,
  kTruncated,
  kTrailingBytes,
  kBufferMismatch,
  kLabelOutOfRange,
  kIo,
};

class IdxError : public std::runtime_error {
 public:
  IdxError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct IdxImageSet {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count*rows*cols, row-major, images concatenated

  std::size_t image_size() const { return std::size_t{rows} * cols; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span<const std::uint8_t>(pixels).subspan(i * image_size(), image_size());
  }
  bool operator==(const IdxImageSet&) const = default;
};

struct IdxLabelSet {
  std::uint32_t count = 0;
  std::vector<std::uint8_t> labels;
  bool operator==(const IdxLabelSet&) const = default;
};

std::vector<std::uint8_t> write_images(const IdxImageSet& set);
std::vector<std::uint8_t> write_labels(const IdxLabelSet& set);

IdxImageSet read_images(std::span<const std::uint8_t> bytes);
IdxLabelSet read_labels(std::span<const std::uint8_t> bytes);

// File helpers. Loading transparently inflates gzip input (magic 1f 8b);
// saving compresses when `gzip` is set.
std::vector<std::uint8_t> load_file(const std::filesystem::path& path);
void save_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
               bool gzip = false);

bool is_gzip(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

// Resolves `dir/name`, falling back to `dir/name.gz`.
std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& name);

}  // namespace smnist::idx
