#include "smnist/idx.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace smnist::idx {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void check_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected) {
  if (bytes.size() < 4) {
    throw IdxError(ErrorKind::kTruncated, "idx: input shorter than magic number");
  }
  const std::uint32_t magic = get_u32(bytes, 0);
  if (magic != expected) {
    throw IdxError(ErrorKind::kBadMagic, "idx: bad magic " + std::to_string(magic) +
                                             ", expected " + std::to_string(expected));
  }
}

void check_payload(std::size_t have, std::size_t header, std::size_t payload) {
  if (have < header + payload) {
    throw IdxError(ErrorKind::kTruncated, "idx: truncated payload, have " + std::to_string(have) +
                                              " bytes, need " + std::to_string(header + payload));
  }
  if (have > header + payload) {
    throw IdxError(ErrorKind::kTrailingBytes,
                   "idx: " + std::to_string(have - header - payload) + " trailing bytes");
  }
}

}  // namespace

std::vector<std::uint8_t> write_images(const IdxImageSet& set) {
  const std::size_t expected = std::size_t{set.count} * set.rows * set.cols;
  if (set.pixels.size() != expected) {
    throw IdxError(ErrorKind::kBufferMismatch,
                   "idx: pixel buffer has " + std::to_string(set.pixels.size()) +
                       " bytes, header implies " + std::to_string(expected));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kImageHeaderSize + expected);
  put_u32(out, kImageMagic);
  put_u32(out, set.count);
  put_u32(out, set.rows);
  put_u32(out, set.cols);
  out.insert(out.end(), set.pixels.begin(), set.pixels.end());
  return out;
}

std::vector<std::uint8_t> write_labels(const IdxLabelSet& set) {
  if (set.labels.size() != set.count) {
    throw IdxError(ErrorKind::kBufferMismatch,
                   "idx: label buffer has " + std::to_string(set.labels.size()) +
                       " bytes, count is " + std::to_string(set.count));
  }
  auto bad = std::find_if(set.labels.begin(), set.labels.end(), [](auto l) { return l > 9; });
  if (bad != set.labels.end()) {
    throw IdxError(ErrorKind::kLabelOutOfRange,
                   "idx: label " + std::to_string(*bad) + " at index " +
                       std::to_string(bad - set.labels.begin()) + " exceeds 9");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kLabelHeaderSize + set.count);
  put_u32(out, kLabelMagic);
  put_u32(out, set.count);
  out.insert(out.end(), set.labels.begin(), set.labels.end());
  return out;
}

IdxImageSet read_images(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kImageMagic);
  if (bytes.size() < kImageHeaderSize) {
    throw IdxError(ErrorKind::kTruncated, "idx: truncated image header");
  }
  IdxImageSet set;
  set.count = get_u32(bytes, 4);
  set.rows = get_u32(bytes, 8);
  set.cols = get_u32(bytes, 12);
  const std::size_t payload = std::size_t{set.count} * set.rows * set.cols;
  check_payload(bytes.size(), kImageHeaderSize, payload);
  set.pixels.assign(bytes.begin() + kImageHeaderSize, bytes.end());
  return set;
}

IdxLabelSet read_labels(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kLabelMagic);
  if (bytes.size() < kLabelHeaderSize) {
    throw IdxError(ErrorKind::kTruncated, "idx: truncated label header");
  }
  IdxLabelSet set;
  set.count = get_u32(bytes, 4);
  check_payload(bytes.size(), kLabelHeaderSize, set.count);
  set.labels.assign(bytes.begin() + kLabelHeaderSize, bytes.end());
  auto bad = std::find_if(set.labels.begin(), set.labels.end(), [](auto l) { return l > 9; });
  if (bad != set.labels.end()) {
    throw IdxError(ErrorKind::kLabelOutOfRange, "idx: label " + std::to_string(*bad) +
                                                    " at index " +
                                                    std::to_string(bad - set.labels.begin()));
  }
  return set;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper.
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw IdxError(ErrorKind::kIo, "idx: deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) {
    throw IdxError(ErrorKind::kIo, "idx: gzip compression failed");
  }
  out.resize(zs.total_out);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) {
    throw IdxError(ErrorKind::kIo, "idx: inflateInit2 failed");
  }
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IdxError(ErrorKind::kTruncated, "idx: corrupt or truncated gzip stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw IdxError(ErrorKind::kTruncated, "idx: gzip stream ends early");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IdxError(ErrorKind::kIo, "idx: cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (is_gzip(bytes)) {
    return gzip_decompress(bytes);
  }
  return bytes;
}

void save_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
               bool gzip) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IdxError(ErrorKind::kIo, "idx: cannot write " + path.string());
  }
  if (gzip) {
    auto packed = gzip_compress(bytes);
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
  } else {
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) {
    throw IdxError(ErrorKind::kIo, "idx: short write to " + path.string());
  }
}

std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& name) {
  auto plain = dir / name;
  if (std::filesystem::exists(plain)) {
    return plain;
  }
  auto gz = dir / (name + ".gz");
  if (std::filesystem::exists(gz)) {
    return gz;
  }
  throw IdxError(ErrorKind::kIo, "idx: neither " + plain.string() + " nor " + gz.string() +
                                     " exists");
}

}  // namespace smnist::idx
