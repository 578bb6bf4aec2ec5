#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "smnist/idx.hpp"

using namespace smnist::idx;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<std::uint8_t>;

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("smnist-test-idx-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

template <typename Fn>
ErrorKind error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("expected IdxError");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("image header golden vector") {
  IdxImageSet set;
  set.count = 2;
  set.rows = 2;
  set.cols = 3;
  set.pixels = {1, 2, 3, 4, 5, 6, 250, 251, 252, 253, 254, 255};
  const Bytes expected = {0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00,
                          0x02, 0x00, 0x00, 0x00, 0x03, 1,    2,    3,    4,    5,    6,
                          250,  251,  252,  253,  254,  255};
  CHECK(write_images(set) == expected);
  const auto back = read_images(expected);
  CHECK(back == set);
  CHECK(back.image(1)[0] == 250);
}

TEST_CASE("label header golden vector") {
  IdxLabelSet set;
  set.count = 3;
  set.labels = {7, 0, 9};
  const Bytes expected = {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x03, 7, 0, 9};
  CHECK(write_labels(set) == expected);
  CHECK(read_labels(expected) == set);
}

TEST_CASE("MNIST-sized header") {
  IdxImageSet set;
  set.count = 60000;
  set.rows = 28;
  set.cols = 28;
  set.pixels.assign(std::size_t{60000} * 784, 0);
  const auto bytes = write_images(set);
  const Bytes header(bytes.begin(), bytes.begin() + 16);
  CHECK(header == Bytes{0, 0, 8, 3, 0, 0, 0xEA, 0x60, 0, 0, 0, 28, 0, 0, 0, 28});
  CHECK(bytes.size() == 16 + std::size_t{60000} * 784);
}

TEST_CASE("empty sets round-trip") {
  IdxImageSet img;
  img.rows = 10;
  img.cols = 10;
  CHECK(read_images(write_images(img)) == img);
  IdxLabelSet lbl;
  CHECK(read_labels(write_labels(lbl)) == lbl);
}

TEST_CASE("decode errors") {
  IdxLabelSet lbl;
  lbl.count = 2;
  lbl.labels = {1, 2};
  const Bytes good = write_labels(lbl);

  SUBCASE("bad magic") {
    Bytes b = good;
    b[3] = 0x03;  // image magic handed to the label reader
    CHECK(error_kind([&] { read_labels(b); }) == ErrorKind::kBadMagic);
  }
  SUBCASE("truncated header") {
    const Bytes b(good.begin(), good.begin() + 6);
    CHECK(error_kind([&] { read_labels(b); }) == ErrorKind::kTruncated);
  }
  SUBCASE("truncated payload") {
    const Bytes b(good.begin(), good.end() - 1);
    CHECK(error_kind([&] { read_labels(b); }) == ErrorKind::kTruncated);
  }
  SUBCASE("trailing bytes") {
    Bytes b = good;
    b.push_back(0);
    CHECK(error_kind([&] { read_labels(b); }) == ErrorKind::kTrailingBytes);
  }
  SUBCASE("label above 9") {
    Bytes b = good;
    b.back() = 10;
    CHECK(error_kind([&] { read_labels(b); }) == ErrorKind::kLabelOutOfRange);
  }
  SUBCASE("fewer than four bytes") {
    CHECK(error_kind([&] { read_images(Bytes{0, 0}); }) == ErrorKind::kTruncated);
  }
  SUBCASE("truncated image payload") {
    IdxImageSet img;
    img.count = 1;
    img.rows = 2;
    img.cols = 2;
    img.pixels = {1, 2, 3, 4};
    Bytes b = write_images(img);
    b.pop_back();
    CHECK(error_kind([&] { read_images(b); }) == ErrorKind::kTruncated);
  }
}

TEST_CASE("encode errors") {
  IdxImageSet img;
  img.count = 2;
  img.rows = 2;
  img.cols = 2;
  img.pixels = {1, 2, 3};
  CHECK(error_kind([&] { write_images(img); }) == ErrorKind::kBufferMismatch);
  IdxLabelSet lbl;
  lbl.count = 1;
  lbl.labels = {1, 2};
  CHECK(error_kind([&] { write_labels(lbl); }) == ErrorKind::kBufferMismatch);
  lbl.count = 2;
  lbl.labels = {1, 12};
  CHECK(error_kind([&] { write_labels(lbl); }) == ErrorKind::kLabelOutOfRange);
}

TEST_CASE("decode(encode(x)) == x on random sets") {
  std::mt19937 gen(20240611);
  std::uniform_int_distribution<int> dim(0, 12);
  std::uniform_int_distribution<int> count(0, 20);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> digit(0, 9);
  for (int trial = 0; trial < 1000; ++trial) {
    IdxImageSet img;
    img.count = count(gen);
    img.rows = dim(gen);
    img.cols = dim(gen);
    img.pixels.resize(img.count * img.image_size());
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(gen));
    const auto bytes = write_images(img);
    REQUIRE(bytes.size() == kImageHeaderSize + img.pixels.size());
    CHECK(read_images(bytes) == img);
    CHECK(write_images(read_images(bytes)) == bytes);

    IdxLabelSet lbl;
    lbl.count = img.count;
    for (std::uint32_t i = 0; i < lbl.count; ++i) lbl.labels.push_back(digit(gen));
    CHECK(read_labels(write_labels(lbl)) == lbl);
  }
}

TEST_CASE("gzip files are inflated on load") {
  const auto dir = scratch_dir("gzip");
  IdxLabelSet lbl;
  lbl.count = 500;
  for (int i = 0; i < 500; ++i) lbl.labels.push_back(i % 10);
  const auto raw = write_labels(lbl);

  save_file(dir / "plain", raw, false);
  save_file(dir / "packed.gz", raw, true);
  CHECK(load_file(dir / "plain") == raw);
  CHECK(load_file(dir / "packed.gz") == raw);

  std::ifstream in(dir / "packed.gz", std::ios::binary);
  const Bytes on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(is_gzip(on_disk));
  CHECK_FALSE(is_gzip(raw));
  CHECK(gzip_decompress(gzip_compress(raw)) == raw);

  CHECK(find_file(dir, "packed") == dir / "packed.gz");
  CHECK(find_file(dir, "plain") == dir / "plain");
  CHECK(error_kind([&] { find_file(dir, "missing"); }) == ErrorKind::kIo);
}

TEST_CASE("corrupt gzip stream is rejected") {
  IdxLabelSet lbl;
  lbl.count = 100;
  lbl.labels.assign(100, 3);
  auto z = gzip_compress(write_labels(lbl));
  z.resize(z.size() / 2);
  CHECK(error_kind([&] { gzip_decompress(z); }) == ErrorKind::kTruncated);
}

// Set SMNIST_MNIST_DIR to a directory holding the original four files
// (optionally .gz) to check byte-identical round-trips on real data.
TEST_CASE("real MNIST files round-trip byte-identically when available") {
  const char* env = std::getenv("SMNIST_MNIST_DIR");
  if (!env) {
    MESSAGE("SMNIST_MNIST_DIR not set; skipping");
    return;
  }
  for (const char* name : {kTrainImagesFile, kTestImagesFile}) {
    const auto bytes = load_file(find_file(env, name));
    CHECK(write_images(read_images(bytes)) == bytes);
  }
  for (const char* name : {kTrainLabelsFile, kTestLabelsFile}) {
    const auto bytes = load_file(find_file(env, name));
    CHECK(write_labels(read_labels(bytes)) == bytes);
  }
}
