#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "chromseg/dataset.hpp"
#include "fixtures.hpp"

using namespace chromseg;

namespace {

Dataset small_dataset() {
  Rng rng(1);
  Dataset ds;
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.image = GrayImage(4, 5);
    for (auto& v : s.image.data) v = from_byte(static_cast<std::uint8_t>(rng.below(256)));
    s.label = fixtures::random_labels(4, 5, rng);
    ds.push_back(s);
  }
  return ds;
}

}  // namespace

TEST_CASE("byte conversion rounds to the nearest level and clamps") {
  CHECK(to_byte(0.0f) == 0);
  CHECK(to_byte(1.0f) == 255);
  CHECK(to_byte(-0.5f) == 0);
  CHECK(to_byte(2.0f) == 255);
  CHECK(to_byte(0.5f / 255.0f + 1e-4f) == 1);
  CHECK(to_byte(0.5f / 255.0f - 1e-4f) == 0);
  for (int b = 0; b < 256; ++b) CHECK(to_byte(from_byte(static_cast<std::uint8_t>(b))) == b);
}

TEST_CASE("encoded layout: magic, count, height, width, image bytes, label bytes") {
  const Dataset ds = small_dataset();
  const auto bytes = encode_dataset(ds);
  CHECK(bytes.size() == kDatasetHeaderBytes + 3 * 2 * 20);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "CHRSEG01");
  CHECK(bytes[8] == 3);
  CHECK(bytes[9] == 0);
  CHECK(bytes[12] == 4);
  CHECK(bytes[14] == 5);
  CHECK(bytes[16] == to_byte(ds[0].image.data[0]));
  CHECK(bytes[16 + 20] == ds[0].label.data[0]);
}

TEST_CASE("decode restores images and labels") {
  const Dataset ds = small_dataset();
  const Dataset back = decode_dataset(encode_dataset(ds));
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].image == ds[i].image);
    CHECK(back[i].label == ds[i].label);
  }
}

TEST_CASE("empty dataset encodes as a bare header") {
  const auto bytes = encode_dataset({});
  CHECK(bytes.size() == kDatasetHeaderBytes);
  CHECK(decode_dataset(bytes).empty());
}

TEST_CASE("malformed files raise FormatError") {
  auto bytes = encode_dataset(small_dataset());
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_dataset(bytes), FormatError);
  }
  SUBCASE("truncated header") {
    bytes.resize(10);
    CHECK_THROWS_AS(decode_dataset(bytes), FormatError);
  }
  SUBCASE("truncated payload") {
    bytes.pop_back();
    CHECK_THROWS_AS(decode_dataset(bytes), FormatError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_dataset(bytes), FormatError);
  }
  SUBCASE("label above 4") {
    bytes.back() = 5;
    CHECK_THROWS_AS(decode_dataset(bytes), FormatError);
  }
}

TEST_CASE("label 4 is readable so it can be cleaned") {
  auto bytes = encode_dataset(small_dataset());
  bytes.back() = 4;
  CHECK(decode_dataset(bytes).back().label.data.back() == 4);
}

TEST_CASE("mixed sizes cannot be written") {
  Dataset ds = small_dataset();
  ds[1].image = GrayImage(4, 4);
  ds[1].label = LabelMap(4, 4);
  CHECK_THROWS_AS(encode_dataset(ds), StructuralError);
}

TEST_CASE("file read and write") {
  const auto path = std::filesystem::temp_directory_path() / "chromseg_test_dataset.chrseg";
  const Dataset ds = small_dataset();
  write_dataset(ds, path);
  CHECK(std::filesystem::file_size(path) == kDatasetHeaderBytes + 120);
  CHECK(read_dataset(path)[2].label == ds[2].label);
  std::filesystem::remove(path);
  CHECK_THROWS(read_dataset(path));
}
