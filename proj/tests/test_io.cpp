// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "dmlink/checkpoint.hpp"
#include "dmlink/io_util.hpp"
#include "dmlink/rng.hpp"

namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("fmt_double round-trips doubles exactly") {
  dmlink::RngStream rng(901);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.gaussian() * std::pow(10.0, rng.gaussian() * 3.0);
    CHECK(std::stod(dmlink::fmt_double(v)) == v);
  }
  CHECK(dmlink::fmt_double(0.25) == "0.25");
  CHECK(dmlink::fmt_double(-3.0) == "-3");
  CHECK(std::stod(dmlink::fmt_double(0.1)) == 0.1);
}

TEST_CASE("fnv1a64 and hex64 are stable") {
  // Published FNV-1a reference values.
  CHECK(dmlink::fnv1a64("") == UINT64_C(14695981039346656037));
  CHECK(dmlink::fnv1a64("a") == UINT64_C(12638187200555641996));
  CHECK(dmlink::fnv1a64("hello") != dmlink::fnv1a64("hellp"));
  CHECK(dmlink::hex64(0) == "0000000000000000");
  CHECK(dmlink::hex64(UINT64_C(0xdeadbeef01020304)) == "deadbeef01020304");
}

TEST_CASE("csv writer pins tool, config and seed in a comment") {
  const fs::path path = fs::temp_directory_path() / "dmlink_test_io.csv";
  {
    dmlink::CsvWriter csv(path, "cafef00dcafef00d", 42);
    csv.header({"a", "b"});
    csv.row({"x", "y"});
    csv.row_numeric({1.5, -2.0});
  }
  const std::string text = slurp(path);
  fs::remove(path);
  CHECK(text ==
        "# tool=dmlink version=0.1.0 config=cafef00dcafef00d seed=42\n"
        "a,b\nx,y\n1.5,-2\n");
}

TEST_CASE("csv writer creates parent directories") {
  const fs::path dir = fs::temp_directory_path() / "dmlink_test_io_dir";
  fs::remove_all(dir);
  const fs::path path = dir / "sub" / "file.csv";
  {
    dmlink::CsvWriter csv(path, "00", 1);
    csv.header({"v"});
  }
  CHECK(fs::exists(path));
  fs::remove_all(dir);
}

TEST_CASE("base64 round-trips binary data and rejects junk") {
  dmlink::RngStream rng(902);
  for (std::size_t len : {0u, 1u, 2u, 3u, 4u, 5u, 31u, 64u, 257u}) {
    std::vector<unsigned char> data(len);
    for (auto& b : data) b = static_cast<unsigned char>(rng.next_u64() & 0xff);
    const std::string text = dmlink::base64_encode(data.data(), data.size());
    CHECK(text.size() % 4 == 0);
    CHECK(dmlink::base64_decode(text) == data);
  }
  CHECK(dmlink::base64_encode(
            reinterpret_cast<const unsigned char*>("Many hands"), 10) ==
        "TWFueSBoYW5kcw==");

  CHECK_THROWS_AS(dmlink::base64_decode("abc"), std::runtime_error);
  CHECK_THROWS_AS(dmlink::base64_decode("a!=="), std::runtime_error);
  CHECK_THROWS_AS(dmlink::base64_decode("=AAA"), std::runtime_error);
}

TEST_CASE("checkpoints round-trip arrays bit-exactly") {
  dmlink::Checkpoint ckpt;
  ckpt.kind = "unit-test";
  ckpt.meta["alpha"] = 1;
  ckpt.meta["name"] = "case";

  dmlink::RngStream rng(903);
  dmlink::NamedArray arr;
  arr.name = "payload";
  arr.shape = {3, 5};
  arr.data.resize(15);
  for (auto& v : arr.data) v = rng.gaussian() * 1e8;
  arr.data[0] = 0.1;  // not exactly representable; must still round-trip
  arr.data[1] = -0.0;
  ckpt.arrays.push_back(arr);

  const fs::path path = fs::temp_directory_path() / "dmlink_test_ckpt.json";
  dmlink::save_checkpoint(path, ckpt);
  const dmlink::Checkpoint back = dmlink::load_checkpoint(path);
  fs::remove(path);

  CHECK(back.kind == "unit-test");
  CHECK(back.meta["alpha"] == 1);
  CHECK(back.meta["name"] == "case");
  const dmlink::NamedArray& got = dmlink::find_array(back, "payload");
  CHECK(got.shape == arr.shape);
  REQUIRE(got.data.size() == arr.data.size());
  for (std::size_t i = 0; i < arr.data.size(); ++i) {
    // Bitwise comparison (covers -0.0 too).
    CHECK(std::memcmp(&got.data[i], &arr.data[i], sizeof(double)) == 0);
  }
  CHECK_THROWS_AS(dmlink::find_array(back, "missing"), std::runtime_error);
}

TEST_CASE("checkpoint loading validates the document") {
  const fs::path path = fs::temp_directory_path() / "dmlink_test_bad.json";

  dmlink::write_text_file(path, "not json at all");
  CHECK_THROWS(dmlink::load_checkpoint(path));

  dmlink::write_text_file(path, R"({"kind": "x"})");
  CHECK_THROWS(dmlink::load_checkpoint(path));

  dmlink::write_text_file(
      path,
      R"({"format": "dmlink-checkpoint", "version": 99, "kind": "x",)"
      R"( "meta": {}, "arrays": []})");
  CHECK_THROWS(dmlink::load_checkpoint(path));

  // Shape/data length mismatch.
  dmlink::write_text_file(
      path,
      R"({"format": "dmlink-checkpoint", "version": 1, "kind": "x",)"
      R"( "meta": {}, "arrays": [{"name": "a", "shape": [2],)"
      R"( "dtype": "f64le", "data": ""}]})");
  CHECK_THROWS(dmlink::load_checkpoint(path));

  fs::remove(path);
  CHECK_THROWS(dmlink::load_checkpoint(path));  // missing file
}
