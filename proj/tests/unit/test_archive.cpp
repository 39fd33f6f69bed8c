#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "semantify/archive.hpp"
#include "semantify/csv.hpp"
#include "semantify/error.hpp"
#include "support/support.hpp"

using namespace semantify;

namespace {

// Written by Python's zipfile with ZIP_DEFLATED: model/hello.txt and an
// empty directory entry model/sub/.
const std::vector<std::uint8_t> kDeflatedZip = {
    0x50, 0x4b, 0x03, 0x04, 0x14, 0x00, 0x00, 0x00, 0x08, 0x00, 0xc5, 0xab, 0x4f, 0x5d, 0x95, 0xa9, 0xe7, 0x9a, 0x11,
    0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00, 0x0f, 0x00, 0x00, 0x00, 0x6d, 0x6f, 0x64, 0x65, 0x6c, 0x2f, 0x68, 0x65,
    0x6c, 0x6c, 0x6f, 0x2e, 0x74, 0x78, 0x74, 0xcb, 0x48, 0xcd, 0xc9, 0xc9, 0x57, 0xc8, 0xc0, 0x20, 0x53, 0x52, 0xd3,
    0x72, 0x12, 0x4b, 0x52, 0x01, 0x50, 0x4b, 0x03, 0x04, 0x14, 0x00, 0x00, 0x00, 0x08, 0x00, 0xc5, 0xab, 0x4f, 0x5d,
    0x00, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x0a, 0x00, 0x00, 0x00, 0x6d, 0x6f, 0x64,
    0x65, 0x6c, 0x2f, 0x73, 0x75, 0x62, 0x2f, 0x03, 0x00, 0x50, 0x4b, 0x01, 0x02, 0x14, 0x03, 0x14, 0x00, 0x00, 0x00,
    0x08, 0x00, 0xc5, 0xab, 0x4f, 0x5d, 0x95, 0xa9, 0xe7, 0x9a, 0x11, 0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00, 0x0f,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x01, 0x00, 0x00, 0x00, 0x00, 0x6d, 0x6f,
    0x64, 0x65, 0x6c, 0x2f, 0x68, 0x65, 0x6c, 0x6c, 0x6f, 0x2e, 0x74, 0x78, 0x74, 0x50, 0x4b, 0x01, 0x02, 0x14, 0x03,
    0x14, 0x00, 0x00, 0x00, 0x08, 0x00, 0xc5, 0xab, 0x4f, 0x5d, 0x00, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x0a, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0xfd, 0x41, 0x3e, 0x00,
    0x00, 0x00, 0x6d, 0x6f, 0x64, 0x65, 0x6c, 0x2f, 0x73, 0x75, 0x62, 0x2f, 0x50, 0x4b, 0x05, 0x06, 0x00, 0x00, 0x00,
    0x00, 0x02, 0x00, 0x02, 0x00, 0x75, 0x00, 0x00, 0x00, 0x68, 0x00, 0x00, 0x00, 0x00, 0x00};

}  // namespace

TEST_CASE("stored zip round trip is byte-stable") {
  testing::TempDir dir;
  std::map<std::string, Bytes> entries{{"a.bin", {1, 2, 3}}, {"b.txt", {'h', 'i'}}, {"empty", {}}};
  write_zip(dir / "x.zip", entries);
  CHECK(read_zip(dir / "x.zip") == entries);
  write_zip(dir / "y.zip", entries);
  CHECK(testing::slurp(dir / "x.zip") == testing::slurp(dir / "y.zip"));
}

TEST_CASE("deflated zip from another tool") {
  testing::TempDir dir;
  write_file(dir / "d.zip", kDeflatedZip);
  const auto entries = read_zip(dir / "d.zip");
  REQUIRE(entries.size() == 1);
  const auto& text = entries.at("hello.txt");
  CHECK(std::string(text.begin(), text.end()) == "hello hello hello hello deflate");
}

TEST_CASE("corrupt and missing archives") {
  testing::TempDir dir;
  write_file(dir / "junk.zip", Bytes{1, 2, 3, 4});
  CHECK_THROWS_AS(read_zip(dir / "junk.zip"), DataError);
  CHECK_THROWS_AS(read_zip(dir / "nope.zip"), IoError);
}

TEST_CASE("little-endian codecs") {
  Bytes b;
  append_u32_le(b, 0x01020304u);
  CHECK(b == Bytes{4, 3, 2, 1});
  append_f32_le(b, 1.5f);
  append_f64_le(b, -2.25);
  CHECK(decode_u32_le(std::span(b).first(4)) == std::vector<std::uint32_t>{0x01020304u});
  CHECK(decode_f32_le(std::span(b).subspan(4, 4)) == std::vector<float>{1.5f});
  CHECK(decode_f64_le(std::span(b).subspan(8, 8)) == std::vector<double>{-2.25});
  CHECK_THROWS_AS(decode_f32_le(std::span(b).first(3)), DataError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  const Bytes a{'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("format_real round-trips doubles") {
  for (const double v : {0.1, 1.0 / 3.0, -1e-300, 12345.678901234567, std::numeric_limits<double>::max()})
    CHECK(parse_real(format_real(v)) == v);
  CHECK_THROWS_AS(parse_real("abc"), DataError);
  CHECK_THROWS_AS(parse_real("1.5x"), DataError);
}

TEST_CASE("csv parsing") {
  const auto t = parse_csv("a,b\n1,2\n\n3,4\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1] == std::vector<std::string>{"3", "4"});
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), DataError);
  CHECK_THROWS_AS(parse_csv(""), DataError);
}
