#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "dice/model_io.hpp"
#include "test_util.hpp"

using namespace dice;
using dice::test::TempDir;

namespace {

void write_manifest(const std::filesystem::path& dir, const std::string& name, std::size_t rows,
                    std::size_t cols) {
  std::ofstream out(dir / (name + ".json"));
  out << R"({"name": ")" << name << R"(", "dtype": "f32", "shape": [)" << rows << ", " << cols
      << R"(], "byte_order": "little", "layout": "row-major", "file": ")" << name << R"(.bin"})";
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool bitwise_equal(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.flat().data(), b.flat().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("load_tensor reads a zero-filled 2x3 payload") {
  TempDir dir("io_zero");
  write_manifest(dir.path(), "z", 2, 3);
  write_bytes(dir.path() / "z.bin", std::string(24, '\0'));
  const Tensor2D t = io::load_tensor(dir.path() / "z.json");
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  for (float v : t.flat()) CHECK(v == 0.0f);
}

TEST_CASE("load_tensor rejects a short payload") {
  TempDir dir("io_short");
  write_manifest(dir.path(), "z", 2, 3);
  write_bytes(dir.path() / "z.bin", std::string(20, '\0'));
  CHECK_THROWS_AS(io::load_tensor(dir.path() / "z.json"), FormatError);
}

TEST_CASE("load_tensor rejects a long payload") {
  TempDir dir("io_long");
  write_manifest(dir.path(), "z", 2, 3);
  write_bytes(dir.path() / "z.bin", std::string(28, '\0'));
  CHECK_THROWS_AS(io::load_tensor(dir.path() / "z.json"), FormatError);
}

TEST_CASE("load_tensor reports missing files as IoError") {
  TempDir dir("io_missing");
  CHECK_THROWS_AS(io::load_tensor(dir.path() / "nope.json"), IoError);
  write_manifest(dir.path(), "z", 1, 1);
  CHECK_THROWS_AS(io::load_tensor(dir.path() / "z.json"), IoError);
}

TEST_CASE("load_tensor rejects NaN and Inf") {
  TempDir dir("io_nan");
  for (float bad : {std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity()}) {
    write_manifest(dir.path(), "z", 1, 2);
    std::string bytes(8, '\0');
    const float values[2] = {1.0f, bad};
    std::memcpy(bytes.data(), values, 8);
    write_bytes(dir.path() / "z.bin", bytes);
    CHECK_THROWS_AS(io::load_tensor(dir.path() / "z.json"), DataError);
  }
}

TEST_CASE("manifest with an unsupported dtype is a FormatError") {
  TempDir dir("io_dtype");
  std::ofstream(dir.path() / "z.json")
      << R"({"name":"z","dtype":"f64","shape":[1,1],"byte_order":"little","layout":"row-major","file":"z.bin"})";
  write_bytes(dir.path() / "z.bin", std::string(4, '\0'));
  CHECK_THROWS_AS(io::load_tensor(dir.path() / "z.json"), FormatError);
}

TEST_CASE("save_tensor writes a 4-byte singleton") {
  TempDir dir("io_single");
  const Tensor2D t(1, 1, std::vector<float>{42.0f});
  const io::Manifest m = io::save_tensor(t, dir.path(), "answer");
  CHECK(m.shape[0] == 1);
  CHECK(m.shape[1] == 1);
  CHECK(std::filesystem::file_size(dir.path() / "answer.bin") == 4);
  const io::Manifest back = io::read_manifest(dir.path() / "answer.json");
  CHECK(back.name == "answer");
  CHECK(back.dtype == "f32");
  CHECK(back.byte_order == "little");
  CHECK(back.layout == "row-major");
  CHECK(back.file == "answer.bin");
  CHECK(io::load_tensor(dir.path() / "answer.json")(0, 0) == 42.0f);

  // Raw payload is little-endian IEEE-754 with no header.
  std::ifstream in(dir.path() / "answer.bin", std::ios::binary);
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const std::uint32_t word = bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  CHECK(std::bit_cast<float>(word) == 42.0f);
}

TEST_CASE("save_tensor rejects zero rows") {
  TempDir dir("io_empty");
  CHECK_THROWS_AS(io::save_tensor(Tensor2D(0, 5), dir.path(), "empty"), FormatError);
}

TEST_CASE("save_tensor into an unwritable location is an IoError") {
  TempDir dir("io_unwritable");
  // A regular file where the directory should be.
  std::ofstream(dir.path() / "blocker") << "x";
  CHECK_THROWS_AS(io::save_tensor(Tensor2D(1, 1, 1.0f), dir.path() / "blocker" / "sub", "t"), IoError);
}

TEST_CASE("save/load round-trip is bitwise for random tensors") {
  TempDir dir("io_roundtrip");
  std::mt19937_64 rng(1234);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{50, 7}, {100, 342}, {1, 1}, {3, 1}}) {
    Tensor2D t = test::random_tensor(rng, rows, cols, -1e6f, 1e6f);
    // Include subnormals, signed zero and extremes.
    t.flat()[0] = -0.0f;
    if (t.size() > 2) {
      t.flat()[1] = std::numeric_limits<float>::denorm_min();
      t.flat()[2] = std::numeric_limits<float>::max();
    }
    io::save_tensor(t, dir.path(), "rt");
    CHECK(bitwise_equal(io::load_tensor(dir.path() / "rt.json"), t));
  }
}

TEST_CASE("csv parsing") {
  SUBCASE("rectangular") {
    const Tensor2D t = io::parse_csv_tensor("1,2\n3,4");
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 2);
    CHECK(t(0, 0) == 1.0f);
    CHECK(t(0, 1) == 2.0f);
    CHECK(t(1, 0) == 3.0f);
    CHECK(t(1, 1) == 4.0f);
  }
  SUBCASE("ragged rows") { CHECK_THROWS_AS(io::parse_csv_tensor("1,2\n3"), FormatError); }
  SUBCASE("unparsable field") { CHECK_THROWS_AS(io::parse_csv_tensor("1,x\n3,4"), DataError); }
  SUBCASE("CRLF and trailing newline") {
    const Tensor2D t = io::parse_csv_tensor("1.5,-2e-3\r\n3,4\r\n");
    CHECK(t.rows() == 2);
    CHECK(t(0, 1) == doctest::Approx(-2e-3f));
  }
  SUBCASE("empty field") { CHECK_THROWS_AS(io::parse_csv_tensor("1,,2"), DataError); }
  SUBCASE("non-finite literal") { CHECK_THROWS_AS(io::parse_csv_tensor("1,inf"), DataError); }
  SUBCASE("blank line inside") { CHECK_THROWS_AS(io::parse_csv_tensor("1\n\n2"), FormatError); }
}

TEST_CASE("csv and binary paths agree") {
  TempDir dir("io_csv");
  std::mt19937_64 rng(99);
  const Tensor2D t = test::random_tensor(rng, 20, 6, -100.0f, 100.0f);
  std::ofstream csv(dir.path() / "t.csv");
  char buf[64];
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", t(r, c));
      csv << (c ? "," : "") << buf;
    }
    csv << "\n";
  }
  csv.close();
  io::save_tensor(t, dir.path(), "t");
  CHECK(io::load_csv_tensor(dir.path() / "t.csv") == io::load_tensor(dir.path() / "t.json"));
}

TEST_CASE("bundle round-trip keeps labels and OOD names") {
  TempDir dir("io_bundle");
  std::mt19937_64 rng(5);
  io::Bundle b;
  b.layer = FinalLayer(test::random_tensor(rng, 4, 3), {0.1f, 0.2f, 0.3f});
  b.train = FeatureSet(test::random_tensor(rng, 10, 4, 0.0f, 2.0f),
                       std::vector<std::uint32_t>{0, 1, 2, 0, 1, 2, 0, 1, 2, 0});
  b.id_test = FeatureSet(test::random_tensor(rng, 5, 4, 0.0f, 2.0f));
  b.ood.emplace("svhn", FeatureSet(test::random_tensor(rng, 6, 4)));
  b.ood.emplace("lsun", FeatureSet(test::random_tensor(rng, 7, 4)));
  io::save_bundle(b, dir.path());

  const io::Bundle back = io::load_bundle(dir.path());
  CHECK(back.layer.W == b.layer.W);
  CHECK(back.layer.b == b.layer.b);
  CHECK(back.train.labels == b.train.labels);
  CHECK_FALSE(back.id_test.labels.has_value());
  REQUIRE(back.ood.size() == 2);
  CHECK(back.ood.at("svhn").X == b.ood.at("svhn").X);
  CHECK(back.ood.at("lsun").X == b.ood.at("lsun").X);
  CHECK_FALSE(back.noise.has_value());
}

TEST_CASE("bundle validation") {
  TempDir dir("io_bundle_bad");
  std::mt19937_64 rng(6);
  io::Bundle b;
  b.layer = FinalLayer(test::random_tensor(rng, 4, 3), {0.0f, 0.0f, 0.0f});
  b.train = FeatureSet(test::random_tensor(rng, 10, 4));
  b.id_test = FeatureSet(test::random_tensor(rng, 5, 4));

  SUBCASE("no OOD sets") {
    io::save_bundle(b, dir.path());
    CHECK_THROWS_AS(io::load_bundle(dir.path()), FormatError);
  }
  SUBCASE("width mismatch") {
    b.ood.emplace("x", FeatureSet(test::random_tensor(rng, 3, 5)));
    io::save_bundle(b, dir.path());
    CHECK_THROWS_AS(io::load_bundle(dir.path()), ShapeError);
  }
  SUBCASE("label out of range") {
    b.ood.emplace("x", FeatureSet(test::random_tensor(rng, 3, 4)));
    b.train.labels = std::vector<std::uint32_t>(10, 3);
    io::save_bundle(b, dir.path());
    CHECK_THROWS_AS(io::load_bundle(dir.path()), DataError);
  }
  SUBCASE("missing weights") {
    b.ood.emplace("x", FeatureSet(test::random_tensor(rng, 3, 4)));
    io::save_bundle(b, dir.path());
    std::filesystem::remove(dir.path() / "W.json");
    CHECK_THROWS_AS(io::load_bundle(dir.path()), FormatError);
  }
}

TEST_CASE("domain type invariants") {
  CHECK_THROWS_AS(FinalLayer(Tensor2D(3, 1), {0.0f}), ShapeError);
  CHECK_THROWS_AS(FinalLayer(Tensor2D(3, 2), {0.0f}), ShapeError);
  CHECK_THROWS_AS(FeatureSet(Tensor2D(0, 2)), DataError);
  CHECK_THROWS_AS(FeatureSet(Tensor2D(2, 2), std::vector<std::uint32_t>{0}), ShapeError);
  CHECK_THROWS_AS(Tensor2D(2, 2, std::vector<float>{1.0f}), ShapeError);
}
