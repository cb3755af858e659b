#include <doctest.h>

#include <fstream>

#include "soupforge/params.hpp"
#include "soupforge/rng.hpp"
#include "test_support.hpp"

using namespace soupforge;
using testsupport::TempDir;

namespace {

LayerMap random_map(rng::Stream& s) {
  const int layers = 1 + static_cast<int>(s.below(4));
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> shapes;
  for (int l = 0; l < layers; ++l) {
    const int ndim = 1 + static_cast<int>(s.below(3));
    std::vector<std::uint32_t> dims;
    for (int d = 0; d < ndim; ++d) dims.push_back(1 + static_cast<std::uint32_t>(s.below(5)));
    shapes.emplace_back("t" + std::to_string(l), dims);
  }
  return LayerMap::build(shapes);
}

}  // namespace

TEST_CASE("crc32 matches the standard check value") {
  // canonical test vector for the reflected 0xEDB88320 polynomial
  CHECK(crc32("123456789", 9) == 0xCBF43926u);
  CHECK(crc32("", 0) == 0u);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  TempDir tmp("roundtrip");
  rng::Stream s(11);
  for (int i = 0; i < 20; ++i) {
    const LayerMap m = random_map(s);
    ParamVector p(m.total_len);
    for (double& x : p) x = s.normal();
    const auto f = tmp.path / "a.ckpt";
    write_checkpoint(m, p, f);
    const auto [m2, p2] = read_checkpoint(f);
    CHECK(m2 == m);
    CHECK(testsupport::same_bits(p, p2));
  }
}

TEST_CASE("written files start with the magic bytes") {
  TempDir tmp("magic");
  const LayerMap m = LayerMap::build({{"w", {2, 2}}});
  write_checkpoint(m, ParamVector{1, 2, 3, 4}, tmp.path / "m.ckpt");
  const std::string bytes = testsupport::read_file(tmp.path / "m.ckpt");
  REQUIRE(bytes.size() > 4);
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x53);  // S
  CHECK(static_cast<unsigned char>(bytes[1]) == 0x4F);  // O
  CHECK(static_cast<unsigned char>(bytes[2]) == 0x55);  // U
  CHECK(static_cast<unsigned char>(bytes[3]) == 0x50);  // P
}

TEST_CASE("degenerate writes are rejected") {
  TempDir tmp("badwrite");
  CHECK_THROWS_AS(write_checkpoint(LayerMap{}, ParamVector{}, tmp.path / "x.ckpt"),
                  ShapeError);
  const LayerMap m = LayerMap::build({{"w", {2}}});
  CHECK_THROWS_AS(write_checkpoint(m, ParamVector{1, 2, 3}, tmp.path / "x.ckpt"),
                  ShapeError);
}

TEST_CASE("each read failure mode gets its own error kind") {
  TempDir tmp("readerrs");
  const LayerMap m = LayerMap::build({{"w", {3, 2}}, {"b", {3}}});
  ParamVector p(m.total_len);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(i) * 0.5;
  const auto f = tmp.path / "m.ckpt";
  write_checkpoint(m, p, f);
  std::string bytes = testsupport::read_file(f);

  auto write_bytes = [&](const std::string& b, const char* name) {
    const auto path = tmp.path / name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
    return path;
  };

  SUBCASE("three-byte file is truncated") {
    const auto path = write_bytes(bytes.substr(0, 3), "short.ckpt");
    try {
      read_checkpoint(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::Truncated);
    }
  }
  SUBCASE("payload cut mid-way is truncated") {
    const auto path = write_bytes(bytes.substr(0, bytes.size() - 12), "cut.ckpt");
    try {
      read_checkpoint(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::Truncated);
    }
  }
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    const auto path = write_bytes(b, "magic.ckpt");
    try {
      read_checkpoint(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::BadMagic);
    }
  }
  SUBCASE("unsupported version") {
    std::string b = bytes;
    b[4] = 9;
    const auto path = write_bytes(b, "ver.ckpt");
    try {
      read_checkpoint(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::BadVersion);
    }
  }
  SUBCASE("corrupted payload byte fails the CRC") {
    std::string b = bytes;
    b[b.size() - 7] = static_cast<char>(b[b.size() - 7] ^ 0x40);
    const auto path = write_bytes(b, "crc.ckpt");
    try {
      read_checkpoint(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind == IoError::Kind::CrcMismatch);
    }
  }
}

TEST_CASE("layer map validation") {
  CHECK_THROWS_AS(LayerMap::build({{"a", {2}}, {"a", {3}}}), ShapeError);  // dup name
  CHECK_THROWS_AS(LayerMap::build({}), ShapeError);
  LayerMap broken = LayerMap::build({{"a", {2}}, {"b", {3}}});
  broken.layers[1].offset = 7;  // gap
  CHECK_THROWS_AS(broken.validate(), ShapeError);
}

TEST_CASE("linear_combine basics") {
  const ParamVector zero{0, 0};
  const ParamVector v{3, 4};

  SUBCASE("identity") {
    const std::pair<double, const ParamVector*> terms[] = {{1.0, &v}};
    CHECK(linear_combine(zero, terms) == ParamVector{3, 4});
  }
  SUBCASE("midpoint") {
    const ParamVector a{1, 2}, b{3, 4};
    const std::pair<double, const ParamVector*> terms[] = {{0.5, &a}, {0.5, &b}};
    CHECK(linear_combine(zero, terms) == ParamVector{2, 3});
  }
  SUBCASE("cancellation") {
    const ParamVector ones{1, 1};
    const std::pair<double, const ParamVector*> terms[] = {{-1.0, &ones}};
    CHECK(linear_combine(ones, terms) == ParamVector{0, 0});
  }
  SUBCASE("length mismatch") {
    const ParamVector bad{1, 2, 3};
    const std::pair<double, const ParamVector*> terms[] = {{1.0, &bad}};
    CHECK_THROWS_AS(linear_combine(zero, terms), ShapeError);
  }
}

TEST_CASE("linear_combine is exact on integer grids") {
  rng::Stream s(17);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 1 + s.below(64);
    auto ints = [&] {
      ParamVector v(n);
      for (double& x : v)
        x = static_cast<double>(static_cast<std::int64_t>(s.below(1ULL << 36)) -
                                (1LL << 35));
      return v;
    };
    const ParamVector base = ints(), v1 = ints(), v2 = ints();
    const double c1 = static_cast<double>(static_cast<std::int64_t>(s.below(9)) - 4);
    const double c2 = static_cast<double>(static_cast<std::int64_t>(s.below(9)) - 4);
    const std::pair<double, const ParamVector*> terms[] = {{c1, &v1}, {c2, &v2}};
    const ParamVector got = linear_combine(base, terms);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t want = static_cast<std::int64_t>(base[i]) +
                                static_cast<std::int64_t>(c1) * static_cast<std::int64_t>(v1[i]) +
                                static_cast<std::int64_t>(c2) * static_cast<std::int64_t>(v2[i]);
      CHECK(got[i] == static_cast<double>(want));
    }
  }
}
