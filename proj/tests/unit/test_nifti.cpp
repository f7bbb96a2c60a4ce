#include <doctest.h>

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "mslab/errors.hpp"
#include "mslab/nifti.hpp"

using namespace mslab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mslab_nifti_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <class T>
T raw(const std::vector<unsigned char>& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof v);
  return v;
}

// Writes `v` at `off` in big-endian order.
template <class T>
void put_be(std::vector<unsigned char>& b, std::size_t off, T v) {
  unsigned char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof v);
  for (std::size_t n = 0; n < sizeof(T); ++n) b[off + n] = tmp[sizeof(T) - 1 - n];
}

Volume random_float_volume(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 12);
  std::uniform_real_distribution<double> sp(0.2, 2.0), off(-100.0, 100.0), ang(-3.0, 3.0);
  AffineGeometry g = test::grid(dim(rng), dim(rng), dim(rng), {sp(rng), sp(rng), sp(rng)}, {off(rng), off(rng), off(rng)});
  g.axes = test::rot_z(ang(rng)) * test::rot_y(ang(rng)) * test::rot_x(ang(rng));
  Volume v(g);
  std::uniform_real_distribution<float> val(-1e4f, 1e4f);
  for (double& x : v.data()) x = static_cast<double>(val(rng));
  return v;
}

double affine_diff(const AffineGeometry& a, const AffineGeometry& b) {
  return (a.index_to_world() - b.index_to_world()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("random float32 volumes round-trip bit-exactly") {
  TempDir dir;
  std::mt19937_64 rng(2024);
  for (int n = 0; n < 20; ++n) {
    const Volume v = random_float_volume(rng);
    const fs::path p = dir.path / (n % 2 ? "v.nii.gz" : "v.nii");
    write_volume(v, p);
    const Volume back = read_volume(p);
    REQUIRE(back.dims() == v.dims());
    CHECK(std::memcmp(back.data().data(), v.data().data(), v.size() * sizeof(double)) == 0);
    CHECK(affine_diff(back.geometry(), v.geometry()) <= 1e-5);
    CHECK((back.geometry().axes - v.geometry().axes).cwiseAbs().maxCoeff() <= 1e-6);
  }
  // Nothing but the written file is left behind.
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) files += e.is_regular_file();
  CHECK(files == 2);
}

TEST_CASE("written header fields") {
  TempDir dir;
  AffineGeometry g = test::grid(4, 3, 2, {0.3, 1.2, 0.6}, {1.5, -2.5, 3.5});
  Volume v(g, 2.5);
  const fs::path p = dir.path / "h.nii";
  write_volume(v, p);
  const auto b = slurp(p);
  REQUIRE(b.size() == 352 + 4 * 24);
  CHECK(raw<std::int32_t>(b, 0) == 348);
  CHECK(raw<std::int16_t>(b, 40) == 3);
  CHECK(raw<std::int16_t>(b, 42) == 4);
  CHECK(raw<std::int16_t>(b, 44) == 3);
  CHECK(raw<std::int16_t>(b, 46) == 2);
  CHECK(raw<std::int16_t>(b, 70) == 16);
  CHECK(raw<std::int16_t>(b, 72) == 32);
  CHECK(raw<float>(b, 80) == 0.3f);
  CHECK(raw<float>(b, 84) == 1.2f);
  CHECK(raw<float>(b, 108) == 352.0f);
  CHECK(raw<std::int16_t>(b, 254) == 1);
  CHECK(raw<float>(b, 280) == 0.3f);      // srow_x[0]
  CHECK(raw<float>(b, 292) == 1.5f);      // srow_x[3]
  CHECK(raw<float>(b, 300) == 1.2f);      // srow_y[1]
  CHECK(raw<float>(b, 324) == 3.5f);      // srow_z[3]
  CHECK(std::memcmp(b.data() + 344, "n+1\0", 4) == 0);
  CHECK(raw<float>(b, 352) == 2.5f);
}

TEST_CASE("big-endian int16 with scaling and a qform only") {
  TempDir dir;
  std::vector<unsigned char> b(352 + 2 * 6, 0);
  put_be<std::int32_t>(b, 0, 348);
  const std::int16_t dims[8] = {3, 3, 2, 1, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put_be<std::int16_t>(b, 40 + 2 * i, dims[i]);
  put_be<std::int16_t>(b, 70, 4);
  put_be<std::int16_t>(b, 72, 16);
  const float pix[4] = {1.0f, 0.5f, 2.0f, 1.5f};
  for (int i = 0; i < 4; ++i) put_be<float>(b, 76 + 4 * i, pix[i]);
  put_be<float>(b, 108, 352.0f);
  put_be<float>(b, 112, 0.5f);
  put_be<float>(b, 116, -3.0f);
  put_be<std::int16_t>(b, 252, 1);
  // 90° about z: (b, c, d) = (0, 0, sin 45°).
  put_be<float>(b, 264, static_cast<float>(std::sqrt(0.5)));
  put_be<float>(b, 268, 10.0f);
  put_be<float>(b, 272, 20.0f);
  put_be<float>(b, 276, 30.0f);
  std::memcpy(b.data() + 344, "n+1\0", 4);
  for (int n = 0; n < 6; ++n) put_be<std::int16_t>(b, 352 + 2 * n, static_cast<std::int16_t>(n * 100 - 200));
  const fs::path p = dir.path / "be.nii";
  spit(p, b);

  const NiftiHeader h = read_header(p);
  CHECK(h.swapped);
  CHECK(h.datatype == 4);
  const Volume v = read_volume(p);
  REQUIRE(v.dims() == Dims{3, 2, 1});
  for (std::size_t n = 0; n < 6; ++n) CHECK(v.data()[n] == 0.5 * (static_cast<double>(n) * 100 - 200) - 3.0);
  const AffineGeometry& g = v.geometry();
  CHECK(g.spacing.x() == doctest::Approx(0.5));
  CHECK(g.spacing.y() == doctest::Approx(2.0));
  // Index (1, 0, 0) steps 0.5 mm along +y after the 90° rotation.
  CHECK((g.to_world(Vec3(1, 0, 0)) - Vec3(10.0, 20.5, 30.0)).norm() < 1e-6);
  CHECK((g.to_world(Vec3(0, 1, 0)) - Vec3(8.0, 20.0, 30.0)).norm() < 1e-6);
}

TEST_CASE("malformed and unsupported files") {
  TempDir dir;
  const fs::path good = dir.path / "g.nii";
  write_volume(Volume(test::grid(2, 2, 2), 1.0), good);
  const auto b = slurp(good);

  auto expect_parse = [&](std::vector<unsigned char> bytes, std::size_t offset) {
    const fs::path p = dir.path / "bad.nii";
    spit(p, bytes);
    try {
      read_volume(p);
      FAIL("no exception");
    } catch (const ParseError& e) {
      CHECK(e.byte_offset() == offset);
    }
  };
  auto expect_unsupported = [&](std::vector<unsigned char> bytes) {
    const fs::path p = dir.path / "bad.nii";
    spit(p, bytes);
    CHECK_THROWS_AS(read_volume(p), UnsupportedFormat);
  };

  auto magic = b;
  magic[345] = 'x';
  expect_parse(magic, 344);
  auto size = b;
  size[0] = 7;
  expect_parse(size, 0);
  expect_parse(std::vector<unsigned char>(b.begin(), b.begin() + 100), 100);
  auto truncated = b;
  truncated.resize(b.size() - 4);
  expect_parse(truncated, b.size() - 4);
  auto bitpix = b;
  bitpix[72] = 16;
  expect_parse(bitpix, 72);

  auto rgb = b;
  rgb[70] = 128;
  rgb[72] = 24;
  expect_unsupported(rgb);
  auto four_d = b;
  four_d[40] = 4;
  four_d[48] = 2;
  expect_unsupported(four_d);
  auto pair = b;
  pair[345] = 'i';
  expect_unsupported(pair);

  CHECK_THROWS_AS(read_volume(dir.path / "missing.nii"), InvalidInput);
}
