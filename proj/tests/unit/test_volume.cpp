#include <doctest.h>

#include "helpers.hpp"
#include "mslab/errors.hpp"
#include "mslab/volume.hpp"

using namespace mslab;

TEST_CASE("world and index coordinates invert each other on a rotated grid") {
  AffineGeometry g = test::grid(5, 6, 7, {0.3, 1.2, 0.3}, {10.0, -4.0, 2.5});
  g.axes = test::rot_z(0.3) * test::rot_x(-0.2);
  const Vec3 idx(1.5, 2.0, -0.25);
  const Vec3 w = g.to_world(idx);
  // origin + axes * diag(spacing) * idx, spelled out.
  const Vec3 expected = g.origin + idx.x() * 0.3 * g.axes.col(0) + idx.y() * 1.2 * g.axes.col(1) +
                        idx.z() * 0.3 * g.axes.col(2);
  CHECK((w - expected).norm() < 1e-12);
  CHECK((g.to_index(w) - idx).norm() < 1e-12);
  CHECK((g.world_to_index() * g.index_to_world() - Mat4::Identity()).norm() < 1e-12);
  CHECK((g.center() - g.to_world(Vec3(2.0, 2.5, 3.0))).norm() < 1e-12);
}

TEST_CASE("geometry validation rejects broken grids") {
  AffineGeometry g = test::grid(2, 2, 2);
  CHECK_NOTHROW(g.validate());
  g.dims[1] = 0;
  CHECK_THROWS_AS(g.validate(), InvalidInput);
  g = test::grid(2, 2, 2, {1.0, -1.0, 1.0});
  CHECK_THROWS_AS(g.validate(), InvalidInput);
  g = test::grid(2, 2, 2);
  g.axes(0, 1) = 0.5;
  CHECK_THROWS_AS(g.validate(), InvalidInput);
  CHECK_THROWS_AS(Volume(test::grid(2, 2, 2), std::vector<double>(7)), InvalidInput);
}

TEST_CASE("in-plane regridding keeps the field edges") {
  const AffineGeometry g = test::grid(20, 5, 12, {0.3, 1.2, 0.6}, {1.0, 2.0, 3.0});
  const AffineGeometry r = regrid_inplane(g, 0.3, 0.3);
  CHECK(r.dims[0] == 20);
  CHECK(r.dims[1] == 5);
  CHECK(r.dims[2] == 24);
  // First voxel's lower face stays at origin - spacing / 2.
  CHECK(r.origin.z() - 0.15 == doctest::Approx(g.origin.z() - 0.3).epsilon(1e-12));
  CHECK(r.origin.x() == doctest::Approx(g.origin.x()));
  const double far_old = g.origin.z() + (12 - 0.5) * 0.6;
  const double far_new = r.origin.z() + (24 - 0.5) * 0.3;
  CHECK(far_new == doctest::Approx(far_old).epsilon(1e-12));
}

TEST_CASE("in-plane block averaging matches a direct loop") {
  const AffineGeometry g = test::grid(7, 3, 5);
  const Volume v = test::random_volume(g, 4);
  const Volume d = downsample_inplane(v, 2);
  REQUIRE(d.dims()[0] == 4);
  REQUIRE(d.dims()[1] == 3);
  REQUIRE(d.dims()[2] == 3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t kk = 2 * k; kk < std::min<std::size_t>(2 * k + 2, 5); ++kk)
          for (std::size_t ii = 2 * i; ii < std::min<std::size_t>(2 * i + 2, 7); ++ii) {
            sum += v.at(ii, j, kk);
            ++n;
          }
        CHECK(d.at(i, j, k) == doctest::Approx(sum / n).epsilon(1e-14));
      }
  // Block centres sit where the averaged voxels' centroid is.
  CHECK((d.geometry().to_world(Vec3::Zero()) - g.to_world(Vec3(0.5, 0.0, 0.5))).norm() < 1e-12);
  CHECK(downsample_inplane(v, 1).data()[5] == v.data()[5]);
}

TEST_CASE("thread count setting round-trips") {
  const unsigned before = thread_count();
  set_thread_count(3);
  CHECK(thread_count() == 3);
  set_thread_count(before);
}
