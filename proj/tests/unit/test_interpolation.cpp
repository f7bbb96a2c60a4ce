#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mslab/errors.hpp"
#include "mslab/interpolation.hpp"

using namespace mslab;

TEST_CASE("nearest-neighbour shift of a box phantom equals an index shift") {
  const AffineGeometry g = test::grid(10, 8, 6);
  Volume box(g, 0.0);
  for (std::size_t k = 2; k < 4; ++k)
    for (std::size_t j = 2; j < 5; ++j)
      for (std::size_t i = 3; i < 6; ++i) box.at(i, j, k) = 7.0;
  // Pull-style: out(u) = in(u + e_x), i.e. content moves one voxel towards -x.
  const RigidTransform t = RigidTransform::from_parameters({1.0, 0, 0, 0, 0, 0}, g.center());
  const Volume out = resample(box, g, t, InterpolationMethod::NearestNeighbor).volume;
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t j = 0; j < 8; ++j)
      for (std::size_t i = 0; i < 10; ++i) {
        const double expected = i + 1 < 10 ? box.at(i + 1, j, k) : 0.0;
        CHECK(out.at(i, j, k) == expected);
      }
}

TEST_CASE("trilinear is exact at voxel centres and for linear functions") {
  const AffineGeometry g = test::grid(6, 5, 4, {0.5, 1.0, 2.0}, {1, 2, 3});
  Volume v(g);
  auto f = [](const Vec3& p) { return 2.0 + 0.5 * p.x() - 1.5 * p.y() + 0.25 * p.z(); };
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t i = 0; i < 6; ++i) v.at(i, j, k) = f(g.to_world(Vec3(i, j, k)));
  Interpolator in(v, InterpolationMethod::Trilinear);
  for (const Vec3& idx : {Vec3(0.3, 1.7, 2.2), Vec3(4.9, 0.1, 0.0), Vec3(2, 3, 1)}) {
    const auto s = in.at_index(idx);
    CHECK(s.in_field);
    CHECK(s.value == doctest::Approx(f(g.to_world(idx))).epsilon(1e-12));
  }
}

TEST_CASE("field of view is the voxel extent; outside samples are zero") {
  const AffineGeometry g = test::grid(4, 4, 4);
  const Volume v(g, 3.0);
  for (auto m : {InterpolationMethod::NearestNeighbor, InterpolationMethod::Trilinear, InterpolationMethod::CubicBSpline,
                 InterpolationMethod::InPlaneBSpline}) {
    Interpolator in(v, m);
    CHECK(in.at_index(Vec3(-0.5, 0, 0)).in_field);
    CHECK(in.at_index(Vec3(3.5, 3.5, 3.5)).in_field);
    const auto out = in.at_index(Vec3(-0.51, 0, 0));
    CHECK_FALSE(out.in_field);
    CHECK(out.value == 0.0);
    // A constant image stays constant everywhere in the field.
    CHECK(in.at_index(Vec3(-0.4, 1.3, 3.45)).value == doctest::Approx(3.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(sample(v, Vec3(NAN, 0, 0), InterpolationMethod::Trilinear), InvalidInput);
}

TEST_CASE("B-spline prefilter: coefficients reproduce the samples") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n : {2u, 3u, 7u, 40u}) {
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    std::vector<double> c = x;
    bspline_prefilter_line(c);
    // Mirror extension c[-k] = c[k], c[n-1+k] = c[n-1-k].
    auto at = [&](std::ptrdiff_t k) {
      const auto m = static_cast<std::ptrdiff_t>(n);
      if (k < 0) k = -k;
      if (k >= m) k = 2 * (m - 1) - k;
      return c[static_cast<std::size_t>(k)];
    };
    for (std::size_t k = 0; k < n; ++k) {
      const auto s = static_cast<std::ptrdiff_t>(k);
      CHECK((at(s - 1) + 4.0 * at(s) + at(s + 1)) / 6.0 == doctest::Approx(x[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("cubic B-spline interpolates grid values and reproduces linear ramps inside") {
  const AffineGeometry g = test::grid(30, 30, 30);
  const Volume v = test::random_volume(g, 5);
  Interpolator in(v, InterpolationMethod::CubicBSpline);
  CHECK(in.at_index(Vec3(3, 17, 29)).value == doctest::Approx(v.at(3, 17, 29)).epsilon(1e-10));
  CHECK(in.at_index(Vec3(0, 0, 0)).value == doctest::Approx(v.at(0, 0, 0)).epsilon(1e-10));

  Volume ramp(g);
  for (std::size_t k = 0; k < 30; ++k)
    for (std::size_t j = 0; j < 30; ++j)
      for (std::size_t i = 0; i < 30; ++i) ramp.at(i, j, k) = 0.5 * i - 0.25 * j + k;
  Interpolator r(ramp, InterpolationMethod::CubicBSpline);
  // Far from the mirrored boundary the spline is linear-exact (boundary
  // influence decays like 0.268^distance).
  const Vec3 p(14.3, 15.6, 13.2);
  CHECK(r.at_index(p).value == doctest::Approx(0.5 * p.x() - 0.25 * p.y() + p.z()).epsilon(1e-6));
}

TEST_CASE("in-plane B-spline is linear along the slice axis") {
  const AffineGeometry g = test::grid(8, 4, 8);
  Volume v(g);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 8; ++i) v.at(i, j, k) = j == 1 ? 10.0 : (j == 2 ? 30.0 : 0.0);
  Interpolator in(v, InterpolationMethod::InPlaneBSpline);
  CHECK(in.at_index(Vec3(3.3, 1.25, 4.1)).value == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(in.at_index(Vec3(3.3, 1.5, 4.1)).value == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("half-voxel shift of a binary mask gives 0.5 on its boundary") {
  const AffineGeometry g = test::grid(12, 3, 12);
  Volume m(g, 0.0);
  for (std::size_t k = 0; k < 12; ++k)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < 6; ++i) m.at(i, j, k) = 1.0;
  const RigidTransform t = RigidTransform::from_parameters({0.5, 0, 0, 0, 0, 0}, g.center());
  const Volume out = resample(m, g, t, InterpolationMethod::Trilinear).volume;
  for (std::size_t k = 0; k < 12; ++k) {
    // Linear interpolation between 1 (i = 5) and 0 (i = 6) at i + 0.5.
    CHECK(std::abs(out.at(5, 1, k) - 0.5) <= 0.05);
    CHECK(out.at(4, 1, k) == doctest::Approx(1.0));
    CHECK(out.at(6, 1, k) == doctest::Approx(0.0));
  }
  for (double x : out.data()) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("identity resampling copies the volume and counts in-field voxels") {
  const AffineGeometry g = test::grid(9, 5, 7, {0.3, 1.2, 0.3});
  const Volume v = test::random_volume(g, 11);
  for (auto m : {InterpolationMethod::NearestNeighbor, InterpolationMethod::Trilinear}) {
    const auto r = resample(v, g, RigidTransform::identity(), m);
    CHECK(test::max_abs_diff(r.volume, v) == 0.0);
    CHECK(r.in_field_count == v.size());
  }
  const auto r = resample(v, g, RigidTransform::identity(), InterpolationMethod::CubicBSpline);
  CHECK(test::max_abs_diff(r.volume, v) < 1e-10);
  CHECK(interpolation_from_string(to_string(InterpolationMethod::InPlaneBSpline)) == InterpolationMethod::InPlaneBSpline);
  CHECK_THROWS_AS(interpolation_from_string("sinc"), InvalidInput);
}

TEST_CASE("nodes, partition of unity and ramps") {
  const AffineGeometry g = test::grid(8, 7, 6);
  const Volume v = test::random_volume(g, 41);
  for (auto m : {InterpolationMethod::NearestNeighbor, InterpolationMethod::Trilinear, InterpolationMethod::CubicBSpline,
                 InterpolationMethod::InPlaneBSpline}) {
    Interpolator in(v, m);
    CHECK(in.at_index(Vec3(5, 2, 3)).value == doctest::Approx(v.at(5, 2, 3)).epsilon(1e-10));
  }
  const Volume c(g, 7.5);
  CHECK(sample(c, Vec3(3.3, 2.9, 1.7), InterpolationMethod::CubicBSpline).value == doctest::Approx(7.5).epsilon(1e-6));

  Volume ramp(g);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t j = 0; j < 7; ++j)
      for (std::size_t i = 0; i < 8; ++i) ramp.at(i, j, k) = static_cast<double>(i);
  CHECK(std::abs(sample(ramp, Vec3(2.25, 3, 2), InterpolationMethod::Trilinear).value - 2.25) <= 1e-9);
}

TEST_CASE("constant volumes stay constant under rigid resampling") {
  const AffineGeometry g = test::grid(20, 12, 20, {0.3, 1.2, 0.3});
  const Volume c(g, 5.0);
  const RigidTransform t = RigidTransform::from_parameters({0.4, -0.7, 0.2, 0.05, -0.03, 0.08}, g.center());
  for (auto m : {InterpolationMethod::Trilinear, InterpolationMethod::CubicBSpline, InterpolationMethod::InPlaneBSpline}) {
    const Volume r = resample(c, g, t, m).volume;
    // Interior: away from the field edge where out-of-field zeros enter.
    for (std::size_t k = 6; k < 14; ++k)
      for (std::size_t j = 4; j < 8; ++j)
        for (std::size_t i = 6; i < 14; ++i) CHECK(std::abs(r.at(i, j, k) - 5.0) <= 1e-6);
  }
}

TEST_CASE("forward then inverse B-spline resampling of a smooth image") {
  const AffineGeometry g = test::grid(48, 40, 48, {0.5, 0.5, 0.5});
  Volume v(g);
  const Vec3 c = g.center();
  for (std::size_t k = 0; k < 48; ++k)
    for (std::size_t j = 0; j < 40; ++j)
      for (std::size_t i = 0; i < 48; ++i) {
        const Vec3 p = g.to_world(Vec3(i, j, k)) - c;
        v.at(i, j, k) = 100.0 * std::exp(-p.squaredNorm() / (2.0 * 4.0 * 4.0));
      }
  const RigidTransform t = RigidTransform::from_parameters({0.7, -0.4, 1.1, 0.06, -0.04, 0.09}, c);
  const auto fwd = resample(v, g, t, InterpolationMethod::CubicBSpline);
  const auto back = resample(fwd.volume, g, invert(t), InterpolationMethod::CubicBSpline);
  // Doubly in-field: inverse maps into the field and the forward sample there was in-field too.
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < 48; ++k)
    for (std::size_t j = 0; j < 40; ++j)
      for (std::size_t i = 0; i < 48; ++i) {
        const Vec3 q = g.to_index(invert(t).apply(g.to_world(Vec3(i, j, k))));
        const Vec3 qq = g.to_index(t.apply(g.to_world(q)));
        bool inside = true;
        for (int a = 0; a < 3; ++a)
          inside = inside && q[a] >= 2 && q[a] <= g.dims[a] - 3.0 && qq[a] >= 2 && qq[a] <= g.dims[a] - 3.0;
        if (!inside) continue;
        const double e = back.volume.at(i, j, k) - v.at(i, j, k);
        se += e * e;
        ++n;
      }
  REQUIRE(n > 10000);
  CHECK(std::sqrt(se / n) <= 0.02 * (v.max() - v.min()));
}
