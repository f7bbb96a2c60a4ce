#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mslab/errors.hpp"
#include "mslab/fusion.hpp"
#include "mslab/qc.hpp"

using namespace mslab;

namespace {

double oracle_ncc(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ma += a[t];
    mb += b[t];
  }
  ma /= a.size();
  mb /= b.size();
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ab += (a[t] - ma) * (b[t] - mb);
    aa += (a[t] - ma) * (a[t] - ma);
    bb += (b[t] - mb) * (b[t] - mb);
  }
  return ab / std::sqrt(aa * bb);
}

double oracle_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Slice j minus its local mean over a (2r+1)^2 window clipped to the slice.
std::vector<double> oracle_highpass(const Volume& v, std::size_t j, int r) {
  const auto nx = static_cast<int>(v.dims()[0]), nz = static_cast<int>(v.dims()[2]);
  std::vector<double> out;
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      double sum = 0;
      int n = 0;
      for (int dk = -r; dk <= r; ++dk)
        for (int di = -r; di <= r; ++di) {
          const int x = i + di, z = k + dk;
          if (x < 0 || z < 0 || x >= nx || z >= nz) continue;
          sum += v.at(x, j, z);
          ++n;
        }
      out.push_back(r == 0 ? v.at(i, j, k) : v.at(i, j, k) - sum / n);
    }
  return out;
}

}  // namespace

TEST_CASE("ROI statistics match an exhaustive voxel scan") {
  AffineGeometry g = test::grid(20, 12, 18, {0.3, 1.2, 0.3}, {-3, -7, -2});
  g.axes = test::rot_y(0.3);
  const Volume v = test::random_volume(g, 8, 10.0, 20.0);
  EllipsoidROI roi;
  roi.center = g.center() + Vec3(0.2, -0.5, 0.1);
  roi.semi_axes = Vec3(1.7, 4.0, 1.1);
  roi.axes = test::rot_z(0.4) * test::rot_x(0.2);
  std::vector<double> inside;
  for (std::size_t k = 0; k < 18; ++k)
    for (std::size_t j = 0; j < 12; ++j)
      for (std::size_t i = 0; i < 20; ++i) {
        const Vec3 q = roi.axes.transpose() * (g.to_world(Vec3(i, j, k)) - roi.center);
        const double r2 = std::pow(q.x() / 1.7, 2) + std::pow(q.y() / 4.0, 2) + std::pow(q.z() / 1.1, 2);
        if (r2 <= 1.0) inside.push_back(v.at(i, j, k));
      }
  REQUIRE(inside.size() > 10);
  double mean = 0;
  for (double x : inside) mean += x;
  mean /= inside.size();
  double ss = 0;
  for (double x : inside) ss += (x - mean) * (x - mean);
  const ROIStats s = roi_stats(v, roi);
  CHECK(s.count == inside.size());
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.std == doctest::Approx(std::sqrt(ss / (inside.size() - 1))).epsilon(1e-12));
}

TEST_CASE("RC and SNR formulas") {
  const ROIStats gm{150.0, 3.0, 10}, wm{100.0, 2.0, 10}, bg{0.0, 2.5, 10};
  CHECK(relative_contrast(gm, wm) == doctest::Approx(2.0 * 50.0 / 250.0).epsilon(1e-15));
  CHECK(snr(gm, bg) == doctest::Approx(60.0).epsilon(1e-15));
  CHECK_THROWS_AS(relative_contrast(ROIStats{1.0, 0, 1}, ROIStats{-1.0, 0, 1}), DegenerateInput);
  CHECK_THROWS_AS(snr(gm, ROIStats{0.0, 0.0, 5}), DegenerateInput);
}

TEST_CASE("an ROI between voxel centres is empty") {
  const Volume v(test::grid(5, 5, 5), 1.0);
  EllipsoidROI roi;
  roi.center = Vec3(1.5, 1.5, 1.5);
  roi.semi_axes = Vec3(0.2, 0.2, 0.2);
  CHECK_THROWS_AS(roi_stats(v, roi), EmptyROI);
  CHECK_THROWS_AS(evaluate_rois(v, {roi}), EmptyROI);
}

TEST_CASE("ROI JSON round-trips") {
  EllipsoidROI roi;
  roi.center = Vec3(1, 2, 3);
  roi.semi_axes = Vec3(0.5, 1.5, 2.5);
  roi.axes = test::rot_x(0.3);
  roi.label = TissueLabel::BG;
  const auto back = rois_from_json(rois_to_json({roi}));
  REQUIRE(back.size() == 1);
  CHECK((back[0].center - roi.center).norm() == 0.0);
  CHECK((back[0].axes - roi.axes).norm() < 1e-15);
  CHECK(back[0].label == TissueLabel::BG);
  CHECK_THROWS_AS(tissue_from_string("CSF"), InvalidInput);
}

TEST_CASE("shift index matches a direct NCC/median computation") {
  const SlabLayout layout = SlabLayout::interleaved(4, 1.2);
  const AffineGeometry g = test::grid(9, 8, 7, {0.3, 1.2, 0.3});
  Volume v = test::random_volume(g, 61);
  // Correlate consecutive slices so the statistic is not near zero.
  for (std::size_t j = 1; j < 8; ++j)
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t i = 0; i < 9; ++i) v.at(i, j, k) = 0.6 * v.at(i, j - 1, k) + 0.4 * v.at(i, j, k);
  for (int r : {0, 1}) {
    ShiftOptions opt;
    opt.highpass_radius = r;
    const ShiftReport s = shift_index(v, nullptr, layout, opt);
    std::vector<std::vector<double>> hp;
    for (std::size_t j = 0; j < 8; ++j) hp.push_back(oracle_highpass(v, j, r));
    std::vector<double> even, odd, same;
    for (std::size_t i = 0; i + 1 < 8; ++i) (i % 2 ? odd : even).push_back(oracle_ncc(hp[i], hp[i + 1]));
    for (std::size_t i = 0; i + 2 < 8; ++i) same.push_back(oracle_ncc(hp[i], hp[i + 2]));
    CHECK(s.rho == doctest::Approx(std::max(oracle_median(even), oracle_median(odd))).epsilon(1e-12));
    CHECK(s.rho0 == doctest::Approx(oracle_median(same)).epsilon(1e-12));
    CHECK(s.flag == (s.rho - s.rho0 >= 0.15));
    CHECK_FALSE(s.degenerate);
  }
}

TEST_CASE("shift index is invariant to intensity scale and to slice order") {
  const SlabLayout layout = SlabLayout::interleaved(23, 1.2);
  const Volume& truth = test::default_truth();
  const ShiftReport a = shift_index(truth, nullptr, layout);
  Volume scaled = truth;
  for (double& x : scaled.data()) x = 3.0 * x + 7.0;
  Volume flipped = truth;
  const auto& d = truth.dims();
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t i = 0; i < d[0]; ++i) flipped.at(i, j, k) = truth.at(i, d[1] - 1 - j, k);
  const ShiftReport b = shift_index(scaled, nullptr, layout);
  const ShiftReport c = shift_index(flipped, nullptr, layout);
  CHECK(b.rho == doctest::Approx(a.rho).epsilon(1e-9));
  CHECK(b.rho0 == doctest::Approx(a.rho0).epsilon(1e-9));
  CHECK(c.rho == doctest::Approx(a.rho).epsilon(1e-12));
  CHECK(c.rho0 == doctest::Approx(a.rho0).epsilon(1e-12));
}

TEST_CASE("shift index: degenerate and mismatched inputs") {
  const SlabLayout layout = SlabLayout::interleaved(4, 1.2);
  const Volume flat(test::grid(6, 8, 6), 5.0);
  const ShiftReport s = shift_index(flat, nullptr, layout);
  CHECK(s.degenerate);
  CHECK_FALSE(s.flag);
  CHECK_THROWS_AS(shift_index(flat, nullptr, SlabLayout::contiguous(2, 4, 0, 1.2)), LayoutMismatch);
  CHECK_THROWS_AS(shift_index(Volume(test::grid(6, 9, 6), 1.0), nullptr, layout), LayoutMismatch);
}

TEST_CASE("a one-slice antero-posterior shift is flagged, no shift is not") {
  const Volume& truth = test::default_truth();
  const SlabLayout layout = SlabLayout::interleaved(23, 1.2);
  for (double ty : {0.0, 1.2}) {
    MotionScenario sc = MotionScenario::identity(2, truth.geometry().center());
    sc.seed = 3;
    sc.transforms[1] = RigidTransform::from_parameters({0, ty, 0, 0, 0, 0}, truth.geometry().center());
    const auto d = simulate_acquisition(truth, layout, sc);
    const ShiftReport r = shift_index({pad_slab(d.slabs[0], layout, 0), pad_slab(d.slabs[1], layout, 1)}, layout);
    CHECK(r.flag == (ty > 0.0));
  }
}

TEST_CASE("simple ROI and formula cases") {
  const Volume c(test::grid(9, 9, 9), 10.0);
  EllipsoidROI sphere;
  sphere.center = Vec3(4.0, 4.0, 4.0);
  sphere.semi_axes = Vec3(1.5, 1.5, 1.5);
  const ROIStats s = roi_stats(c, sphere);
  CHECK(s.mean == 10.0);
  CHECK(s.std == 0.0);
  std::size_t count = 0;
  for (int k = 0; k < 9; ++k)
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 9; ++i) count += (i - 4) * (i - 4) + (j - 4) * (j - 4) + (k - 4) * (k - 4) <= 2.25;
  CHECK(s.count == count);
  sphere.center = Vec3(100, 0, 0);
  CHECK_THROWS_AS(roi_stats(c, sphere), EmptyROI);

  CHECK(relative_contrast(ROIStats{7.0, 0, 1}, ROIStats{7.0, 0, 1}) == 0.0);
  CHECK(snr(ROIStats{112.0, 0, 1}, ROIStats{0.0, 4.0, 100}) == doctest::Approx(28.0).epsilon(1e-15));
}

TEST_CASE("phantom with RC 0.20 and with a known Gaussian background") {
  PhantomSpec spec;
  spec.bright = 110.0;
  spec.white = 90.0;
  const AffineGeometry g = default_phantom_geometry();
  const Volume v = generate_phantom(spec, g);
  const auto rois = canonical_rois(spec, g);
  const QCReport r = evaluate_rois(v, rois);
  REQUIRE(r.rc.has_value());
  CHECK(std::abs(*r.rc - 0.20) <= 1e-12);

  // Additive Gaussian noise with known sigma everywhere.
  const double sigma = 3.0;
  Volume noisy = generate_phantom(PhantomSpec{}, g);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& x : noisy.data()) x += n(rng);
  const auto rois2 = canonical_rois(PhantomSpec{}, g);
  const QCReport q = evaluate_rois(noisy, rois2);
  REQUIRE(q.snr.has_value());
  REQUIRE(q.rois.size() == 3);
  CHECK(q.rois[2].second.count >= 500);
  CHECK(*q.snr == doctest::Approx(q.rois[0].second.mean / sigma).epsilon(0.05));
}

TEST_CASE("zero motion: rho close to rho0") {
  const Volume& truth = test::default_truth();
  const SlabLayout layout = SlabLayout::interleaved(23, 1.2);
  const MotionScenario sc = MotionScenario::identity(2, truth.geometry().center());
  const auto d = simulate_acquisition(truth, layout, sc);
  const ShiftReport r = shift_index({pad_slab(d.slabs[0], layout, 0), pad_slab(d.slabs[1], layout, 1)}, layout);
  CHECK(std::abs(r.rho - r.rho0) <= 0.05);
  CHECK_FALSE(r.flag);
}
