#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <algorithm>

#include "mslab/transform.hpp"
#include "mslab/volume.hpp"

namespace test {

inline mslab::AffineGeometry grid(std::size_t nx, std::size_t ny, std::size_t nz, mslab::Vec3 spacing = {1.0, 1.0, 1.0},
                                  mslab::Vec3 origin = mslab::Vec3::Zero()) {
  mslab::AffineGeometry g;
  g.dims = {nx, ny, nz};
  g.spacing = spacing;
  g.origin = origin;
  return g;
}

inline mslab::Volume random_volume(const mslab::AffineGeometry& g, std::uint64_t seed, double lo = 0.0,
                                   double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  mslab::Volume v(g);
  for (double& x : v.data()) x = u(rng);
  return v;
}

// Rotation about one axis, written out element by element.
inline mslab::Mat3 rot_x(double a) {
  mslab::Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline mslab::Mat3 rot_y(double a) {
  mslab::Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
inline mslab::Mat3 rot_z(double a) {
  mslab::Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

inline double max_abs_diff(const mslab::Volume& a, const mslab::Volume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace test

#include "mslab/phantom.hpp"
#include "mslab/simulate.hpp"
#include "mslab/slab.hpp"

namespace test {

// Noise-free default phantom on the default grid, built once per process.
inline const mslab::Volume& default_truth() {
  static const mslab::Volume truth = mslab::generate_phantom(mslab::PhantomSpec{}, mslab::default_phantom_geometry());
  return truth;
}

struct PoseError {
  double rotation_deg;
  double translation_mm;
};

// Geodesic rotation error and displacement error at `at`.
inline PoseError pose_error(const mslab::RigidTransform& found, const mslab::RigidTransform& truth,
                            const mslab::Vec3& at) {
  return {mslab::rad_to_deg(mslab::rotation_difference(found, truth)), (found.apply(at) - truth.apply(at)).norm()};
}

}  // namespace test
