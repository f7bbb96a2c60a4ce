#pragma once

#include <string>
#include <vector>

#include "mslab/transform.hpp"
#include "mslab/volume.hpp"

namespace mslab {

enum class InterpolationMethod {
  NearestNeighbor,
  Trilinear,
  CubicBSpline,
  // Cubic B-spline across the acquisition plane (x, z), linear along the
  // slice axis (y). Signal and mask resliced with this and Trilinear
  // respectively stay proportional, since masks are constant in-plane.
  InPlaneBSpline,
};

std::string to_string(InterpolationMethod m);
InterpolationMethod interpolation_from_string(const std::string& s);

struct SampleValue {
  double value = 0.0;
  bool in_field = false;
};

// Interpolator bound to one volume. B-spline methods prefilter once at
// construction (mirror boundary); evaluation is then thread-safe.
//
// A point is in-field when every index coordinate lies within half a voxel
// of the grid, i.e. inside the physical extent of the voxels.
class Interpolator {
 public:
  Interpolator(const Volume& volume, InterpolationMethod method, double out_of_field = 0.0);

  SampleValue at_index(const Vec3& index) const;
  SampleValue at_world(const Vec3& point) const;

  InterpolationMethod method() const { return method_; }
  const Volume& volume() const { return *volume_; }

 private:
  double nearest(const Vec3& idx) const;
  double linear(const Vec3& idx) const;
  double spline(const Vec3& idx, bool linear_y) const;

  const Volume* volume_;
  InterpolationMethod method_;
  double out_of_field_;
  std::vector<double> coeffs_;
};

// Single-point convenience wrapper (prefilters on every call for spline
// methods; use Interpolator for repeated sampling). Throws InvalidInput for
// a non-finite point.
SampleValue sample(const Volume& volume, const Vec3& point, InterpolationMethod method,
                   double out_of_field = 0.0);

struct ResampleResult {
  Volume volume;
  std::size_t in_field_count = 0;
};

// Pull-style resampling: out(u) = sample(moving, transform(world(u))).
// Out-of-field voxels are 0.
ResampleResult resample(const Volume& moving, const AffineGeometry& target, const RigidTransform& transform,
                        InterpolationMethod method);

// In-place cubic B-spline prefilter of a 1D signal (mirror boundary).
void bspline_prefilter_line(std::vector<double>& line);

}  // namespace mslab
