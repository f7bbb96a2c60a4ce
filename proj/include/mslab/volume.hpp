#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mslab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Dims = std::array<std::size_t, 3>;

// Voxel grid geometry. Axis 0 (x) and axis 2 (z) span the acquisition plane;
// axis 1 (y) is the slab normal, i.e. the slice axis of every stack.
//
// world(i, j, k) = origin + axes * diag(spacing) * (i, j, k)
struct AffineGeometry {
  Dims dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  Mat3 axes = Mat3::Identity();

  // Throws InvalidInput when dims/spacing/axes violate the grid invariants.
  void validate() const;

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  Vec3 to_world(const Vec3& index) const;
  Vec3 to_index(const Vec3& world) const;
  Mat4 index_to_world() const;
  Mat4 world_to_index() const;

  // World position of the grid's geometric centre ((n-1)/2 on every axis).
  Vec3 center() const;

  bool approx_equal(const AffineGeometry& other, double tol = 1e-9) const;
};

// Scalar volume: geometry plus x-fastest voxel data.
class Volume {
 public:
  Volume() = default;
  explicit Volume(AffineGeometry geometry, double fill = 0.0);
  Volume(AffineGeometry geometry, std::vector<double> data);

  const AffineGeometry& geometry() const { return geometry_; }
  const Dims& dims() const { return geometry_.dims; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + geometry_.dims[0] * (j + geometry_.dims[1] * k);
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }

  double min() const;
  double max() const;
  bool all_finite() const;

 private:
  AffineGeometry geometry_;
  std::vector<double> data_;
};

// Geometry with the same field of view but a different in-plane (x, z)
// spacing; the field edges stay put and the voxel counts follow.
AffineGeometry regrid_inplane(const AffineGeometry& g, double spacing_x, double spacing_z);

// Block-average by `factor` along x and z (y untouched). Trailing partial
// blocks are averaged over the voxels they contain.
Volume downsample_inplane(const Volume& v, std::size_t factor);

// Number of worker threads used by data-parallel loops (resampling,
// concurrent slab registration). Results never depend on this value.
void set_thread_count(unsigned n);
unsigned thread_count();

}  // namespace mslab
