#include "mslab/volume.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "mslab/errors.hpp"

namespace mslab {

namespace {

std::atomic<unsigned> g_threads{0};

}  // namespace

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void AffineGeometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw InvalidInput("geometry: dimension " + std::to_string(a) + " is zero");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw InvalidInput("geometry: spacing along axis " + std::to_string(a) + " must be positive");
  }
  if (!origin.allFinite() || !axes.allFinite()) throw InvalidInput("geometry: non-finite origin or axes");
  for (int a = 0; a < 3; ++a) {
    if (std::abs(axes.col(a).norm() - 1.0) > 1e-6)
      throw InvalidInput("geometry: axis " + std::to_string(a) + " is not unit length");
    for (int b = a + 1; b < 3; ++b)
      if (std::abs(axes.col(a).dot(axes.col(b))) > 1e-6)
        throw InvalidInput("geometry: axes are not orthogonal");
  }
}

Vec3 AffineGeometry::to_world(const Vec3& index) const {
  return origin + axes * spacing.cwiseProduct(index);
}

Vec3 AffineGeometry::to_index(const Vec3& world) const {
  // Columns are orthonormal, so the inverse direction matrix is the transpose.
  return (axes.transpose() * (world - origin)).cwiseQuotient(spacing);
}

Mat4 AffineGeometry::index_to_world() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = axes * spacing.asDiagonal();
  m.topRightCorner<3, 1>() = origin;
  return m;
}

Mat4 AffineGeometry::world_to_index() const {
  Mat4 m = Mat4::Identity();
  const Mat3 lin = spacing.cwiseInverse().asDiagonal() * axes.transpose();
  m.topLeftCorner<3, 3>() = lin;
  m.topRightCorner<3, 1>() = -lin * origin;
  return m;
}

Vec3 AffineGeometry::center() const {
  return to_world(Vec3((dims[0] - 1) * 0.5, (dims[1] - 1) * 0.5, (dims[2] - 1) * 0.5));
}

bool AffineGeometry::approx_equal(const AffineGeometry& other, double tol) const {
  return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol &&
         (origin - other.origin).cwiseAbs().maxCoeff() <= tol &&
         (axes - other.axes).cwiseAbs().maxCoeff() <= tol;
}

Volume::Volume(AffineGeometry geometry, double fill) : geometry_(std::move(geometry)) {
  geometry_.validate();
  data_.assign(geometry_.voxel_count(), fill);
}

Volume::Volume(AffineGeometry geometry, std::vector<double> data)
    : geometry_(std::move(geometry)), data_(std::move(data)) {
  geometry_.validate();
  if (data_.size() != geometry_.voxel_count())
    throw InvalidInput("volume: data length " + std::to_string(data_.size()) +
                       " does not match grid of " + std::to_string(geometry_.voxel_count()));
}

double Volume::min() const { return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end()); }

double Volume::max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }

bool Volume::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

AffineGeometry regrid_inplane(const AffineGeometry& g, double spacing_x, double spacing_z) {
  if (!(spacing_x > 0.0) || !(spacing_z > 0.0)) throw InvalidInput("regrid: spacing must be positive");
  AffineGeometry out = g;
  const std::array<int, 2> axes_to_change{0, 2};
  const std::array<double, 2> new_spacing{spacing_x, spacing_z};
  Vec3 shift = Vec3::Zero();
  for (int n = 0; n < 2; ++n) {
    const int a = axes_to_change[n];
    const double extent = static_cast<double>(g.dims[a]) * g.spacing[a];
    out.dims[a] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(extent / new_spacing[n])));
    out.spacing[a] = new_spacing[n];
    // Keep the outer edge of the first voxel fixed.
    shift[a] = 0.5 * (new_spacing[n] - g.spacing[a]);
  }
  out.origin = g.origin + g.axes * shift;
  return out;
}

Volume downsample_inplane(const Volume& v, std::size_t factor) {
  if (factor <= 1) return v;
  const auto& g = v.geometry();
  AffineGeometry out_g = g;
  out_g.dims[0] = std::max<std::size_t>(1, (g.dims[0] + factor - 1) / factor);
  out_g.dims[2] = std::max<std::size_t>(1, (g.dims[2] + factor - 1) / factor);
  out_g.spacing[0] = g.spacing[0] * static_cast<double>(factor);
  out_g.spacing[2] = g.spacing[2] * static_cast<double>(factor);
  const double half = 0.5 * static_cast<double>(factor - 1);
  out_g.origin = g.to_world(Vec3(half, 0.0, half));

  std::vector<double> sum(out_g.voxel_count(), 0.0);
  std::vector<double> count(out_g.voxel_count(), 0.0);
  for (std::size_t k = 0; k < g.dims[2]; ++k)
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        const std::size_t o = i / factor + out_g.dims[0] * (j + out_g.dims[1] * (k / factor));
        sum[o] += v.at(i, j, k);
        count[o] += 1.0;
      }
  for (std::size_t n = 0; n < sum.size(); ++n) sum[n] /= count[n];
  return Volume(out_g, std::move(sum));
}

}  // namespace mslab
