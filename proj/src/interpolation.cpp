#include "mslab/interpolation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mslab/errors.hpp"
#include "parallel.hpp"

namespace mslab {

namespace {

constexpr double kFieldTol = 1e-9;
const double kPole = std::sqrt(3.0) - 2.0;

bool in_support(const Vec3& idx, const Dims& dims) {
  for (int a = 0; a < 3; ++a) {
    const double n = static_cast<double>(dims[a]);
    if (idx[a] < -0.5 - kFieldTol || idx[a] > n - 0.5 + kFieldTol) return false;
  }
  return true;
}

inline std::ptrdiff_t mirror(std::ptrdiff_t k, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  k = k % period;
  if (k < 0) k += period;
  return k < n ? k : period - k;
}

inline void cubic_weights(double t, std::array<double, 4>& w) {
  const double u = 1.0 - t;
  w[0] = u * u * u / 6.0;
  w[1] = 2.0 / 3.0 - t * t + 0.5 * t * t * t;
  w[2] = 2.0 / 3.0 - u * u + 0.5 * u * u * u;
  w[3] = t * t * t / 6.0;
}

// Prefilter every line of `c` along `axis`.
void prefilter_axis(std::vector<double>& c, const Dims& dims, int axis) {
  const std::size_t n = dims[axis];
  if (n < 2) return;
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? dims[0] : dims[0] * dims[1]);
  const std::size_t outer_a = axis == 0 ? dims[1] : dims[0];
  const std::size_t outer_b = axis == 2 ? dims[1] : dims[2];
  std::vector<double> line(n);
  for (std::size_t b = 0; b < outer_b; ++b)
    for (std::size_t a = 0; a < outer_a; ++a) {
      std::size_t base;
      if (axis == 0) base = dims[0] * (a + dims[1] * b);
      else if (axis == 1) base = a + dims[0] * dims[1] * b;
      else base = a + dims[0] * b;
      for (std::size_t s = 0; s < n; ++s) line[s] = c[base + s * stride];
      bspline_prefilter_line(line);
      for (std::size_t s = 0; s < n; ++s) c[base + s * stride] = line[s];
    }
}

}  // namespace

std::string to_string(InterpolationMethod m) {
  switch (m) {
    case InterpolationMethod::NearestNeighbor: return "nearest";
    case InterpolationMethod::Trilinear: return "trilinear";
    case InterpolationMethod::CubicBSpline: return "cubic_bspline";
    case InterpolationMethod::InPlaneBSpline: return "inplane_bspline";
  }
  return "unknown";
}

InterpolationMethod interpolation_from_string(const std::string& s) {
  if (s == "nearest") return InterpolationMethod::NearestNeighbor;
  if (s == "trilinear") return InterpolationMethod::Trilinear;
  if (s == "cubic_bspline") return InterpolationMethod::CubicBSpline;
  if (s == "inplane_bspline") return InterpolationMethod::InPlaneBSpline;
  throw InvalidInput("unknown interpolation method '" + s + "'");
}

void bspline_prefilter_line(std::vector<double>& line) {
  const std::size_t n = line.size();
  if (n < 2) return;
  const double z = kPole;
  const double gain = (1.0 - z) * (1.0 - 1.0 / z);
  for (auto& v : line) v *= gain;

  // Causal initialisation, exact for whole-sample mirror symmetry.
  const double zn = std::pow(z, static_cast<double>(n - 1));
  double sum = line[0] + zn * line[n - 1];
  double z1 = z;
  double z2 = zn * zn / z;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    sum += (z1 + z2) * line[k];
    z1 *= z;
    z2 /= z;
  }
  line[0] = sum / (1.0 - zn * zn);
  for (std::size_t k = 1; k < n; ++k) line[k] += z * line[k - 1];

  line[n - 1] = (z / (z * z - 1.0)) * (z * line[n - 2] + line[n - 1]);
  for (std::size_t k = n - 1; k-- > 0;) line[k] = z * (line[k + 1] - line[k]);
}

Interpolator::Interpolator(const Volume& volume, InterpolationMethod method, double out_of_field)
    : volume_(&volume), method_(method), out_of_field_(out_of_field) {
  if (method == InterpolationMethod::CubicBSpline || method == InterpolationMethod::InPlaneBSpline) {
    coeffs_.assign(volume.data().begin(), volume.data().end());
    prefilter_axis(coeffs_, volume.dims(), 0);
    if (method == InterpolationMethod::CubicBSpline) prefilter_axis(coeffs_, volume.dims(), 1);
    prefilter_axis(coeffs_, volume.dims(), 2);
  }
}

SampleValue Interpolator::at_world(const Vec3& point) const {
  return at_index(volume_->geometry().to_index(point));
}

SampleValue Interpolator::at_index(const Vec3& idx) const {
  if (!idx.allFinite()) throw InvalidInput("sample: non-finite point");
  if (!in_support(idx, volume_->dims())) return {out_of_field_, false};
  switch (method_) {
    case InterpolationMethod::NearestNeighbor: return {nearest(idx), true};
    case InterpolationMethod::Trilinear: return {linear(idx), true};
    case InterpolationMethod::CubicBSpline: return {spline(idx, false), true};
    case InterpolationMethod::InPlaneBSpline: return {spline(idx, true), true};
  }
  return {out_of_field_, false};
}

double Interpolator::nearest(const Vec3& idx) const {
  const auto& d = volume_->dims();
  std::array<std::size_t, 3> k{};
  for (int a = 0; a < 3; ++a) {
    const double r = std::floor(idx[a] + 0.5);
    k[a] = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(d[a] - 1)));
  }
  return volume_->at(k[0], k[1], k[2]);
}

double Interpolator::linear(const Vec3& idx) const {
  const auto& d = volume_->dims();
  std::array<std::size_t, 3> lo{}, hi{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(idx[a], 0.0, static_cast<double>(d[a] - 1));
    const double f = std::floor(x);
    lo[a] = static_cast<std::size_t>(f);
    hi[a] = std::min(lo[a] + 1, d[a] - 1);
    t[a] = x - f;
  }
  const auto& v = *volume_;
  const double c00 = v.at(lo[0], lo[1], lo[2]) * (1 - t[0]) + v.at(hi[0], lo[1], lo[2]) * t[0];
  const double c10 = v.at(lo[0], hi[1], lo[2]) * (1 - t[0]) + v.at(hi[0], hi[1], lo[2]) * t[0];
  const double c01 = v.at(lo[0], lo[1], hi[2]) * (1 - t[0]) + v.at(hi[0], lo[1], hi[2]) * t[0];
  const double c11 = v.at(lo[0], hi[1], hi[2]) * (1 - t[0]) + v.at(hi[0], hi[1], hi[2]) * t[0];
  const double c0 = c00 * (1 - t[1]) + c10 * t[1];
  const double c1 = c01 * (1 - t[1]) + c11 * t[1];
  return c0 * (1 - t[2]) + c1 * t[2];
}

double Interpolator::spline(const Vec3& idx, bool linear_y) const {
  const auto& d = volume_->dims();
  const auto n0 = static_cast<std::ptrdiff_t>(d[0]);
  const auto n1 = static_cast<std::ptrdiff_t>(d[1]);
  const auto n2 = static_cast<std::ptrdiff_t>(d[2]);

  std::array<double, 4> wx{}, wz{};
  std::array<std::ptrdiff_t, 4> ix{}, iz{};
  const double fx = std::floor(idx[0]);
  const double fz = std::floor(idx[2]);
  cubic_weights(idx[0] - fx, wx);
  cubic_weights(idx[2] - fz, wz);
  for (int m = 0; m < 4; ++m) {
    ix[m] = mirror(static_cast<std::ptrdiff_t>(fx) - 1 + m, n0);
    iz[m] = mirror(static_cast<std::ptrdiff_t>(fz) - 1 + m, n2);
  }

  std::array<double, 4> wy{};
  std::array<std::ptrdiff_t, 4> iy{};
  int ny_taps;
  if (linear_y) {
    const double y = std::clamp(idx[1], 0.0, static_cast<double>(n1 - 1));
    const double fy = std::floor(y);
    iy[0] = static_cast<std::ptrdiff_t>(fy);
    iy[1] = std::min(iy[0] + 1, n1 - 1);
    wy[0] = 1.0 - (y - fy);
    wy[1] = y - fy;
    ny_taps = 2;
  } else {
    const double fy = std::floor(idx[1]);
    cubic_weights(idx[1] - fy, wy);
    for (int m = 0; m < 4; ++m) iy[m] = mirror(static_cast<std::ptrdiff_t>(fy) - 1 + m, n1);
    ny_taps = 4;
  }

  double acc = 0.0;
  for (int c = 0; c < 4; ++c) {
    double acc_y = 0.0;
    for (int b = 0; b < ny_taps; ++b) {
      const std::size_t row = static_cast<std::size_t>(n0 * (iy[b] + n1 * iz[c]));
      double acc_x = 0.0;
      for (int a = 0; a < 4; ++a) acc_x += wx[a] * coeffs_[row + static_cast<std::size_t>(ix[a])];
      acc_y += wy[b] * acc_x;
    }
    acc += wz[c] * acc_y;
  }
  return acc;
}

SampleValue sample(const Volume& volume, const Vec3& point, InterpolationMethod method, double out_of_field) {
  if (!point.allFinite()) throw InvalidInput("sample: non-finite point");
  const Interpolator interp(volume, method, out_of_field);
  return interp.at_world(point);
}

ResampleResult resample(const Volume& moving, const AffineGeometry& target, const RigidTransform& transform,
                        InterpolationMethod method) {
  target.validate();
  const Interpolator interp(moving, method, 0.0);
  // Output index -> moving index as one affine map.
  const Mat4 m = moving.geometry().world_to_index() * transform.matrix() * target.index_to_world();
  const Mat3 lin = m.topLeftCorner<3, 3>();
  const Vec3 off = m.topRightCorner<3, 1>();

  Volume out(target, 0.0);
  auto data = out.data();
  const auto& d = target.dims;
  std::vector<std::size_t> counts(d[2], 0);
  detail::parallel_for(d[2], [&](std::size_t kb, std::size_t ke) {
    for (std::size_t k = kb; k < ke; ++k) {
      std::size_t count = 0;
      for (std::size_t j = 0; j < d[1]; ++j)
        for (std::size_t i = 0; i < d[0]; ++i) {
          const Vec3 idx = lin * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)) + off;
          const SampleValue s = interp.at_index(idx);
          if (s.in_field) {
            data[i + d[0] * (j + d[1] * k)] = s.value;
            ++count;
          }
        }
      counts[k] = count;
    }
  });
  ResampleResult result{std::move(out), 0};
  for (auto c : counts) result.in_field_count += c;
  return result;
}

}  // namespace mslab
