#include "mslab/transform.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace mslab {

RigidTransform RigidTransform::identity(const Vec3& center) {
  RigidTransform t;
  t.center = center;
  return t;
}

RigidTransform RigidTransform::from_parameters(const std::array<double, 6>& p, const Vec3& center) {
  RigidTransform t;
  t.translation = Vec3(p[0], p[1], p[2]);
  t.rotation = Vec3(p[3], p[4], p[5]);
  t.center = center;
  return t;
}

std::array<double, 6> RigidTransform::parameters() const {
  return {translation.x(), translation.y(), translation.z(), rotation.x(), rotation.y(), rotation.z()};
}

Mat3 RigidTransform::rotation_matrix() const {
  const double cx = std::cos(rotation.x()), sx = std::sin(rotation.x());
  const double cy = std::cos(rotation.y()), sy = std::sin(rotation.y());
  const double cz = std::cos(rotation.z()), sz = std::sin(rotation.z());
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  return rz * ry * rx;
}

Mat4 RigidTransform::matrix() const {
  const Mat3 r = rotation_matrix();
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = center + translation - r * center;
  return m;
}

Vec3 RigidTransform::apply(const Vec3& p) const {
  return rotation_matrix() * (p - center) + center + translation;
}

RigidTransform RigidTransform::from_matrix(const Mat4& m, const Vec3& center) {
  const Mat3 r = m.topLeftCorner<3, 3>();
  RigidTransform t;
  t.center = center;
  // R = Rz Ry Rx  =>  R(2,0) = -sin θy, R(2,1) = sin θx cos θy, R(1,0) = cos θy sin θz.
  const double cy = std::hypot(r(0, 0), r(1, 0));
  if (cy > 1e-12) {
    t.rotation.x() = std::atan2(r(2, 1), r(2, 2));
    t.rotation.y() = std::atan2(-r(2, 0), cy);
    t.rotation.z() = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: θx and θz share one degree of freedom; pin θx to zero.
    t.rotation.x() = 0.0;
    t.rotation.y() = std::atan2(-r(2, 0), cy);
    t.rotation.z() = std::atan2(-r(0, 1), r(1, 1));
  }
  const Vec3 mapped_center = r * center + m.topRightCorner<3, 1>();
  t.translation = mapped_center - center;
  return t;
}

RigidTransform RigidTransform::recentered(const Vec3& new_center) const {
  RigidTransform t = *this;
  const Mat3 r = rotation_matrix();
  // Same affine map: translation' = R c' + b - c' with b = c + t - R c.
  t.translation = r * new_center + (center + translation - r * center) - new_center;
  t.center = new_center;
  return t;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform::from_matrix(a.matrix() * b.matrix(), a.center);
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 r = t.rotation_matrix();
  Mat4 inv = Mat4::Identity();
  inv.topLeftCorner<3, 3>() = r.transpose();
  inv.topRightCorner<3, 1>() = -r.transpose() * t.matrix().topRightCorner<3, 1>();
  return RigidTransform::from_matrix(inv, t.center);
}

double rotation_difference(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 d = a.rotation_matrix().transpose() * b.rotation_matrix();
  const double c = std::clamp((d.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace mslab
