#pragma once

#include <array>

#include "mslab/volume.hpp"

namespace mslab {

// Six-parameter rigid transform in world millimetres:
//
//   p' = R (p - center) + center + translation,   R = Rz(θz) Ry(θy) Rx(θx)
//
// Angles are radians.
struct RigidTransform {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 center = Vec3::Zero();

  static RigidTransform identity(const Vec3& center = Vec3::Zero());

  // Parameter vector in optimizer order: tx, ty, tz, θx, θy, θz.
  static RigidTransform from_parameters(const std::array<double, 6>& p, const Vec3& center);
  std::array<double, 6> parameters() const;

  // Decomposes a rigid 4x4 matrix into angles and a translation about `center`.
  static RigidTransform from_matrix(const Mat4& m, const Vec3& center);

  Mat3 rotation_matrix() const;
  Mat4 matrix() const;
  Vec3 apply(const Vec3& p) const;

  // Same mapping, re-expressed about another rotation centre.
  RigidTransform recentered(const Vec3& new_center) const;
};

// compose(a, b) applies b first, then a. The result is expressed about a's centre.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

// Rotation angle (radians) of a^-1 b, i.e. the geodesic distance between
// the two rotations.
double rotation_difference(const RigidTransform& a, const RigidTransform& b);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }
constexpr double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace mslab
