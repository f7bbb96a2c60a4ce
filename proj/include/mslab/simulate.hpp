#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/layout.hpp"
#include "mslab/qc.hpp"
#include "mslab/transform.hpp"
#include "mslab/volume.hpp"

namespace mslab {

// Motion components in scanner axes. Head-coil geometry leaves room for
// rotations about every axis and for translation along z; translations along
// x and y are physically implausible but can still be simulated.
enum class MotionClass { RotX, RotY, RotZ, TransZ, TransY, TransX };
std::string to_string(MotionClass c);
bool is_possible(MotionClass c);

// Non-zero components of a transform (|value| > tol, radians or mm).
std::vector<MotionClass> motion_components(const RigidTransform& t, double tol = 1e-9);

struct MotionScenario {
  // Per-slab motion, moving-subject convention: slab j samples
  // truth(T_j(p)) at its grid points p. Centres default to the grid centre.
  std::vector<RigidTransform> transforms;
  RigidTransform lr_transform;
  double noise_percent = 2.0;     // Rician sigma, % of the truth peak
  double lr_noise_percent = 2.0;
  std::uint64_t seed = 1;

  // Only possible components, |θ| <= 5°, |t| <= 3 mm.
  bool realistic() const;
  nlohmann::json to_json() const;
  static MotionScenario from_json(const nlohmann::json& j);

  static MotionScenario identity(int slabs, const Vec3& center);
  // Random rotations about x, y, z and translation along z, uniform within
  // the given bounds, for every slab. Deterministic per seed.
  static MotionScenario random_realistic(int slabs, const Vec3& center, std::uint64_t seed,
                                         double max_rotation_deg = 5.0, double max_translation_mm = 3.0);
};

// sqrt((x + n1)^2 + n2^2), n1, n2 ~ N(0, sigma^2). sigma = 0 returns the input.
Volume rician_noise(const Volume& volume, double sigma, std::uint64_t seed);

// Averages blocks of `factor` voxels along z (the LR phase-encoding axis).
Volume downsample_z(const Volume& v, std::size_t factor);

struct SimulatedDataset {
  Volume truth;
  std::vector<Volume> slabs;
  Volume lr;
  std::vector<RigidTransform> truth_transforms;
  SlabLayout layout;
  MotionScenario scenario;
  std::vector<EllipsoidROI> rois;

  nlohmann::json scenario_json() const;
};

// Moves the anatomy per slab, cuts slabs per layout, adds seeded noise. The
// LR reference is the truth under its own transform, averaged over `lr_factor`
// voxels along z, plus noise. Throws LayoutMismatch when slab counts differ.
SimulatedDataset simulate_acquisition(const Volume& truth, const SlabLayout& layout, const MotionScenario& scenario,
                                      std::size_t lr_factor = 2);

}  // namespace mslab
