#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mslab/interpolation.hpp"
#include "mslab/slab.hpp"
#include "mslab/transform.hpp"
#include "mslab/volume.hpp"

namespace mslab {

// B x B joint histogram; rows index the moving image, columns the fixed one.
struct JointHistogram {
  int bins = 0;
  std::vector<double> counts;
  double moving_min = 0.0, moving_max = 0.0;
  double fixed_min = 0.0, fixed_max = 0.0;
  double total = 0.0;

  double at(int moving_bin, int fixed_bin) const { return counts[static_cast<std::size_t>(moving_bin * bins + fixed_bin)]; }
  std::vector<double> moving_marginal() const;
  std::vector<double> fixed_marginal() const;
  JointHistogram transposed() const;
};

// Pairs moving[v] with fixed(T v) over voxels with mask >= 0.5 whose image
// under T lands inside the fixed field of view. The fixed side uses
// partial-volume interpolation: the eight neighbours of T v contribute their
// (hard-binned) intensities with trilinear weights. Intensities are binned
// uniformly between the min and max of the masked moving voxels and of the
// whole fixed image. Throws EmptyOverlap when nothing is accumulated.
JointHistogram joint_histogram(const Volume& moving, const Volume& fixed, const Volume& mask,
                               const RigidTransform& transform, int bins);

struct NmiValue {
  double value = 1.0;
  bool degenerate = false;  // H(A,B) == 0; value reported as 2
};

// (H(A) + H(B)) / H(A,B), Shannon entropies in bits.
NmiValue evaluate_nmi(const JointHistogram& h);
double nmi(const JointHistogram& h);

struct RegistrationConfig {
  int bins = 64;
  int levels = 3;                      // in-plane factors 2^(levels-1) ... 1
  double rotation_step_deg = 0.5;      // finest level, scaled by the level factor
  double translation_step_voxels = 0.5;  // fraction of the in-plane voxel size r_x
  int max_iterations = 50;             // coordinate sweeps per level
  double tolerance = 1e-5;             // minimum metric gain for a sweep to count
  int step_halvings = 4;               // refinements per level before convergence
  double min_overlap_fraction = 0.5;   // reject poses leaving fewer masked samples in view
  // Sample each moving voxel at a fixed pseudo-random in-plane point inside
  // it rather than at its centre (avoids metric peaks at grid-aligned poses).
  bool jitter = true;
  InterpolationMethod reslice = InterpolationMethod::InPlaneBSpline;

  void validate() const;
  nlohmann::json to_json() const;
};

struct LevelTrace {
  int factor = 1;
  std::vector<double> nmi;  // after each accepted sweep, starting with the entry value
  int evaluations = 0;
};

struct RegistrationResult {
  RigidTransform transform;  // maps padded-slab world points into reference world
  double initial_nmi = 1.0;
  double final_nmi = 1.0;
  std::vector<LevelTrace> levels;
  std::size_t masked_voxels = 0;

  nlohmann::json to_json() const;
};

// Maximises NMI between a padded slab (moving) and the prepared reference
// (fixed) with a multi-resolution coordinate search starting at identity
// about the slab centre. Parameter order tx, ty, tz, θx, θy, θz.
// Deterministic; single-threaded. Throws RegistrationFailed.
RegistrationResult register_rigid(const PaddedSlab& padded, const Volume& reference,
                                  const RegistrationConfig& config = {});

// Reslices the signal (config reslice method) and the mask (trilinear,
// fractional values kept) onto the reference grid.
std::pair<Volume, Volume> apply_result(const PaddedSlab& padded, const RegistrationResult& result,
                                       const AffineGeometry& reference_geometry,
                                       InterpolationMethod reslice = InterpolationMethod::InPlaneBSpline);

nlohmann::json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);

}  // namespace mslab
