#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/layout.hpp"
#include "mslab/registration.hpp"
#include "mslab/volume.hpp"

namespace mslab {

struct FusionOutput {
  Volume fused;
  Volume mask_sum;
  Volume coverage_map;
  double uncovered_fraction = 0.0;
  // Fraction of voxels acquired more than once (mask sum >= 1.5).
  double redundant_fraction = 0.0;
  double epsilon = 0.05;

  nlohmann::json summary() const;
};

// fused = Σ signals / Σ masks where Σ masks >= epsilon, 0 (uncovered)
// elsewhere. Per-voxel sums run over sorted terms, so the result does not
// depend on input order.
FusionOutput fuse(const std::vector<Volume>& signals, const std::vector<Volume>& masks, double epsilon = 0.05);

struct ReconstructOptions {
  RegistrationConfig registration;
  double epsilon = 0.05;
  double uncovered_warning = 0.02;
};

struct Reconstruction {
  FusionOutput fusion;
  std::vector<RegistrationResult> registrations;
  std::vector<std::string> warnings;
  Volume reference;  // the prepared LR reference
};

// prepare_reference -> pad_slab -> register_rigid -> apply_result -> fuse.
// Slabs are registered concurrently; RegistrationFailed carries the slab index.
Reconstruction reconstruct(const std::vector<Volume>& slabs, const SlabLayout& layout, const Volume& lr,
                           const ReconstructOptions& options = {});

}  // namespace mslab
