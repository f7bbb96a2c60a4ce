#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "mslab/qc.hpp"
#include "mslab/volume.hpp"

namespace mslab {

// Analytic hippocampus-like phantom. The main axis runs along y (the slice
// axis), head (s = 0) at the anterior end. Each cross-section is a flattened
// capsule layered from the outside in: alveus (dark), stratum pyramidale
// (bright), SRLM (dark), dentate core (bright). A sector on the medial side
// is left open so the CA ribbon wraps the core rather than enclosing it.
// The outer surface carries a small deterministic relief (digitations)
// that changes over roughly one slice.
struct PhantomSpec {
  double length = 42.0;
  double height = 7.0;
  double body_width = 10.0;
  double head_width = 17.0;
  double tail_width = 6.0;
  double tail_height = 5.0;

  double alveus_thickness = 0.3;
  double sp_min = 0.5, sp_max = 1.5;
  double srlm_min = 0.6, srlm_max = 1.0;

  double bright = 150.0;  // SP and dentate core (GM)
  double dark = 80.0;     // SRLM and alveus
  double white = 100.0;   // surrounding white matter
  double background = 0.0;

  // Curvature of the main axis (mm): lateral sway and the tail's drop.
  double sway = 2.5;
  double tail_drop = 4.0;
  // Surface relief amplitude (mm) and its correlation length along y (mm).
  double relief = 0.8;
  double relief_length = 0.6;
  std::uint64_t relief_seed = 7;

  // In-plane sub-samples per axis averaged into each voxel (partial volume
  // across the acquisition plane; the slice axis is sampled at its centre).
  int supersample = 3;

  // White matter fills an elliptic cylinder (half-axes in x and z, mm)
  // around the main axis, through the whole field along y.
  double brain_half_width = 12.0;
  double brain_half_height = 9.5;

  // Throws InvalidInput when an invariant fails.
  void validate() const;
  nlohmann::json to_json() const;
  static PhantomSpec from_json(const nlohmann::json& j);
};

// Default simulation grid: the 0.3 x 1.2 x 0.3 mm acquisition voxel,
// 46 slices (two interleaved slabs of 23).
AffineGeometry default_phantom_geometry();

// Evaluates the phantom at voxel centres. The phantom is centred on the grid
// centre and follows the grid axes. Throws InvalidInput when the in-plane
// spacing cannot resolve the CA layers (spacing > thinnest of SP/SRLM / 1.5).
Volume generate_phantom(const PhantomSpec& spec, const AffineGeometry& geometry);

// GM (dentate core of the head), WM and background ellipsoids for the same
// placement. Each is homogeneous in the noise-free phantom.
std::vector<EllipsoidROI> canonical_rois(const PhantomSpec& spec, const AffineGeometry& geometry);

}  // namespace mslab
