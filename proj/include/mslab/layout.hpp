#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/volume.hpp"

namespace mslab {

enum class LayoutKind { Contiguous, Interleaved, Joined };

std::string to_string(LayoutKind k);

// How K acquired slabs tile the final slice stack. Every acquired slice s of
// slab j lands on one final slice index, placement(j)[s]; the final index
// runs anterior to posterior along the slice axis.
//
//  * Contiguous: slab j covers [j(N-o), j(N-o)+N), o = overlap slices.
//  * Interleaved: slab j owns { j, j+K, j+2K, ... } (K = 2 for every
//    acquisition protocol here; slab 0 takes the even, anterior-most slice).
//  * Joined: sub-layouts concatenated contiguously with `overlap` shared
//    slices between neighbours (e.g. two interleaved pairs).
class SlabLayout {
 public:
  static SlabLayout contiguous(int slabs, int slices_per_slab, int overlap_slices, double slice_thickness);
  static SlabLayout interleaved(int slices_per_slab, double slice_thickness, int slabs = 2);
  static SlabLayout joined(std::vector<SlabLayout> parts, int overlap_slices);
  // A single continuous stack (used for LR references).
  static SlabLayout single(int slices, double slice_thickness);

  LayoutKind kind() const { return kind_; }
  int slab_count() const { return static_cast<int>(placements_.size()); }
  int final_slices() const { return final_slices_; }
  double slice_thickness() const { return thickness_; }
  int overlap_slices() const { return overlap_; }
  const std::vector<SlabLayout>& parts() const { return parts_; }

  int slices_in_slab(int slab) const;
  const std::vector<int>& placement(int slab) const;

  // Number of slabs acquiring each final slice.
  std::vector<int> coverage() const;
  // Slab owning `slice` alone, or nullopt when it is shared or uncovered.
  std::optional<int> sole_owner(int slice) const;
  // True when some consecutive final slices come from different slabs that
  // interleave (the regime where antero-posterior shifts lose information).
  bool has_interleaving() const;

  // Position of an acquired slab's slice grid relative to the final stack.
  AffineGeometry slab_geometry(const AffineGeometry& final_geometry, int slab) const;
  AffineGeometry final_geometry(const AffineGeometry& slab_geometry, int slab) const;

  nlohmann::json to_json() const;
  static SlabLayout from_json(const nlohmann::json& j);

 private:
  void finalize();

  LayoutKind kind_ = LayoutKind::Contiguous;
  double thickness_ = 1.0;
  int overlap_ = 0;
  int slices_per_slab_ = 0;
  int interleave_ = 0;
  std::vector<SlabLayout> parts_;
  std::vector<std::vector<int>> placements_;
  int final_slices_ = 0;
};

}  // namespace mslab
