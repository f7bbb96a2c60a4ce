#pragma once

#include <utility>
#include <vector>

#include "mslab/layout.hpp"
#include "mslab/volume.hpp"

namespace mslab {

// An acquired slab expanded to the final stack with null slices, plus its
// 0/1 acquisition mask on the same grid.
struct PaddedSlab {
  Volume signal;
  Volume mask;
  int slab_index = 0;
};

// Places acquired slice s at final index layout.placement(slab)[s]; every
// other slice is a null slice (signal 0, mask 0). Throws LayoutMismatch when
// the slice count differs from the layout.
PaddedSlab pad_slab(const Volume& acquired, const SlabLayout& layout, int slab_index);

// Inverse of pad_slab for simulation: cuts a final-stack volume into the
// layout's acquired slabs.
std::vector<Volume> split_volume(const Volume& full, const SlabLayout& layout);

// Resamples a low-resolution reference onto (r_x, r_z) in-plane spacing with
// cubic B-spline interpolation; the slice axis is untouched.
Volume prepare_reference(const Volume& lr, double spacing_x, double spacing_z);

}  // namespace mslab
