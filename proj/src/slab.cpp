#include "mslab/slab.hpp"

#include <cmath>
#include <string>

#include "mslab/errors.hpp"
#include "mslab/interpolation.hpp"

namespace mslab {

PaddedSlab pad_slab(const Volume& acquired, const SlabLayout& layout, int slab_index) {
  const auto& placement = layout.placement(slab_index);
  const auto& g = acquired.geometry();
  if (g.dims[1] != placement.size())
    throw LayoutMismatch("slab " + std::to_string(slab_index) + " has " + std::to_string(g.dims[1]) +
                         " slices, layout expects " + std::to_string(placement.size()));

  const AffineGeometry final_g = layout.final_geometry(g, slab_index);
  PaddedSlab out{Volume(final_g, 0.0), Volume(final_g, 0.0), slab_index};
  for (std::size_t k = 0; k < g.dims[2]; ++k)
    for (std::size_t s = 0; s < placement.size(); ++s) {
      const auto j = static_cast<std::size_t>(placement[s]);
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        out.signal.at(i, j, k) = acquired.at(i, s, k);
        out.mask.at(i, j, k) = 1.0;
      }
    }
  return out;
}

std::vector<Volume> split_volume(const Volume& full, const SlabLayout& layout) {
  const auto& g = full.geometry();
  if (g.dims[1] != static_cast<std::size_t>(layout.final_slices()))
    throw LayoutMismatch("volume has " + std::to_string(g.dims[1]) + " slices, layout tiles " +
                         std::to_string(layout.final_slices()));
  std::vector<Volume> slabs;
  slabs.reserve(static_cast<std::size_t>(layout.slab_count()));
  for (int slab = 0; slab < layout.slab_count(); ++slab) {
    const auto& placement = layout.placement(slab);
    Volume v(layout.slab_geometry(g, slab), 0.0);
    for (std::size_t k = 0; k < g.dims[2]; ++k)
      for (std::size_t s = 0; s < placement.size(); ++s) {
        const auto j = static_cast<std::size_t>(placement[s]);
        for (std::size_t i = 0; i < g.dims[0]; ++i) v.at(i, s, k) = full.at(i, j, k);
      }
    slabs.push_back(std::move(v));
  }
  return slabs;
}

Volume prepare_reference(const Volume& lr, double spacing_x, double spacing_z) {
  if (!(spacing_x > 0.0) || !(spacing_z > 0.0)) throw InvalidInput("prepare_reference: spacing must be positive");
  const auto& g = lr.geometry();
  constexpr double tol = 1e-9;
  if (g.spacing[0] < spacing_x - tol || g.spacing[2] < spacing_z - tol)
    throw InvalidInput("prepare_reference: LR in-plane spacing is finer than the target");
  if (std::abs(g.spacing[0] - spacing_x) <= tol && std::abs(g.spacing[2] - spacing_z) <= tol) return lr;
  const AffineGeometry target = regrid_inplane(g, spacing_x, spacing_z);
  return resample(lr, target, RigidTransform::identity(), InterpolationMethod::CubicBSpline).volume;
}

}  // namespace mslab
