#include "mslab/layout.hpp"

#include <algorithm>
#include <set>

#include "mslab/errors.hpp"

namespace mslab {

std::string to_string(LayoutKind k) {
  switch (k) {
    case LayoutKind::Contiguous: return "contiguous";
    case LayoutKind::Interleaved: return "interleaved";
    case LayoutKind::Joined: return "joined";
  }
  return "unknown";
}

SlabLayout SlabLayout::contiguous(int slabs, int slices_per_slab, int overlap_slices, double slice_thickness) {
  if (slabs < 1 || slices_per_slab < 1) throw InvalidInput("contiguous layout needs K >= 1 and N >= 1");
  if (overlap_slices < 0 || (slabs > 1 && overlap_slices >= slices_per_slab))
    throw InvalidInput("contiguous layout: overlap must be in [0, N)");
  if (!(slice_thickness > 0.0)) throw InvalidInput("layout: slice thickness must be positive");
  SlabLayout l;
  l.kind_ = LayoutKind::Contiguous;
  l.thickness_ = slice_thickness;
  l.overlap_ = overlap_slices;
  l.slices_per_slab_ = slices_per_slab;
  for (int j = 0; j < slabs; ++j) {
    std::vector<int> p(static_cast<std::size_t>(slices_per_slab));
    for (int s = 0; s < slices_per_slab; ++s) p[s] = j * (slices_per_slab - overlap_slices) + s;
    l.placements_.push_back(std::move(p));
  }
  l.finalize();
  return l;
}

SlabLayout SlabLayout::interleaved(int slices_per_slab, double slice_thickness, int slabs) {
  if (slabs < 2 || slices_per_slab < 1) throw InvalidInput("interleaved layout needs K >= 2 and N >= 1");
  if (!(slice_thickness > 0.0)) throw InvalidInput("layout: slice thickness must be positive");
  SlabLayout l;
  l.kind_ = LayoutKind::Interleaved;
  l.thickness_ = slice_thickness;
  l.slices_per_slab_ = slices_per_slab;
  l.interleave_ = slabs;
  for (int j = 0; j < slabs; ++j) {
    std::vector<int> p(static_cast<std::size_t>(slices_per_slab));
    for (int s = 0; s < slices_per_slab; ++s) p[s] = j + slabs * s;
    l.placements_.push_back(std::move(p));
  }
  l.finalize();
  return l;
}

SlabLayout SlabLayout::joined(std::vector<SlabLayout> parts, int overlap_slices) {
  if (parts.empty()) throw InvalidInput("joined layout needs at least one part");
  if (overlap_slices < 0) throw InvalidInput("joined layout: negative overlap");
  SlabLayout l;
  l.kind_ = LayoutKind::Joined;
  l.thickness_ = parts.front().thickness_;
  l.overlap_ = overlap_slices;
  int offset = 0;
  for (const auto& part : parts) {
    if (std::abs(part.thickness_ - l.thickness_) > 1e-12)
      throw InvalidInput("joined layout: parts differ in slice thickness");
    if (overlap_slices >= part.final_slices_) throw InvalidInput("joined layout: overlap exceeds a part");
    for (const auto& p : part.placements_) {
      std::vector<int> shifted(p);
      for (auto& s : shifted) s += offset;
      l.placements_.push_back(std::move(shifted));
    }
    offset += part.final_slices_ - overlap_slices;
  }
  l.parts_ = std::move(parts);
  l.finalize();
  return l;
}

SlabLayout SlabLayout::single(int slices, double slice_thickness) {
  return contiguous(1, slices, 0, slice_thickness);
}

void SlabLayout::finalize() {
  int max_index = -1;
  for (const auto& p : placements_)
    for (int s : p) max_index = std::max(max_index, s);
  final_slices_ = max_index + 1;
  const auto cov = coverage();
  if (std::any_of(cov.begin(), cov.end(), [](int c) { return c == 0; }))
    throw InvalidInput("layout leaves final slices uncovered");
}

int SlabLayout::slices_in_slab(int slab) const { return static_cast<int>(placement(slab).size()); }

const std::vector<int>& SlabLayout::placement(int slab) const {
  if (slab < 0 || slab >= slab_count())
    throw LayoutMismatch("slab index " + std::to_string(slab) + " outside layout of " +
                         std::to_string(slab_count()) + " slabs");
  return placements_[static_cast<std::size_t>(slab)];
}

std::vector<int> SlabLayout::coverage() const {
  std::vector<int> cov(static_cast<std::size_t>(std::max(final_slices_, 0)), 0);
  for (const auto& p : placements_)
    for (int s : p)
      if (s >= 0 && s < static_cast<int>(cov.size())) ++cov[static_cast<std::size_t>(s)];
  return cov;
}

std::optional<int> SlabLayout::sole_owner(int slice) const {
  std::optional<int> owner;
  for (int j = 0; j < slab_count(); ++j) {
    const auto& p = placements_[static_cast<std::size_t>(j)];
    if (std::find(p.begin(), p.end(), slice) != p.end()) {
      if (owner) return std::nullopt;
      owner = j;
    }
  }
  return owner;
}

bool SlabLayout::has_interleaving() const {
  if (kind_ == LayoutKind::Interleaved) return true;
  return std::any_of(parts_.begin(), parts_.end(), [](const SlabLayout& p) { return p.has_interleaving(); });
}

AffineGeometry SlabLayout::slab_geometry(const AffineGeometry& final_geometry, int slab) const {
  const auto& p = placement(slab);
  AffineGeometry g = final_geometry;
  g.dims[1] = p.size();
  const int step = p.size() > 1 ? p[1] - p[0] : 1;
  g.spacing[1] = thickness_ * step;
  g.origin = final_geometry.to_world(Vec3(0.0, static_cast<double>(p.front()), 0.0));
  return g;
}

AffineGeometry SlabLayout::final_geometry(const AffineGeometry& slab_geometry, int slab) const {
  const auto& p = placement(slab);
  AffineGeometry g = slab_geometry;
  g.dims[1] = static_cast<std::size_t>(final_slices_);
  g.spacing[1] = thickness_;
  g.origin = slab_geometry.origin - slab_geometry.axes.col(1) * (thickness_ * p.front());
  return g;
}

nlohmann::json SlabLayout::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  j["slice_thickness"] = thickness_;
  j["final_slices"] = final_slices_;
  j["slabs"] = slab_count();
  switch (kind_) {
    case LayoutKind::Contiguous:
      j["slices_per_slab"] = slices_per_slab_;
      j["overlap_slices"] = overlap_;
      break;
    case LayoutKind::Interleaved:
      j["slices_per_slab"] = slices_per_slab_;
      j["interleave_parity"] = "slab 0 owns even final slices (anterior-most first)";
      break;
    case LayoutKind::Joined: {
      j["overlap_slices"] = overlap_;
      auto arr = nlohmann::json::array();
      for (const auto& part : parts_) arr.push_back(part.to_json());
      j["parts"] = arr;
      break;
    }
  }
  return j;
}

SlabLayout SlabLayout::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const double thickness = j.value("slice_thickness", 1.2);
    SlabLayout l;
    if (kind == "contiguous") {
      l = contiguous(j.at("slabs").get<int>(), j.at("slices_per_slab").get<int>(), j.value("overlap_slices", 1),
                     thickness);
    } else if (kind == "interleaved") {
      l = interleaved(j.at("slices_per_slab").get<int>(), thickness, j.value("slabs", 2));
    } else if (kind == "joined") {
      std::vector<SlabLayout> parts;
      for (const auto& p : j.at("parts")) parts.push_back(from_json(p));
      l = joined(std::move(parts), j.value("overlap_slices", 1));
    } else {
      throw InvalidInput("unknown layout kind '" + kind + "'");
    }
    if (j.contains("final_slices") && j["final_slices"].get<int>() != l.final_slices())
      throw LayoutMismatch("layout declares " + std::to_string(j["final_slices"].get<int>()) +
                           " final slices but its slabs tile " + std::to_string(l.final_slices()));
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("layout description: ") + e.what());
  }
}

}  // namespace mslab
