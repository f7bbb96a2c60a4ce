#include "mslab/fusion.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>

#include "mslab/errors.hpp"
#include "mslab/slab.hpp"
#include "parallel.hpp"

namespace mslab {

nlohmann::json FusionOutput::summary() const {
  return {{"uncovered_fraction", uncovered_fraction},
          {"redundant_fraction", redundant_fraction},
          {"epsilon", epsilon},
          {"voxels", fused.size()}};
}

FusionOutput fuse(const std::vector<Volume>& signals, const std::vector<Volume>& masks, double epsilon) {
  if (signals.empty()) throw InvalidInput("fuse: no input volumes");
  if (signals.size() != masks.size()) throw InvalidInput("fuse: signal and mask counts differ");
  if (!(epsilon > 0.0)) throw InvalidInput("fuse: epsilon must be positive");
  const AffineGeometry& g = signals.front().geometry();
  for (std::size_t n = 0; n < signals.size(); ++n) {
    if (!signals[n].geometry().approx_equal(g, 1e-6) || !masks[n].geometry().approx_equal(g, 1e-6))
      throw InvalidInput("fuse: input " + std::to_string(n) + " is on a different grid");
    for (double m : masks[n].data())
      if (!(m >= 0.0 && m <= 1.0 + 1e-6)) throw InvalidInput("fuse: mask values must lie in [0, 1]");
  }

  FusionOutput out;
  out.epsilon = epsilon;
  out.fused = Volume(g, 0.0);
  out.mask_sum = Volume(g, 0.0);
  out.coverage_map = Volume(g, 0.0);
  const std::size_t count = g.voxel_count();
  const std::size_t k = signals.size();
  std::vector<double> s(k), m(k);
  std::size_t uncovered = 0, redundant = 0;
  for (std::size_t v = 0; v < count; ++v) {
    for (std::size_t n = 0; n < k; ++n) {
      s[n] = signals[n].data()[v];
      m[n] = masks[n].data()[v];
    }
    if (k > 2) {
      std::sort(s.begin(), s.end());
      std::sort(m.begin(), m.end());
    }
    double ss = 0.0, ms = 0.0;
    for (std::size_t n = 0; n < k; ++n) {
      ss += s[n];
      ms += m[n];
    }
    out.mask_sum.data()[v] = ms;
    if (ms >= epsilon) {
      out.fused.data()[v] = ss / ms;
      out.coverage_map.data()[v] = 1.0;
    } else {
      ++uncovered;
    }
    if (ms >= 1.5) ++redundant;
  }
  out.uncovered_fraction = static_cast<double>(uncovered) / static_cast<double>(count);
  out.redundant_fraction = static_cast<double>(redundant) / static_cast<double>(count);
  return out;
}

Reconstruction reconstruct(const std::vector<Volume>& slabs, const SlabLayout& layout, const Volume& lr,
                           const ReconstructOptions& options) {
  options.registration.validate();
  if (static_cast<int>(slabs.size()) != layout.slab_count())
    throw LayoutMismatch("reconstruct: " + std::to_string(slabs.size()) + " slabs given, layout has " +
                         std::to_string(layout.slab_count()));

  const auto& hr = slabs.front().geometry();
  Reconstruction rec;
  rec.reference = prepare_reference(lr, hr.spacing[0], hr.spacing[2]);

  std::vector<PaddedSlab> padded;
  padded.reserve(slabs.size());
  for (int j = 0; j < layout.slab_count(); ++j) padded.push_back(pad_slab(slabs[static_cast<std::size_t>(j)], layout, j));

  // Independent registrations in parallel; the outer pool owns the cores.
  rec.registrations.resize(slabs.size());
  detail::parallel_for(slabs.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j)
      rec.registrations[j] = register_rigid(padded[j], rec.reference, options.registration);
  });

  std::vector<Volume> signals, masks;
  for (std::size_t j = 0; j < padded.size(); ++j) {
    auto [sig, mask] = apply_result(padded[j], rec.registrations[j], rec.reference.geometry(),
                                    options.registration.reslice);
    signals.push_back(std::move(sig));
    masks.push_back(std::move(mask));
  }
  rec.fusion = fuse(signals, masks, options.epsilon);
  if (rec.fusion.uncovered_fraction > options.uncovered_warning) {
    std::ostringstream msg;
    msg << "uncovered fraction " << rec.fusion.uncovered_fraction << " exceeds " << options.uncovered_warning
        << "; possible antero-posterior between-slab shift";
    rec.warnings.push_back(msg.str());
  }
  return rec;
}

}  // namespace mslab
