#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/fusion.hpp"
#include "mslab/layout.hpp"
#include "mslab/slab.hpp"
#include "mslab/volume.hpp"

namespace mslab {

enum class TissueLabel { GM, WM, BG };
std::string to_string(TissueLabel l);
TissueLabel tissue_from_string(const std::string& s);

// Voxels whose centres satisfy Σ (q_i / a_i)^2 <= 1, q = axesᵀ (p - center).
struct EllipsoidROI {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes{1.0, 1.0, 1.0};
  Mat3 axes = Mat3::Identity();
  TissueLabel label = TissueLabel::GM;

  bool contains(const Vec3& world) const;
  nlohmann::json to_json() const;
  static EllipsoidROI from_json(const nlohmann::json& j);
};

std::vector<EllipsoidROI> rois_from_json(const nlohmann::json& j);
nlohmann::json rois_to_json(const std::vector<EllipsoidROI>& rois);

struct ROIStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), 0 for a single voxel
  std::size_t count = 0;
  nlohmann::json to_json() const;
};

// Throws EmptyROI when no voxel centre falls inside the ellipsoid.
ROIStats roi_stats(const Volume& volume, const EllipsoidROI& roi);

// 2 (<GM> - <WM>) / (<GM> + <WM>); DegenerateInput on a zero denominator.
double relative_contrast(const ROIStats& gm, const ROIStats& wm);
// <GM> / σ_BG; DegenerateInput when σ_BG is zero.
double snr(const ROIStats& gm, const ROIStats& bg);

enum class MotionLevel { None, Medium, Large };
std::string to_string(MotionLevel m);
MotionLevel motion_level_from_string(const std::string& s);

// Human visual rating of one acquired slab; stored, never computed.
struct MotionRating {
  int slab = 0;
  int repetition = 0;
  std::string rater;
  MotionLevel level = MotionLevel::None;
  std::string note;
  nlohmann::json to_json() const;
  static MotionRating from_json(const nlohmann::json& j);
};

struct ShiftOptions {
  double threshold = 0.15;
  // Half-width (voxels) of the in-plane box filter removed before
  // correlating slices; 0 correlates raw intensities.
  int highpass_radius = 3;
  // Slices with less coverage than this fraction are skipped.
  double min_slice_coverage = 0.5;
};

// Between-slab redundancy. rho: median normalised cross-correlation of
// consecutive slices acquired by different slabs (the larger of the two
// interleave phases); rho0: median over same-slab slice pairs two apart,
// the natural slice-to-slice similarity. flag = rho - rho0 >= threshold.
struct ShiftReport {
  double rho = 0.0;
  double rho0 = 0.0;
  double threshold = 0.15;
  bool flag = false;
  bool degenerate = false;
  std::vector<double> cross_profile;  // NCC per final slice i vs i+1 (NaN when skipped)
  std::vector<double> same_profile;   // NCC per final slice i vs i+2
  nlohmann::json to_json() const;
};

// Stack-level statistic; `coverage` (optional) restricts voxels. Throws
// LayoutMismatch when the layout has no interleaving or the stack does not
// match the layout's slice count.
ShiftReport shift_index(const Volume& stack, const Volume* coverage, const SlabLayout& layout,
                        const ShiftOptions& options = {});
ShiftReport shift_index(const FusionOutput& fused, const SlabLayout& layout, const ShiftOptions& options = {});
// On the raw interleave of padded slabs (no registration): acquired content
// as it came off the scanner.
ShiftReport shift_index(const std::vector<PaddedSlab>& padded, const SlabLayout& layout,
                        const ShiftOptions& options = {});

struct QCReport {
  std::optional<double> rc;
  std::optional<double> snr;
  std::optional<ShiftReport> shift;
  std::vector<std::pair<EllipsoidROI, ROIStats>> rois;
  std::vector<MotionRating> motion_ratings;
  std::vector<std::string> notes;
  nlohmann::json to_json() const;
};

// RC and SNR from the first GM/WM/BG ROI of each label (when present).
QCReport evaluate_rois(const Volume& volume, const std::vector<EllipsoidROI>& rois);

}  // namespace mslab
