#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/layout.hpp"

namespace mslab {

// Scanner protocol parameters carried alongside a layout. Only the voxel
// size and slice counts drive computation; the rest is informational.
struct AcquisitionPreset {
  std::string name;
  std::string site;
  std::string sequence;
  Vec3 voxel{0.3, 1.2, 0.3};  // r_x, r_y (slice thickness), r_z in mm
  int slices_per_slab = 0;
  SlabLayout layout = SlabLayout::single(1, 1.0);
  bool gap_between_slices = false;

  int subjects = 0;
  double acquisition_time_s = 0.0;
  double tr_ms = 0.0;
  std::vector<double> te_ms;
  double refocusing_angle_deg = 0.0;
  std::array<double, 2> fov_mm{0.0, 0.0};
  std::array<int, 2> matrix{0, 0};
  std::vector<double> bandwidth_hz_per_px;
  int turbo_factor = 0;  // 0: not a turbo sequence

  nlohmann::json to_json() const;
};

const std::vector<AcquisitionPreset>& acquisition_presets();
const AcquisitionPreset& find_preset(const std::string& name);
bool is_preset(const std::string& name);

}  // namespace mslab
