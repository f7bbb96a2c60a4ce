#include "mslab/presets.hpp"

#include <algorithm>

#include "mslab/errors.hpp"

namespace mslab {

namespace {

AcquisitionPreset tse(std::string name, std::string site, Vec3 voxel, int slices, SlabLayout layout, bool gap,
                      int subjects, double time_s, double tr, double te, double angle, std::array<double, 2> fov,
                      std::array<int, 2> matrix, double bw) {
  AcquisitionPreset p;
  p.name = std::move(name);
  p.site = std::move(site);
  p.sequence = "2D T2w TSE";
  p.voxel = voxel;
  p.slices_per_slab = slices;
  p.layout = std::move(layout);
  p.gap_between_slices = gap;
  p.subjects = subjects;
  p.acquisition_time_s = time_s;
  p.tr_ms = tr;
  p.te_ms = {te};
  p.refocusing_angle_deg = angle;
  p.fov_mm = fov;
  p.matrix = matrix;
  p.bandwidth_hz_per_px = {bw};
  p.turbo_factor = 9;
  return p;
}

std::vector<AcquisitionPreset> build_presets() {
  std::vector<AcquisitionPreset> v;
  const Vec3 ns_hr(0.3, 1.2, 0.3);
  const Vec3 ns_lr(0.3, 1.2, 0.6);
  const Vec3 cmrr_hr(0.25, 1.2, 0.25);
  const Vec3 cmrr_lr(0.25, 1.2, 0.5);

  v.push_back(tse("ns_7t_32ch_t2w_interleaved", "NS_7T_32CH", ns_hr, 23, SlabLayout::interleaved(23, 1.2), true, 37,
                  300, 5000, 82, 60, {173, 173}, {576, 576}, 121));
  v.push_back(tse("ns_7t_32ch_t2w_contiguous", "NS_7T_32CH", ns_hr, 23, SlabLayout::contiguous(2, 23, 1, 1.2), false,
                  19, 300, 5000, 82, 60, {173, 173}, {576, 576}, 121));
  v.push_back(tse("ns_7t_32ch_t2w_lr", "NS_7T_32CH", ns_lr, 46, SlabLayout::single(46, 1.2), false, 37, 290, 8000, 80,
                  60, {173, 173}, {311, 576}, 121));
  v.push_back(tse("cmrr_7t_16ch_t2w_interleaved", "CMRR_7T_16CH", cmrr_hr, 30, SlabLayout::interleaved(30, 1.2), true,
                  9, 304, 5830, 64, 60, {119, 130}, {472, 512}, 175));
  v.push_back(tse("cmrr_7t_16ch_t2w_lr", "CMRR_7T_16CH", cmrr_lr, 60, SlabLayout::single(60, 1.2), false, 9, 308,
                  11800, 64, 60, {119, 130}, {236, 512}, 175));
  v.push_back(tse("cmrr_7t_32ch_t2w_interleaved4", "CMRR_7T_32CH", cmrr_hr, 16,
                  SlabLayout::joined({SlabLayout::interleaved(16, 1.2), SlabLayout::interleaved(16, 1.2)}, 1), true, 4,
                  337, 6000, 55, 120, {130, 130}, {512, 512}, 174));
  v.push_back(tse("cmrr_7t_32ch_t2w_lr", "CMRR_7T_32CH", cmrr_lr, 62, SlabLayout::single(62, 1.2), false, 4, 337,
                  12000, 54, 120, {130, 130}, {256, 512}, 174));

  // Three interleaved GRE slabs; the 45-slice count is the whole stack.
  AcquisitionPreset gre;
  gre.name = "ns_7t_32ch_t2star_gre3";
  gre.site = "NS_7T_32CH";
  gre.sequence = "2D T2*w GRE";
  gre.voxel = ns_hr;
  gre.slices_per_slab = 15;
  gre.layout = SlabLayout::interleaved(15, 1.2, 3);
  gre.subjects = 37;
  gre.acquisition_time_s = 720;
  gre.tr_ms = 791;
  gre.te_ms = {16, 33};
  gre.refocusing_angle_deg = 65;
  gre.fov_mm = {173, 173};
  gre.matrix = {576, 576};
  gre.bandwidth_hz_per_px = {70, 70};
  gre.turbo_factor = 0;
  v.push_back(std::move(gre));
  return v;
}

}  // namespace

nlohmann::json AcquisitionPreset::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["site"] = site;
  j["sequence"] = sequence;
  j["voxel_mm"] = {voxel.x(), voxel.y(), voxel.z()};
  j["slices_per_slab"] = slices_per_slab;
  j["gap_between_slices"] = gap_between_slices;
  j["layout"] = layout.to_json();
  j["subjects"] = subjects;
  j["acquisition_time_s"] = acquisition_time_s;
  j["tr_ms"] = tr_ms;
  j["te_ms"] = te_ms;
  j["refocusing_angle_deg"] = refocusing_angle_deg;
  j["fov_mm"] = fov_mm;
  j["matrix"] = matrix;
  j["bandwidth_hz_per_px"] = bandwidth_hz_per_px;
  j["turbo_factor"] = turbo_factor;
  return j;
}

const std::vector<AcquisitionPreset>& acquisition_presets() {
  static const std::vector<AcquisitionPreset> presets = build_presets();
  return presets;
}

bool is_preset(const std::string& name) {
  const auto& all = acquisition_presets();
  return std::any_of(all.begin(), all.end(), [&](const AcquisitionPreset& p) { return p.name == name; });
}

const AcquisitionPreset& find_preset(const std::string& name) {
  for (const auto& p : acquisition_presets())
    if (p.name == name) return p;
  throw InvalidInput("unknown acquisition preset '" + name + "'");
}

}  // namespace mslab
