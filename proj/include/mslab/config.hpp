#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/fusion.hpp"
#include "mslab/layout.hpp"
#include "mslab/phantom.hpp"
#include "mslab/qc.hpp"
#include "mslab/registration.hpp"

namespace mslab {

// Everything a run depends on, with every default filled in. The text form
// is one `key = <JSON value>` per line; '#' starts a comment line.
//
//   layout = "ns_7t_32ch_t2w_interleaved"
//   reg.bins = 64
//   sim.motion = [[0, 0, 0, 0, 0, 0], [0, 1.2, 0, 0, 0, 0]]
//
// Unknown keys are errors.
struct PipelineConfig {
  std::string layout_name = "ns_7t_32ch_t2w_interleaved";  // preset, or "custom"
  std::optional<SlabLayout> custom_layout;

  RegistrationConfig registration;
  double epsilon = 0.05;
  double uncovered_warning = 0.02;
  ShiftOptions shift;

  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency

  // Simulation. Motions are [tx, ty, tz (mm), θx, θy, θz (degrees)] per slab;
  // empty means no motion.
  std::vector<std::array<double, 6>> sim_motion;
  std::array<double, 6> sim_lr_motion{};
  bool sim_random_motion = false;
  double sim_noise_percent = 2.0;
  double sim_lr_noise_percent = 2.0;
  std::array<double, 2> sim_fov_mm{33.6, 24.0};  // in-plane x, z extent
  PhantomSpec phantom;

  // Throws InvalidInput for an unknown key or a badly typed value.
  void set(const std::string& key, const nlohmann::json& value);
  void validate() const;

  SlabLayout layout() const;
  nlohmann::json to_json() const;
  // Flat text that parses back to this configuration.
  std::string to_text() const;

  static std::vector<std::string> keys();
};

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Layout from a preset name or from a JSON layout file.
SlabLayout resolve_layout(const std::string& preset_or_file);

}  // namespace mslab
