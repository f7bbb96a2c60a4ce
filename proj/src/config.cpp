#include "mslab/config.hpp"

#include <fstream>
#include <sstream>

#include "mslab/errors.hpp"
#include "mslab/presets.hpp"

namespace mslab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::array<double, 6> motion_vector(const nlohmann::json& v, const std::string& key) {
  const auto x = v.get<std::vector<double>>();
  if (x.size() != 6) throw InvalidInput(key + ": motion needs six values [tx, ty, tz, rx, ry, rz]");
  return {x[0], x[1], x[2], x[3], x[4], x[5]};
}

}  // namespace

std::vector<std::string> PipelineConfig::keys() {
  return {"layout",
          "reg.bins",
          "reg.levels",
          "reg.rotation_step_deg",
          "reg.translation_step_voxels",
          "reg.max_iterations",
          "reg.tolerance",
          "reg.step_halvings",
          "reg.min_overlap_fraction",
          "reg.jitter",
          "reg.reslice",
          "fusion.epsilon",
          "fusion.uncovered_warning",
          "qc.shift_threshold",
          "qc.highpass_radius",
          "qc.min_slice_coverage",
          "seed",
          "threads",
          "sim.motion",
          "sim.lr_motion",
          "sim.random_motion",
          "sim.noise_percent",
          "sim.lr_noise_percent",
          "sim.fov_mm",
          "sim.phantom"};
}

void PipelineConfig::set(const std::string& key, const nlohmann::json& v) {
  try {
    if (key == "layout") {
      if (v.is_string()) {
        const auto name = v.get<std::string>();
        if (!is_preset(name)) throw InvalidInput("layout: unknown preset '" + name + "'");
        layout_name = name;
        custom_layout.reset();
      } else {
        custom_layout = SlabLayout::from_json(v);
        layout_name = "custom";
      }
    } else if (key == "reg.bins") {
      registration.bins = v.get<int>();
    } else if (key == "reg.levels") {
      registration.levels = v.get<int>();
    } else if (key == "reg.rotation_step_deg") {
      registration.rotation_step_deg = v.get<double>();
    } else if (key == "reg.translation_step_voxels") {
      registration.translation_step_voxels = v.get<double>();
    } else if (key == "reg.max_iterations") {
      registration.max_iterations = v.get<int>();
    } else if (key == "reg.tolerance") {
      registration.tolerance = v.get<double>();
    } else if (key == "reg.step_halvings") {
      registration.step_halvings = v.get<int>();
    } else if (key == "reg.min_overlap_fraction") {
      registration.min_overlap_fraction = v.get<double>();
    } else if (key == "reg.jitter") {
      registration.jitter = v.get<bool>();
    } else if (key == "reg.reslice") {
      registration.reslice = interpolation_from_string(v.get<std::string>());
    } else if (key == "fusion.epsilon") {
      epsilon = v.get<double>();
    } else if (key == "fusion.uncovered_warning") {
      uncovered_warning = v.get<double>();
    } else if (key == "qc.shift_threshold") {
      shift.threshold = v.get<double>();
    } else if (key == "qc.highpass_radius") {
      shift.highpass_radius = v.get<int>();
    } else if (key == "qc.min_slice_coverage") {
      shift.min_slice_coverage = v.get<double>();
    } else if (key == "seed") {
      seed = v.get<std::uint64_t>();
    } else if (key == "threads") {
      threads = v.get<unsigned>();
    } else if (key == "sim.motion") {
      sim_motion.clear();
      for (const auto& m : v) sim_motion.push_back(motion_vector(m, key));
    } else if (key == "sim.lr_motion") {
      sim_lr_motion = motion_vector(v, key);
    } else if (key == "sim.random_motion") {
      sim_random_motion = v.get<bool>();
    } else if (key == "sim.noise_percent") {
      sim_noise_percent = v.get<double>();
    } else if (key == "sim.lr_noise_percent") {
      sim_lr_noise_percent = v.get<double>();
    } else if (key == "sim.fov_mm") {
      const auto f = v.get<std::vector<double>>();
      if (f.size() != 2) throw InvalidInput("sim.fov_mm needs two values [x, z]");
      sim_fov_mm = {f[0], f[1]};
    } else if (key == "sim.phantom") {
      phantom = PhantomSpec::from_json(v);
    } else {
      throw InvalidInput("unknown configuration key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("configuration key '" + key + "': " + e.what());
  }
}

void PipelineConfig::validate() const {
  registration.validate();
  if (!(epsilon > 0.0)) throw InvalidInput("fusion.epsilon must be positive");
  if (!(uncovered_warning >= 0.0)) throw InvalidInput("fusion.uncovered_warning must be non-negative");
  if (shift.highpass_radius < 0) throw InvalidInput("qc.highpass_radius must be non-negative");
  if (!(sim_noise_percent >= 0.0 && sim_lr_noise_percent >= 0.0))
    throw InvalidInput("simulation noise must be non-negative");
  if (!(sim_fov_mm[0] > 0.0 && sim_fov_mm[1] > 0.0)) throw InvalidInput("sim.fov_mm must be positive");
  if (!sim_motion.empty() && static_cast<int>(sim_motion.size()) != layout().slab_count())
    throw InvalidInput("sim.motion lists " + std::to_string(sim_motion.size()) + " slabs, layout has " +
                       std::to_string(layout().slab_count()));
  phantom.validate();
}

SlabLayout PipelineConfig::layout() const {
  if (custom_layout) return *custom_layout;
  return find_preset(layout_name).layout;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json motion = nlohmann::json::array();
  for (const auto& m : sim_motion) motion.push_back(m);
  return {{"layout", custom_layout ? custom_layout->to_json() : nlohmann::json(layout_name)},
          {"layout_resolved", layout().to_json()},
          {"registration", registration.to_json()},
          {"fusion", {{"epsilon", epsilon}, {"uncovered_warning", uncovered_warning}}},
          {"qc",
           {{"shift_threshold", shift.threshold},
            {"highpass_radius", shift.highpass_radius},
            {"min_slice_coverage", shift.min_slice_coverage}}},
          {"seed", seed},
          {"threads", threads},
          {"simulation",
           {{"motion", motion},
            {"lr_motion", sim_lr_motion},
            {"random_motion", sim_random_motion},
            {"noise_percent", sim_noise_percent},
            {"lr_noise_percent", sim_lr_noise_percent},
            {"fov_mm", sim_fov_mm},
            {"phantom", phantom.to_json()}}}};
}

std::string PipelineConfig::to_text() const {
  std::ostringstream o;
  auto line = [&](const std::string& k, const nlohmann::json& v) { o << k << " = " << v.dump() << '\n'; };
  line("layout", custom_layout ? custom_layout->to_json() : nlohmann::json(layout_name));
  line("reg.bins", registration.bins);
  line("reg.levels", registration.levels);
  line("reg.rotation_step_deg", registration.rotation_step_deg);
  line("reg.translation_step_voxels", registration.translation_step_voxels);
  line("reg.max_iterations", registration.max_iterations);
  line("reg.tolerance", registration.tolerance);
  line("reg.step_halvings", registration.step_halvings);
  line("reg.min_overlap_fraction", registration.min_overlap_fraction);
  line("reg.jitter", registration.jitter);
  line("reg.reslice", to_string(registration.reslice));
  line("fusion.epsilon", epsilon);
  line("fusion.uncovered_warning", uncovered_warning);
  line("qc.shift_threshold", shift.threshold);
  line("qc.highpass_radius", shift.highpass_radius);
  line("qc.min_slice_coverage", shift.min_slice_coverage);
  line("seed", seed);
  line("threads", threads);
  nlohmann::json motion = nlohmann::json::array();
  for (const auto& m : sim_motion) motion.push_back(m);
  line("sim.motion", motion);
  line("sim.lr_motion", sim_lr_motion);
  line("sim.random_motion", sim_random_motion);
  line("sim.noise_percent", sim_noise_percent);
  line("sim.lr_noise_percent", sim_lr_noise_percent);
  line("sim.fov_mm", sim_fov_mm);
  line("sim.phantom", phantom.to_json());
  return o.str();
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput("config line " + std::to_string(lineno) + ": value for '" + key + "' is not JSON (" +
                         e.what() + ")");
    }
    c.set(key, v);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

SlabLayout resolve_layout(const std::string& preset_or_file) {
  if (is_preset(preset_or_file)) return find_preset(preset_or_file).layout;
  std::ifstream f(preset_or_file);
  if (!f) throw InvalidInput("layout '" + preset_or_file + "' is neither a preset nor a readable file");
  try {
    return SlabLayout::from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("layout file '" + preset_or_file + "': " + e.what());
  }
}

}  // namespace mslab
