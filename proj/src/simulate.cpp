#include "mslab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mslab/errors.hpp"
#include "mslab/interpolation.hpp"
#include "mslab/registration.hpp"
#include "mslab/slab.hpp"

namespace mslab {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

constexpr std::uint64_t kLrStream = 1u << 20;

}  // namespace

std::string to_string(MotionClass c) {
  switch (c) {
    case MotionClass::RotX: return "rot_x";
    case MotionClass::RotY: return "rot_y";
    case MotionClass::RotZ: return "rot_z";
    case MotionClass::TransZ: return "trans_z";
    case MotionClass::TransY: return "trans_y";
    case MotionClass::TransX: return "trans_x";
  }
  return "?";
}

bool is_possible(MotionClass c) { return c != MotionClass::TransX && c != MotionClass::TransY; }

std::vector<MotionClass> motion_components(const RigidTransform& t, double tol) {
  std::vector<MotionClass> out;
  if (std::abs(t.rotation.x()) > tol) out.push_back(MotionClass::RotX);
  if (std::abs(t.rotation.y()) > tol) out.push_back(MotionClass::RotY);
  if (std::abs(t.rotation.z()) > tol) out.push_back(MotionClass::RotZ);
  if (std::abs(t.translation.z()) > tol) out.push_back(MotionClass::TransZ);
  if (std::abs(t.translation.y()) > tol) out.push_back(MotionClass::TransY);
  if (std::abs(t.translation.x()) > tol) out.push_back(MotionClass::TransX);
  return out;
}

bool MotionScenario::realistic() const {
  for (const auto& t : transforms) {
    for (auto c : motion_components(t))
      if (!is_possible(c)) return false;
    if (t.rotation.cwiseAbs().maxCoeff() > deg_to_rad(5.0) + 1e-12) return false;
    if (t.translation.cwiseAbs().maxCoeff() > 3.0 + 1e-12) return false;
  }
  return true;
}

nlohmann::json MotionScenario::to_json() const {
  nlohmann::json slabs = nlohmann::json::array();
  for (std::size_t j = 0; j < transforms.size(); ++j) {
    nlohmann::json comps = nlohmann::json::array();
    for (auto c : motion_components(transforms[j])) comps.push_back(to_string(c));
    slabs.push_back({{"slab", j}, {"transform", transform_to_json(transforms[j])}, {"components", comps}});
  }
  return {{"slabs", slabs},
          {"lr_transform", transform_to_json(lr_transform)},
          {"noise_percent", noise_percent},
          {"lr_noise_percent", lr_noise_percent},
          {"seed", seed},
          {"realistic", realistic()}};
}

MotionScenario MotionScenario::from_json(const nlohmann::json& j) {
  MotionScenario s;
  try {
    for (const auto& e : j.at("slabs")) s.transforms.push_back(transform_from_json(e.at("transform")));
    if (j.contains("lr_transform")) s.lr_transform = transform_from_json(j["lr_transform"]);
    s.noise_percent = j.value("noise_percent", s.noise_percent);
    s.lr_noise_percent = j.value("lr_noise_percent", s.lr_noise_percent);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("scenario: ") + e.what());
  }
  return s;
}

MotionScenario MotionScenario::identity(int slabs, const Vec3& center) {
  MotionScenario s;
  s.transforms.assign(static_cast<std::size_t>(slabs), RigidTransform::identity(center));
  s.lr_transform = RigidTransform::identity(center);
  return s;
}

MotionScenario MotionScenario::random_realistic(int slabs, const Vec3& center, std::uint64_t seed,
                                                double max_rotation_deg, double max_translation_mm) {
  MotionScenario s = identity(slabs, center);
  s.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::uniform_real_distribution<double> rot(-deg_to_rad(max_rotation_deg), deg_to_rad(max_rotation_deg));
  std::uniform_real_distribution<double> tr(-max_translation_mm, max_translation_mm);
  for (auto& t : s.transforms) {
    const double rx = rot(rng), ry = rot(rng), rz = rot(rng), tz = tr(rng);
    t = RigidTransform::from_parameters({0.0, 0.0, tz, rx, ry, rz}, center);
  }
  return s;
}

Volume rician_noise(const Volume& volume, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidInput("rician_noise: sigma must be non-negative");
  if (sigma == 0.0) return volume;
  Volume out = volume;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& x : out.data()) {
    const double a = x + n(rng);
    const double b = n(rng);
    x = std::sqrt(a * a + b * b);
  }
  return out;
}

Volume downsample_z(const Volume& v, std::size_t factor) {
  if (factor == 0) throw InvalidInput("downsample_z: factor must be positive");
  if (factor == 1) return v;
  const auto& g = v.geometry();
  AffineGeometry o = g;
  o.dims[2] = (g.dims[2] + factor - 1) / factor;
  o.spacing[2] = g.spacing[2] * static_cast<double>(factor);
  o.origin = g.origin + g.axes.col(2) * (0.5 * static_cast<double>(factor - 1) * g.spacing[2]);
  Volume out(o, 0.0);
  for (std::size_t k = 0; k < o.dims[2]; ++k) {
    const std::size_t k0 = k * factor, k1 = std::min(g.dims[2], k0 + factor);
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        double sum = 0.0;
        for (std::size_t kk = k0; kk < k1; ++kk) sum += v.at(i, j, kk);
        out.at(i, j, k) = sum / static_cast<double>(k1 - k0);
      }
  }
  return out;
}

nlohmann::json SimulatedDataset::scenario_json() const {
  nlohmann::json j = scenario.to_json();
  j["layout"] = layout.to_json();
  return j;
}

SimulatedDataset simulate_acquisition(const Volume& truth, const SlabLayout& layout, const MotionScenario& scenario,
                                      std::size_t lr_factor) {
  if (static_cast<int>(scenario.transforms.size()) != layout.slab_count())
    throw LayoutMismatch("scenario has " + std::to_string(scenario.transforms.size()) + " slab motions, layout has " +
                         std::to_string(layout.slab_count()) + " slabs");
  if (truth.dims()[1] != static_cast<std::size_t>(layout.final_slices()))
    throw LayoutMismatch("truth has " + std::to_string(truth.dims()[1]) + " slices, layout tiles " +
                         std::to_string(layout.final_slices()));
  if (!(scenario.noise_percent >= 0.0 && scenario.lr_noise_percent >= 0.0))
    throw InvalidInput("scenario: noise must be non-negative");

  SimulatedDataset d;
  d.truth = truth;
  d.layout = layout;
  d.scenario = scenario;
  d.truth_transforms = scenario.transforms;
  const double peak = truth.max();
  const auto& g = truth.geometry();

  for (int j = 0; j < layout.slab_count(); ++j) {
    const auto& t = scenario.transforms[static_cast<std::size_t>(j)];
    const Volume moved = t.matrix().isIdentity(0.0) ? truth : resample(truth, g, t, InterpolationMethod::CubicBSpline).volume;
    Volume slab = std::move(split_volume(moved, layout)[static_cast<std::size_t>(j)]);
    d.slabs.push_back(rician_noise(slab, 0.01 * scenario.noise_percent * peak,
                                   mix_seed(scenario.seed, static_cast<std::uint64_t>(j) + 1)));
  }
  const auto& tl = scenario.lr_transform;
  const Volume lr_moved =
      tl.matrix().isIdentity(0.0) ? truth : resample(truth, g, tl, InterpolationMethod::CubicBSpline).volume;
  d.lr = rician_noise(downsample_z(lr_moved, lr_factor), 0.01 * scenario.lr_noise_percent * peak,
                      mix_seed(scenario.seed, kLrStream));
  return d;
}

}  // namespace mslab
