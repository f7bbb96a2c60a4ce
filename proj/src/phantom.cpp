#include "mslab/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "mslab/errors.hpp"
#include "mslab/transform.hpp"
#include "parallel.hpp"

namespace mslab {

namespace {

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Lattice value in [-1, 1].
double lattice(std::int64_t a, std::int64_t b, std::uint64_t seed) {
  const std::uint64_t h = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(a) * 0x100000001B3ull ^
                                                   splitmix(static_cast<std::uint64_t>(b))));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

constexpr int kReliefCells = 12;  // lattice cells around the cross-section

// Smooth value noise, periodic in the angle.
double relief_noise(double angle, double y, double length, std::uint64_t seed) {
  const double u = (angle + kPi) / (2.0 * kPi) * kReliefCells;
  const double v = y / length;
  const double fu = std::floor(u), fv = std::floor(v);
  const double wu = smoothstep(0.0, 1.0, u - fu), wv = smoothstep(0.0, 1.0, v - fv);
  const auto iu = static_cast<std::int64_t>(fu), iv = static_cast<std::int64_t>(fv);
  auto at = [&](std::int64_t a, std::int64_t b) {
    return lattice(((a % kReliefCells) + kReliefCells) % kReliefCells, b, seed);
  };
  const double v0 = at(iu, iv) * (1.0 - wu) + at(iu + 1, iv) * wu;
  const double v1 = at(iu, iv + 1) * (1.0 - wu) + at(iu + 1, iv + 1) * wu;
  return v0 * (1.0 - wv) + v1 * wv;
}

struct Section {
  double cx, cz, half_length, radius, sp, srlm;
};

// Centreline offset, capsule size and CA layer thicknesses at s in [0, 1].
Section section(const PhantomSpec& p, double s) {
  Section c;
  c.cx = p.sway * std::sin(kPi * (s - 0.5));
  const double drop = std::max(0.0, s - 0.65) / 0.35;
  c.cz = p.tail_drop * drop * drop;
  double w = p.head_width + (p.body_width - p.head_width) * smoothstep(0.3, 0.45, s);
  w += (p.tail_width - p.body_width) * smoothstep(0.75, 0.9, s);
  const double h = p.height + (p.tail_height - p.height) * smoothstep(0.75, 0.9, s);
  const double taper = std::sqrt(std::clamp(std::min(s, 1.0 - s) / 0.06, 0.0, 1.0));
  c.radius = 0.5 * h * taper;
  c.half_length = std::max(0.0, 0.5 * (w - h)) * taper;
  // Thinnest layers in the head at s = 0.25, where the GM ROI sits.
  c.sp = p.sp_min + (p.sp_max - p.sp_min) * (0.5 + 0.5 * std::sin(2.0 * kPi * (2.0 * s + 0.25)));
  c.srlm = p.srlm_min + (p.srlm_max - p.srlm_min) * (0.5 + 0.5 * std::sin(2.0 * kPi * (1.5 * s + 0.375)));
  return c;
}

constexpr double kRoiS = 0.25;

double phantom_value(const PhantomSpec& p, const Vec3& q) {
  const double bx = q.x() / p.brain_half_width, bz = q.z() / p.brain_half_height;
  const double outside = bx * bx + bz * bz <= 1.0 ? p.white : p.background;
  const double s = (q.y() + 0.5 * p.length) / p.length;
  if (s <= 0.0 || s >= 1.0) return outside;
  const Section c = section(p, s);
  if (c.radius <= 0.0) return outside;

  const double dx = q.x() - c.cx, dz = q.z() - c.cz;
  const double px = std::max(std::abs(dx) - c.half_length, 0.0);
  const double dist = std::hypot(px, dz);
  const double taper = 2.0 * c.radius / p.height;
  const double angle = std::atan2(dz, dx);
  const double depth = c.radius + p.relief * taper * relief_noise(angle, q.y(), p.relief_length, p.relief_seed) - dist;
  if (depth < 0.0) return outside;
  if (depth < p.alveus_thickness) return p.dark;
  // Medial opening: the CA ribbon stops and the dentate core reaches the surface.
  if (dx > c.half_length && std::abs(std::atan2(dz, dx - c.half_length)) < deg_to_rad(50.0)) return p.bright;
  if (depth < p.alveus_thickness + c.sp) return p.bright;
  if (depth < p.alveus_thickness + c.sp + c.srlm) return p.dark;
  return p.bright;
}

}  // namespace

void PhantomSpec::validate() const {
  if (!(length > 0.0 && height > 0.0 && tail_height > 0.0)) throw InvalidInput("phantom: sizes must be positive");
  if (!(head_width > body_width)) throw InvalidInput("phantom: head width must exceed body width");
  if (!(body_width >= height && tail_width >= tail_height))
    throw InvalidInput("phantom: widths must be at least the heights");
  if (!(alveus_thickness > 0.0 && sp_min > 0.0 && srlm_min > 0.0 && sp_min <= sp_max && srlm_min <= srlm_max))
    throw InvalidInput("phantom: layer thickness ranges are invalid");
  if (!(alveus_thickness < height && sp_max < height && srlm_max < height))
    throw InvalidInput("phantom: layer thicknesses must be smaller than the height");
  if (!(alveus_thickness + sp_max + srlm_max < 0.5 * height))
    throw InvalidInput("phantom: layers do not fit inside the cross-section");
  if (bright < 0.0 || dark < 0.0 || white < 0.0 || background < 0.0)
    throw InvalidInput("phantom: intensities must be non-negative");
  if (supersample < 1 || supersample > 16) throw InvalidInput("phantom: supersample must be in [1, 16]");
  if (!(relief >= 0.0 && relief_length > 0.0)) throw InvalidInput("phantom: invalid surface relief");
  if (!(brain_half_width > 0.0 && brain_half_height > 0.0))
    throw InvalidInput("phantom: white-matter cross-section must be positive");
}

nlohmann::json PhantomSpec::to_json() const {
  return {{"length", length},
          {"height", height},
          {"body_width", body_width},
          {"head_width", head_width},
          {"tail_width", tail_width},
          {"tail_height", tail_height},
          {"alveus_thickness", alveus_thickness},
          {"sp_thickness", {sp_min, sp_max}},
          {"srlm_thickness", {srlm_min, srlm_max}},
          {"intensity", {{"bright", bright}, {"dark", dark}, {"white", white}, {"background", background}}},
          {"sway", sway},
          {"tail_drop", tail_drop},
          {"relief", relief},
          {"relief_length", relief_length},
          {"relief_seed", relief_seed},
          {"supersample", supersample},
          {"brain_half_width", brain_half_width},
          {"brain_half_height", brain_half_height}};
}

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
  PhantomSpec p;
  try {
    p.length = j.value("length", p.length);
    p.height = j.value("height", p.height);
    p.body_width = j.value("body_width", p.body_width);
    p.head_width = j.value("head_width", p.head_width);
    p.tail_width = j.value("tail_width", p.tail_width);
    p.tail_height = j.value("tail_height", p.tail_height);
    p.alveus_thickness = j.value("alveus_thickness", p.alveus_thickness);
    if (j.contains("sp_thickness")) {
      p.sp_min = j["sp_thickness"].at(0).get<double>();
      p.sp_max = j["sp_thickness"].at(1).get<double>();
    }
    if (j.contains("srlm_thickness")) {
      p.srlm_min = j["srlm_thickness"].at(0).get<double>();
      p.srlm_max = j["srlm_thickness"].at(1).get<double>();
    }
    if (j.contains("intensity")) {
      const auto& in = j["intensity"];
      p.bright = in.value("bright", p.bright);
      p.dark = in.value("dark", p.dark);
      p.white = in.value("white", p.white);
      p.background = in.value("background", p.background);
    }
    p.sway = j.value("sway", p.sway);
    p.tail_drop = j.value("tail_drop", p.tail_drop);
    p.relief = j.value("relief", p.relief);
    p.relief_length = j.value("relief_length", p.relief_length);
    p.relief_seed = j.value("relief_seed", p.relief_seed);
    p.supersample = j.value("supersample", p.supersample);
    p.brain_half_width = j.value("brain_half_width", p.brain_half_width);
    p.brain_half_height = j.value("brain_half_height", p.brain_half_height);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("phantom spec: ") + e.what());
  }
  p.validate();
  return p;
}

AffineGeometry default_phantom_geometry() {
  AffineGeometry g;
  g.dims = {112, 46, 80};
  g.spacing = Vec3(0.3, 1.2, 0.3);
  g.origin = -0.5 * Vec3(111 * 0.3, 45 * 1.2, 79 * 0.3);
  return g;
}

Volume generate_phantom(const PhantomSpec& spec, const AffineGeometry& geometry) {
  spec.validate();
  geometry.validate();
  const double finest = std::min(spec.sp_min, spec.srlm_min) / 1.5;
  if (geometry.spacing.x() > finest + 1e-12 || geometry.spacing.z() > finest + 1e-12)
    throw InvalidInput("phantom: in-plane spacing cannot resolve the CA layers (needs <= " +
                       std::to_string(finest) + " mm)");
  Volume v(geometry, 0.0);
  const Vec3 c = geometry.center();
  const auto& d = geometry.dims;
  const int n = spec.supersample;
  std::vector<double> offsets;
  for (int a = 0; a < n; ++a) offsets.push_back((a + 0.5) / n - 0.5);
  const double weight = 1.0 / static_cast<double>(n * n);
  detail::parallel_for(d[2], [&](std::size_t kb, std::size_t ke) {
    for (std::size_t k = kb; k < ke; ++k)
      for (std::size_t j = 0; j < d[1]; ++j)
        for (std::size_t i = 0; i < d[0]; ++i) {
          double sum = 0.0;
          for (double oz : offsets)
            for (double ox : offsets) {
              const Vec3 idx(static_cast<double>(i) + ox, static_cast<double>(j), static_cast<double>(k) + oz);
              sum += phantom_value(spec, geometry.axes.transpose() * (geometry.to_world(idx) - c));
            }
          v.at(i, j, k) = sum * weight;
        }
  });
  return v;
}

std::vector<EllipsoidROI> canonical_rois(const PhantomSpec& spec, const AffineGeometry& geometry) {
  spec.validate();
  const Vec3 c = geometry.center();
  const Mat3& a = geometry.axes;
  const Section sec = section(spec, kRoiS);
  const double y = kRoiS * spec.length - 0.5 * spec.length;

  EllipsoidROI gm;
  gm.label = TissueLabel::GM;
  gm.center = c + a * Vec3(sec.cx, y, sec.cz);
  gm.semi_axes = Vec3(2.5, 1.5, 1.0);
  gm.axes = a;

  EllipsoidROI wm;
  wm.label = TissueLabel::WM;
  wm.center = c + a * Vec3(0.0, 0.0, -(0.5 * spec.height + 3.5));
  wm.semi_axes = Vec3(3.0, 3.0, 1.0);
  wm.axes = a;

  const Vec3 half = 0.5 * geometry.spacing.cwiseProduct(
                              Vec3(static_cast<double>(geometry.dims[0]), static_cast<double>(geometry.dims[1]),
                                   static_cast<double>(geometry.dims[2])));
  EllipsoidROI bg;
  bg.label = TissueLabel::BG;
  bg.center = c + a * Vec3(half.x() - 2.0, 0.0, half.z() - 2.0);
  bg.semi_axes = Vec3(1.5, std::min(8.0, 0.8 * half.y()), 1.2);
  bg.axes = a;
  return {gm, wm, bg};
}

}  // namespace mslab
