#include "mslab/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "mslab/errors.hpp"

namespace mslab {

namespace {

int bin_of(double v, double lo, double hi, int bins) {
  if (!(hi > lo)) return 0;
  const double u = (v - lo) / (hi - lo) * static_cast<double>(bins);
  if (u <= 0.0) return 0;
  return std::min(bins - 1, static_cast<int>(u));
}

double entropy_bits(const std::vector<double>& p, double total) {
  double h = 0.0;
  for (double c : p)
    if (c > 0.0) {
      const double q = c / total;
      h -= q * std::log2(q);
    }
  return h;
}

// Deterministic offset in [-0.5, 0.5) for voxel `id`, axis `axis`.
double jitter_offset(std::size_t id, int axis) {
  std::uint64_t x = static_cast<std::uint64_t>(id) * 3 + static_cast<std::uint64_t>(axis) + 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  x ^= x >> 31;
  return static_cast<double>(x >> 11) * 0x1.0p-53 - 0.5;
}

// Precomputed sample set for repeated histogram evaluation: moving voxel
// coordinates with their bins, and the fixed image as a bin-index volume.
class HistogramEngine {
 public:
  // With `jitter`, each sample sits at a fixed pseudo-random in-plane point
  // of its voxel instead of the centre, which keeps the metric free of peaks
  // at in-plane grid-aligned poses. Along the slice axis samples stay on the
  // slice centre: a one-slice-thick jitter would wash out the slice profile.
  HistogramEngine(const Volume& moving, const Volume& fixed, const Volume& mask, int bins, bool jitter = false)
      : bins_(bins), moving_geom_(moving.geometry()), fixed_geom_(fixed.geometry()) {
    if (!mask.geometry().approx_equal(moving.geometry(), 1e-6))
      throw InvalidInput("joint histogram: moving image and mask differ in geometry");
    if (bins < 2) throw InvalidInput("joint histogram: need at least two bins");

    const auto& md = moving.dims();
    bool any = false;
    for (std::size_t k = 0; k < md[2]; ++k)
      for (std::size_t j = 0; j < md[1]; ++j)
        for (std::size_t i = 0; i < md[0]; ++i) {
          if (mask.at(i, j, k) < 0.5) continue;
          const double v = moving.at(i, j, k);
          if (!any) {
            moving_min_ = moving_max_ = v;
            any = true;
          }
          moving_min_ = std::min(moving_min_, v);
          moving_max_ = std::max(moving_max_, v);
        }
    for (std::size_t k = 0; k < md[2]; ++k)
      for (std::size_t j = 0; j < md[1]; ++j)
        for (std::size_t i = 0; i < md[0]; ++i) {
          if (mask.at(i, j, k) < 0.5) continue;
          const std::size_t id = moving.index(i, j, k);
          coords_.push_back(static_cast<float>(static_cast<double>(i) + (jitter ? jitter_offset(id, 0) : 0.0)));
          coords_.push_back(static_cast<float>(static_cast<double>(j) + 0.0));
          coords_.push_back(static_cast<float>(static_cast<double>(k) + (jitter ? jitter_offset(id, 2) : 0.0)));
          moving_bins_.push_back(static_cast<std::uint16_t>(bin_of(moving.at(i, j, k), moving_min_, moving_max_, bins)));
        }

    fixed_min_ = fixed.min();
    fixed_max_ = fixed.max();
    fixed_bins_.resize(fixed.size());
    const auto fd = fixed.data();
    for (std::size_t n = 0; n < fd.size(); ++n)
      fixed_bins_[n] = static_cast<std::uint16_t>(bin_of(fd[n], fixed_min_, fixed_max_, bins));
  }

  std::size_t sample_count() const { return moving_bins_.size(); }

  JointHistogram empty_histogram() const {
    JointHistogram h;
    h.bins = bins_;
    h.counts.assign(static_cast<std::size_t>(bins_ * bins_), 0.0);
    h.moving_min = moving_min_;
    h.moving_max = moving_max_;
    h.fixed_min = fixed_min_;
    h.fixed_max = fixed_max_;
    return h;
  }

  // Fills h (reset first); returns the number of in-field samples.
  std::size_t accumulate(const RigidTransform& t, JointHistogram& h) const {
    std::fill(h.counts.begin(), h.counts.end(), 0.0);
    const Mat4 m = fixed_geom_.world_to_index() * t.matrix() * moving_geom_.index_to_world();
    const double a00 = m(0, 0), a01 = m(0, 1), a02 = m(0, 2), a03 = m(0, 3);
    const double a10 = m(1, 0), a11 = m(1, 1), a12 = m(1, 2), a13 = m(1, 3);
    const double a20 = m(2, 0), a21 = m(2, 1), a22 = m(2, 2), a23 = m(2, 3);
    const auto nx = static_cast<std::ptrdiff_t>(fixed_geom_.dims[0]);
    const auto ny = static_cast<std::ptrdiff_t>(fixed_geom_.dims[1]);
    const auto nz = static_cast<std::ptrdiff_t>(fixed_geom_.dims[2]);
    // Same field-of-view tolerance as Interpolator.
    constexpr double tol = 1e-9;
    const double lx = -0.5 - tol, hx = static_cast<double>(nx) - 0.5 + tol;
    const double ly = -0.5 - tol, hy = static_cast<double>(ny) - 0.5 + tol;
    const double lz = -0.5 - tol, hz = static_cast<double>(nz) - 0.5 + tol;
    const std::size_t n = moving_bins_.size();
    const int b = bins_;
    double* counts = h.counts.data();
    std::size_t in_field = 0;

    for (std::size_t s = 0; s < n; ++s) {
      const double i = coords_[3 * s], j = coords_[3 * s + 1], k = coords_[3 * s + 2];
      double x = a00 * i + a01 * j + a02 * k + a03;
      double y = a10 * i + a11 * j + a12 * k + a13;
      double z = a20 * i + a21 * j + a22 * k + a23;
      if (x < lx || x > hx || y < ly || y > hy || z < lz || z > hz) continue;
      ++in_field;
      x = std::clamp(x, 0.0, static_cast<double>(nx - 1));
      y = std::clamp(y, 0.0, static_cast<double>(ny - 1));
      z = std::clamp(z, 0.0, static_cast<double>(nz - 1));
      const auto x0 = static_cast<std::ptrdiff_t>(x);
      const auto y0 = static_cast<std::ptrdiff_t>(y);
      const auto z0 = static_cast<std::ptrdiff_t>(z);
      const std::ptrdiff_t x1 = std::min(x0 + 1, nx - 1);
      const std::ptrdiff_t y1 = std::min(y0 + 1, ny - 1);
      const std::ptrdiff_t z1 = std::min(z0 + 1, nz - 1);
      const double tx = x - static_cast<double>(x0);
      const double ty = y - static_cast<double>(y0);
      const double tz = z - static_cast<double>(z0);
      double* row = counts + static_cast<std::ptrdiff_t>(moving_bins_[s]) * b;
      const std::uint16_t* f = fixed_bins_.data();
      const std::ptrdiff_t r00 = nx * (y0 + ny * z0), r10 = nx * (y1 + ny * z0);
      const std::ptrdiff_t r01 = nx * (y0 + ny * z1), r11 = nx * (y1 + ny * z1);
      const double ux = 1.0 - tx, uy = 1.0 - ty, uz = 1.0 - tz;
      row[f[r00 + x0]] += ux * uy * uz;
      row[f[r00 + x1]] += tx * uy * uz;
      row[f[r10 + x0]] += ux * ty * uz;
      row[f[r10 + x1]] += tx * ty * uz;
      row[f[r01 + x0]] += ux * uy * tz;
      row[f[r01 + x1]] += tx * uy * tz;
      row[f[r11 + x0]] += ux * ty * tz;
      row[f[r11 + x1]] += tx * ty * tz;
    }
    double total = 0.0;
    for (double c : h.counts) total += c;
    h.total = total;
    return in_field;
  }

 private:
  int bins_;
  AffineGeometry moving_geom_, fixed_geom_;
  double moving_min_ = 0.0, moving_max_ = 0.0;
  double fixed_min_ = 0.0, fixed_max_ = 0.0;
  std::vector<float> coords_;
  std::vector<std::uint16_t> moving_bins_;
  std::vector<std::uint16_t> fixed_bins_;
};

}  // namespace

std::vector<double> JointHistogram::moving_marginal() const {
  std::vector<double> m(static_cast<std::size_t>(bins), 0.0);
  for (int a = 0; a < bins; ++a)
    for (int b = 0; b < bins; ++b) m[static_cast<std::size_t>(a)] += at(a, b);
  return m;
}

std::vector<double> JointHistogram::fixed_marginal() const {
  std::vector<double> m(static_cast<std::size_t>(bins), 0.0);
  for (int a = 0; a < bins; ++a)
    for (int b = 0; b < bins; ++b) m[static_cast<std::size_t>(b)] += at(a, b);
  return m;
}

JointHistogram JointHistogram::transposed() const {
  JointHistogram t = *this;
  for (int a = 0; a < bins; ++a)
    for (int b = 0; b < bins; ++b) t.counts[static_cast<std::size_t>(b * bins + a)] = at(a, b);
  std::swap(t.moving_min, t.fixed_min);
  std::swap(t.moving_max, t.fixed_max);
  return t;
}

JointHistogram joint_histogram(const Volume& moving, const Volume& fixed, const Volume& mask,
                               const RigidTransform& transform, int bins) {
  const HistogramEngine engine(moving, fixed, mask, bins);
  JointHistogram h = engine.empty_histogram();
  if (engine.sample_count() == 0 || engine.accumulate(transform, h) == 0)
    throw EmptyOverlap("joint histogram: no masked voxel maps inside the fixed image");
  return h;
}

NmiValue evaluate_nmi(const JointHistogram& h) {
  if (!(h.total > 0.0)) throw EmptyOverlap("nmi: empty histogram");
  const double ha = entropy_bits(h.moving_marginal(), h.total);
  const double hb = entropy_bits(h.fixed_marginal(), h.total);
  const double hab = entropy_bits(h.counts, h.total);
  if (hab <= 0.0) return {2.0, true};
  return {(ha + hb) / hab, false};
}

double nmi(const JointHistogram& h) { return evaluate_nmi(h).value; }

void RegistrationConfig::validate() const {
  if (bins < 8) throw InvalidInput("registration: bins must be >= 8");
  if (bins > 4096) throw InvalidInput("registration: bins must be <= 4096");
  if (levels < 1) throw InvalidInput("registration: levels must be >= 1");
  if (!(rotation_step_deg > 0.0) || !(translation_step_voxels > 0.0))
    throw InvalidInput("registration: optimizer steps must be positive");
  if (max_iterations < 1) throw InvalidInput("registration: max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) throw InvalidInput("registration: tolerance must be >= 0");
  if (step_halvings < 0) throw InvalidInput("registration: step_halvings must be >= 0");
  if (!(min_overlap_fraction >= 0.0 && min_overlap_fraction <= 1.0))
    throw InvalidInput("registration: min_overlap_fraction must be in [0, 1]");
}

nlohmann::json RegistrationConfig::to_json() const {
  return {{"bins", bins},
          {"levels", levels},
          {"rotation_step_deg", rotation_step_deg},
          {"translation_step_voxels", translation_step_voxels},
          {"max_iterations", max_iterations},
          {"tolerance", tolerance},
          {"step_halvings", step_halvings},
          {"min_overlap_fraction", min_overlap_fraction},
          {"optimizer", "coordinate search, parameter order tx ty tz rx ry rz"},
          {"metric_interpolation", "partial-volume (trilinear weights)"},
          {"jitter", jitter},
          {"reslice", to_string(reslice)},
          {"mask_reslice", "trilinear"}};
}

nlohmann::json transform_to_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  std::vector<double> rows;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) rows.push_back(m(r, c));
  return {{"matrix_row_major", rows},
          {"translation_mm", {t.translation.x(), t.translation.y(), t.translation.z()}},
          {"rotation_rad", {t.rotation.x(), t.rotation.y(), t.rotation.z()}},
          {"rotation_deg", {rad_to_deg(t.rotation.x()), rad_to_deg(t.rotation.y()), rad_to_deg(t.rotation.z())}},
          {"center_mm", {t.center.x(), t.center.y(), t.center.z()}},
          {"euler_order", "Rz*Ry*Rx about center"}};
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  try {
    const auto c = j.at("center_mm").get<std::vector<double>>();
    const Vec3 center(c.at(0), c.at(1), c.at(2));
    if (j.contains("rotation_rad") && j.contains("translation_mm")) {
      const auto r = j["rotation_rad"].get<std::vector<double>>();
      const auto t = j["translation_mm"].get<std::vector<double>>();
      return RigidTransform::from_parameters({t.at(0), t.at(1), t.at(2), r.at(0), r.at(1), r.at(2)}, center);
    }
    const auto rows = j.at("matrix_row_major").get<std::vector<double>>();
    if (rows.size() != 16) throw InvalidInput("transform: matrix must have 16 entries");
    Mat4 m;
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 4; ++col) m(r, col) = rows[static_cast<std::size_t>(4 * r + col)];
    return RigidTransform::from_matrix(m, center);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("transform description: ") + e.what());
  }
}

nlohmann::json RegistrationResult::to_json() const {
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& l : levels)
    lv.push_back({{"factor", l.factor}, {"nmi_trace", l.nmi}, {"evaluations", l.evaluations}});
  const auto p = transform.parameters();
  return {{"transform", transform_to_json(transform)},
          {"parameters", {p[0], p[1], p[2], p[3], p[4], p[5]}},
          {"parameter_order", {"tx_mm", "ty_mm", "tz_mm", "rx_rad", "ry_rad", "rz_rad"}},
          {"initial_nmi", initial_nmi},
          {"final_nmi", final_nmi},
          {"levels", lv},
          {"masked_voxels", masked_voxels}};
}

RegistrationResult register_rigid(const PaddedSlab& padded, const Volume& reference, const RegistrationConfig& config) {
  config.validate();
  const Vec3 center = padded.signal.geometry().center();
  const double finest_voxel = padded.signal.geometry().spacing[0];
  std::array<double, 6> x{};
  RegistrationResult result;
  result.transform = RigidTransform::identity(center);

  for (int level = 0; level < config.levels; ++level) {
    const auto factor = static_cast<std::size_t>(1) << static_cast<std::size_t>(config.levels - 1 - level);
    const Volume moving = downsample_inplane(padded.signal, factor);
    const Volume mask = downsample_inplane(padded.mask, factor);
    const Volume fixed = downsample_inplane(reference, factor);
    const HistogramEngine engine(moving, fixed, mask, config.bins, config.jitter);
    const auto samples = engine.sample_count();
    if (samples == 0)
      throw RegistrationFailed("registration: no acquired voxels at level factor " + std::to_string(factor),
                               padded.slab_index);
    if (factor == 1) result.masked_voxels = samples;

    JointHistogram h = engine.empty_histogram();
    LevelTrace trace;
    trace.factor = static_cast<int>(factor);
    const double min_samples = config.min_overlap_fraction * static_cast<double>(samples);
    auto cost = [&](const std::array<double, 6>& p) {
      ++trace.evaluations;
      const std::size_t n = engine.accumulate(RigidTransform::from_parameters(p, center), h);
      if (n == 0 || static_cast<double>(n) < min_samples) return -std::numeric_limits<double>::infinity();
      const double v = evaluate_nmi(h).value;
      if (!std::isfinite(v))
        throw RegistrationFailed("registration: non-finite metric", padded.slab_index);
      return v;
    };

    double best = cost(x);
    if (!std::isfinite(best))
      throw RegistrationFailed("registration: empty overlap at level factor " + std::to_string(factor),
                               padded.slab_index);
    if (level == 0) result.initial_nmi = best;
    trace.nmi.push_back(best);

    const double scale = static_cast<double>(factor);
    std::array<double, 6> step{};
    for (int i = 0; i < 3; ++i) step[i] = config.translation_step_voxels * finest_voxel * scale;
    for (int i = 3; i < 6; ++i) step[i] = deg_to_rad(config.rotation_step_deg) * scale;

    int halvings = 0;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
      const double sweep_start = best;
      for (int i = 0; i < 6; ++i) {
        std::array<double, 6> plus = x, minus = x;
        plus[i] += step[i];
        minus[i] -= step[i];
        const double fp = cost(plus);
        const double fm = cost(minus);
        double dir = 0.0;
        if (fp > best && fp >= fm) {
          x = plus;
          best = fp;
          dir = 1.0;
        } else if (fm > best) {
          x = minus;
          best = fm;
          dir = -1.0;
        }
        while (dir != 0.0) {
          std::array<double, 6> next = x;
          next[i] += dir * step[i];
          const double fn = cost(next);
          if (!(fn > best)) break;
          x = next;
          best = fn;
        }
      }
      if (best > sweep_start) trace.nmi.push_back(best);
      if (best - sweep_start < config.tolerance) {
        if (halvings >= config.step_halvings) break;
        for (auto& s : step) s *= 0.5;
        ++halvings;
      }
    }
    result.levels.push_back(std::move(trace));
  }

  result.transform = RigidTransform::from_parameters(x, center);
  result.final_nmi = result.levels.back().nmi.back();
  return result;
}

std::pair<Volume, Volume> apply_result(const PaddedSlab& padded, const RegistrationResult& result,
                                       const AffineGeometry& reference_geometry, InterpolationMethod reslice) {
  const RigidTransform pull = invert(result.transform);
  Volume signal = resample(padded.signal, reference_geometry, pull, reslice).volume;
  Volume mask = resample(padded.mask, reference_geometry, pull, InterpolationMethod::Trilinear).volume;
  for (auto& m : mask.data()) m = std::clamp(m, 0.0, 1.0);
  return {std::move(signal), std::move(mask)};
}

}  // namespace mslab
