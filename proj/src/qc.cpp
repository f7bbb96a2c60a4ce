#include "mslab/qc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mslab/errors.hpp"

namespace mslab {

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw InvalidInput("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One x-z slice after subtracting its in-plane box mean.
std::vector<double> highpass_slice(const Volume& v, std::size_t j, int radius) {
  const auto& d = v.dims();
  const std::size_t nx = d[0], nz = d[2];
  std::vector<double> s(nx * nz);
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t i = 0; i < nx; ++i) s[i + nx * k] = v.at(i, j, k);
  if (radius <= 0) return s;

  // Summed-area table with a zero border row/column.
  std::vector<double> sat((nx + 1) * (nz + 1), 0.0);
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t i = 0; i < nx; ++i)
      sat[(i + 1) + (nx + 1) * (k + 1)] =
          s[i + nx * k] + sat[i + (nx + 1) * (k + 1)] + sat[(i + 1) + (nx + 1) * k] - sat[i + (nx + 1) * k];
  std::vector<double> out(nx * nz);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t i = 0; i < nx; ++i) {
      const auto i0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - r));
      const auto k0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(k) - r));
      const std::size_t i1 = std::min(nx, i + static_cast<std::size_t>(r) + 1);
      const std::size_t k1 = std::min(nz, k + static_cast<std::size_t>(r) + 1);
      const double sum = sat[i1 + (nx + 1) * k1] - sat[i0 + (nx + 1) * k1] - sat[i1 + (nx + 1) * k0] +
                         sat[i0 + (nx + 1) * k0];
      out[i + nx * k] = s[i + nx * k] - sum / static_cast<double>((i1 - i0) * (k1 - k0));
    }
  return out;
}

std::vector<unsigned char> slice_valid(const Volume* coverage, std::size_t j, std::size_t nx, std::size_t nz) {
  std::vector<unsigned char> valid(nx * nz, 1);
  if (!coverage) return valid;
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t i = 0; i < nx; ++i) valid[i + nx * k] = coverage->at(i, j, k) >= 0.5 ? 1 : 0;
  return valid;
}

double ncc(const std::vector<double>& a, const std::vector<double>& b, const std::vector<unsigned char>& va,
           const std::vector<unsigned char>& vb) {
  double n = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (va[t] && vb[t]) {
      n += 1.0;
      sa += a[t];
      sb += b[t];
    }
  if (n < 2.0) return std::numeric_limits<double>::quiet_NaN();
  const double ma = sa / n, mb = sb / n;
  double cab = 0.0, caa = 0.0, cbb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (va[t] && vb[t]) {
      const double da = a[t] - ma, db = b[t] - mb;
      cab += da * db;
      caa += da * da;
      cbb += db * db;
    }
  const double scale = std::max(std::abs(ma), std::abs(mb)) + 1.0;
  if (caa <= 1e-20 * scale * scale * n || cbb <= 1e-20 * scale * scale * n)
    return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(cab / std::sqrt(caa * cbb), -1.0, 1.0);
}

}  // namespace

std::string to_string(TissueLabel l) {
  switch (l) {
    case TissueLabel::GM: return "GM";
    case TissueLabel::WM: return "WM";
    case TissueLabel::BG: return "BG";
  }
  return "?";
}

TissueLabel tissue_from_string(const std::string& s) {
  if (s == "GM") return TissueLabel::GM;
  if (s == "WM") return TissueLabel::WM;
  if (s == "BG") return TissueLabel::BG;
  throw InvalidInput("unknown ROI label '" + s + "'");
}

bool EllipsoidROI::contains(const Vec3& world) const {
  const Vec3 q = axes.transpose() * (world - center);
  const Vec3 r = q.cwiseQuotient(semi_axes);
  return r.squaredNorm() <= 1.0;
}

nlohmann::json EllipsoidROI::to_json() const {
  return {{"label", to_string(label)},
          {"center_mm", vec_json(center)},
          {"semi_axes_mm", vec_json(semi_axes)},
          {"axes", {vec_json(axes.col(0)), vec_json(axes.col(1)), vec_json(axes.col(2))}}};
}

EllipsoidROI EllipsoidROI::from_json(const nlohmann::json& j) {
  try {
    EllipsoidROI r;
    r.label = tissue_from_string(j.at("label").get<std::string>());
    r.center = vec_from_json(j.at("center_mm"));
    r.semi_axes = vec_from_json(j.at("semi_axes_mm"));
    if (j.contains("axes")) {
      const auto& a = j["axes"];
      if (a.size() != 3) throw InvalidInput("ROI axes must list three column vectors");
      for (int c = 0; c < 3; ++c) r.axes.col(c) = vec_from_json(a[static_cast<std::size_t>(c)]);
    }
    if ((r.semi_axes.array() <= 0.0).any()) throw InvalidInput("ROI semi-axes must be positive");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("ROI description: ") + e.what());
  }
}

std::vector<EllipsoidROI> rois_from_json(const nlohmann::json& j) {
  const auto& arr = j.contains("rois") ? j["rois"] : j;
  if (!arr.is_array()) throw InvalidInput("ROI file must hold an array of ROIs");
  std::vector<EllipsoidROI> out;
  for (const auto& r : arr) out.push_back(EllipsoidROI::from_json(r));
  return out;
}

nlohmann::json rois_to_json(const std::vector<EllipsoidROI>& rois) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rois) arr.push_back(r.to_json());
  return {{"rois", arr}};
}

nlohmann::json ROIStats::to_json() const { return {{"mean", mean}, {"std", std}, {"count", count}}; }

ROIStats roi_stats(const Volume& volume, const EllipsoidROI& roi) {
  const auto& g = volume.geometry();
  if ((roi.semi_axes.array() <= 0.0).any()) throw InvalidInput("ROI semi-axes must be positive");
  // World-space bounding box of the ellipsoid, mapped to an index box.
  const Mat3 scaled = roi.axes * roi.semi_axes.asDiagonal();
  Vec3 half;
  for (int r = 0; r < 3; ++r) half[r] = scaled.row(r).norm();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner(c & 1 ? half.x() : -half.x(), c & 2 ? half.y() : -half.y(), c & 4 ? half.z() : -half.z());
    const Vec3 idx = g.to_index(roi.center + corner);
    lo = lo.cwiseMin(idx);
    hi = hi.cwiseMax(idx);
  }
  std::array<std::size_t, 3> b{}, e{};
  for (int a = 0; a < 3; ++a) {
    const double n = static_cast<double>(g.dims[a]);
    const double l = std::clamp(std::floor(lo[a]) - 1.0, 0.0, n);
    const double h = std::clamp(std::ceil(hi[a]) + 2.0, 0.0, n);
    b[a] = static_cast<std::size_t>(l);
    e[a] = static_cast<std::size_t>(h);
  }
  long double sum = 0.0L;
  std::size_t count = 0;
  std::vector<double> values;
  for (std::size_t k = b[2]; k < e[2]; ++k)
    for (std::size_t j = b[1]; j < e[1]; ++j)
      for (std::size_t i = b[0]; i < e[0]; ++i) {
        const Vec3 p = g.to_world(Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
        if (!roi.contains(p)) continue;
        const double v = volume.at(i, j, k);
        values.push_back(v);
        sum += v;
        ++count;
      }
  if (count == 0) throw EmptyROI("ROI (" + to_string(roi.label) + ") contains no voxel centre");
  ROIStats s;
  s.count = count;
  s.mean = static_cast<double>(sum / static_cast<long double>(count));
  if (count > 1) {
    long double ss = 0.0L;
    for (double v : values) ss += (static_cast<long double>(v) - s.mean) * (static_cast<long double>(v) - s.mean);
    s.std = static_cast<double>(std::sqrt(ss / static_cast<long double>(count - 1)));
  }
  return s;
}

double relative_contrast(const ROIStats& gm, const ROIStats& wm) {
  const double denom = gm.mean + wm.mean;
  if (denom == 0.0) throw DegenerateInput("relative contrast: <GM> + <WM> is zero");
  return 2.0 * (gm.mean - wm.mean) / denom;
}

double snr(const ROIStats& gm, const ROIStats& bg) {
  if (!(bg.std > 0.0)) throw DegenerateInput("SNR: background standard deviation is zero");
  return gm.mean / bg.std;
}

std::string to_string(MotionLevel m) {
  switch (m) {
    case MotionLevel::None: return "none";
    case MotionLevel::Medium: return "medium";
    case MotionLevel::Large: return "large";
  }
  return "?";
}

MotionLevel motion_level_from_string(const std::string& s) {
  if (s == "none") return MotionLevel::None;
  if (s == "medium") return MotionLevel::Medium;
  if (s == "large") return MotionLevel::Large;
  throw InvalidInput("unknown motion rating '" + s + "'");
}

nlohmann::json MotionRating::to_json() const {
  return {{"slab", slab}, {"repetition", repetition}, {"rater", rater}, {"level", to_string(level)}, {"note", note}};
}

MotionRating MotionRating::from_json(const nlohmann::json& j) {
  MotionRating r;
  r.slab = j.at("slab").get<int>();
  r.repetition = j.value("repetition", 0);
  r.rater = j.value("rater", std::string());
  r.level = motion_level_from_string(j.at("level").get<std::string>());
  r.note = j.value("note", std::string());
  return r;
}

nlohmann::json ShiftReport::to_json() const {
  auto profile = [](const std::vector<double>& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : p) arr.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    return arr;
  };
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"rho", num(rho)},       {"rho0", num(rho0)},         {"threshold", threshold},
          {"flag", flag},          {"degenerate", degenerate},  {"cross_profile", profile(cross_profile)},
          {"same_profile", profile(same_profile)}};
}

ShiftReport shift_index(const Volume& stack, const Volume* coverage, const SlabLayout& layout,
                        const ShiftOptions& options) {
  if (!layout.has_interleaving()) throw LayoutMismatch("shift index needs an interleaved layout");
  const auto& d = stack.dims();
  if (d[1] != static_cast<std::size_t>(layout.final_slices()))
    throw LayoutMismatch("shift index: stack has " + std::to_string(d[1]) + " slices, layout tiles " +
                         std::to_string(layout.final_slices()));
  if (d[1] < 4) throw LayoutMismatch("shift index needs at least four slices");
  if (coverage && !coverage->geometry().approx_equal(stack.geometry(), 1e-6))
    throw InvalidInput("shift index: coverage map is on a different grid");

  const std::size_t ns = d[1], nx = d[0], nz = d[2];
  std::vector<std::vector<double>> hp(ns);
  std::vector<std::vector<unsigned char>> valid(ns);
  std::vector<bool> usable(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    hp[j] = highpass_slice(stack, j, options.highpass_radius);
    valid[j] = slice_valid(coverage, j, nx, nz);
    const double frac = static_cast<double>(std::count(valid[j].begin(), valid[j].end(), 1)) /
                        static_cast<double>(valid[j].size());
    usable[j] = frac >= options.min_slice_coverage;
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  ShiftReport r;
  r.threshold = options.threshold;
  r.cross_profile.assign(ns - 1, nan);
  r.same_profile.assign(ns - 2, nan);
  std::array<std::vector<double>, 2> phases;
  std::vector<double> same;
  for (std::size_t i = 0; i + 1 < ns; ++i) {
    const auto a = layout.sole_owner(static_cast<int>(i));
    const auto b = layout.sole_owner(static_cast<int>(i + 1));
    if (!a || !b || *a == *b || !usable[i] || !usable[i + 1]) continue;
    const double c = ncc(hp[i], hp[i + 1], valid[i], valid[i + 1]);
    r.cross_profile[i] = c;
    phases[i % 2].push_back(c);
  }
  for (std::size_t i = 0; i + 2 < ns; ++i) {
    const auto a = layout.sole_owner(static_cast<int>(i));
    const auto b = layout.sole_owner(static_cast<int>(i + 2));
    if (!a || !b || *a != *b || !usable[i] || !usable[i + 2]) continue;
    const double c = ncc(hp[i], hp[i + 2], valid[i], valid[i + 2]);
    r.same_profile[i] = c;
    same.push_back(c);
  }
  const double rho_a = median(phases[0]);
  const double rho_b = median(phases[1]);
  if (std::isfinite(rho_a) && std::isfinite(rho_b)) r.rho = std::max(rho_a, rho_b);
  else r.rho = std::isfinite(rho_a) ? rho_a : rho_b;
  r.rho0 = median(same);
  r.degenerate = !std::isfinite(r.rho) || !std::isfinite(r.rho0);
  r.flag = !r.degenerate && (r.rho - r.rho0 >= options.threshold);
  return r;
}

ShiftReport shift_index(const FusionOutput& fused, const SlabLayout& layout, const ShiftOptions& options) {
  return shift_index(fused.fused, &fused.coverage_map, layout, options);
}

ShiftReport shift_index(const std::vector<PaddedSlab>& padded, const SlabLayout& layout, const ShiftOptions& options) {
  if (padded.empty()) throw InvalidInput("shift index: no slabs");
  std::vector<Volume> signals, masks;
  for (const auto& p : padded) {
    signals.push_back(p.signal);
    masks.push_back(p.mask);
  }
  const FusionOutput raw = fuse(signals, masks, 0.5);
  return shift_index(raw, layout, options);
}

nlohmann::json QCReport::to_json() const {
  nlohmann::json j;
  j["rc"] = rc ? nlohmann::json(*rc) : nlohmann::json(nullptr);
  j["snr"] = snr ? nlohmann::json(*snr) : nlohmann::json(nullptr);
  j["shift"] = shift ? shift->to_json() : nlohmann::json(nullptr);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [roi, stats] : rois) arr.push_back({{"roi", roi.to_json()}, {"stats", stats.to_json()}});
  j["rois"] = arr;
  nlohmann::json ratings = nlohmann::json::array();
  for (const auto& m : motion_ratings) ratings.push_back(m.to_json());
  j["motion_ratings"] = ratings;
  j["notes"] = notes;
  return j;
}

QCReport evaluate_rois(const Volume& volume, const std::vector<EllipsoidROI>& rois) {
  QCReport report;
  std::optional<ROIStats> gm, wm, bg;
  for (const auto& roi : rois) {
    const ROIStats s = roi_stats(volume, roi);
    report.rois.emplace_back(roi, s);
    if (roi.label == TissueLabel::GM && !gm) gm = s;
    if (roi.label == TissueLabel::WM && !wm) wm = s;
    if (roi.label == TissueLabel::BG && !bg) bg = s;
  }
  if (gm && wm) {
    try {
      report.rc = relative_contrast(*gm, *wm);
    } catch (const DegenerateInput& e) {
      report.notes.emplace_back(e.what());
    }
  }
  if (gm && bg) {
    try {
      report.snr = snr(*gm, *bg);
    } catch (const DegenerateInput& e) {
      report.notes.emplace_back(e.what());
    }
  }
  return report;
}

}  // namespace mslab
