#include "mslab/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "mslab/errors.hpp"
#include "mslab/fusion.hpp"
#include "mslab/nifti.hpp"
#include "mslab/presets.hpp"
#include "mslab/qc.hpp"
#include "mslab/slab.hpp"

namespace fs = std::filesystem;

namespace mslab {

namespace {

using Clock = std::chrono::steady_clock;

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(std::random_device{}());
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + tmp.string() + "'");
    f << text;
    if (!f) throw InvalidInput("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what(), e.byte);
  }
}

// Paths in reports are relative to the output directory, so two runs in
// different directories produce identical reports.
std::string rel(const fs::path& p, const fs::path& out_dir) {
  std::error_code ec;
  const fs::path r = fs::relative(fs::absolute(p), fs::absolute(out_dir), ec);
  return (ec || r.empty() ? p : r).generic_string();
}

struct Stopwatch {
  Clock::time_point start = Clock::now();
  nlohmann::json stages = nlohmann::json::object();
  Clock::time_point mark = start;
  void lap(const std::string& name) {
    const auto now = Clock::now();
    stages[name] = std::chrono::duration<double>(now - mark).count();
    mark = now;
  }
  nlohmann::json json() const {
    return {{"wall_seconds", std::chrono::duration<double>(Clock::now() - start).count()}, {"stages", stages}};
  }
};

// Shared command state: configuration, report under construction, output dir.
struct Run {
  std::string command;
  PipelineConfig config;
  fs::path out_dir;
  nlohmann::json report;
  Stopwatch clock;
  std::string suffix = ".nii";

  void begin() {
    config.validate();
    if (config.threads > 0) set_thread_count(config.threads);
    fs::create_directories(out_dir);
    report = {{"tool", "mslab"},
              {"version", kVersion},
              {"command", command},
              {"config", config.to_json()},
              {"config_text", config.to_text()},
              {"inputs", nlohmann::json::object()},
              {"outputs", nlohmann::json::array()},
              {"warnings", nlohmann::json::array()},
              {"error", nullptr},
              {"exit_code", 0},
              {"timing_file", "timing.json"}};
  }

  fs::path output(const std::string& name) {
    report["outputs"].push_back(name);
    return out_dir / name;
  }

  void save_volume(const Volume& v, const std::string& stem) { write_volume(v, output(stem + suffix)); }

  void finish() {
    write_json(out_dir / "report.json", report);
    write_json(out_dir / "timing.json", clock.json());
  }
};

void load_config_into(Run& run, const std::string& config_path, const std::string& layout,
                      const std::optional<std::uint64_t>& seed, const std::optional<unsigned>& threads) {
  if (!config_path.empty()) run.config = load_config(config_path);
  if (!layout.empty()) {
    if (is_preset(layout)) {
      run.config.set("layout", layout);
    } else {
      run.config.custom_layout = resolve_layout(layout);
      run.config.layout_name = "custom";
    }
  }
  if (seed) run.config.seed = *seed;
  if (threads) run.config.threads = *threads;
}

void print_summary(std::ostream& out, const nlohmann::json& report) {
  // Echoes values straight from the report, so the console never shows a
  // number the report lacks.
  out << "mslab " << report["command"].get<std::string>() << ": wrote " << report["outputs"].size() << " files\n";
  if (report.contains("registrations"))
    for (const auto& r : report["registrations"])
      out << "  slab " << r["slab"] << " nmi " << r["result"]["final_nmi"] << " parameters "
          << r["result"]["parameters"].dump() << "\n";
  if (report.contains("fusion"))
    out << "  uncovered_fraction " << report["fusion"]["uncovered_fraction"] << " redundant_fraction "
        << report["fusion"]["redundant_fraction"] << "\n";
  if (report.contains("qc")) {
    const auto& qc = report["qc"];
    if (!qc["rc"].is_null()) out << "  rc " << qc["rc"] << "\n";
    if (!qc["snr"].is_null()) out << "  snr " << qc["snr"] << "\n";
    if (!qc["shift"].is_null())
      out << "  shift rho " << qc["shift"]["rho"] << " rho0 " << qc["shift"]["rho0"] << " flag "
          << qc["shift"]["flag"] << "\n";
  }
  for (const auto& w : report["warnings"]) out << "  warning: " << w.get<std::string>() << "\n";
}

int cmd_simulate(Run& run, std::ostream& out) {
  run.begin();
  const SimulatedDataset d = simulate_from_config(run.config);
  run.clock.lap("simulate");
  run.save_volume(d.truth, "truth");
  for (std::size_t j = 0; j < d.slabs.size(); ++j) {
    std::ostringstream name;
    name << "slab_" << std::setw(2) << std::setfill('0') << j;
    run.save_volume(d.slabs[j], name.str());
  }
  run.save_volume(d.lr, "lr");
  write_json(run.output("scenario.json"), d.scenario_json());
  write_json(run.output("rois.json"), rois_to_json(d.rois));
  run.clock.lap("write");
  run.report["simulation"] = {{"scenario", d.scenario_json()},
                              {"geometry",
                               {{"dims", d.truth.dims()},
                                {"spacing", {d.truth.geometry().spacing.x(), d.truth.geometry().spacing.y(),
                                             d.truth.geometry().spacing.z()}}}},
                              {"lr_factor", lr_factor(run.config)},
                              {"rois", rois_to_json(d.rois)}};
  run.finish();
  print_summary(out, run.report);
  return kExitOk;
}

int cmd_reconstruct(Run& run, const std::vector<std::string>& slab_paths, const std::string& lr_path,
                    const std::string& rois_path, std::ostream& out) {
  run.begin();
  const SlabLayout layout = run.config.layout();
  nlohmann::json inputs = {{"lr", rel(lr_path, run.out_dir)}, {"slabs", nlohmann::json::array()}};
  std::vector<Volume> slabs;
  for (const auto& p : slab_paths) {
    inputs["slabs"].push_back(rel(p, run.out_dir));
    slabs.push_back(read_volume(p));
  }
  if (!rois_path.empty()) inputs["rois"] = rel(rois_path, run.out_dir);
  run.report["inputs"] = inputs;
  const Volume lr = read_volume(lr_path);
  run.clock.lap("read");

  ReconstructOptions opt;
  opt.registration = run.config.registration;
  opt.epsilon = run.config.epsilon;
  opt.uncovered_warning = run.config.uncovered_warning;
  const Reconstruction rec = reconstruct(slabs, layout, lr, opt);
  run.clock.lap("reconstruct");

  run.save_volume(rec.fusion.fused, "fused");
  run.save_volume(rec.fusion.coverage_map, "coverage");
  run.save_volume(rec.fusion.mask_sum, "mask_sum");
  run.clock.lap("write");

  nlohmann::json regs = nlohmann::json::array();
  for (std::size_t j = 0; j < rec.registrations.size(); ++j)
    regs.push_back({{"slab", j}, {"result", rec.registrations[j].to_json()}});
  run.report["registrations"] = regs;
  run.report["fusion"] = rec.fusion.summary();
  for (const auto& w : rec.warnings) run.report["warnings"].push_back(w);

  QCReport qc;
  if (!rois_path.empty()) qc = evaluate_rois(rec.fusion.fused, rois_from_json(read_json(rois_path)));
  if (layout.has_interleaving()) {
    std::vector<PaddedSlab> padded;
    for (int j = 0; j < layout.slab_count(); ++j) padded.push_back(pad_slab(slabs[static_cast<std::size_t>(j)], layout, j));
    qc.shift = shift_index(padded, layout, run.config.shift);
    qc.notes.push_back("shift index computed on the unregistered interleave of the acquired slabs");
    if (qc.shift->flag)
      run.report["warnings"].push_back("antero-posterior between-slab shift detected (rho - rho0 >= threshold)");
  } else {
    qc.notes.push_back("layout has no interleaving; shift index not applicable");
  }
  run.report["qc"] = qc.to_json();
  run.clock.lap("qc");
  run.finish();
  print_summary(out, run.report);
  return kExitOk;
}

int cmd_register(Run& run, const std::string& slab_path, int slab_index, const std::string& lr_path,
                 std::ostream& out) {
  run.begin();
  const SlabLayout layout = run.config.layout();
  run.report["inputs"] = {{"slab", rel(slab_path, run.out_dir)}, {"slab_index", slab_index}, {"lr", rel(lr_path, run.out_dir)}};
  const Volume slab = read_volume(slab_path);
  const Volume lr = read_volume(lr_path);
  const PaddedSlab padded = pad_slab(slab, layout, slab_index);
  const Volume ref = prepare_reference(lr, slab.geometry().spacing.x(), slab.geometry().spacing.z());
  run.clock.lap("read");
  const RegistrationResult r = register_rigid(padded, ref, run.config.registration);
  run.clock.lap("register");
  write_json(run.output("transform.json"), transform_to_json(r.transform));
  run.report["registrations"] = nlohmann::json::array({{{"slab", slab_index}, {"result", r.to_json()}}});
  run.finish();
  print_summary(out, run.report);
  return kExitOk;
}

int cmd_qc(Run& run, const std::string& fused_path, const std::string& rois_path, const std::string& coverage_path,
           const std::string& ratings_path, bool use_layout, std::ostream& out) {
  run.begin();
  nlohmann::json inputs = {{"fused", rel(fused_path, run.out_dir)}, {"rois", rel(rois_path, run.out_dir)}};
  const Volume fused = read_volume(fused_path);
  QCReport qc = evaluate_rois(fused, rois_from_json(read_json(rois_path)));
  if (!ratings_path.empty()) {
    inputs["ratings"] = rel(ratings_path, run.out_dir);
    const auto j = read_json(ratings_path);
    for (const auto& r : j.contains("ratings") ? j["ratings"] : j) qc.motion_ratings.push_back(MotionRating::from_json(r));
  }
  if (use_layout) {
    const SlabLayout layout = run.config.layout();
    std::optional<Volume> coverage;
    if (!coverage_path.empty()) {
      inputs["coverage"] = rel(coverage_path, run.out_dir);
      coverage = read_volume(coverage_path);
    }
    if (layout.has_interleaving())
      qc.shift = shift_index(fused, coverage ? &*coverage : nullptr, layout, run.config.shift);
    else
      qc.notes.push_back("layout has no interleaving; shift index not applicable");
  }
  run.report["inputs"] = inputs;
  run.report["qc"] = qc.to_json();
  run.clock.lap("qc");
  write_json(run.output("qc.json"), qc.to_json());
  run.finish();
  print_summary(out, run.report);
  return kExitOk;
}

}  // namespace

AffineGeometry simulation_geometry(const PipelineConfig& config) {
  const SlabLayout layout = config.layout();
  Vec3 voxel(0.3, layout.slice_thickness(), 0.3);
  if (!config.custom_layout) voxel = find_preset(config.layout_name).voxel;
  AffineGeometry g;
  g.spacing = voxel;
  g.dims = {static_cast<std::size_t>(std::lround(config.sim_fov_mm[0] / voxel.x())),
            static_cast<std::size_t>(layout.final_slices()),
            static_cast<std::size_t>(std::lround(config.sim_fov_mm[1] / voxel.z()))};
  for (int a = 0; a < 3; ++a)
    if (g.dims[a] < 1) throw InvalidInput("simulation field of view is smaller than one voxel");
  g.origin = -0.5 * Vec3(static_cast<double>(g.dims[0] - 1) * voxel.x(), static_cast<double>(g.dims[1] - 1) * voxel.y(),
                         static_cast<double>(g.dims[2] - 1) * voxel.z());
  return g;
}

std::size_t lr_factor(const PipelineConfig& config) {
  if (config.custom_layout) return 2;
  const auto& hr = find_preset(config.layout_name);
  for (const auto& p : acquisition_presets())
    if (p.site == hr.site && p.layout.kind() == LayoutKind::Contiguous && p.layout.slab_count() == 1 &&
        p.name.size() > 3 && p.name.compare(p.name.size() - 3, 3, "_lr") == 0)
      return static_cast<std::size_t>(std::lround(p.voxel.z() / hr.voxel.z()));
  return 2;
}

SimulatedDataset simulate_from_config(const PipelineConfig& config) {
  config.validate();
  const AffineGeometry g = simulation_geometry(config);
  const SlabLayout layout = config.layout();
  const Vec3 c = g.center();
  MotionScenario sc = config.sim_random_motion ? MotionScenario::random_realistic(layout.slab_count(), c, config.seed)
                                               : MotionScenario::identity(layout.slab_count(), c);
  auto to_transform = [&](const std::array<double, 6>& m) {
    return RigidTransform::from_parameters(
        {m[0], m[1], m[2], deg_to_rad(m[3]), deg_to_rad(m[4]), deg_to_rad(m[5])}, c);
  };
  if (!config.sim_motion.empty())
    for (std::size_t j = 0; j < config.sim_motion.size(); ++j) sc.transforms[j] = to_transform(config.sim_motion[j]);
  sc.lr_transform = to_transform(config.sim_lr_motion);
  sc.noise_percent = config.sim_noise_percent;
  sc.lr_noise_percent = config.sim_lr_noise_percent;
  sc.seed = config.seed;
  const Volume truth = generate_phantom(config.phantom, g);
  SimulatedDataset d = simulate_acquisition(truth, layout, sc, lr_factor(config));
  d.rois = canonical_rois(config.phantom, g);
  return d;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-slab MRI reconstruction: simulate, register, fuse and check slab stacks", "mslab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("mslab ") + kVersion);

  std::string config_path, layout, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool gzip = false;
  auto common = [&](CLI::App* sub, bool need_out = true) {
    sub->add_option("--config", config_path, "Configuration file (key = JSON value per line)")->check(CLI::ExistingFile);
    sub->add_option("--layout", layout, "Layout preset name or layout JSON file");
    auto* o = sub->add_option("--out", out_dir, "Output directory");
    if (need_out) o->required();
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--threads", threads, "Worker threads (default: all cores)");
    sub->add_flag("--gzip", gzip, "Write .nii.gz volumes");
  };

  auto* sim = app.add_subcommand("simulate", "Generate a phantom, move it per slab and acquire slabs + LR reference");
  common(sim);

  std::vector<std::string> slabs;
  std::string lr, rois, fused, coverage, ratings, slab;
  int slab_index = 0;
  auto* rec = app.add_subcommand("reconstruct", "Register slabs to the LR reference and fuse them");
  common(rec);
  rec->add_option("--slabs", slabs, "Acquired slab volumes, in layout order")->required();
  rec->add_option("--lr", lr, "Low-resolution reference volume")->required();
  rec->add_option("--rois", rois, "ROI file for RC/SNR on the fused volume");

  auto* reg = app.add_subcommand("register", "Register one padded slab to the LR reference");
  common(reg);
  reg->add_option("--slab", slab, "Acquired slab volume")->required();
  reg->add_option("--slab-index", slab_index, "Index of the slab in the layout")->required();
  reg->add_option("--lr", lr, "Low-resolution reference volume")->required();

  auto* qc = app.add_subcommand("qc", "ROI contrast/SNR and shift index of a fused volume");
  common(qc);
  qc->add_option("--fused", fused, "Fused volume")->required();
  qc->add_option("--rois", rois, "ROI file (GM/WM/BG ellipsoids)")->required();
  qc->add_option("--coverage", coverage, "Coverage map restricting the shift index");
  qc->add_option("--ratings", ratings, "Visual motion ratings to attach");
  bool shift = false;
  qc->add_flag("--shift", shift, "Also compute the shift index with the configured layout");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "mslab " << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mslab: " << e.what() << "\n";
    CLI::App* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failing->help();
    return kExitUsage;
  }

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  run.out_dir = out_dir;
  if (gzip) run.suffix = ".nii.gz";

  auto fail = [&](int code, const std::string& type, const std::string& message, int slab_no = -1) {
    err << "mslab " << run.command << ": " << message << "\n";
    if (!run.report.is_null() && !run.out_dir.empty()) {
      run.report["error"] = {{"type", type}, {"message", message}};
      if (slab_no >= 0) run.report["error"]["slab"] = slab_no;
      run.report["exit_code"] = code;
      try {
        run.finish();
      } catch (const std::exception&) {
      }
    }
    return code;
  };

  try {
    load_config_into(run, config_path, layout, seed, threads);
  } catch (const Error& e) {
    err << "mslab " << run.command << ": " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (run.command == "simulate") return cmd_simulate(run, out);
    if (run.command == "reconstruct") return cmd_reconstruct(run, slabs, lr, rois, out);
    if (run.command == "register") return cmd_register(run, slab, slab_index, lr, out);
    return cmd_qc(run, fused, rois, coverage, ratings, shift, out);
  } catch (const RegistrationFailed& e) {
    return fail(kExitRegistration, "RegistrationFailed", e.what(), e.slab_index());
  } catch (const InvalidInput& e) {
    // Bad parameters surface as usage errors; unreadable inputs as data errors.
    return fail(run.report.is_null() ? kExitUsage : kExitData, "InvalidInput", e.what());
  } catch (const LayoutMismatch& e) {
    return fail(kExitData, "LayoutMismatch", e.what());
  } catch (const ParseError& e) {
    return fail(kExitData, "ParseError", e.what());
  } catch (const UnsupportedFormat& e) {
    return fail(kExitData, "UnsupportedFormat", e.what());
  } catch (const Error& e) {
    return fail(kExitData, "Error", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kExitData, "FilesystemError", e.what());
  }
}

}  // namespace mslab
