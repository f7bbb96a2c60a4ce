#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mslab/nifti.hpp"
#include "mslab/pipeline.hpp"

using namespace mslab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / ("mslab_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string operator/(const std::string& name) const { return (root / name).string(); }
};

// simulate -> reconstruct -> qc into `dir`; returns the reconstruct report.
nlohmann::json pipeline(const Workspace& ws, const std::string& dir, const std::vector<std::string>& extra = {}) {
  std::vector<std::string> sim{"simulate", "--out", ws / (dir + "/sim"), "--seed", "3"};
  sim.insert(sim.end(), extra.begin(), extra.end());
  REQUIRE(cli(sim).code == kExitOk);
  std::vector<std::string> rec{"reconstruct", "--out", ws / (dir + "/rec"), "--slabs", ws / (dir + "/sim/slab_00.nii"),
                               ws / (dir + "/sim/slab_01.nii"), "--lr", ws / (dir + "/sim/lr.nii"), "--rois",
                               ws / (dir + "/sim/rois.json")};
  rec.insert(rec.end(), extra.begin(), extra.end());
  const Run r = cli(rec);
  REQUIRE(r.code == kExitOk);
  REQUIRE(cli({"qc", "--out", ws / (dir + "/qc"), "--fused", ws / (dir + "/rec/fused.nii"), "--rois",
               ws / (dir + "/sim/rois.json"), "--coverage", ws / (dir + "/rec/coverage.nii"), "--shift"})
              .code == kExitOk);
  return load_json(ws.root / dir / "rec" / "report.json");
}

}  // namespace

TEST_CASE("end to end without motion") {
  Workspace ws;
  const nlohmann::json report = pipeline(ws, "a");
  CHECK(report["exit_code"] == 0);
  CHECK(report["qc"]["shift"]["flag"] == false);
  CHECK(report["qc"]["rc"].get<double>() > 0.3);
  CHECK(report["fusion"]["uncovered_fraction"] == 0.0);
  const nlohmann::json qc = load_json(ws.root / "a" / "qc" / "qc.json");
  // fused.nii is float32, so RC from the file agrees to single precision.
  CHECK(qc["rc"].get<double>() == doctest::Approx(report["qc"]["rc"].get<double>()).epsilon(1e-6));
  CHECK(fs::exists(ws.root / "a" / "rec" / "timing.json"));
}

TEST_CASE("same seed, byte-identical outputs") {
  Workspace ws;
  pipeline(ws, "a");
  pipeline(ws, "b");
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(ws.root / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
    const fs::path other = ws.root / "b" / fs::relative(e.path(), ws.root / "a");
    REQUIRE(fs::exists(other));
    CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().string());
    ++compared;
  }
  CHECK(compared >= 11);
}

TEST_CASE("antero-posterior slab shift is flagged") {
  Workspace ws;
  {
    std::ofstream cfg(ws.root / "shift.cfg");
    cfg << "sim.motion = [[0, 0, 0, 0, 0, 0], [0, 1.2, 0, 0, 0, 0]]\n";
  }
  const nlohmann::json report = pipeline(ws, "s", {"--config", ws / "shift.cfg"});
  CHECK(report["qc"]["shift"]["flag"] == true);
  CHECK(report["warnings"].size() >= 1);
}

TEST_CASE("usage, data and registration errors map to exit codes") {
  Workspace ws;
  REQUIRE(cli({"simulate", "--out", ws / "sim", "--seed", "1"}).code == kExitOk);
  const std::string s0 = ws / "sim/slab_00.nii", s1 = ws / "sim/slab_01.nii", lr = ws / "sim/lr.nii";

  const Run missing = cli({"reconstruct", "--out", ws / "r1", "--slabs", s0, s1});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("--lr") != std::string::npos);

  CHECK(cli({"frobnicate"}).code == kExitUsage);

  {
    std::ofstream cfg(ws.root / "bad.cfg");
    cfg << "reg.binz = 12\n";
  }
  CHECK(cli({"reconstruct", "--out", ws / "r2", "--slabs", s0, s1, "--lr", lr, "--config", ws / "bad.cfg"}).code ==
        kExitUsage);

  {
    std::ofstream junk(ws.root / "junk.nii");
    junk << "this is not a NIfTI file";
  }
  const Run data = cli({"reconstruct", "--out", ws / "r3", "--slabs", s0, ws / "junk.nii", "--lr", lr});
  CHECK(data.code == kExitData);
  const nlohmann::json report = load_json(ws.root / "r3" / "report.json");
  CHECK(report["exit_code"] == kExitData);
  CHECK(report["error"].is_object());

  // A reference 500 mm away shares no field of view with the slabs.
  Volume far = read_volume(lr);
  AffineGeometry g = far.geometry();
  g.origin += Vec3(500.0, 0.0, 0.0);
  write_volume(Volume(g, std::vector<double>(far.data().begin(), far.data().end())), ws.root / "far.nii");
  const Run reg = cli({"reconstruct", "--out", ws / "r4", "--slabs", s0, s1, "--lr", ws / "far.nii"});
  CHECK(reg.code == kExitRegistration);
}

TEST_CASE("register writes the transform") {
  Workspace ws;
  REQUIRE(cli({"simulate", "--out", ws / "sim", "--seed", "2"}).code == kExitOk);
  const Run r = cli({"register", "--out", ws / "reg", "--slab", ws / "sim/slab_01.nii", "--slab-index", "1", "--lr",
                     ws / "sim/lr.nii"});
  REQUIRE(r.code == kExitOk);
  const nlohmann::json t = load_json(ws.root / "reg" / "transform.json");
  CHECK(t.dump().find("center_mm") != std::string::npos);
}
