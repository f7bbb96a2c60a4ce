#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mslab/config.hpp"
#include "mslab/errors.hpp"
#include "mslab/fusion.hpp"
#include "mslab/nifti.hpp"
#include "mslab/phantom.hpp"
#include "mslab/pipeline.hpp"
#include "mslab/presets.hpp"
#include "mslab/qc.hpp"
#include "mslab/registration.hpp"
#include "mslab/simulate.hpp"
#include "mslab/slab.hpp"

namespace py = pybind11;
using namespace mslab;

namespace {

using Array3 = py::array_t<double, py::array::f_style | py::array::forcecast>;

// Arrays are indexed [x, y, z]; Fortran order matches the x-fastest layout.
Volume volume_from_array(const Array3& a, const Vec3& spacing, const Vec3& origin, const Mat3& axes) {
  if (a.ndim() != 3) throw InvalidInput("volume data must be 3-D");
  AffineGeometry g;
  for (int n = 0; n < 3; ++n) g.dims[n] = static_cast<std::size_t>(a.shape(n));
  g.spacing = spacing;
  g.origin = origin;
  g.axes = axes;
  g.validate();
  return Volume(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Array3 volume_array(const Volume& v) {
  const auto& d = v.dims();
  Array3 out({static_cast<py::ssize_t>(d[0]), static_cast<py::ssize_t>(d[1]), static_cast<py::ssize_t>(d[2])});
  std::copy(v.data().begin(), v.data().end(), out.mutable_data());
  return out;
}

std::string dump(const nlohmann::json& j) { return j.dump(); }

SlabLayout layout_from(const std::string& preset_or_json) {
  if (is_preset(preset_or_json)) return find_preset(preset_or_json).layout;
  return SlabLayout::from_json(nlohmann::json::parse(preset_or_json));
}

}  // namespace

PYBIND11_MODULE(_mslab, m) {
  m.doc() = "Multi-slab MRI reconstruction: registration to a low-resolution reference and mask-weighted fusion.";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<LayoutMismatch>(m, "LayoutMismatch", base.ptr());
  py::register_exception<EmptyOverlap>(m, "EmptyOverlap", base.ptr());
  py::register_exception<RegistrationFailed>(m, "RegistrationFailed", base.ptr());
  py::register_exception<EmptyROI>(m, "EmptyROI", base.ptr());
  py::register_exception<DegenerateInput>(m, "DegenerateInput", base.ptr());
  py::register_exception<UnsupportedFormat>(m, "UnsupportedFormat", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  py::class_<Volume>(m, "Volume")
      .def(py::init(&volume_from_array), py::arg("data"), py::arg("spacing") = Vec3(1.0, 1.0, 1.0),
           py::arg("origin") = Vec3::Zero(), py::arg("axes") = Mat3::Identity())
      .def("array", &volume_array, "Copy of the voxel data as an [x, y, z] array")
      .def_property_readonly("dims", [](const Volume& v) { return v.dims(); })
      .def_property_readonly("spacing", [](const Volume& v) { return v.geometry().spacing; })
      .def_property_readonly("origin", [](const Volume& v) { return v.geometry().origin; })
      .def_property_readonly("axes", [](const Volume& v) { return v.geometry().axes; })
      .def_property_readonly("index_to_world", [](const Volume& v) { return v.geometry().index_to_world(); })
      .def("__repr__", [](const Volume& v) {
        std::ostringstream s;
        s << "Volume(dims=" << v.dims()[0] << "x" << v.dims()[1] << "x" << v.dims()[2] << ")";
        return s.str();
      });

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init([](const std::array<double, 6>& p, const Vec3& c) { return RigidTransform::from_parameters(p, c); }),
           py::arg("parameters"), py::arg("center") = Vec3::Zero(),
           "parameters: tx, ty, tz (mm), rx, ry, rz (radians); p' = Rz Ry Rx (p - c) + c + t")
      .def_static("identity", &RigidTransform::identity, py::arg("center") = Vec3::Zero())
      .def("parameters", &RigidTransform::parameters)
      .def_readonly("center", &RigidTransform::center)
      .def("matrix", &RigidTransform::matrix)
      .def("apply", &RigidTransform::apply)
      .def("inverse", [](const RigidTransform& t) { return invert(t); })
      .def("__matmul__", [](const RigidTransform& a, const RigidTransform& b) { return compose(a, b); });

  m.def("read_volume", &read_volume, py::arg("path"));
  m.def("write_volume", &write_volume, py::arg("volume"), py::arg("path"));

  m.def("preset_names", [] {
    std::vector<std::string> names;
    for (const auto& p : acquisition_presets()) names.push_back(p.name);
    return names;
  });
  m.def("preset_json", [](const std::string& name) { return dump(find_preset(name).to_json()); });
  m.def("layout_json", [](const std::string& spec) { return dump(layout_from(spec).to_json()); },
        py::arg("preset_or_json"));
  m.def("layout_placement", [](const std::string& spec) {
    const SlabLayout l = layout_from(spec);
    std::vector<std::vector<int>> out;
    for (int j = 0; j < l.slab_count(); ++j) out.push_back(l.placement(j));
    return out;
  });

  m.def("default_phantom_json", [] { return dump(PhantomSpec{}.to_json()); });
  m.def(
      "generate_phantom",
      [](const std::string& spec_json) {
        const PhantomSpec spec = spec_json.empty() ? PhantomSpec{} : PhantomSpec::from_json(nlohmann::json::parse(spec_json));
        return generate_phantom(spec, default_phantom_geometry());
      },
      py::arg("spec_json") = "", py::call_guard<py::gil_scoped_release>());
  m.def(
      "canonical_rois_json",
      [](const std::string& spec_json) {
        const PhantomSpec spec = spec_json.empty() ? PhantomSpec{} : PhantomSpec::from_json(nlohmann::json::parse(spec_json));
        return dump(rois_to_json(canonical_rois(spec, default_phantom_geometry())));
      },
      py::arg("spec_json") = "");

  m.def(
      "simulate",
      [](const std::string& config_text) {
        const SimulatedDataset d = simulate_from_config(parse_config(config_text));
        return py::make_tuple(d.truth, d.slabs, d.lr, dump(d.scenario_json()), dump(rois_to_json(d.rois)));
      },
      py::arg("config_text") = "");

  m.def(
      "reconstruct",
      [](const std::vector<Volume>& slabs, const std::string& layout, const Volume& lr, const std::string& config_text) {
        const PipelineConfig cfg = parse_config(config_text);
        ReconstructOptions opt;
        opt.registration = cfg.registration;
        opt.epsilon = cfg.epsilon;
        opt.uncovered_warning = cfg.uncovered_warning;
        Reconstruction rec;
        {
          py::gil_scoped_release release;
          rec = reconstruct(slabs, layout_from(layout), lr, opt);
        }
        nlohmann::json info = rec.fusion.summary();
        info["registrations"] = nlohmann::json::array();
        for (const auto& r : rec.registrations) info["registrations"].push_back(r.to_json());
        info["warnings"] = rec.warnings;
        return py::make_tuple(rec.fusion.fused, rec.fusion.coverage_map, rec.fusion.mask_sum, dump(info));
      },
      py::arg("slabs"), py::arg("layout"), py::arg("lr"), py::arg("config_text") = "");

  m.def(
      "register_slab",
      [](const Volume& slab, const std::string& layout, int index, const Volume& lr, const std::string& config_text) {
        const PipelineConfig cfg = parse_config(config_text);
        const PaddedSlab p = pad_slab(slab, layout_from(layout), index);
        const Volume ref = prepare_reference(lr, slab.geometry().spacing.x(), slab.geometry().spacing.z());
        py::gil_scoped_release release;
        const RegistrationResult r = register_rigid(p, ref, cfg.registration);
        return std::make_pair(r.transform, dump(r.to_json()));
      },
      py::arg("slab"), py::arg("layout"), py::arg("index"), py::arg("lr"), py::arg("config_text") = "");

  m.def(
      "nmi",
      [](const Volume& moving, const Volume& fixed, std::optional<Volume> mask, const RigidTransform& t, int bins) {
        const Volume msk = mask ? *mask : Volume(moving.geometry(), 1.0);
        return nmi(joint_histogram(moving, fixed, msk, t, bins));
      },
      py::arg("moving"), py::arg("fixed"), py::arg("mask") = py::none(), py::arg("transform") = RigidTransform{},
      py::arg("bins") = 64);

  m.def(
      "shift_index_json",
      [](const std::vector<Volume>& slabs, const std::string& layout) {
        const SlabLayout l = layout_from(layout);
        std::vector<PaddedSlab> padded;
        for (int j = 0; j < static_cast<int>(slabs.size()); ++j) padded.push_back(pad_slab(slabs[j], l, j));
        return dump(shift_index(padded, l).to_json());
      },
      py::arg("slabs"), py::arg("layout"));

  m.def(
      "evaluate_rois_json",
      [](const Volume& v, const std::string& rois_json) {
        return dump(evaluate_rois(v, rois_from_json(nlohmann::json::parse(rois_json))).to_json());
      },
      py::arg("volume"), py::arg("rois_json"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
