#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pbec/config.hpp"
#include "pbec/correlation.hpp"
#include "pbec/pipeline.hpp"
#include "pbec/semiclassical.hpp"
#include "pbec/system.hpp"

namespace py = pybind11;

namespace {

const char* kind_name(pbec::ErrorKind kind) {
  switch (kind) {
    case pbec::ErrorKind::kValidation: return "validation";
    case pbec::ErrorKind::kContract: return "contract";
    case pbec::ErrorKind::kFormat: return "format";
    case pbec::ErrorKind::kConvergence: return "convergence";
    case pbec::ErrorKind::kTruncation: return "truncation";
    case pbec::ErrorKind::kVerification: return "verification";
    case pbec::ErrorKind::kResource: return "resource";
  }
  return "unknown";
}

py::dict bundle_dict(const pbec::ResultBundle& b) {
  py::dict d;
  d["command"] = b.command;
  d["run_id"] = b.run_id;
  d["out_dir"] = b.out_dir;
  d["files"] = b.files;
  d["warnings"] = b.warnings;
  d["seconds"] = b.seconds;
  return d;
}

using Runner = pbec::ResultBundle (*)(const pbec::ConfigSource&, const pbec::RunOptions&);

template <Runner run>
py::dict run_from_path(const std::string& config, const std::string& out, int threads,
                       bool strict) {
  pbec::ResultBundle b;
  {
    py::gil_scoped_release release;
    b = run(pbec::ConfigSource::read(config), {out, threads, strict});
  }
  return bundle_dict(b);
}

pbec::RunConfig parse(const std::string& text, const std::string& base_dir) {
  return pbec::parse_config_string(text, base_dir);
}

py::dict steady(const std::string& text, const std::string& base_dir, double pump_ratio) {
  pbec::RunConfig cfg = parse(text, base_dir);
  if (pump_ratio >= 0.0) cfg.model.pump_ratio = pump_ratio;
  const pbec::BuiltModel b = pbec::build_model(cfg.model);
  pbec::SteadyState ss;
  {
    py::gil_scoped_release release;
    ss = pbec::steady_state(b.system, cfg.steady);
  }
  py::dict d;
  d["omega"] = b.basis.frequency;
  d["detuning"] = b.basis.detuning;
  d["emission"] = b.rates.emission;
  d["absorption"] = b.rates.absorption;
  d["photons"] = ss.state.photons;
  d["excitation"] = ss.state.excitation;
  d["iterations"] = ss.iterations;
  d["residual"] = std::max(ss.photon_residual, ss.molecule_residual);
  d["warnings"] = b.warnings;
  return d;
}

py::dict coherence(const std::string& text, const std::string& base_dir, double pump_ratio) {
  pbec::RunConfig cfg = parse(text, base_dir);
  if (pump_ratio >= 0.0) cfg.model.pump_ratio = pump_ratio;
  const pbec::BuiltModel b = pbec::build_model(cfg.model);
  pbec::CoherenceAnalysis a;
  pbec::SteadyState ss;
  {
    py::gil_scoped_release release;
    ss = pbec::steady_state(b.system, cfg.steady);
    a = pbec::analyze_coherence(ss, b.system, cfg.coherence);
  }
  std::vector<double> tau, tau_fit;
  for (const auto& t : a.tau) {
    tau.push_back(t.crossing);
    tau_fit.push_back(t.fitted);
  }
  py::dict d;
  d["photons"] = ss.state.photons;
  d["generator"] = a.generator.matrix;
  d["tau"] = tau;
  d["tau_fit"] = tau_fit;
  d["omega"] = a.spectral.omega;
  d["spectrum"] = a.spectral.spectrum;
  d["fwhm"] = a.spectral.fwhm;
  d["peak_omega"] = a.spectral.peak_omega;
  d["normalization"] = a.spectral.normalization;
  d["time"] = a.trajectory.time;
  d["seeded"] = a.seeded;
  d["warnings"] = a.spectral.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pbec, m) {
  m.doc() = "multimode photon condensate coherence simulator";

  static py::exception<pbec::Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pbec::Error& e) {
      // args: (message, kind, exit code)
      const py::tuple args = py::make_tuple(e.what(), kind_name(e.kind()), pbec::exit_code(e.kind()));
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  m.def("normalize_config", [](const std::string& text, const std::string& base_dir) {
          return pbec::serialize_config(parse(text, base_dir));
        },
        py::arg("text"), py::arg("base_dir") = ".",
        "Parse a config and return it with every field written out.");
  m.def("run_id", &pbec::run_id_for, py::arg("config_text"));
  m.def("steady", &steady, py::arg("text"), py::arg("base_dir") = ".",
        py::arg("pump_ratio") = -1.0);
  m.def("coherence", &coherence, py::arg("text"), py::arg("base_dir") = ".",
        py::arg("pump_ratio") = -1.0);

  m.def("run_steady", &run_from_path<pbec::run_steady>, py::arg("config"), py::arg("out") = "",
        py::arg("threads") = 0, py::arg("strict") = false);
  m.def("run_coherence", &run_from_path<pbec::run_coherence>, py::arg("config"),
        py::arg("out") = "", py::arg("threads") = 0, py::arg("strict") = false);
  m.def("run_sweep", &run_from_path<pbec::run_sweep>, py::arg("config"), py::arg("out") = "",
        py::arg("threads") = 0, py::arg("strict") = false);
  m.def("run_verify", &run_from_path<pbec::run_verify>, py::arg("config"), py::arg("out") = "",
        py::arg("threads") = 0, py::arg("strict") = false);
}
