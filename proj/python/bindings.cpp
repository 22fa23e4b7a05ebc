// Python module _vcplm.  Arrays come in as NumPy (copied into Eigen), and
// results go out as plain dicts built from the same JSON documents the CLI
// writes.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vcplm/calibration.hpp"
#include "vcplm/errors.hpp"
#include "vcplm/inference.hpp"
#include "vcplm/io.hpp"
#include "vcplm/simulation.hpp"

namespace py = pybind11;
using namespace vcplm;

namespace {

py::object to_python(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Dataset make_dataset(const Vector& y, const Matrix& eta, const Vector& v, const Matrix& w,
                     const Matrix& x, const Vector& u, const std::optional<Matrix>& xi) {
  Dataset d{y, eta, v, w, x, u, xi};
  d.validate();
  return d;
}

FitConfig make_config(const std::string& mode, std::optional<double> h,
                      std::optional<double> b, int order, const std::string& kernel,
                      const std::vector<double>& cv_grid) {
  FitConfig cfg;
  cfg.mode = parse_fit_mode(mode);
  cfg.h = h;
  cfg.calibration.bandwidth = b;
  cfg.calibration.order = order;
  cfg.kernel.family = parse_kernel_family(kernel);
  cfg.cv_grid = cv_grid;
  return cfg;
}

#define DATA_ARGS                                                                          \
  py::arg("y"), py::arg("eta"), py::arg("v"), py::arg("w"), py::arg("x"), py::arg("u"), \
      py::arg("xi") = py::none()
#define CONFIG_ARGS                                                                       \
  py::arg("mode") = "proposed", py::arg("h") = py::none(), py::arg("b") = py::none(),    \
      py::arg("order") = 1, py::arg("kernel") = "gaussian",                              \
      py::arg("cv_grid") = std::vector<double>{}

}  // namespace

PYBIND11_MODULE(_vcplm, m) {
  m.doc() = "Profile least-squares for varying-coefficient partially linear models";

  static py::exception<Error> base(m, "VcplmError", PyExc_RuntimeError);
  static py::exception<ValidationError> invalid(m, "InvalidInput", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = e.stage().empty() ? e.what() : e.stage() + ": " + e.what();
      if (e.kind() == ErrorKind::invalid_input)
        py::set_error(invalid, msg.c_str());
      else
        py::set_error(base, msg.c_str());
    }
  });

  m.def("version", [] { return std::string(version()); });

  m.def(
      "fit",
      [](const Vector& y, const Matrix& eta, const Vector& v, const Matrix& w, const Matrix& x,
         const Vector& u, const std::optional<Matrix>& xi, const std::string& mode,
         std::optional<double> h, std::optional<double> b, int order, const std::string& kernel,
         const std::vector<double>& cv_grid) {
        const Dataset d = make_dataset(y, eta, v, w, x, u, xi);
        return to_python(fit_to_json(fit_pipeline(d, make_config(mode, h, b, order, kernel, cv_grid))));
      },
      DATA_ARGS, CONFIG_ARGS, "Fit the model; returns estimates, standard errors and curves.");

  m.def(
      "cv_profile",
      [](const Vector& y, const Matrix& eta, const Vector& v, const Matrix& w, const Matrix& x,
         const Vector& u, const std::optional<Matrix>& xi, const std::string& mode,
         std::optional<double> h, std::optional<double> b, int order, const std::string& kernel,
         const std::vector<double>& cv_grid) {
        const Dataset d = make_dataset(y, eta, v, w, x, u, xi);
        const FitConfig cfg = make_config(mode, h, b, order, kernel, cv_grid);
        const auto grid = cfg.cv_grid.empty() ? default_cv_grid(d.u) : cfg.cv_grid;
        const BandwidthSelection sel = cv_profile(grid, d.x, d.u, d.y, assemble_z(d, cfg), cfg.kernel);
        py::dict out;
        out["h"] = sel.h;
        out["grid"] = sel.grid;
        out["scores"] = sel.scores;
        return out;
      },
      DATA_ARGS, CONFIG_ARGS, "Leave-one-out CV score over a bandwidth grid.");

  m.def(
      "test",
      [](const Vector& y, const Matrix& eta, const Vector& v, const Matrix& w, const Matrix& x,
         const Vector& u, const std::optional<Matrix>& xi, const std::string& mode,
         std::optional<double> h, std::optional<double> b, int order, const std::string& kernel,
         const std::vector<double>& cv_grid, const std::string& test,
         const std::optional<Matrix>& a, const std::optional<Vector>& target,
         const std::vector<Index>& constant, int bootstrap, double level, std::uint64_t seed,
         int threads) {
        const Dataset d = make_dataset(y, eta, v, w, x, u, xi);
        const FitConfig cfg = make_config(mode, h, b, order, kernel, cv_grid);
        const TestKind kind = parse_test_kind(test);
        NullSpec null;
        if (kind == TestKind::glr) {
          null = GlrNull{constant};
        } else {
          if (!a) throw ValidationError("parametric tests need a hypothesis matrix 'a'");
          null = LinearHypothesis{*a, target ? *target : Vector::Zero(a->rows())};
        }
        std::optional<BootstrapConfig> boot;
        if (bootstrap > 0) boot = BootstrapConfig{bootstrap, level, seed, threads};
        const ProfileFit fit = fit_pipeline(d, cfg);
        return to_python(test_to_json(run_test(kind, fit, d, cfg, null, boot)));
      },
      DATA_ARGS, CONFIG_ARGS, py::arg("test") = "ratio", py::arg("a") = py::none(),
      py::arg("target") = py::none(), py::arg("constant") = std::vector<Index>{0},
      py::arg("bootstrap") = 0, py::arg("level") = 0.05, py::arg("seed") = 0,
      py::arg("threads") = 1,
      "Ratio, Wald or GLR test with optional wild bootstrap calibration.");

  m.def(
      "calibrate",
      [](const Matrix& eta, const Vector& v, std::optional<double> b, int order) {
        CalibrationConfig cfg;
        cfg.bandwidth = b;
        cfg.order = order;
        return calibrate_all(eta, v, cfg).xi_hat;
      },
      py::arg("eta"), py::arg("v"), py::arg("b") = py::none(), py::arg("order") = 1,
      "Local polynomial calibration of eta on V, evaluated at the sample points.");

  m.def(
      "simulate",
      [](const std::string& preset, std::optional<Index> replicates, std::uint64_t seed,
         int bootstrap, int threads) {
        ScenarioSpec spec = scenario_preset(preset);
        if (replicates) spec.replicates = *replicates;
        spec.seed = seed;
        spec.threads = threads;
        MonteCarloReport report;
        {
          py::gil_scoped_release release;
          const auto kind = preset_power_kind(preset);
          report = kind ? run_power_study(spec, *kind, BootstrapConfig{bootstrap, 0.05, seed, 1})
                        : run_estimation_study(spec);
        }
        std::ostringstream csv;
        report.write_csv(csv);
        return csv.str();
      },
      py::arg("preset"), py::arg("replicates") = py::none(), py::arg("seed") = 0,
      py::arg("bootstrap") = 200, py::arg("threads") = 1,
      "Run a named Monte Carlo preset; returns the report as CSV text.");

  m.def("presets", &preset_names);

  m.def(
      "read_csv", [](const std::string& path) {
        const Dataset d = read_dataset_csv(path);
        py::dict out;
        out["y"] = d.y;
        out["eta"] = d.eta;
        out["v"] = d.v;
        out["w"] = d.w;
        out["x"] = d.x;
        out["u"] = d.u;
        if (d.xi) out["xi"] = *d.xi;
        return out;
      },
      py::arg("path"), "Read a dataset CSV into a dict of arrays.");
}
