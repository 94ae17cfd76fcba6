#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "json.hpp"
#include "kscope/cli.hpp"
#include "kscope/error.hpp"
#include "kscope/estimate.hpp"
#include "kscope/gof.hpp"
#include "kscope/json_io.hpp"
#include "kscope/mcharness.hpp"
#include "kscope/pattern.hpp"
#include "kscope/simulate.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace kscope {
namespace {

// JSON crosses the boundary as text; the Python wrapper converts to dicts.
json parse(const std::string& s) { return json::parse(s); }

PointPattern pattern_from_array(const ObservationWindow& window,
                                py::array_t<double, py::array::c_style | py::array::forcecast> points) {
    std::vector<double> coords;
    if (points.size() > 0) {
        require(points.ndim() == 2 && points.shape(1) == window.dim(), ErrorCode::DimensionMismatch,
                "points must be an (n, d) array matching the window dimension");
        coords.assign(points.data(), points.data() + points.size());
    }
    return PointPattern(window, std::move(coords));
}

py::array_t<double> coords_array(const PointPattern& p) {
    py::array_t<double> out({static_cast<py::ssize_t>(p.size()), static_cast<py::ssize_t>(p.dim())});
    std::copy(p.coords().begin(), p.coords().end(), out.mutable_data());
    return out;
}

TestOptions make_options(int dim, const std::string& ball, double alpha, double R, double gamma,
                         const std::string& estimator, bool clamp) {
    TestOptions o;
    o.body = parse_body_spec(ball, dim);
    o.alpha = alpha;
    o.R = R;
    o.gamma = gamma;
    o.estimator = parse_estimator_kind(estimator);
    o.clamp = clamp;
    return o;
}

}  // namespace
}  // namespace kscope

PYBIND11_MODULE(_core, m) {
    using namespace kscope;
    m.doc() = "K-function estimation and goodness-of-fit tests for spatial point patterns";

    static py::exception<Error> error_type(m, "KscopeError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error_type, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    py::class_<ObservationWindow>(m, "Window")
        .def_static("box", &ObservationWindow::box, py::arg("lower"), py::arg("upper"))
        .def_static("cube", &ObservationWindow::cube, py::arg("dim"), py::arg("side"))
        .def_static("disk", &ObservationWindow::disk, py::arg("center"), py::arg("radius"))
        .def_static("parse", [](const std::string& s) { return parse_window_spec(s); })
        .def_static("from_json", [](const std::string& s) { return window_from_json(parse(s)); })
        .def_property_readonly("dim", &ObservationWindow::dim)
        .def_property_readonly("volume", &ObservationWindow::volume)
        .def_property_readonly("inball_radius", &ObservationWindow::inball_radius)
        .def("set_covariance", [](const ObservationWindow& w, std::vector<double> y) {
            return w.set_covariance(y);
        })
        .def("contains", [](const ObservationWindow& w, std::vector<double> x) { return w.contains(x); })
        .def("to_json", [](const ObservationWindow& w) { return window_to_json(w).dump(); });

    py::class_<StructuringBody>(m, "Body")
        .def(py::init([](int dim, const std::string& shape, double scale) {
                 return StructuringBody(dim, parse_body_shape(shape), scale);
             }),
             py::arg("dim") = 2, py::arg("shape") = "l2", py::arg("radius_scale") = 1.0)
        .def_property_readonly("dim", &StructuringBody::dim)
        .def_property_readonly("volume", &StructuringBody::volume)
        .def_property_readonly("circumradius", &StructuringBody::circumradius)
        .def("gauge", [](const StructuringBody& b, std::vector<double> x) { return b.gauge_norm(x); });

    py::class_<PointPattern>(m, "Pattern")
        .def(py::init(&pattern_from_array), py::arg("window"), py::arg("points"))
        .def_static("load", [](const std::string& path, const ObservationWindow& w) { return load_pattern(path, w); })
        .def("save", [](const PointPattern& p, const std::string& path) { save_pattern(p, path); })
        .def_property_readonly("window", &PointPattern::window)
        .def_property_readonly("points", &coords_array)
        .def("__len__", &PointPattern::size);

    py::class_<KEstimate>(m, "KEstimate")
        .def_readonly("jump_radii", &KEstimate::jump_radii)
        .def_readonly("cumulative_values", &KEstimate::cumulative_values)
        .def_readonly("r_max", &KEstimate::r_max)
        .def_property_readonly("pair_count", &KEstimate::pair_count)
        .def("__call__", &KEstimate::eval);

    m.def("simulate",
          [](const std::string& model, const ObservationWindow& w, std::uint64_t seed, std::uint64_t stream) {
              return simulate(model_from_json(parse(model)), w, {seed, stream});
          },
          py::arg("model_json"), py::arg("window"), py::arg("seed") = 0, py::arg("stream") = 0);
    m.def("k_hat",
          [](const PointPattern& p, const StructuringBody& b, double r_max, const std::string& est,
             std::optional<ObservationWindow> estimation_window) {
              return k_hat(p, b, r_max, parse_estimator_kind(est), estimation_window);
          },
          py::arg("pattern"), py::arg("body"), py::arg("r_max"), py::arg("estimator") = "ht",
          py::arg("estimation_window") = py::none());
    m.def("lambda_hat", &lambda_hat);
    m.def("sigma2_hat",
          [](const PointPattern& p, const std::string& kernel, double bandwidth) {
              return sigma2_hat(p, parse_kernel(kernel), bandwidth);
          },
          py::arg("pattern"), py::arg("kernel") = "indicator", py::arg("bandwidth") = 0.0);
    m.def("theoretical_k",
          [](const std::string& model, const StructuringBody& b, double r) {
              return theoretical_k(model_from_json(parse(model)), b, r);
          });
    m.def("gof",
          [](const PointPattern& p, double lambda0, const std::string& stat, const std::string& ball, double alpha,
             double R, double gamma, const std::string& estimator, bool clamp) {
              const TestOptions o = make_options(p.dim(), ball, alpha, R, gamma, estimator, clamp);
              const NullHypothesis h0{lambda0, NullK::poisson(o.body)};
              return to_json(one_sample_reports(p, h0, o, {stat}).front()).dump();
          },
          py::arg("pattern"), py::arg("lambda0"), py::arg("stat") = "ks", py::arg("ball") = "l2",
          py::arg("alpha") = 0.5, py::arg("R") = 1.0, py::arg("gamma") = 0.05, py::arg("estimator") = "ht",
          py::arg("clamp") = false);
    m.def("twosample",
          [](const PointPattern& a, const PointPattern& b, const std::string& stat, const std::string& ball,
             double alpha, double R, double gamma, const std::string& estimator, bool clamp) {
              const TestOptions o = make_options(a.dim(), ball, alpha, R, gamma, estimator, clamp);
              return to_json(two_sample_report(a, b, o, stat)).dump();
          },
          py::arg("a"), py::arg("b"), py::arg("stat") = "ks", py::arg("ball") = "l2", py::arg("alpha") = 0.5,
          py::arg("R") = 1.0, py::arg("gamma") = 0.05, py::arg("estimator") = "ht", py::arg("clamp") = false);
    m.def("run_study",
          [](const std::string& config) {
              const StudyConfig cfg = study_config_from_json(parse(config));
              StudyReport report;
              {
                  py::gil_scoped_release release;
                  report = run_study(cfg);
              }
              return to_json(report).dump();
          },
          py::arg("config_json"));
    m.def("normal_quantile", &normal_quantile);
    m.def("normal_cdf", &normal_cdf);
    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "kscope");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
    });
}
