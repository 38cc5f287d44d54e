#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "g2cal/curve.hpp"
#include "g2cal/dataset.hpp"
#include "g2cal/g2pp.hpp"
#include "g2cal/pipeline.hpp"

namespace py = pybind11;
using namespace g2cal;

PYBIND11_MODULE(_g2cal, m) {
    m.doc() = "G2++ calibration engine";

    py::class_<G2ppParams>(m, "G2ppParams")
        .def(py::init([](double kx, double ky, double sx, double sy, double rho) {
                 G2ppParams p{kx, ky, sx, sy, rho};
                 p.validate();
                 return p;
             }),
             py::arg("k_x"), py::arg("k_y"), py::arg("sigma_x"),
             py::arg("sigma_y"), py::arg("rho"))
        .def_readwrite("k_x", &G2ppParams::k_x)
        .def_readwrite("k_y", &G2ppParams::k_y)
        .def_readwrite("sigma_x", &G2ppParams::sigma_x)
        .def_readwrite("sigma_y", &G2ppParams::sigma_y)
        .def_readwrite("rho", &G2ppParams::rho)
        .def("__repr__", [](const G2ppParams& p) {
            return "G2ppParams(k_x=" + std::to_string(p.k_x) +
                   ", k_y=" + std::to_string(p.k_y) +
                   ", sigma_x=" + std::to_string(p.sigma_x) +
                   ", sigma_y=" + std::to_string(p.sigma_y) +
                   ", rho=" + std::to_string(p.rho) + ")";
        });

    m.def("reference_params", &reference_params);

    py::class_<FactorState>(m, "FactorState")
        .def(py::init([](double x, double y, double t) {
                 return FactorState{x, y, t};
             }),
             py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("t") = 0.0)
        .def_readwrite("x", &FactorState::x)
        .def_readwrite("y", &FactorState::y)
        .def_readwrite("t", &FactorState::t);

    py::enum_<CurveKind>(m, "CurveKind")
        .value("ZC", CurveKind::ZC)
        .value("FWD", CurveKind::FWD);
    py::enum_<Quantity>(m, "Quantity")
        .value("Cov", Quantity::Cov)
        .value("Corr", Quantity::Corr);

    py::class_<MarketCurve>(m, "MarketCurve")
        .def(py::init<std::vector<double>, std::vector<double>>(),
             py::arg("tenors"), py::arg("discount_factors"))
        .def_static("flat", &MarketCurve::flat, py::arg("rate"),
                    py::arg("max_tenor") = 60.0, py::arg("pillars") = 61)
        .def_static("load_csv", &MarketCurve::load_csv)
        .def("save_csv", &MarketCurve::save_csv)
        .def("discount", &MarketCurve::discount)
        .def("zero_rate", &MarketCurve::zero_rate)
        .def("instantaneous_forward", &MarketCurve::instantaneous_forward)
        .def("max_tenor", &MarketCurve::max_tenor)
        .def("tenors", &MarketCurve::tenors);

    m.def("nelson_siegel_curve", &nelson_siegel_curve, py::arg("beta0"),
          py::arg("beta1"), py::arg("beta2"), py::arg("tau"),
          py::arg("tenors"));

    m.def("v_function", &v_function);
    m.def("a_function", &a_function);
    m.def("zc_price", &zc_price);
    m.def("zc_rate", &zc_rate);
    m.def("fwd_rate", &fwd_rate);
    m.def("expected_zc_rate", &expected_zc_rate);
    m.def("cov_dG", &cov_dG);
    m.def("corr_dG", &corr_dG);
    m.def("cov_matrix", &cov_matrix, py::arg("params"), py::arg("tenors"),
          py::arg("kind"), py::arg("quantity"));

    py::class_<ParamRanges>(m, "ParamRanges")
        .def("midpoint", &ParamRanges::midpoint)
        .def_property_readonly("lo",
                               [](const ParamRanges& r) {
                                   return std::vector<double>(r.lo, r.lo + 5);
                               })
        .def_property_readonly("hi", [](const ParamRanges& r) {
            return std::vector<double>(r.hi, r.hi + 5);
        });

    m.def("extend_reference", &extend_reference, py::arg("reference"),
          py::arg("gamma"));
    m.def("sample_params", &sample_params, py::arg("ranges"), py::arg("n"),
          py::arg("seed"));
    m.def("default_direct_tenors", &default_direct_tenors);

    py::class_<IndirectDataset>(m, "IndirectDataset")
        .def_readonly("features", &IndirectDataset::features)
        .def_readonly("targets", &IndirectDataset::targets)
        .def_readonly("tenors", &IndirectDataset::tenors);
    m.def("build_indirect", &build_indirect, py::arg("params"),
          py::arg("tenors"), py::arg("kind"), py::arg("quantity"));

    py::class_<DirectDataset>(m, "DirectDataset")
        .def_readonly("grids", &DirectDataset::grids)
        .def_readonly("targets", &DirectDataset::targets)
        .def_readonly("tenors", &DirectDataset::tenors)
        .def_readonly("n_steps", &DirectDataset::n_steps)
        .def_readonly("dt", &DirectDataset::dt);
    m.def("build_direct", &build_direct, py::arg("params"), py::arg("curve"),
          py::arg("tenors"), py::arg("n_steps"), py::arg("dt"));

    py::class_<MinMaxScaler>(m, "MinMaxScaler")
        .def(py::init<>())
        .def("fit", &MinMaxScaler::fit)
        .def("transform", &MinMaxScaler::transform)
        .def("inverse", &MinMaxScaler::inverse)
        .def_property_readonly("fitted", &MinMaxScaler::fitted);

    py::class_<ClassicalResult>(m, "ClassicalResult")
        .def_readonly("params", &ClassicalResult::params)
        .def_readonly("ssd", &ClassicalResult::ssd)
        .def_readonly("iterations", &ClassicalResult::iterations)
        .def_readonly("converged", &ClassicalResult::converged);
    m.def("classical_calibrate", &classical_calibrate, py::arg("target"),
          py::arg("tenors"), py::arg("kind"), py::arg("quantity"),
          py::arg("init"), py::arg("bounds"), py::arg("max_iter") = 4000);

    m.def("skill_floor", &skill_floor);

    // checkpoint inference: load a CLI-trained model and predict parameters
    py::class_<Checkpoint>(m, "Checkpoint")
        .def_property_readonly("variant",
                               [](const Checkpoint& c) { return c.variant; })
        .def("predict", [](Checkpoint& c, const Eigen::MatrixXd& features) {
            Eigen::MatrixXd dummy =
                Eigen::MatrixXd::Zero(features.rows(), 5);
            CalibrationReport rep = evaluate(
                c.model, c.kind, features, dummy,
                c.feature_scaler ? &*c.feature_scaler : nullptr,
                c.target_scaler, c.grid_h, c.grid_w);
            return rep.predicted_raw;
        });
    m.def("load_checkpoint", [](const std::string& path) {
        return std::make_unique<Checkpoint>(load_checkpoint(path));
    });
}
