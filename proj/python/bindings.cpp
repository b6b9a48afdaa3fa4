#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hamid/experiments.hpp"
#include "hamid/filtering.hpp"
#include "hamid/hamiltonian.hpp"
#include "hamid/integrators.hpp"
#include "hamid/ls_baseline.hpp"

namespace py = pybind11;
using namespace hamid;

namespace {

PhaseState state_from(const Eigen::VectorXd& x) { return PhaseState::from_vector(x); }

Scheme make_scheme(const std::string& scheme, double dt, double omega) {
    if (scheme_kind_from_string(scheme) == SchemeKind::Tao) return TaoScheme{TaoConfig{omega, dt}};
    return Rk2Scheme{dt};
}

py::tuple trajectory_tuple(const Trajectory& t) { return py::make_tuple(t.times, t.states); }

// JSON crosses the boundary as text; the Python side decodes it.
ExperimentConfig config_from_text(const std::string& text) { return config_from_json(nlohmann::json::parse(text)); }

}  // namespace

PYBIND11_MODULE(_hamid, m) {
    m.doc() = "Hamiltonian identification core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

    m.def("cherry_eval", [](const Eigen::VectorXd& x) { return cherry_eval(state_from(x)); }, py::arg("x"));
    m.def("cherry_gradient", [](const Eigen::VectorXd& x) { return cherry_gradient(state_from(x)); }, py::arg("x"));
    m.def("dictionary_size", &dictionary_size, py::arg("state_dim"), py::arg("max_total_degree"));

    py::class_<BasisDictionary>(m, "BasisDictionary")
        .def(py::init([](const std::string& kind, int state_dim, int degree) {
                 return BasisDictionary(basis_kind_from_string(kind), state_dim, degree);
             }),
             py::arg("kind"), py::arg("state_dim"), py::arg("max_total_degree"))
        .def("__len__", &BasisDictionary::size)
        .def("term_name", &BasisDictionary::term_name)
        .def("multi_indices", &BasisDictionary::multi_indices)
        .def("evaluate", [](const BasisDictionary& d, const Eigen::VectorXd& x) {
            Eigen::VectorXd phi(d.size());
            d.evaluate(as_span(x), as_span(phi));
            return phi;
        });

    py::class_<HamiltonianModel>(m, "HamiltonianModel")
        .def(py::init<BasisDictionary, Eigen::VectorXd>(), py::arg("dictionary"), py::arg("coefficients"))
        .def_property_readonly("coefficients", &HamiltonianModel::coefficients)
        .def_property_readonly("dictionary", &HamiltonianModel::dictionary)
        .def("value", [](const HamiltonianModel& h, const Eigen::VectorXd& x) { return eval_model(h, state_from(x)); })
        .def("gradient",
             [](const HamiltonianModel& h, const Eigen::VectorXd& x) { return eval_model_gradient(h, state_from(x)); })
        .def("to_json", [](const HamiltonianModel& h) { return model_to_json(h).dump(); });

    m.def("cherry_coefficients", &cherry_coefficients, py::arg("dictionary"));

    m.def(
        "propagate_cherry",
        [](const Eigen::VectorXd& x0, std::size_t n_steps, double dt, const std::string& scheme, double omega) {
            Propagator p(std::make_shared<CherryHamiltonian>(), make_scheme(scheme, dt, omega));
            return trajectory_tuple(p.propagate(state_from(x0), n_steps));
        },
        py::arg("x0"), py::arg("n_steps"), py::arg("dt"), py::arg("scheme") = "tao", py::arg("omega") = 10.0,
        "Returns (times, states).");
    m.def(
        "propagate_model",
        [](const HamiltonianModel& h, const Eigen::VectorXd& x0, std::size_t n_steps, double dt,
           const std::string& scheme, double omega) {
            Propagator p(std::make_shared<HamiltonianModel>(h), make_scheme(scheme, dt, omega));
            return trajectory_tuple(p.propagate(state_from(x0), n_steps));
        },
        py::arg("model"), py::arg("x0"), py::arg("n_steps"), py::arg("dt"), py::arg("scheme") = "tao",
        py::arg("omega") = 10.0);

    m.def(
        "fit_ls",
        [](const std::vector<Eigen::MatrixXd>& trajectories, double h, const BasisDictionary& dict, double ridge) {
            return fit_ls(trajectories, h, dict, ridge);
        },
        py::arg("trajectories"), py::arg("h"), py::arg("dictionary"), py::arg("ridge") = 0.0);

    m.def(
        "log_likelihood",
        [](const std::vector<Eigen::MatrixXd>& datasets, const Eigen::VectorXd& theta_psi, double theta_sigma,
           double theta_gamma, const BasisDictionary& dict, const std::string& scheme, double learning_dt,
           int steps_per_obs, double omega) {
            ModelSkeleton sk{dict, scheme_kind_from_string(scheme), learning_dt, omega, steps_per_obs};
            return multi_trajectory_log_likelihood(
                datasets, ParameterVector::from_variances(theta_psi, theta_sigma, theta_gamma), sk, UkfConfig{});
        },
        py::arg("datasets"), py::arg("theta_psi"), py::arg("theta_sigma"), py::arg("theta_gamma"),
        py::arg("dictionary"), py::arg("scheme") = "tao", py::arg("learning_dt") = 0.05, py::arg("steps_per_obs") = 8,
        py::arg("omega") = 10.0);

    m.def(
        "default_config",
        [](const std::string& mode, bool long_chain) {
            return config_to_json(default_config(experiment_mode_from_string(mode), long_chain)).dump();
        },
        py::arg("mode"), py::arg("long_chain") = false);

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& out_dir) {
            const auto cfg = config_from_text(config_json);
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(cfg, out_dir);
            }
            return r.metrics.dump();
        },
        py::arg("config_json"), py::arg("out_dir") = "");
}
