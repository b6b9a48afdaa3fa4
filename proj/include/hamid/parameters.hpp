#ifndef HAMID_PARAMETERS_HPP
#define HAMID_PARAMETERS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hamid/hamiltonian.hpp"
#include "hamid/integrators.hpp"

namespace hamid {

/// theta = (theta_psi, log theta_sigma, log theta_gamma). The variances are
/// stored in log space so samplers and optimizers work unconstrained.
struct ParameterVector {
    Eigen::VectorXd theta_psi;
    double log_theta_sigma = 0.0;
    double log_theta_gamma = 0.0;

    double theta_sigma() const;
    double theta_gamma() const;
    Eigen::Index dim() const { return theta_psi.size() + 2; }

    Eigen::VectorXd flatten() const;
    static ParameterVector unflatten(const Eigen::VectorXd& flat);
    /// Variances given on the positive scale.
    static ParameterVector from_variances(Eigen::VectorXd theta_psi, double theta_sigma, double theta_gamma);
};

enum class SchemeKind { Tao, Rk2 };

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(const std::string& s);

/// Everything about the learned model except its parameter values: the
/// dictionary, the integrator used inside the filter, and how many
/// integrator steps separate consecutive observations.
struct ModelSkeleton {
    BasisDictionary dictionary;
    SchemeKind scheme = SchemeKind::Tao;
    double learning_dt = 0.05;
    double omega = 10.0;
    int steps_per_obs = 1;

    Scheme make_scheme() const;
    Propagator make_propagator(const Eigen::VectorXd& theta_psi) const;
    std::vector<std::string> parameter_names() const;
};

}  // namespace hamid

#endif  // HAMID_PARAMETERS_HPP
