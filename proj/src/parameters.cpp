#include "hamid/parameters.hpp"

#include <cmath>
#include <memory>

namespace hamid {

double ParameterVector::theta_sigma() const { return std::exp(log_theta_sigma); }
double ParameterVector::theta_gamma() const { return std::exp(log_theta_gamma); }

Eigen::VectorXd ParameterVector::flatten() const {
    Eigen::VectorXd flat(dim());
    flat << theta_psi, log_theta_sigma, log_theta_gamma;
    return flat;
}

ParameterVector ParameterVector::unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() < 3) throw DimensionError("ParameterVector: flat vector needs at least 3 entries");
    const Eigen::Index n = flat.size() - 2;
    return {flat.head(n), flat[n], flat[n + 1]};
}

ParameterVector ParameterVector::from_variances(Eigen::VectorXd theta_psi, double theta_sigma, double theta_gamma) {
    if (!(theta_sigma > 0.0) || !(theta_gamma > 0.0))
        throw std::invalid_argument("ParameterVector: variances must be > 0");
    return {std::move(theta_psi), std::log(theta_sigma), std::log(theta_gamma)};
}

std::string to_string(SchemeKind kind) { return kind == SchemeKind::Tao ? "tao" : "rk2"; }

SchemeKind scheme_kind_from_string(const std::string& s) {
    if (s == "tao" || s == "symplectic") return SchemeKind::Tao;
    if (s == "rk2") return SchemeKind::Rk2;
    throw std::invalid_argument("unknown integrator scheme '" + s + "'");
}

Scheme ModelSkeleton::make_scheme() const {
    if (scheme == SchemeKind::Tao) return TaoScheme{TaoConfig{omega, learning_dt}};
    return Rk2Scheme{learning_dt};
}

Propagator ModelSkeleton::make_propagator(const Eigen::VectorXd& theta_psi) const {
    auto model = std::make_shared<const HamiltonianModel>(dictionary, theta_psi);
    return Propagator(std::shared_ptr<const Hamiltonian>(std::move(model)), make_scheme());
}

std::vector<std::string> ModelSkeleton::parameter_names() const {
    std::vector<std::string> names;
    names.reserve(dictionary.size() + 2);
    for (std::size_t i = 0; i < dictionary.size(); ++i) names.push_back(dictionary.term_name(i));
    names.emplace_back("log_theta_sigma");
    names.emplace_back("log_theta_gamma");
    return names;
}

}  // namespace hamid
