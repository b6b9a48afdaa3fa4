#ifndef HAMID_FILTERING_HPP
#define HAMID_FILTERING_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hamid/parameters.hpp"

namespace hamid {

struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Sigma = theta_sigma I, Gamma = theta_gamma I (positive scale).
struct NoiseParams {
    double theta_sigma = 0.0;
    double theta_gamma = 0.0;
};

/// Unscented transform spread. kappa defaults to 3 - n so that
/// lambda = alpha^2 (n + kappa) - n = 3 - n for alpha = 1.
struct UkfConfig {
    double alpha = 1.0;
    double beta = 0.0;
    std::optional<double> kappa;
    /// Added to the diagonal once when a Cholesky factorization fails.
    double jitter = 1e-10;

    double lambda(Eigen::Index n) const;
    void validate(Eigen::Index n) const;
};

struct SigmaPoints {
    Eigen::MatrixXd points;  // n x (2n + 1), column 0 is the mean
    Eigen::VectorXd wm;
    Eigen::VectorXd wc;
};

/// nullopt when the scaled covariance is not positive definite even after
/// one jitter retry.
std::optional<SigmaPoints> sigma_points(const GaussianBelief& belief, const UkfConfig& cfg);

/// One propagator step applied in place; false signals divergence.
using TransitionFn = std::function<bool(std::span<double>)>;

struct ObservationModel {
    Eigen::Index output_dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> apply;

    static ObservationModel identity(Eigen::Index n);
};

std::optional<GaussianBelief> ukf_predict(const GaussianBelief& belief, const TransitionFn& transition,
                                          double theta_sigma, const UkfConfig& cfg);

struct UkfUpdate {
    GaussianBelief belief;
    double log_lik = 0.0;
    Eigen::VectorXd innovation;
    Eigen::MatrixXd innovation_cov;
};

std::optional<UkfUpdate> ukf_update(const GaussianBelief& predicted, const Eigen::VectorXd& y,
                                    const ObservationModel& obs, double theta_gamma, const UkfConfig& cfg);

struct UkfStep {
    GaussianBelief belief;
    double log_lik = 0.0;
};

/// Predict through one transition plus Sigma, then update on y. nullopt is
/// the likelihood-invalid signal.
std::optional<UkfStep> ukf_step(const GaussianBelief& belief, const Eigen::VectorXd& y, const TransitionFn& transition,
                                const ObservationModel& obs, const NoiseParams& noise, const UkfConfig& cfg);

struct InnovationRecord {
    Eigen::Index obs_index = 0;
    Eigen::VectorXd innovation;
    Eigen::VectorXd innovation_var;
    double log_lik = 0.0;
};

/// Sum of log innovation densities over rows 1..n of `observations`.
/// The belief starts at N(y_0, Gamma), and `steps_per_obs` predict steps
/// (each adding Sigma) separate consecutive updates. Returns -inf on any
/// invalid step and throws on an empty observation matrix.
double log_marginal_likelihood(const Eigen::MatrixXd& observations, int steps_per_obs, const TransitionFn& transition,
                               const ObservationModel& obs, const NoiseParams& noise, const UkfConfig& cfg,
                               std::vector<InnovationRecord>* diagnostics = nullptr);

/// Same recursion from an explicit initial belief; every row of
/// `observations` is used as a measurement.
double log_marginal_likelihood(const GaussianBelief& initial, const Eigen::MatrixXd& observations, int steps_per_obs,
                               const TransitionFn& transition, const ObservationModel& obs, const NoiseParams& noise,
                               const UkfConfig& cfg, std::vector<InnovationRecord>* diagnostics = nullptr);

double log_marginal_likelihood(const Eigen::MatrixXd& observations, const ParameterVector& params,
                               const ModelSkeleton& skeleton, const UkfConfig& cfg,
                               std::vector<InnovationRecord>* diagnostics = nullptr);

/// Per-trajectory terms are sorted before summation so the result does not
/// depend on the order trajectories are supplied.
double multi_trajectory_log_likelihood(const std::vector<Eigen::MatrixXd>& datasets, const ParameterVector& params,
                                       const ModelSkeleton& skeleton, const UkfConfig& cfg);

void write_innovations_csv(const std::string& path, const std::vector<InnovationRecord>& records);

}  // namespace hamid

#endif  // HAMID_FILTERING_HPP
