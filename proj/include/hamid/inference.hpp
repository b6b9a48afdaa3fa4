#ifndef HAMID_INFERENCE_HPP
#define HAMID_INFERENCE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hamid/filtering.hpp"
#include "hamid/integrators.hpp"
#include "hamid/parameters.hpp"
#include "json.hpp"

namespace hamid {

/// Unnormalized log density over a flat parameter vector; -inf is allowed.
using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct PriorSpec {
    double laplace_scale = 1.0;
    double halfnormal_scale_sigma = 1.0;
    double halfnormal_scale_gamma = 1.0;

    void validate() const;
};

/// Sum of Laplace(0, b) log densities.
double laplace_log_prior(const Eigen::VectorXd& theta_psi, double b);
/// log of the half-normal density sqrt(2 / pi) / s * exp(-x^2 / (2 s^2)), x >= 0.
double halfnormal_log_density(double x, double scale);

/// Laplace part on theta_psi plus half-normal parts on theta_sigma and
/// theta_gamma. The variances live in log space, so each half-normal term
/// carries the log|d theta / d log theta| = log theta Jacobian.
double log_prior(const ParameterVector& theta, const PriorSpec& prior);

/// Likelihood times prior for a set of observed trajectories.
class Posterior {
public:
    Posterior(std::vector<Eigen::MatrixXd> datasets, ModelSkeleton skeleton, PriorSpec prior, UkfConfig ukf);

    double log_likelihood(const ParameterVector& theta) const;
    double log_prior(const ParameterVector& theta) const;
    double log_posterior(const ParameterVector& theta) const;
    double operator()(const Eigen::VectorXd& flat) const;

    /// Callback referencing this object; the Posterior must outlive it.
    LogDensity density() const;

    Eigen::Index dim() const { return static_cast<Eigen::Index>(skeleton_.dictionary.size()) + 2; }
    const ModelSkeleton& skeleton() const { return skeleton_; }
    const std::vector<Eigen::MatrixXd>& datasets() const { return datasets_; }
    const PriorSpec& prior() const { return prior_; }
    const UkfConfig& ukf() const { return ukf_; }

private:
    std::vector<Eigen::MatrixXd> datasets_;
    ModelSkeleton skeleton_;
    PriorSpec prior_;
    UkfConfig ukf_;
};

double log_posterior(const ParameterVector& theta, const std::vector<Eigen::MatrixXd>& datasets,
                     const PriorSpec& prior, const ModelSkeleton& skeleton, const UkfConfig& ukf);

struct OptimizerSettings {
    int max_evaluations = 5000;
    /// Simplex restarts from the incumbent after the first run converges.
    int restarts = 3;
    /// Initial simplex edge along coordinate i: max(relative_step |x_i|, min_step).
    double relative_step = 0.1;
    double min_step = 0.01;
    double ftol = 1e-10;
    /// BFGS refinement with central-difference gradients after the simplex.
    int qn_iterations = 300;
    double qn_fd_step = 1e-6;
    double qn_gtol = 1e-6;
    double qn_first_step = 1e-2;
    /// Coordinate pattern search after the simplex; steps shrink by 10x from
    /// polish_initial_step down to polish_step.
    double polish_initial_step = 1e-3;
    double polish_step = 1e-6;
    double polish_tol = 1e-8;
    int polish_max_evaluations = 20000;
};

struct MapResult {
    Eigen::VectorXd theta;
    double log_post = 0.0;
    double start_log_post = 0.0;
    /// Best log density seen after each evaluation.
    std::vector<double> best_trace;
    int evaluations = 0;
    bool polish_converged = false;
};

/// Maximization in three stages: adaptive Nelder-Mead with restarts, BFGS
/// with finite-difference gradients, then a coordinate pattern search whose
/// last stage guarantees that no single coordinate move of polish_step
/// improves by more than polish_tol (unless the evaluation budget runs out). Throws if the start is not finite.
MapResult find_map(const LogDensity& target, const Eigen::VectorXd& start, const OptimizerSettings& settings = {});

enum class DrScaleMode {
    Covariance,  // second-stage covariance = gamma * C
    StdDev,      // second-stage covariance = gamma^2 * C
};

struct McmcConfig {
    int n_samples = 20000;
    int burn_in = 10000;
    int adapt_start = 200;
    double dr_scale = 0.01;
    DrScaleMode dr_mode = DrScaleMode::Covariance;
    double jitter = 1e-10;
    Eigen::MatrixXd init_proposal_cov;
    std::uint64_t rng_seed = 0;
    bool adapt = true;
    bool delayed_rejection = true;
    /// Factor on the empirical covariance; defaults to 2.38^2 / dim.
    std::optional<double> adapt_scale;

    void validate(Eigen::Index dim) const;
    double scale_for(Eigen::Index dim) const;
};

/// Diagonal start: 1e-4 on theta_psi, 1e-2 on the two log variances.
Eigen::MatrixXd default_proposal_cov(Eigen::Index n_psi);

struct PosteriorChain {
    Eigen::MatrixXd samples;   // retained rows (after burn-in)
    Eigen::VectorXd log_posts;
    double acceptance_rate = 0.0;
    Eigen::VectorXd map_point;  // best state visited, including burn-in
    double map_log_post = 0.0;
    int burn_in = 0;
    int n_total = 0;
    std::size_t evaluations = 0;
    std::size_t stage1_accepts = 0;
    std::size_t stage2_attempts = 0;
    std::size_t stage2_accepts = 0;
    Eigen::MatrixXd final_proposal_cov;
};

/// Metropolis acceptance probability min(1, exp(lp_y - lp_x)).
double first_stage_acceptance(double lp_x, double lp_y);

/// Delayed-rejection adaptive Metropolis. Sample 0 is `init`; each further
/// iteration draws from N(x, C), and on rejection from N(x, C2) with the
/// second-stage acceptance ratio. From adapt_start on, C is the scaled
/// empirical covariance of all previous states plus jitter on the diagonal.
PosteriorChain dram_sample(const LogDensity& target, const Eigen::VectorXd& init, const McmcConfig& cfg);

/// Propagates the learned Hamiltonian with the Tao scheme. A divergent run
/// is truncated and reports the step index.
PropagationResult map_trajectory(const ParameterVector& theta_map, const BasisDictionary& dictionary,
                                 const PhaseState& x0, std::size_t n_steps, double dt, double omega);

struct PredictiveResult {
    Trajectory mean;
    std::vector<Trajectory> ensemble;
    std::vector<Eigen::Index> sample_indices;
    std::size_t diverged_count = 0;
};

/// Pointwise mean over samples 0, thin, 2 thin, ... of the retained chain.
/// Samples that diverge anywhere in the horizon are excluded and counted.
PredictiveResult posterior_predictive_mean(const PosteriorChain& chain, const BasisDictionary& dictionary,
                                           const PhaseState& x0, std::size_t n_steps, int thin, double dt,
                                           double omega);

void write_chain_csv(const std::string& path, const PosteriorChain& chain, const std::vector<std::string>& names);
/// Reads samples and log_posts back; other chain fields are left default.
PosteriorChain read_chain_csv(const std::string& path);

nlohmann::json mcmc_config_to_json(const McmcConfig& cfg);
nlohmann::json chain_sidecar_json(const McmcConfig& cfg, const PosteriorChain& chain);

}  // namespace hamid

#endif  // HAMID_INFERENCE_HPP
