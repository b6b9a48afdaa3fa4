#ifndef HAMID_EXPERIMENTS_HPP
#define HAMID_EXPERIMENTS_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hamid/filtering.hpp"
#include "hamid/hamiltonian.hpp"
#include "hamid/inference.hpp"
#include "hamid/integrators.hpp"
#include "hamid/ls_baseline.hpp"
#include "hamid/parameters.hpp"
#include "json.hpp"

namespace hamid {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class NoiseKind {
    AdditiveGaussian,  // y = x + sigma z,  z ~ N(0, 1)
    RelativeUniform,   // y = x (1 + u),    u ~ U[-rho, rho]
};

struct NoiseSpec {
    NoiseKind kind = NoiseKind::AdditiveGaussian;
    double level = 0.0;  // sigma or rho
    std::uint64_t seed = 0;

    void validate() const;
};

Eigen::MatrixXd apply_noise(const Eigen::MatrixXd& clean, const NoiseSpec& noise, std::mt19937_64& rng);

struct ObservedTrajectory {
    Eigen::VectorXd x0;
    Eigen::VectorXd times;
    Eigen::MatrixXd clean;         // subsampled truth, (n+1) x 2d
    Eigen::MatrixXd observations;  // clean plus noise
};

struct TrajectoryDataset {
    std::vector<ObservedTrajectory> trajectories;
    NoiseSpec noise;
    double obs_interval = 0.4;
    double data_dt = 0.01;
    std::uint64_t ic_seed = 0;
    int resampled_ics = 0;

    std::vector<Eigen::MatrixXd> observation_matrices() const;
};

enum class ExperimentMode { SingleIcSymplectic, SingleIcRk2, MultiIcBayes, MultiIcLs };

std::string to_string(ExperimentMode mode);
ExperimentMode experiment_mode_from_string(const std::string& s);

struct DataSpec {
    double dt = 0.01;
    double obs_interval = 0.4;
    double horizon = 8.0;
    double omega = 10.0;
    int num_trajectories = 1;
    /// Draw ICs from N(ic_mean, ic_std^2 I); otherwise every trajectory
    /// starts at ic_mean.
    bool sample_ics = false;
    Eigen::VectorXd ic_mean;
    double ic_std = 0.05;
    bool resample_diverged = true;
    int max_resample = 100;
    NoiseSpec noise;
};

struct ModelSpec {
    BasisKind basis = BasisKind::Monomial;
    int max_total_degree = 3;
    SchemeKind scheme = SchemeKind::Tao;
    double learning_dt = 0.05;
    double omega = 10.0;
};

struct MapSpec {
    bool ls_start = true;
    double initial_variance = 1e-6;
    double ls_ridge = 0.0;
    OptimizerSettings optimizer;
};

struct PredictionSpec {
    double dt = 0.01;
    double horizon = 16.0;
    double omega = 10.0;
    Eigen::VectorXd test_ic;
    int thin = 200;
    /// Training window is (0, train_end]; the test window has equal length.
    double train_end = 8.0;
    double error_threshold = 0.10;
};

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::SingleIcSymplectic;
    DataSpec data;
    ModelSpec model;
    UkfConfig ukf;
    PriorSpec prior;
    MapSpec map;
    McmcConfig mcmc;
    PredictionSpec prediction;
    std::uint64_t seed = 1;

    void validate() const;
    ModelSkeleton skeleton() const;
    int steps_per_obs() const;
    int data_stride() const;
};

/// Settings for the two experiments on the Cherry problem. `long_chain`
/// raises the single-IC chain to 2e5 samples with 1e5 burn-in.
ExperimentConfig default_config(ExperimentMode mode, bool long_chain = false);

/// Keys missing from `j` keep the defaults of default_config(mode). Throws
/// ConfigError when the result fails validate().
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

/// splitmix64 stream derivation so each stage gets an independent seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Integrates the Cherry truth with the Tao scheme, subsamples and adds
/// noise. Throws DivergenceError when an IC keeps diverging after
/// max_resample redraws.
TrajectoryDataset generate_data(const ExperimentConfig& cfg);

void write_dataset(const std::string& dir, const TrajectoryDataset& data);
TrajectoryDataset read_dataset(const std::string& dir);

/// |est_{i:j} - truth_{i:j}|_F / |truth_{i:j}|_F over rows i..j (row 0 is the
/// IC, so indices are 1-based time steps).
double relative_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth, Eigen::Index i, Eigen::Index j);

/// Largest t_k with e(1:m) <= threshold for every m <= k; 0 when the first
/// step already exceeds it. A truncated (diverged) estimate caps the horizon.
double error_horizon(const Trajectory& estimate, const Trajectory& truth, double threshold);

struct HamiltonianErrorReport {
    double h_true = 0.0;
    double h_learned = 0.0;
    double error = 0.0;
    /// Learned Hamiltonian along its own predicted trajectory.
    double h_learned_min = 0.0;
    double h_learned_max = 0.0;
    /// Learned value at x0 for each thinned posterior sample.
    std::vector<double> sample_values;

    nlohmann::json to_json() const;
};

HamiltonianErrorReport hamiltonian_error_report(const HamiltonianModel& model, const Hamiltonian& truth,
                                                const PhaseState& x0, double horizon, double dt, double omega,
                                                const PosteriorChain* chain = nullptr, int thin = 1);

struct ExperimentResult {
    ExperimentConfig config;
    TrajectoryDataset data;
    Trajectory truth;
    std::optional<HamiltonianModel> ls_model;
    std::optional<PropagationResult> ls_prediction;
    std::optional<MapResult> map;
    std::optional<PosteriorChain> chain;
    std::optional<ParameterVector> theta_map;
    std::optional<PropagationResult> map_prediction;
    std::optional<PredictiveResult> predictive;
    std::string start_kind;
    nlohmann::json metrics;
};

/// Window errors of a prediction against truth on the prediction grid.
struct WindowErrors {
    double train = 0.0;
    double test = 0.0;
    double horizon = 0.0;
};
WindowErrors window_errors(const Trajectory& estimate, const Trajectory& truth, const PredictionSpec& spec);

/// Pipeline stages shared by run_experiment and the CLI.
HamiltonianModel ls_stage(const ExperimentConfig& cfg, const TrajectoryDataset& data);

struct MapStage {
    ParameterVector start;
    std::string start_kind;  // "ls", "zero" or "zero-fallback"
    MapResult result;
};
/// The LS model seeds theta_psi when map.start is "ls" and its posterior is
/// finite; otherwise the zero vector is used.
MapStage map_stage(const ExperimentConfig& cfg, const TrajectoryDataset& data, const HamiltonianModel& ls);

/// DRAM from `init` with the chain seed derived from cfg.seed.
PosteriorChain sample_stage(const ExperimentConfig& cfg, const TrajectoryDataset& data, const Eigen::VectorXd& init);
McmcConfig effective_mcmc_config(const ExperimentConfig& cfg);

/// Truth on the prediction grid from the test IC.
Trajectory truth_trajectory(const ExperimentConfig& cfg);
/// Learned model propagated with the Tao scheme on the prediction grid.
PropagationResult predict_model(const ExperimentConfig& cfg, const HamiltonianModel& model);

/// Bayesian modes: generate, LS warm start, MAP, DRAM, predict. LS mode:
/// generate, finite differences, LS, predict. Every learned model is
/// predicted with the Tao scheme. Writes the result bundle when out_dir is
/// non-empty.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "");

/// Long format: one row per (sample, time) with header `sample,t,q..,p..`.
void write_ensemble_csv(const std::string& path, const PredictiveResult& pred);

void write_result_bundle(const std::string& dir, const ExperimentResult& result);

nlohmann::json parameters_to_json(const ParameterVector& theta, const BasisDictionary& dictionary);
ParameterVector parameters_from_json(const nlohmann::json& j);

}  // namespace hamid

#endif  // HAMID_EXPERIMENTS_HPP
