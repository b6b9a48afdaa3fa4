#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hamid/experiments.hpp"
#include "support.hpp"

using namespace hamid;
using namespace hamid::testing;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(ExperimentMode mode = ExperimentMode::SingleIcSymplectic) {
    auto cfg = default_config(mode);
    cfg.data.num_trajectories = std::min(cfg.data.num_trajectories, 2);
    cfg.model.learning_dt = mode == ExperimentMode::MultiIcBayes ? 0.04 : 0.05;
    cfg.mcmc.n_samples = 60;
    cfg.mcmc.burn_in = mode == ExperimentMode::MultiIcBayes ? 0 : 20;
    cfg.mcmc.adapt_start = 20;
    auto& o = cfg.map.optimizer;
    o.max_evaluations = 150;
    o.restarts = 0;
    o.qn_iterations = 2;
    o.polish_max_evaluations = 100;
    cfg.prediction.horizon = 4.0;
    cfg.prediction.train_end = 2.0;
    cfg.prediction.thin = 10;
    cfg.seed = 5;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("hamid_test_" + name);
    fs::remove_all(p);
    return p;
}

Trajectory ramp(int n, double scale) {
    Trajectory t;
    t.times = Eigen::VectorXd::LinSpaced(n + 1, 0.0, n * 0.1);
    t.states = Eigen::MatrixXd::Ones(n + 1, 2) * scale;
    return t;
}

}  // namespace

TEST_CASE("data count contract") {
    auto cfg = default_config(ExperimentMode::SingleIcSymplectic);
    auto data = generate_data(cfg);
    REQUIRE(data.trajectories.size() == 1);
    CHECK(data.trajectories[0].observations.rows() == 21);
    CHECK(data.trajectories[0].times(20) == doctest::Approx(8.0));
    CHECK(cfg.steps_per_obs() == 8);
    CHECK(default_config(ExperimentMode::MultiIcBayes).steps_per_obs() == 40);
    CHECK(data.trajectories[0].clean.row(0).transpose() == reference_ic().to_vector());
}

TEST_CASE("noise bounds over a million draws") {
    std::mt19937_64 rng(1);
    Eigen::MatrixXd clean = Eigen::MatrixXd::Constant(250000, 4, -0.3);
    clean.col(1).setConstant(2.0);

    auto rel = apply_noise(clean, {NoiseKind::RelativeUniform, 0.1, 0}, rng);
    const Eigen::ArrayXXd ratio = ((rel - clean).array() / clean.array()).abs();
    CHECK(ratio.maxCoeff() <= 0.1);
    CHECK(ratio.maxCoeff() > 0.099);

    auto gauss = apply_noise(clean, {NoiseKind::AdditiveGaussian, 0.01, 0}, rng);
    const Eigen::ArrayXd e = (gauss - clean).reshaped().array();
    const double sd = std::sqrt((e - e.mean()).square().sum() / (e.size() - 1.0));
    CHECK(sd == doctest::Approx(0.01).epsilon(0.01));

    CHECK_THROWS_AS(NoiseSpec({NoiseKind::RelativeUniform, 1.5, 0}).validate(), ConfigError);
    CHECK_THROWS_AS(NoiseSpec({NoiseKind::AdditiveGaussian, -1.0, 0}).validate(), ConfigError);
}

TEST_CASE("relative error and horizon") {
    auto truth = ramp(10, 1.0);
    CHECK(relative_error(truth.states, truth.states, 1, 10) == 0.0);
    auto off = truth;
    off.states *= 1.05;
    CHECK(relative_error(off.states, truth.states, 1, 10) == doctest::Approx(0.05));
    CHECK(error_horizon(off, truth, 0.1) == doctest::Approx(1.0));

    // Error jumps past 10% after step 4; the prefix error crosses later.
    auto jump = truth;
    jump.states.bottomRows(6) *= 1.5;
    const double h = error_horizon(jump, truth, 0.1);
    CHECK(h == doctest::Approx(0.4));
    CHECK(error_horizon(ramp(10, 2.0), truth, 0.1) == 0.0);

    // A truncated (diverged) estimate caps the horizon.
    Trajectory cut{truth.times.head(4), truth.states.topRows(4)};
    CHECK(error_horizon(cut, truth, 0.1) == doctest::Approx(0.3));
    CHECK_THROWS(relative_error(truth.states, truth.states, 0, 3));
    CHECK_THROWS(relative_error(truth.states, truth.states, 3, 11));
}

TEST_CASE("config json round trip and validation") {
    auto cfg = default_config(ExperimentMode::MultiIcBayes);
    cfg.seed = 77;
    cfg.prior.laplace_scale = 0.5;
    cfg.mcmc.dr_mode = DrScaleMode::StdDev;
    auto j = config_to_json(cfg);
    auto back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.model.basis == BasisKind::Legendre);
    CHECK(back.seed == 77);

    CHECK_THROWS_AS(config_from_json({{"mode", "nope"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"model", {{"learning_dt", 0.03}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"mcmc", {{"burn_in", 30000}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"data", {{"noise", {{"kind", "pink"}}}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"map", {{"start", "random"}}}}), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/hamid.json"), std::ios_base::failure);
}

TEST_CASE("seed streams are distinct") {
    CHECK(derive_seed(1, 1) != derive_seed(1, 2));
    CHECK(derive_seed(1, 1) != derive_seed(2, 1));
    CHECK(derive_seed(9, 3) == derive_seed(9, 3));
}

TEST_CASE("dataset round trip") {
    auto cfg = tiny_config(ExperimentMode::MultiIcBayes);
    auto data = generate_data(cfg);
    CHECK(data.trajectories.size() == 2);
    CHECK(data.trajectories[0].x0 != data.trajectories[1].x0);
    auto dir = scratch("dataset");
    write_dataset(dir.string(), data);
    auto back = read_dataset(dir.string());
    REQUIRE(back.trajectories.size() == 2);
    CHECK(back.trajectories[1].observations == data.trajectories[1].observations);
    CHECK(back.trajectories[1].x0 == data.trajectories[1].x0);
    CHECK(back.noise.kind == NoiseKind::RelativeUniform);
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_dataset(dir.string()), std::ios_base::failure);
}

TEST_CASE("diverging initial conditions") {
    auto cfg = tiny_config();
    cfg.data.ic_mean << 3.0, 3.0, 3.0, 3.0;
    CHECK_THROWS_AS(generate_data(cfg), DivergenceError);

    // Sampled ICs around a far-out mean get redrawn until they stay bounded.
    auto multi = tiny_config(ExperimentMode::MultiIcBayes);
    multi.data.ic_std = 0.25;
    auto data = generate_data(multi);
    CHECK(data.trajectories.size() == 2);
    CHECK(data.resampled_ics > 0);
    multi.data.max_resample = 0;
    multi.data.ic_mean << 1.5, 1.5, 1.5, 1.5;
    CHECK_THROWS_AS(generate_data(multi), DivergenceError);
}

TEST_CASE("learned Hamiltonian error of the truth is zero") {
    BasisDictionary dict(BasisKind::Monomial, 4, 3);
    HamiltonianModel model(dict, cherry_coefficients(dict));
    auto rep = hamiltonian_error_report(model, CherryHamiltonian{}, reference_ic(), 1.0, 0.01, 10.0);
    CHECK(std::abs(rep.error) <= 1e-15);
    CHECK(rep.h_true == doctest::Approx(-0.00775));
}

TEST_CASE("LS-only pipeline") {
    auto cfg = tiny_config(ExperimentMode::MultiIcLs);
    auto r = run_experiment(cfg);
    CHECK(r.ls_model);
    CHECK_FALSE(r.chain);
    CHECK(r.metrics.contains("horizon_10pct"));
    CHECK(r.metrics["acceptance_rate"].is_null());
}

TEST_CASE("pipeline consistency and determinism") {
    auto cfg = tiny_config();
    auto a = scratch("bundle_a"), b = scratch("bundle_b");
    auto r = run_experiment(cfg, a.string());
    run_experiment(cfg, b.string());

    auto direct = map_trajectory(*r.theta_map, cfg.skeleton().dictionary,
                                 PhaseState::from_vector(cfg.prediction.test_ic), 400, 0.01, 10.0);
    CHECK(direct.trajectory.states == r.map_prediction->trajectory.states);

    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++files;
        auto other = b / fs::relative(e.path(), a);
        REQUIRE(fs::exists(other));
        CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().string());
    }
    CHECK(files >= 13);

    auto metrics = nlohmann::json::parse(slurp(a / "metrics.json"));
    CHECK(metrics.contains("train_error"));
    CHECK(metrics["map"].contains("test_error"));
    auto chain = read_chain_csv((a / "chain.csv").string());
    CHECK(chain.samples.rows() == 40);
    auto theta = parameters_from_json(nlohmann::json::parse(slurp(a / "map.json")));
    CHECK(theta.theta_psi == r.theta_map->theta_psi);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("a different seed changes the data") {
    auto cfg = tiny_config();
    auto d1 = generate_data(cfg);
    cfg.seed = 6;
    auto d2 = generate_data(cfg);
    CHECK(d1.trajectories[0].observations != d2.trajectories[0].observations);
    CHECK(d1.trajectories[0].clean == d2.trajectories[0].clean);
}

TEST_CASE("single-sample chain through the pipeline") {
    auto cfg = tiny_config();
    cfg.mcmc.n_samples = 1;
    cfg.mcmc.burn_in = 0;
    auto r = run_experiment(cfg);
    REQUIRE(r.predictive);
    CHECK(r.chain->samples.rows() == 1);
    auto direct = map_trajectory(ParameterVector::unflatten(r.chain->samples.row(0).transpose()),
                                 cfg.skeleton().dictionary, PhaseState::from_vector(cfg.prediction.test_ic), 400,
                                 0.01, 10.0);
    if (!direct.diverged_at) CHECK(r.predictive->mean.states == direct.trajectory.states);
}
