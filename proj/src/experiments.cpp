#include "hamid/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace hamid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd cherry_test_ic() {
    Eigen::VectorXd x(4);
    x << 0.15, 0.1, -0.05, 0.1;
    return x;
}

// Rounds ratio a / b to an integer and checks it really is one.
int integer_ratio(double a, double b, const char* what) {
    const double r = a / b;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, n))
        throw ConfigError(std::string(what) + ": ratio " + std::to_string(r) + " is not a positive integer");
    return static_cast<int>(n);
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string noise_kind_name(NoiseKind k) {
    return k == NoiseKind::AdditiveGaussian ? "additive_gaussian" : "relative_uniform";
}

NoiseKind noise_kind_from(const std::string& s) {
    if (s == "additive_gaussian" || s == "gaussian") return NoiseKind::AdditiveGaussian;
    if (s == "relative_uniform" || s == "relative") return NoiseKind::RelativeUniform;
    throw ConfigError("unknown noise kind '" + s + "'");
}

json noise_json(const NoiseSpec& n) {
    return {{"kind", noise_kind_name(n.kind)}, {"level", n.level}, {"seed", n.seed}};
}

NoiseSpec noise_from(const json& j, NoiseSpec n) {
    if (j.contains("kind")) n.kind = noise_kind_from(j.at("kind").get<std::string>());
    n.level = j.value("level", n.level);
    n.seed = j.value("seed", n.seed);
    return n;
}

Trajectory subsample(const Trajectory& t, int stride) {
    const Eigen::Index n = (t.size() - 1) / stride + 1;
    Trajectory out{Eigen::VectorXd(n), Eigen::MatrixXd(n, t.state_dim())};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.times(k) = t.times(k * stride);
        out.states.row(k) = t.states.row(k * stride);
    }
    return out;
}

std::size_t grid_steps(double horizon, double dt) { return static_cast<std::size_t>(std::llround(horizon / dt)); }


void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw std::ios_base::failure("cannot write " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw std::ios_base::failure("write failed for " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::ios_base::failure("cannot read " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::ios_base::failure("malformed JSON in " + path.string() + ": " + e.what());
    }
}

Trajectory as_trajectory(const Eigen::VectorXd& times, const Eigen::MatrixXd& states) { return {times, states}; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void NoiseSpec::validate() const {
    if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("noise level must be finite and >= 0");
    if (kind == NoiseKind::RelativeUniform && !(level < 1.0))
        throw ConfigError("relative noise level must lie in [0, 1)");
}

Eigen::MatrixXd apply_noise(const Eigen::MatrixXd& clean, const NoiseSpec& noise, std::mt19937_64& rng) {
    noise.validate();
    Eigen::MatrixXd y = clean;
    if (noise.level == 0.0) return y;
    if (noise.kind == NoiseKind::AdditiveGaussian) {
        std::normal_distribution<double> z(0.0, 1.0);
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) += noise.level * z(rng);
    } else {
        std::uniform_real_distribution<double> u(-noise.level, noise.level);
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) *= 1.0 + u(rng);
    }
    return y;
}

std::vector<Eigen::MatrixXd> TrajectoryDataset::observation_matrices() const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(trajectories.size());
    for (const auto& t : trajectories) out.push_back(t.observations);
    return out;
}

std::string to_string(ExperimentMode mode) {
    switch (mode) {
        case ExperimentMode::SingleIcSymplectic: return "single-ic-symplectic";
        case ExperimentMode::SingleIcRk2: return "single-ic-rk2";
        case ExperimentMode::MultiIcBayes: return "multi-ic-bayes";
        case ExperimentMode::MultiIcLs: return "multi-ic-ls";
    }
    return "unknown";
}

ExperimentMode experiment_mode_from_string(const std::string& s) {
    for (auto m : {ExperimentMode::SingleIcSymplectic, ExperimentMode::SingleIcRk2, ExperimentMode::MultiIcBayes,
                   ExperimentMode::MultiIcLs})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown experiment mode '" + s + "'");
}

int ExperimentConfig::steps_per_obs() const {
    return integer_ratio(data.obs_interval, model.learning_dt, "obs_interval / learning_dt");
}

int ExperimentConfig::data_stride() const { return integer_ratio(data.obs_interval, data.dt, "obs_interval / data dt"); }

void ExperimentConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be finite and > 0");
    };
    positive(data.dt, "data.dt");
    positive(data.obs_interval, "data.obs_interval");
    positive(data.horizon, "data.horizon");
    positive(data.omega, "data.omega");
    positive(model.learning_dt, "model.learning_dt");
    positive(model.omega, "model.omega");
    positive(prediction.dt, "prediction.dt");
    positive(prediction.horizon, "prediction.horizon");
    positive(prediction.omega, "prediction.omega");
    positive(prediction.train_end, "prediction.train_end");
    positive(prediction.error_threshold, "prediction.error_threshold");
    data_stride();
    steps_per_obs();
    integer_ratio(data.horizon, data.obs_interval, "horizon / obs_interval");
    if (data.num_trajectories < 1) throw ConfigError("data.num_trajectories must be >= 1");
    if (data.max_resample < 0) throw ConfigError("data.max_resample must be >= 0");
    if (data.ic_mean.size() != 4) throw ConfigError("data.ic_mean must have 4 entries");
    if (!(data.ic_std >= 0.0)) throw ConfigError("data.ic_std must be >= 0");
    if (prediction.test_ic.size() != 4) throw ConfigError("prediction.test_ic must have 4 entries");
    if (prediction.thin < 1) throw ConfigError("prediction.thin must be >= 1");
    if (2 * grid_steps(prediction.train_end, prediction.dt) > grid_steps(prediction.horizon, prediction.dt))
        throw ConfigError("prediction.horizon must cover two training windows");
    if (model.max_total_degree < 1) throw ConfigError("model.max_total_degree must be >= 1");
    if (!(map.initial_variance > 0.0)) throw ConfigError("map.initial_variance must be > 0");
    if (map.ls_ridge < 0.0) throw ConfigError("map.ls_ridge must be >= 0");
    data.noise.validate();
    prior.validate();
    const auto n = static_cast<Eigen::Index>(dictionary_size(4, model.max_total_degree)) + 2;
    try {
        ukf.validate(4);
        if (mode != ExperimentMode::MultiIcLs) mcmc.validate(n);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

ModelSkeleton ExperimentConfig::skeleton() const {
    ModelSkeleton s{build_dictionary(model.basis, 4, model.max_total_degree)};
    s.scheme = model.scheme;
    s.learning_dt = model.learning_dt;
    s.omega = model.omega;
    s.steps_per_obs = steps_per_obs();
    return s;
}

ExperimentConfig default_config(ExperimentMode mode, bool long_chain) {
    ExperimentConfig c;
    c.mode = mode;
    c.data.ic_mean = cherry_test_ic();
    c.prediction.test_ic = cherry_test_ic();
    const bool multi = mode == ExperimentMode::MultiIcBayes || mode == ExperimentMode::MultiIcLs;
    if (multi) {
        c.data.num_trajectories = 5;
        c.data.sample_ics = true;
        c.data.noise = {NoiseKind::RelativeUniform, 0.10, 0};
        c.model.basis = BasisKind::Legendre;
        c.model.scheme = SchemeKind::Tao;
        c.model.learning_dt = 0.01;
        c.mcmc.n_samples = 10000;
        c.mcmc.burn_in = 0;
        c.prediction.horizon = 24.0;
        c.prediction.thin = 200;
    } else {
        c.data.noise = {NoiseKind::AdditiveGaussian, 0.01, 0};
        c.model.basis = BasisKind::Monomial;
        c.model.scheme = mode == ExperimentMode::SingleIcRk2 ? SchemeKind::Rk2 : SchemeKind::Tao;
        c.model.learning_dt = 0.05;
        c.mcmc.n_samples = long_chain ? 200000 : 20000;
        c.mcmc.burn_in = long_chain ? 100000 : 10000;
        c.prediction.horizon = 16.0;
        c.prediction.thin = 200;
    }
    c.mcmc.init_proposal_cov = default_proposal_cov(static_cast<Eigen::Index>(dictionary_size(4, 3)));
    return c;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ExperimentConfig config_from_json(const json& j) {
    try {
        const auto mode = experiment_mode_from_string(j.value("mode", std::string("single-ic-symplectic")));
        ExperimentConfig c = default_config(mode, j.value("long_chain", false));
        c.seed = j.value("seed", c.seed);

        if (j.contains("data")) {
            const auto& d = j.at("data");
            c.data.dt = d.value("dt", c.data.dt);
            c.data.obs_interval = d.value("obs_interval", c.data.obs_interval);
            c.data.horizon = d.value("horizon", c.data.horizon);
            c.data.omega = d.value("omega", c.data.omega);
            c.data.num_trajectories = d.value("num_trajectories", c.data.num_trajectories);
            c.data.sample_ics = d.value("sample_ics", c.data.sample_ics);
            if (d.contains("ic_mean")) c.data.ic_mean = json_vec(d.at("ic_mean"));
            c.data.ic_std = d.value("ic_std", c.data.ic_std);
            c.data.resample_diverged = d.value("resample_diverged", c.data.resample_diverged);
            c.data.max_resample = d.value("max_resample", c.data.max_resample);
            if (d.contains("noise")) c.data.noise = noise_from(d.at("noise"), c.data.noise);
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            if (m.contains("basis")) c.model.basis = basis_kind_from_string(m.at("basis").get<std::string>());
            c.model.max_total_degree = m.value("max_total_degree", c.model.max_total_degree);
            if (m.contains("scheme")) c.model.scheme = scheme_kind_from_string(m.at("scheme").get<std::string>());
            c.model.learning_dt = m.value("learning_dt", c.model.learning_dt);
            c.model.omega = m.value("omega", c.model.omega);
        }
        if (j.contains("ukf")) {
            const auto& u = j.at("ukf");
            c.ukf.alpha = u.value("alpha", c.ukf.alpha);
            c.ukf.beta = u.value("beta", c.ukf.beta);
            if (u.contains("kappa") && !u.at("kappa").is_null()) c.ukf.kappa = u.at("kappa").get<double>();
            c.ukf.jitter = u.value("jitter", c.ukf.jitter);
        }
        if (j.contains("prior")) {
            const auto& p = j.at("prior");
            c.prior.laplace_scale = p.value("laplace_scale", c.prior.laplace_scale);
            c.prior.halfnormal_scale_sigma = p.value("halfnormal_scale_sigma", c.prior.halfnormal_scale_sigma);
            c.prior.halfnormal_scale_gamma = p.value("halfnormal_scale_gamma", c.prior.halfnormal_scale_gamma);
        }
        if (j.contains("map")) {
            const auto& m = j.at("map");
            if (m.contains("start")) {
                const auto s = m.at("start").get<std::string>();
                if (s != "ls" && s != "zero") throw ConfigError("map.start must be 'ls' or 'zero'");
                c.map.ls_start = s == "ls";
            }
            c.map.initial_variance = m.value("initial_variance", c.map.initial_variance);
            c.map.ls_ridge = m.value("ls_ridge", c.map.ls_ridge);
            auto& o = c.map.optimizer;
            o.max_evaluations = m.value("max_evaluations", o.max_evaluations);
            o.restarts = m.value("restarts", o.restarts);
            o.relative_step = m.value("relative_step", o.relative_step);
            o.min_step = m.value("min_step", o.min_step);
            o.ftol = m.value("ftol", o.ftol);
            o.qn_iterations = m.value("qn_iterations", o.qn_iterations);
            o.qn_fd_step = m.value("qn_fd_step", o.qn_fd_step);
            o.qn_gtol = m.value("qn_gtol", o.qn_gtol);
            o.qn_first_step = m.value("qn_first_step", o.qn_first_step);
            o.polish_initial_step = m.value("polish_initial_step", o.polish_initial_step);
            o.polish_step = m.value("polish_step", o.polish_step);
            o.polish_tol = m.value("polish_tol", o.polish_tol);
            o.polish_max_evaluations = m.value("polish_max_evaluations", o.polish_max_evaluations);
        }
        if (j.contains("mcmc")) {
            const auto& m = j.at("mcmc");
            c.mcmc.n_samples = m.value("n_samples", c.mcmc.n_samples);
            c.mcmc.burn_in = m.value("burn_in", c.mcmc.burn_in);
            c.mcmc.adapt_start = m.value("adapt_start", c.mcmc.adapt_start);
            c.mcmc.dr_scale = m.value("dr_scale", c.mcmc.dr_scale);
            if (m.contains("dr_mode")) {
                const auto s = m.at("dr_mode").get<std::string>();
                if (s == "covariance") c.mcmc.dr_mode = DrScaleMode::Covariance;
                else if (s == "stddev") c.mcmc.dr_mode = DrScaleMode::StdDev;
                else throw ConfigError("mcmc.dr_mode must be 'covariance' or 'stddev'");
            }
            c.mcmc.jitter = m.value("jitter", c.mcmc.jitter);
            c.mcmc.adapt = m.value("adapt", c.mcmc.adapt);
            c.mcmc.delayed_rejection = m.value("delayed_rejection", c.mcmc.delayed_rejection);
            if (m.contains("adapt_scale") && !m.at("adapt_scale").is_null())
                c.mcmc.adapt_scale = m.at("adapt_scale").get<double>();
        }
        if (j.contains("prediction")) {
            const auto& p = j.at("prediction");
            c.prediction.dt = p.value("dt", c.prediction.dt);
            c.prediction.horizon = p.value("horizon", c.prediction.horizon);
            c.prediction.omega = p.value("omega", c.prediction.omega);
            if (p.contains("test_ic")) c.prediction.test_ic = json_vec(p.at("test_ic"));
            c.prediction.thin = p.value("thin", c.prediction.thin);
            c.prediction.train_end = p.value("train_end", c.prediction.train_end);
            c.prediction.error_threshold = p.value("error_threshold", c.prediction.error_threshold);
        }
        // Proposal start depends on the final dictionary size.
        const auto n_psi = static_cast<Eigen::Index>(dictionary_size(4, c.model.max_total_degree));
        c.mcmc.init_proposal_cov = default_proposal_cov(n_psi);
        if (j.contains("mcmc") && j.at("mcmc").contains("init_proposal_scale")) {
            const double s = j.at("mcmc").at("init_proposal_scale").get<double>();
            c.mcmc.init_proposal_cov *= s;
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    j["data"] = {{"dt", c.data.dt},
                 {"obs_interval", c.data.obs_interval},
                 {"horizon", c.data.horizon},
                 {"omega", c.data.omega},
                 {"num_trajectories", c.data.num_trajectories},
                 {"sample_ics", c.data.sample_ics},
                 {"ic_mean", vec_json(c.data.ic_mean)},
                 {"ic_std", c.data.ic_std},
                 {"resample_diverged", c.data.resample_diverged},
                 {"max_resample", c.data.max_resample},
                 {"noise", noise_json(c.data.noise)}};
    j["model"] = {{"basis", to_string(c.model.basis)},
                  {"max_total_degree", c.model.max_total_degree},
                  {"scheme", to_string(c.model.scheme)},
                  {"learning_dt", c.model.learning_dt},
                  {"omega", c.model.omega}};
    j["ukf"] = {{"alpha", c.ukf.alpha},
                {"beta", c.ukf.beta},
                {"kappa", c.ukf.kappa ? json(*c.ukf.kappa) : json(nullptr)},
                {"jitter", c.ukf.jitter}};
    j["prior"] = {{"laplace_scale", c.prior.laplace_scale},
                  {"halfnormal_scale_sigma", c.prior.halfnormal_scale_sigma},
                  {"halfnormal_scale_gamma", c.prior.halfnormal_scale_gamma}};
    const auto& o = c.map.optimizer;
    j["map"] = {{"start", c.map.ls_start ? "ls" : "zero"},
                {"initial_variance", c.map.initial_variance},
                {"ls_ridge", c.map.ls_ridge},
                {"max_evaluations", o.max_evaluations},
                {"restarts", o.restarts},
                {"relative_step", o.relative_step},
                {"min_step", o.min_step},
                {"ftol", o.ftol},
                {"qn_iterations", o.qn_iterations},
                {"qn_fd_step", o.qn_fd_step},
                {"qn_gtol", o.qn_gtol},
                {"qn_first_step", o.qn_first_step},
                {"polish_initial_step", o.polish_initial_step},
                {"polish_step", o.polish_step},
                {"polish_tol", o.polish_tol},
                {"polish_max_evaluations", o.polish_max_evaluations}};
    auto mc = mcmc_config_to_json(c.mcmc);
    mc.erase("init_proposal_cov");
    mc.erase("rng_seed");
    j["mcmc"] = mc;
    j["prediction"] = {{"dt", c.prediction.dt},
                       {"horizon", c.prediction.horizon},
                       {"omega", c.prediction.omega},
                       {"test_ic", vec_json(c.prediction.test_ic)},
                       {"thin", c.prediction.thin},
                       {"train_end", c.prediction.train_end},
                       {"error_threshold", c.prediction.error_threshold}};
    return j;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::ios_base::failure("cannot read config " + path);
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

TrajectoryDataset generate_data(const ExperimentConfig& cfg) {
    cfg.validate();
    TrajectoryDataset out;
    out.noise = cfg.data.noise;
    out.noise.seed = derive_seed(cfg.seed, 1);
    out.obs_interval = cfg.data.obs_interval;
    out.data_dt = cfg.data.dt;
    out.ic_seed = derive_seed(cfg.seed, 2);

    std::mt19937_64 ic_rng(out.ic_seed);
    std::mt19937_64 noise_rng(out.noise.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Propagator truth(std::make_shared<CherryHamiltonian>(), TaoScheme{TaoConfig{cfg.data.omega, cfg.data.dt}});
    const auto n_steps = grid_steps(cfg.data.horizon, cfg.data.dt);
    const int stride = cfg.data_stride();

    for (int m = 0; m < cfg.data.num_trajectories; ++m) {
        std::optional<Trajectory> clean;
        Eigen::VectorXd x0;
        for (int attempt = 0; !clean; ++attempt) {
            x0 = cfg.data.ic_mean;
            if (cfg.data.sample_ics)
                for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) += cfg.data.ic_std * z(ic_rng);
            auto res = truth.try_propagate(PhaseState::from_vector(x0), n_steps);
            if (!res.diverged_at) {
                clean = std::move(res.trajectory);
                break;
            }
            const bool can_retry = cfg.data.sample_ics && cfg.data.resample_diverged && attempt < cfg.data.max_resample;
            if (!can_retry)
                throw DivergenceError(*res.diverged_at, "generate_data: trajectory " + std::to_string(m) +
                                                            " diverged after " + std::to_string(attempt) +
                                                            " resamples");
            ++out.resampled_ics;
        }
        const auto sub = subsample(*clean, stride);
        ObservedTrajectory t;
        t.x0 = x0;
        t.times = sub.times;
        t.clean = sub.states;
        t.observations = apply_noise(sub.states, out.noise, noise_rng);
        out.trajectories.push_back(std::move(t));
    }
    return out;
}

void write_dataset(const std::string& dir, const TrajectoryDataset& data) {
    fs::create_directories(dir);
    json manifest;
    manifest["noise"] = noise_json(data.noise);
    manifest["obs_interval"] = data.obs_interval;
    manifest["data_dt"] = data.data_dt;
    manifest["ic_seed"] = data.ic_seed;
    manifest["resampled_ics"] = data.resampled_ics;
    manifest["trajectories"] = json::array();
    for (std::size_t m = 0; m < data.trajectories.size(); ++m) {
        const auto& t = data.trajectories[m];
        const std::string obs = "traj_" + std::to_string(m) + "_obs.csv";
        const std::string clean = "traj_" + std::to_string(m) + "_clean.csv";
        write_trajectory_csv((fs::path(dir) / obs).string(), as_trajectory(t.times, t.observations));
        write_trajectory_csv((fs::path(dir) / clean).string(), as_trajectory(t.times, t.clean));
        manifest["trajectories"].push_back(
            {{"x0", vec_json(t.x0)}, {"observations", obs}, {"clean", clean}, {"n_obs", t.times.size()}});
    }
    write_json(fs::path(dir) / "manifest.json", manifest);
}

TrajectoryDataset read_dataset(const std::string& dir) {
    const auto manifest = read_json(fs::path(dir) / "manifest.json");
    TrajectoryDataset out;
    try {
        out.noise = noise_from(manifest.at("noise"), {});
        out.obs_interval = manifest.at("obs_interval").get<double>();
        out.data_dt = manifest.at("data_dt").get<double>();
        out.ic_seed = manifest.at("ic_seed").get<std::uint64_t>();
        out.resampled_ics = manifest.value("resampled_ics", 0);
        for (const auto& e : manifest.at("trajectories")) {
            ObservedTrajectory t;
            t.x0 = json_vec(e.at("x0"));
            const auto obs = read_trajectory_csv((fs::path(dir) / e.at("observations").get<std::string>()).string());
            t.times = obs.times;
            t.observations = obs.states;
            if (e.contains("clean"))
                t.clean = read_trajectory_csv((fs::path(dir) / e.at("clean").get<std::string>()).string()).states;
            out.trajectories.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw std::ios_base::failure("malformed dataset manifest in " + dir + ": " + e.what());
    }
    if (out.trajectories.empty()) throw std::ios_base::failure("dataset in " + dir + " has no trajectories");
    return out;
}

double relative_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth, Eigen::Index i, Eigen::Index j) {
    if (estimate.cols() != truth.cols()) throw DimensionError("relative_error: width mismatch");
    const Eigen::Index len = std::min(estimate.rows(), truth.rows()) - 1;
    if (i < 1 || i > j || j > len) throw std::out_of_range("relative_error: need 1 <= i <= j <= length");
    const double den = truth.middleRows(i, j - i + 1).norm();
    if (den == 0.0) throw std::domain_error("relative_error: truth window has zero norm");
    return (estimate.middleRows(i, j - i + 1) - truth.middleRows(i, j - i + 1)).norm() / den;
}

double error_horizon(const Trajectory& estimate, const Trajectory& truth, double threshold) {
    if (estimate.state_dim() != truth.state_dim()) throw DimensionError("error_horizon: width mismatch");
    const Eigen::Index len = std::min(estimate.size(), truth.size()) - 1;
    double num = 0.0;
    double den = 0.0;
    double horizon = 0.0;
    for (Eigen::Index k = 1; k <= len; ++k) {
        num += (estimate.states.row(k) - truth.states.row(k)).squaredNorm();
        den += truth.states.row(k).squaredNorm();
        if (!(std::sqrt(num) <= threshold * std::sqrt(den))) break;
        horizon = truth.times(k);
    }
    return horizon;
}

json HamiltonianErrorReport::to_json() const {
    return {{"H_true", h_true},
            {"H_learned", h_learned},
            {"abs_error", error},
            {"H_learned_min_along_prediction", finite_or_null(h_learned_min)},
            {"H_learned_max_along_prediction", finite_or_null(h_learned_max)},
            {"sample_H_learned", sample_values}};
}

HamiltonianErrorReport hamiltonian_error_report(const HamiltonianModel& model, const Hamiltonian& truth,
                                                const PhaseState& x0, double horizon, double dt, double omega,
                                                const PosteriorChain* chain, int thin) {
    if (thin < 1) throw std::invalid_argument("hamiltonian_error_report: thin must be >= 1");
    HamiltonianErrorReport r;
    const Eigen::VectorXd x = x0.to_vector();
    r.h_true = truth.value(std::span<const double>(x.data(), x.size()));
    r.h_learned = model.value(std::span<const double>(x.data(), x.size()));
    r.error = r.h_learned - r.h_true;

    auto shared = std::make_shared<HamiltonianModel>(model);
    Propagator prop(shared, TaoScheme{TaoConfig{omega, dt}});
    const auto res = prop.try_propagate(x0, grid_steps(horizon, dt));
    r.h_learned_min = kInf;
    r.h_learned_max = -kInf;
    for (Eigen::Index k = 0; k < res.trajectory.size(); ++k) {
        const Eigen::VectorXd s = res.trajectory.states.row(k).transpose();
        const double h = model.value(std::span<const double>(s.data(), s.size()));
        r.h_learned_min = std::min(r.h_learned_min, h);
        r.h_learned_max = std::max(r.h_learned_max, h);
    }
    if (chain) {
        const auto n_psi = static_cast<Eigen::Index>(model.dictionary().size());
        for (Eigen::Index i = 0; i < chain->samples.rows(); i += thin) {
            const HamiltonianModel m(model.dictionary(), chain->samples.row(i).head(n_psi).transpose());
            r.sample_values.push_back(m.value(std::span<const double>(x.data(), x.size())));
        }
    }
    return r;
}

WindowErrors window_errors(const Trajectory& estimate, const Trajectory& truth, const PredictionSpec& spec) {
    WindowErrors w;
    const auto n = static_cast<Eigen::Index>(grid_steps(spec.train_end, spec.dt));
    const Eigen::Index avail = std::min(estimate.size(), truth.size()) - 1;
    w.train = avail >= n ? relative_error(estimate.states, truth.states, 1, n) : kInf;
    w.test = avail >= 2 * n ? relative_error(estimate.states, truth.states, n + 1, 2 * n) : kInf;
    w.horizon = error_horizon(estimate, truth, spec.error_threshold);
    return w;
}

json parameters_to_json(const ParameterVector& theta, const BasisDictionary& dictionary) {
    return {{"model", model_to_json(HamiltonianModel(dictionary, theta.theta_psi))},
            {"log_theta_sigma", theta.log_theta_sigma},
            {"log_theta_gamma", theta.log_theta_gamma},
            {"theta_sigma", theta.theta_sigma()},
            {"theta_gamma", theta.theta_gamma()}};
}

ParameterVector parameters_from_json(const json& j) {
    try {
        const auto model = model_from_json(j.at("model"));
        ParameterVector p;
        p.theta_psi = model.coefficients();
        p.log_theta_sigma = j.at("log_theta_sigma").get<double>();
        p.log_theta_gamma = j.at("log_theta_gamma").get<double>();
        return p;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("parameters_from_json: ") + e.what());
    }
}

namespace {

json window_json(const WindowErrors& w) {
    return {{"train_error", finite_or_null(w.train)},
            {"test_error", finite_or_null(w.test)},
            {"horizon_10pct", w.horizon}};
}

// Stage label prefix for errors propagated out of run_experiment.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const DivergenceError& e) {
        throw DivergenceError(e.step(), std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(name) + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(name) + ": " + e.what());
    }
}

}  // namespace

HamiltonianModel ls_stage(const ExperimentConfig& cfg, const TrajectoryDataset& data) {
    const auto dict = build_dictionary(cfg.model.basis, 4, cfg.model.max_total_degree);
    return fit_ls(data.observation_matrices(), data.obs_interval, dict, cfg.map.ls_ridge);
}

MapStage map_stage(const ExperimentConfig& cfg, const TrajectoryDataset& data, const HamiltonianModel& ls) {
    const auto skeleton = cfg.skeleton();
    Posterior post(data.observation_matrices(), skeleton, cfg.prior, cfg.ukf);
    const double log_v = std::log(cfg.map.initial_variance);
    MapStage out;
    out.start = {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(skeleton.dictionary.size())), log_v, log_v};
    out.start_kind = "zero";
    if (cfg.map.ls_start) {
        if (ls.coefficients().size() != out.start.theta_psi.size())
            throw ConfigError("LS model does not match the configured dictionary");
        ParameterVector from_ls{ls.coefficients(), log_v, log_v};
        if (std::isfinite(post.log_posterior(from_ls))) {
            out.start = from_ls;
            out.start_kind = "ls";
        } else {
            // A divergent LS model cannot seed the optimizer.
            out.start_kind = "zero-fallback";
        }
    }
    out.result = find_map(post.density(), out.start.flatten(), cfg.map.optimizer);
    return out;
}

McmcConfig effective_mcmc_config(const ExperimentConfig& cfg) {
    McmcConfig mc = cfg.mcmc;
    mc.rng_seed = derive_seed(cfg.seed, 3);
    return mc;
}

PosteriorChain sample_stage(const ExperimentConfig& cfg, const TrajectoryDataset& data, const Eigen::VectorXd& init) {
    Posterior post(data.observation_matrices(), cfg.skeleton(), cfg.prior, cfg.ukf);
    return dram_sample(post.density(), init, effective_mcmc_config(cfg));
}

Trajectory truth_trajectory(const ExperimentConfig& cfg) {
    const auto& p = cfg.prediction;
    Propagator prop(std::make_shared<CherryHamiltonian>(), TaoScheme{TaoConfig{p.omega, p.dt}});
    return prop.propagate(PhaseState::from_vector(p.test_ic), grid_steps(p.horizon, p.dt));
}

PropagationResult predict_model(const ExperimentConfig& cfg, const HamiltonianModel& model) {
    const auto& p = cfg.prediction;
    Propagator prop(std::make_shared<HamiltonianModel>(model), TaoScheme{TaoConfig{p.omega, p.dt}});
    return prop.try_propagate(PhaseState::from_vector(p.test_ic), grid_steps(p.horizon, p.dt));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    ExperimentResult r;
    r.config = cfg;
    const auto skeleton = cfg.skeleton();
    const auto& dict = skeleton.dictionary;
    const auto& pred = cfg.prediction;
    const auto n_pred = grid_steps(pred.horizon, pred.dt);
    const PhaseState x_test = PhaseState::from_vector(pred.test_ic);
    const CherryHamiltonian cherry;

    r.data = stage("generate", [&] { return generate_data(cfg); });
    r.truth = stage("truth", [&] { return truth_trajectory(cfg); });
    r.ls_model = stage("ls", [&] { return ls_stage(cfg, r.data); });
    r.ls_prediction = predict_model(cfg, *r.ls_model);

    json metrics;
    metrics["mode"] = to_string(cfg.mode);
    metrics["seed"] = cfg.seed;
    metrics["H_true"] = cherry_eval(x_test);
    const auto ls_err = window_errors(r.ls_prediction->trajectory, r.truth, pred);
    metrics["ls"] = window_json(ls_err);
    metrics["ls"]["H_learned"] = eval_model(*r.ls_model, x_test);
    metrics["ls"]["diverged_at"] =
        r.ls_prediction->diverged_at ? json(*r.ls_prediction->diverged_at) : json(nullptr);

    if (cfg.mode == ExperimentMode::MultiIcLs) {
        metrics.update(window_json(ls_err));
        metrics["H_learned"] = metrics["ls"]["H_learned"];
        metrics["H_abs_error"] = std::abs(metrics["H_learned"].get<double>() - metrics["H_true"].get<double>());
        metrics["acceptance_rate"] = nullptr;
        metrics["diverged_sample_count"] = 0;
        r.metrics = std::move(metrics);
        if (!out_dir.empty()) write_result_bundle(out_dir, r);
        return r;
    }

    auto ms = stage("map", [&] { return map_stage(cfg, r.data, *r.ls_model); });
    r.start_kind = ms.start_kind;
    r.map = std::move(ms.result);
    r.chain = stage("sample", [&] { return sample_stage(cfg, r.data, r.map->theta); });
    r.theta_map = ParameterVector::unflatten(r.chain->map_log_post > r.map->log_post ? r.chain->map_point
                                                                                       : r.map->theta);
    r.map_prediction = map_trajectory(*r.theta_map, dict, x_test, n_pred, pred.dt, pred.omega);
    r.predictive = stage("predict", [&] {
        return posterior_predictive_mean(*r.chain, dict, x_test, n_pred, pred.thin, pred.dt, pred.omega);
    });

    const HamiltonianModel map_model(dict, r.theta_map->theta_psi);
    const auto map_err = window_errors(r.map_prediction->trajectory, r.truth, pred);
    const auto mean_err = window_errors(r.predictive->mean, r.truth, pred);
    const auto report =
        hamiltonian_error_report(map_model, cherry, x_test, pred.horizon, pred.dt, pred.omega, &*r.chain, pred.thin);

    const bool multi = cfg.mode == ExperimentMode::MultiIcBayes;
    // Top-level point estimate: MAP for single-IC, posterior mean for multi-IC.
    metrics.update(window_json(multi ? mean_err : map_err));
    metrics["map"] = window_json(map_err);
    metrics["mean"] = window_json(mean_err);
    metrics["H_learned"] = report.h_learned;
    metrics["H_abs_error"] = std::abs(report.error);
    metrics["hamiltonian"] = report.to_json();
    metrics["acceptance_rate"] = r.chain->acceptance_rate;
    metrics["diverged_sample_count"] = r.predictive->diverged_count;
    metrics["map_log_post"] = std::max(r.map->log_post, r.chain->map_log_post);
    metrics["map_start_log_post"] = r.map->start_log_post;
    metrics["map_start"] = r.start_kind;
    metrics["map_evaluations"] = r.map->evaluations;
    metrics["theta_sigma"] = r.theta_map->theta_sigma();
    metrics["theta_gamma"] = r.theta_map->theta_gamma();
    metrics["map_diverged_at"] =
        r.map_prediction->diverged_at ? json(*r.map_prediction->diverged_at) : json(nullptr);
    r.metrics = std::move(metrics);
    if (!out_dir.empty()) write_result_bundle(out_dir, r);
    return r;
}

void write_ensemble_csv(const std::string& path, const PredictiveResult& pred) {
    std::ofstream os(path);
    if (!os) throw std::ios_base::failure("cannot write " + path);
    os << "sample,t";
    const Eigen::Index d = pred.mean.state_dim() / 2;
    for (Eigen::Index i = 1; i <= d; ++i) os << ",q" << i;
    for (Eigen::Index i = 1; i <= d; ++i) os << ",p" << i;
    os << '\n';
    os.precision(17);
    for (std::size_t s = 0; s < pred.ensemble.size(); ++s) {
        const auto& t = pred.ensemble[s];
        for (Eigen::Index k = 0; k < t.size(); ++k) {
            os << pred.sample_indices[s] << ',' << t.times(k);
            for (Eigen::Index c = 0; c < t.state_dim(); ++c) os << ',' << t.states(k, c);
            os << '\n';
        }
    }
    if (!os) throw std::ios_base::failure("write failed for " + path);
}

void write_result_bundle(const std::string& dir, const ExperimentResult& r) {
    fs::create_directories(dir);
    const fs::path d(dir);
    auto cfg_json = config_to_json(r.config);
    write_json(d / "config.json", cfg_json);
    write_dataset((d / "dataset").string(), r.data);
    write_trajectory_csv((d / "truth.csv").string(), r.truth);
    const auto skeleton = r.config.skeleton();
    if (r.ls_model) write_json(d / "model_ls.json", model_to_json(*r.ls_model));
    if (r.ls_prediction) write_trajectory_csv((d / "ls_trajectory.csv").string(), r.ls_prediction->trajectory);
    if (r.theta_map) {
        write_json(d / "map.json", parameters_to_json(*r.theta_map, skeleton.dictionary));
        write_json(d / "model_map.json", model_to_json(HamiltonianModel(skeleton.dictionary, r.theta_map->theta_psi)));
    }
    if (r.map_prediction) write_trajectory_csv((d / "map_trajectory.csv").string(), r.map_prediction->trajectory);
    if (r.predictive) {
        write_trajectory_csv((d / "mean_trajectory.csv").string(), r.predictive->mean);
        write_ensemble_csv((d / "ensemble.csv").string(), *r.predictive);
    }
    if (r.chain) {
        write_chain_csv((d / "chain.csv").string(), *r.chain, skeleton.parameter_names());
        write_json(d / "chain.json", chain_sidecar_json(effective_mcmc_config(r.config), *r.chain));
    }
    write_json(d / "metrics.json", r.metrics);
}

}  // namespace hamid
