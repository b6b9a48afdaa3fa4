// Batch front end: each subcommand reads and writes artifacts in --out.

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hamid/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hamid;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool long_chain = false;
};

ExperimentConfig resolve_config(const Common& c) {
    ExperimentConfig cfg;
    if (c.config.empty()) {
        cfg = default_config(ExperimentMode::SingleIcSymplectic, c.long_chain);
    } else {
        std::ifstream is(c.config);
        if (!is) throw std::ios_base::failure("cannot read config " + c.config);
        json j;
        try {
            j = json::parse(is, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + c.config + ": " + e.what());
        }
        if (c.long_chain) j["long_chain"] = true;
        cfg = config_from_json(j);
    }
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

void write_json_file(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::ios_base::failure("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::ios_base::failure("missing artifact " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::ios_base::failure("malformed " + path.string() + ": " + e.what());
    }
}

TrajectoryDataset dataset_for(const ExperimentConfig& cfg, const fs::path& out) {
    const auto dir = out / "dataset";
    if (fs::exists(dir / "manifest.json")) return read_dataset(dir.string());
    std::cerr << "no dataset in " << dir << ", generating one\n";
    auto data = generate_data(cfg);
    write_dataset(dir.string(), data);
    return data;
}

HamiltonianModel ls_model_for(const ExperimentConfig& cfg, const fs::path& out, const TrajectoryDataset& data) {
    const auto path = out / "model_ls.json";
    if (fs::exists(path)) return model_from_json(read_json_file(path));
    auto model = ls_stage(cfg, data);
    write_json_file(path, model_to_json(model));
    return model;
}

json window_json(const WindowErrors& w) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"train_error", num(w.train)}, {"test_error", num(w.test)}, {"horizon_10pct", w.horizon}};
}

int cmd_simulate(const Common& c, const std::string& model_path, const std::string& scheme, std::vector<double> ic) {
    const auto cfg = resolve_config(c);
    const auto& p = cfg.prediction;
    const Eigen::VectorXd x0 =
        ic.empty() ? p.test_ic : Eigen::Map<const Eigen::VectorXd>(ic.data(), static_cast<Eigen::Index>(ic.size()));
    std::shared_ptr<const Hamiltonian> h;
    if (model_path.empty()) h = std::make_shared<CherryHamiltonian>();
    else h = std::make_shared<HamiltonianModel>(model_from_json(read_json_file(model_path)));
    if (x0.size() != h->state_dim()) throw ConfigError("initial condition does not match the Hamiltonian");
    Scheme s = TaoScheme{TaoConfig{p.omega, p.dt}};
    if (scheme_kind_from_string(scheme) == SchemeKind::Rk2) s = Rk2Scheme{p.dt};
    const Propagator prop(h, s);
    const auto n = static_cast<std::size_t>(std::llround(p.horizon / p.dt));
    const auto traj = prop.propagate(PhaseState::from_vector(x0), n);
    fs::create_directories(c.out);
    write_trajectory_csv((fs::path(c.out) / "trajectory.csv").string(), traj);
    return kOk;
}

int cmd_generate(const Common& c) {
    const auto cfg = resolve_config(c);
    const auto data = generate_data(cfg);
    write_dataset((fs::path(c.out) / "dataset").string(), data);
    write_json_file(fs::path(c.out) / "config.json", config_to_json(cfg));
    std::cerr << data.trajectories.size() << " trajectories, " << data.trajectories.front().times.size()
              << " observations each, " << data.resampled_ics << " ICs resampled\n";
    return kOk;
}

int cmd_ls_fit(const Common& c) {
    const auto cfg = resolve_config(c);
    const auto data = dataset_for(cfg, c.out);
    const auto model = ls_stage(cfg, data);
    write_json_file(fs::path(c.out) / "model_ls.json", model_to_json(model));
    return kOk;
}

int cmd_fit_map(const Common& c) {
    const auto cfg = resolve_config(c);
    const fs::path out(c.out);
    const auto data = dataset_for(cfg, out);
    const auto ls = ls_model_for(cfg, out, data);
    const auto ms = map_stage(cfg, data, ls);
    const auto theta = ParameterVector::unflatten(ms.result.theta);
    auto j = parameters_to_json(theta, cfg.skeleton().dictionary);
    j["log_post"] = ms.result.log_post;
    j["start_log_post"] = ms.result.start_log_post;
    j["start"] = ms.start_kind;
    j["evaluations"] = ms.result.evaluations;
    j["polish_converged"] = ms.result.polish_converged;
    j["source"] = "optimizer";
    write_json_file(out / "map.json", j);
    std::cerr << "log posterior " << ms.result.start_log_post << " -> " << ms.result.log_post << " in "
              << ms.result.evaluations << " evaluations\n";
    return kOk;
}

int cmd_sample(const Common& c) {
    const auto cfg = resolve_config(c);
    const fs::path out(c.out);
    const auto data = dataset_for(cfg, out);
    auto map_j = read_json_file(out / "map.json");
    const auto init = parameters_from_json(map_j);
    const auto chain = sample_stage(cfg, data, init.flatten());
    const auto skeleton = cfg.skeleton();
    write_chain_csv((out / "chain.csv").string(), chain, skeleton.parameter_names());
    write_json_file(out / "chain.json", chain_sidecar_json(effective_mcmc_config(cfg), chain));
    // The chain may visit a better point than the optimizer found.
    if (chain.map_log_post > map_j.value("log_post", -std::numeric_limits<double>::infinity())) {
        auto j = parameters_to_json(ParameterVector::unflatten(chain.map_point), skeleton.dictionary);
        j["log_post"] = chain.map_log_post;
        j["source"] = "chain";
        write_json_file(out / "map.json", j);
    }
    std::cerr << "acceptance rate " << chain.acceptance_rate << '\n';
    return kOk;
}

int cmd_predict(const Common& c) {
    const auto cfg = resolve_config(c);
    const fs::path out(c.out);
    const auto& p = cfg.prediction;
    const auto dict = cfg.skeleton().dictionary;
    const auto n = static_cast<std::size_t>(std::llround(p.horizon / p.dt));
    const PhaseState x0 = PhaseState::from_vector(p.test_ic);
    fs::create_directories(out);
    write_trajectory_csv((out / "truth.csv").string(), truth_trajectory(cfg));
    bool any = false;
    if (fs::exists(out / "model_ls.json")) {
        const auto res = predict_model(cfg, model_from_json(read_json_file(out / "model_ls.json")));
        write_trajectory_csv((out / "ls_trajectory.csv").string(), res.trajectory);
        any = true;
    }
    if (fs::exists(out / "map.json")) {
        const auto theta = parameters_from_json(read_json_file(out / "map.json"));
        const auto res = map_trajectory(theta, dict, x0, n, p.dt, p.omega);
        write_trajectory_csv((out / "map_trajectory.csv").string(), res.trajectory);
        if (res.diverged_at) std::cerr << "MAP prediction diverged at step " << *res.diverged_at << '\n';
        any = true;
    }
    if (fs::exists(out / "chain.csv")) {
        const auto chain = read_chain_csv((out / "chain.csv").string());
        const auto pred = posterior_predictive_mean(chain, dict, x0, n, p.thin, p.dt, p.omega);
        write_trajectory_csv((out / "mean_trajectory.csv").string(), pred.mean);
        write_ensemble_csv((out / "ensemble.csv").string(), pred);
        std::cerr << pred.ensemble.size() << " predictive samples, " << pred.diverged_count << " diverged\n";
        any = true;
    }
    if (!any) throw std::ios_base::failure("nothing to predict: no model_ls.json, map.json or chain.csv in " + c.out);
    return kOk;
}

int cmd_evaluate(const Common& c) {
    const auto cfg = resolve_config(c);
    const fs::path out(c.out);
    const auto truth = read_trajectory_csv((out / "truth.csv").string());
    const PhaseState x0 = PhaseState::from_vector(cfg.prediction.test_ic);
    json m;
    m["mode"] = to_string(cfg.mode);
    m["H_true"] = cherry_eval(x0);
    for (const auto& [key, file] : {std::pair{"ls", "ls_trajectory.csv"}, std::pair{"map", "map_trajectory.csv"},
                                    std::pair{"mean", "mean_trajectory.csv"}}) {
        if (!fs::exists(out / file)) continue;
        m[key] = window_json(window_errors(read_trajectory_csv((out / file).string()), truth, cfg.prediction));
    }
    if (fs::exists(out / "map.json")) {
        const auto theta = parameters_from_json(read_json_file(out / "map.json"));
        m["H_learned"] = eval_model(HamiltonianModel(cfg.skeleton().dictionary, theta.theta_psi), x0);
    } else if (fs::exists(out / "model_ls.json")) {
        m["H_learned"] = eval_model(model_from_json(read_json_file(out / "model_ls.json")), x0);
    }
    if (m.contains("H_learned"))
        m["H_abs_error"] = std::abs(m["H_learned"].get<double>() - m["H_true"].get<double>());
    const char* primary = cfg.mode == ExperimentMode::MultiIcBayes  ? "mean"
                          : cfg.mode == ExperimentMode::MultiIcLs ? "ls"
                                                                   : "map";
    if (m.contains(primary)) m.update(m[primary]);
    if (fs::exists(out / "chain.json")) {
        const auto side = read_json_file(out / "chain.json");
        m["acceptance_rate"] = side.value("acceptance_rate", 0.0);
    }
    write_json_file(out / "metrics.json", m);
    std::cout << m.dump(2) << '\n';
    return kOk;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const Common& c) {
    const auto base = resolve_config(c);
    json bench;
    if (!c.config.empty()) {
        std::ifstream is(c.config);
        const auto j = json::parse(is, nullptr, true, true);
        bench = j.value("bench", json::object());
    }
    std::vector<std::uint64_t> seeds = bench.value("seeds", std::vector<std::uint64_t>{base.seed});
    if (c.seed) seeds = {*c.seed};
    const auto omegas = bench.value("omega", std::vector<double>{base.model.omega});
    const bool sweep = seeds.size() > 1 || omegas.size() > 1;

    json summary;
    summary["mode"] = to_string(base.mode);
    summary["runs"] = json::array();
    std::vector<double> train, test, horizon;
    for (double w : omegas) {
        for (auto s : seeds) {
            auto cfg = base;
            cfg.seed = s;
            cfg.model.omega = w;
            std::string dir = c.out;
            if (sweep) {
                std::ostringstream name;
                name << "seed" << s << "_omega" << w;
                dir = (fs::path(c.out) / name.str()).string();
            }
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = run_experiment(cfg, dir);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            json row = {{"seed", s}, {"omega", w}, {"dir", dir}, {"seconds", secs}};
            for (const char* k : {"train_error", "test_error", "horizon_10pct", "H_learned", "H_abs_error"})
                if (r.metrics.contains(k)) row[k] = r.metrics[k];
            summary["runs"].push_back(row);
            std::cerr << to_string(cfg.mode) << " seed " << s << " omega " << w << ": " << row.dump() << '\n';
            auto get = [&](const char* k) {
                return r.metrics.contains(k) && r.metrics[k].is_number() ? r.metrics[k].get<double>()
                                                                         : std::numeric_limits<double>::infinity();
            };
            train.push_back(get("train_error"));
            test.push_back(get("test_error"));
            horizon.push_back(r.metrics.value("horizon_10pct", 0.0));
        }
    }
    summary["median"] = {{"train_error", median(train)}, {"test_error", median(test)},
                         {"horizon_10pct", median(horizon)}};
    if (sweep) write_json_file(fs::path(c.out) / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON experiment config");
    sub->add_option("--seed", c.seed, "master seed (overrides the config)");
    sub->add_option("--out", c.out, "artifact directory")->capture_default_str();
    sub->add_flag("--long-chain", c.long_chain, "single-IC chain length 2e5 with 1e5 burn-in");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian identification of nonseparable Hamiltonian systems"};
    app.require_subcommand(1);
    Common common;

    auto* simulate = app.add_subcommand("simulate", "integrate a Hamiltonian from an initial condition");
    add_common(simulate, common);
    std::string model_path;
    std::string scheme = "tao";
    std::vector<double> ic;
    simulate->add_option("--model", model_path, "learned model JSON (default: Cherry)");
    simulate->add_option("--scheme", scheme, "tao or rk2")->capture_default_str();
    simulate->add_option("--ic", ic, "initial condition q1 q2 p1 p2 (default: test IC)")->expected(4);

    auto* generate = app.add_subcommand("generate-data", "simulate noisy training trajectories");
    add_common(generate, common);
    auto* ls_fit = app.add_subcommand("ls-fit", "least-squares dictionary fit");
    add_common(ls_fit, common);
    auto* fit_map = app.add_subcommand("fit-map", "maximize the posterior");
    add_common(fit_map, common);
    auto* sample = app.add_subcommand("sample", "DRAM chain started at map.json");
    add_common(sample, common);
    auto* predict = app.add_subcommand("predict", "propagate learned models from the test IC");
    add_common(predict, common);
    auto* evaluate = app.add_subcommand("evaluate", "error metrics of the predictions");
    add_common(evaluate, common);
    auto* bench = app.add_subcommand("bench", "full pipeline, optionally swept over seeds and omega");
    add_common(bench, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*simulate) return cmd_simulate(common, model_path, scheme, ic);
        if (*generate) return cmd_generate(common);
        if (*ls_fit) return cmd_ls_fit(common);
        if (*fit_map) return cmd_fit_map(common);
        if (*sample) return cmd_sample(common);
        if (*predict) return cmd_predict(common);
        if (*evaluate) return cmd_evaluate(common);
        if (*bench) return cmd_bench(common);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
