#include "hamid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace hamid {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void PriorSpec::validate() const {
    if (!(laplace_scale > 0.0) || !(halfnormal_scale_sigma > 0.0) || !(halfnormal_scale_gamma > 0.0))
        throw std::invalid_argument("PriorSpec: all scales must be > 0");
}

double laplace_log_prior(const Eigen::VectorXd& theta_psi, double b) {
    return -static_cast<double>(theta_psi.size()) * std::log(2.0 * b) - theta_psi.lpNorm<1>() / b;
}

double halfnormal_log_density(double x, double scale) {
    if (x < 0.0) return kNegInf;
    return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(scale) - x * x / (2.0 * scale * scale);
}

double log_prior(const ParameterVector& theta, const PriorSpec& prior) {
    const double sigma = theta.theta_sigma();
    const double gamma = theta.theta_gamma();
    return laplace_log_prior(theta.theta_psi, prior.laplace_scale) +
           halfnormal_log_density(sigma, prior.halfnormal_scale_sigma) + theta.log_theta_sigma +
           halfnormal_log_density(gamma, prior.halfnormal_scale_gamma) + theta.log_theta_gamma;
}

Posterior::Posterior(std::vector<Eigen::MatrixXd> datasets, ModelSkeleton skeleton, PriorSpec prior, UkfConfig ukf)
    : datasets_(std::move(datasets)), skeleton_(std::move(skeleton)), prior_(prior), ukf_(ukf) {
    if (datasets_.empty()) throw std::invalid_argument("Posterior: no data");
    prior_.validate();
    for (const auto& d : datasets_)
        if (d.cols() != skeleton_.dictionary.state_dim())
            throw DimensionError("Posterior: data width does not match the dictionary state_dim");
}

double Posterior::log_likelihood(const ParameterVector& theta) const {
    return multi_trajectory_log_likelihood(datasets_, theta, skeleton_, ukf_);
}

double Posterior::log_prior(const ParameterVector& theta) const { return hamid::log_prior(theta, prior_); }

double Posterior::log_posterior(const ParameterVector& theta) const {
    const double lp = log_prior(theta);
    if (!std::isfinite(lp)) return kNegInf;
    const double ll = log_likelihood(theta);
    if (!std::isfinite(ll)) return kNegInf;
    return ll + lp;
}

double Posterior::operator()(const Eigen::VectorXd& flat) const {
    if (flat.size() != dim()) throw DimensionError("Posterior: parameter length mismatch");
    return log_posterior(ParameterVector::unflatten(flat));
}

LogDensity Posterior::density() const {
    return [this](const Eigen::VectorXd& flat) { return (*this)(flat); };
}

double log_posterior(const ParameterVector& theta, const std::vector<Eigen::MatrixXd>& datasets,
                     const PriorSpec& prior, const ModelSkeleton& skeleton, const UkfConfig& ukf) {
    const double lp = log_prior(theta, prior);
    const double ll = multi_trajectory_log_likelihood(datasets, theta, skeleton, ukf);
    if (!std::isfinite(ll) || !std::isfinite(lp)) return kNegInf;
    return ll + lp;
}

// --------------------------------------------------------------------------
// MAP search

namespace {

class CountingObjective {
public:
    CountingObjective(const LogDensity& target, MapResult& result) : target_(target), result_(result) {}

    // Cost to minimize: -log density, +inf where the density is invalid.
    double cost(const Eigen::VectorXd& x) {
        double lp = target_(x);
        if (std::isnan(lp)) lp = kNegInf;
        ++result_.evaluations;
        if (lp > best_) {
            best_ = lp;
            result_.theta = x;
        }
        result_.best_trace.push_back(best_);
        return std::isfinite(lp) ? -lp : kInf;
    }

    double best() const { return best_; }
    int evaluations() const { return result_.evaluations; }
    void seed(const Eigen::VectorXd& x, double lp) {
        best_ = lp;
        result_.theta = x;
    }

private:
    const LogDensity& target_;
    MapResult& result_;
    double best_ = kNegInf;
};

// Adaptive Nelder-Mead (dimension-dependent coefficients) minimizing `obj`
// from `x0` with known cost `f0`. Returns when the simplex collapses in
// value or the budget is exhausted.
void nelder_mead(CountingObjective& obj, const Eigen::VectorXd& x0, double f0, const OptimizerSettings& s,
                 int budget_end) {
    const Eigen::Index n = x0.size();
    const double dn = static_cast<double>(n);
    const double c_reflect = 1.0;
    const double c_expand = 1.0 + 2.0 / dn;
    const double c_contract = 0.75 - 1.0 / (2.0 * dn);
    const double c_shrink = 1.0 - 1.0 / dn;

    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> f(static_cast<std::size_t>(n + 1), f0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = std::max(s.relative_step * std::abs(x0[i]), s.min_step);
        pts[static_cast<std::size_t>(i + 1)][i] += h;
        f[static_cast<std::size_t>(i + 1)] = obj.cost(pts[static_cast<std::size_t>(i + 1)]);
    }
    std::vector<std::size_t> order(static_cast<std::size_t>(n + 1));
    Eigen::VectorXd centroid(n);

    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        const std::size_t ib = order.front();
        const std::size_t iw = order.back();
        const std::size_t isw = order[order.size() - 2];
        if (std::isfinite(f[iw]) && f[iw] - f[ib] <= s.ftol * (std::abs(f[ib]) + s.ftol)) return;
        double spread = 0.0;
        for (const auto& p : pts) spread = std::max(spread, (p - pts[ib]).lpNorm<Eigen::Infinity>());
        if (spread < 1e-12) return;
        if (obj.evaluations() >= budget_end) return;

        centroid.setZero();
        for (std::size_t k = 0; k < pts.size(); ++k)
            if (k != iw) centroid += pts[k];
        centroid /= dn;

        const Eigen::VectorXd xr = centroid + c_reflect * (centroid - pts[iw]);
        const double fr = obj.cost(xr);
        if (fr < f[ib]) {
            const Eigen::VectorXd xe = centroid + c_expand * (xr - centroid);
            const double fe = obj.cost(xe);
            if (fe < fr) {
                pts[iw] = xe;
                f[iw] = fe;
            } else {
                pts[iw] = xr;
                f[iw] = fr;
            }
            continue;
        }
        if (fr < f[isw]) {
            pts[iw] = xr;
            f[iw] = fr;
            continue;
        }
        bool shrink = false;
        if (fr < f[iw]) {
            const Eigen::VectorXd xc = centroid + c_contract * (xr - centroid);
            const double fc = obj.cost(xc);
            if (fc <= fr) {
                pts[iw] = xc;
                f[iw] = fc;
            } else {
                shrink = true;
            }
        } else {
            const Eigen::VectorXd xc = centroid + c_contract * (pts[iw] - centroid);
            const double fc = obj.cost(xc);
            if (fc < f[iw]) {
                pts[iw] = xc;
                f[iw] = fc;
            } else {
                shrink = true;
            }
        }
        if (shrink) {
            for (std::size_t k = 0; k < pts.size(); ++k) {
                if (k == ib) continue;
                pts[k] = pts[ib] + c_shrink * (pts[k] - pts[ib]);
                f[k] = obj.cost(pts[k]);
                if (obj.evaluations() >= budget_end) return;
            }
        }
    }
}

// Central-difference gradient of the cost; false when any probe is invalid.
bool fd_gradient(CountingObjective& obj, const Eigen::VectorXd& x, double h, Eigen::VectorXd& g) {
    g.resize(x.size());
    Eigen::VectorXd y = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        y[i] = x[i] + h;
        const double fp = obj.cost(y);
        y[i] = x[i] - h;
        const double fm = obj.cost(y);
        y[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return true;
}

// BFGS on the inverse Hessian with backtracking Armijo line search. The first
// trial step is capped at `first_step` in the max norm.
void quasi_newton(CountingObjective& obj, const Eigen::VectorXd& x0, double f0, const OptimizerSettings& s) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = x0;
    double fx = f0;
    Eigen::VectorXd g;
    if (!fd_gradient(obj, x, s.qn_fd_step, g)) return;
    const double g_inf = g.lpNorm<Eigen::Infinity>();
    if (g_inf <= s.qn_gtol) return;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) * (s.qn_first_step / g_inf);
    bool fresh = true;
    Eigen::VectorXd gn;
    for (int it = 0; it < s.qn_iterations; ++it) {
        Eigen::VectorXd d = -H * g;
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            H = Eigen::MatrixXd::Identity(n, n) * (s.qn_first_step / g.lpNorm<Eigen::Infinity>());
            d = -H * g;
            slope = g.dot(d);
            fresh = true;
        }
        double t = 1.0;
        Eigen::VectorXd xn;
        double fn = kInf;
        for (int k = 0; k < 30; ++k) {
            xn = x + t * d;
            fn = obj.cost(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * t * slope) break;
            t *= 0.5;
        }
        if (!(std::isfinite(fn) && fn < fx)) {
            if (fresh) return;
            H = Eigen::MatrixXd::Identity(n, n) * (s.qn_first_step / g.lpNorm<Eigen::Infinity>());
            fresh = true;
            continue;
        }
        if (!fd_gradient(obj, xn, s.qn_fd_step, gn)) return;
        const Eigen::VectorXd step = xn - x;
        const Eigen::VectorXd dy = gn - g;
        const double sy = step.dot(dy);
        if (sy > 1e-12 * step.norm() * dy.norm()) {
            if (fresh) H = Eigen::MatrixXd::Identity(n, n) * (sy / dy.squaredNorm());
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * dy;
            H += ((sy + dy.dot(Hy)) * rho * rho) * (step * step.transpose()) -
                 rho * (Hy * step.transpose() + step * Hy.transpose());
            fresh = false;
        }
        const double gain = fx - fn;
        x = xn;
        fx = fn;
        g = gn;
        if (g.lpNorm<Eigen::Infinity>() <= s.qn_gtol) return;
        if (gain <= s.ftol * (std::abs(fx) + s.ftol)) return;
    }
}

}  // namespace

MapResult find_map(const LogDensity& target, const Eigen::VectorXd& start, const OptimizerSettings& settings) {
    MapResult result;
    CountingObjective obj(target, result);
    const double lp0 = target(start);
    ++result.evaluations;
    if (!std::isfinite(lp0))
        throw std::invalid_argument("find_map: start has non-finite log posterior; re-seed the starting point");
    result.start_log_post = lp0;
    obj.seed(start, lp0);
    result.best_trace.push_back(lp0);

    const int nm_budget = settings.max_evaluations;
    double before = lp0;
    for (int r = 0; r <= settings.restarts && result.evaluations < nm_budget; ++r) {
        const Eigen::VectorXd x = result.theta;
        nelder_mead(obj, x, -obj.best(), settings, nm_budget);
        if (r > 0 && obj.best() - before <= settings.ftol * (std::abs(before) + 1.0)) break;
        before = obj.best();
    }

    if (settings.qn_iterations > 0) quasi_newton(obj, result.theta, -obj.best(), settings);

    // Coordinate pattern search.
    const int polish_end = result.evaluations + settings.polish_max_evaluations;
    Eigen::VectorXd x = result.theta;
    double fx = obj.best();
    for (double step = settings.polish_initial_step; result.evaluations < polish_end; step /= 10.0) {
        const bool last = step <= settings.polish_step * (1.0 + 1e-9);
        if (last) step = settings.polish_step;
        const double need = last ? settings.polish_tol : 0.0;
        bool improved = true;
        while (improved && result.evaluations < polish_end) {
            improved = false;
            for (Eigen::Index i = 0; i < x.size() && result.evaluations < polish_end; ++i) {
                for (double sign : {1.0, -1.0}) {
                    Eigen::VectorXd y = x;
                    y[i] += sign * step;
                    const double fy = -obj.cost(y);
                    if (fy > fx + need) {
                        x = y;
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if (last) {
            result.polish_converged = !improved;
            break;
        }
    }
    result.log_post = obj.best();
    return result;
}

// --------------------------------------------------------------------------
// DRAM

void McmcConfig::validate(Eigen::Index dim) const {
    if (n_samples < 1) throw std::invalid_argument("McmcConfig: n_samples must be >= 1");
    if (burn_in < 0 || burn_in >= n_samples) throw std::invalid_argument("McmcConfig: need 0 <= burn_in < n_samples");
    if (!(dr_scale > 0.0 && dr_scale < 1.0)) throw std::invalid_argument("McmcConfig: dr_scale must be in (0, 1)");
    if (!(jitter > 0.0)) throw std::invalid_argument("McmcConfig: jitter must be > 0");
    if (adapt_start < 2) throw std::invalid_argument("McmcConfig: adapt_start must be >= 2");
    if (init_proposal_cov.rows() != dim || init_proposal_cov.cols() != dim)
        throw DimensionError("McmcConfig: init_proposal_cov must be dim x dim");
}

double McmcConfig::scale_for(Eigen::Index dim) const {
    return adapt_scale ? *adapt_scale : 2.38 * 2.38 / static_cast<double>(dim);
}

Eigen::MatrixXd default_proposal_cov(Eigen::Index n_psi) {
    Eigen::VectorXd diag(n_psi + 2);
    diag.head(n_psi).setConstant(1e-4);
    diag.tail(2).setConstant(1e-2);
    return diag.asDiagonal();
}

double first_stage_acceptance(double lp_x, double lp_y) {
    if (!std::isfinite(lp_y)) return 0.0;
    if (!std::isfinite(lp_x)) return 1.0;
    return std::min(1.0, std::exp(lp_y - lp_x));
}

namespace {

std::optional<Eigen::MatrixXd> proposal_factor(const Eigen::MatrixXd& cov, double jitter) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return Eigen::MatrixXd(llt.matrixL());
    Eigen::MatrixXd b = cov;
    b.diagonal().array() += jitter;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return Eigen::MatrixXd(llt.matrixL());
    return std::nullopt;
}

}  // namespace

PosteriorChain dram_sample(const LogDensity& target, const Eigen::VectorXd& init, const McmcConfig& cfg) {
    const Eigen::Index dim = init.size();
    cfg.validate(dim);
    std::mt19937_64 rng(cfg.rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    PosteriorChain chain;
    chain.burn_in = cfg.burn_in;
    chain.n_total = cfg.n_samples;
    const int n_keep = cfg.n_samples - cfg.burn_in;
    chain.samples.resize(n_keep, dim);
    chain.log_posts.resize(n_keep);

    Eigen::VectorXd x = init;
    double lp_x = target(x);
    ++chain.evaluations;
    if (!std::isfinite(lp_x)) throw std::invalid_argument("dram_sample: initial point has non-finite log posterior");
    chain.map_point = x;
    chain.map_log_post = lp_x;

    Eigen::MatrixXd cov = cfg.init_proposal_cov;
    auto factor = proposal_factor(cov, cfg.jitter);
    if (!factor) throw std::invalid_argument("dram_sample: initial proposal covariance is not positive definite");
    Eigen::MatrixXd chol = *factor;
    const double stage2_factor = cfg.dr_mode == DrScaleMode::Covariance ? std::sqrt(cfg.dr_scale) : cfg.dr_scale;
    const double sd = cfg.scale_for(dim);

    // Welford running moments over every chain state so far.
    Eigen::VectorXd run_mean = x;
    Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(dim, dim);
    long count = 1;

    auto store = [&](int i) {
        if (i >= cfg.burn_in) {
            chain.samples.row(i - cfg.burn_in) = x.transpose();
            chain.log_posts[i - cfg.burn_in] = lp_x;
        }
    };
    store(0);

    Eigen::VectorXd z(dim);
    std::size_t accepted = 0;
    for (int i = 1; i < cfg.n_samples; ++i) {
        if (cfg.adapt && i >= cfg.adapt_start) {
            cov = sd * (run_m2 / static_cast<double>(count - 1));
            cov.diagonal().array() += sd * cfg.jitter;
            if (auto f = proposal_factor(cov, cfg.jitter)) chol = *f;
        }

        for (Eigen::Index k = 0; k < dim; ++k) z[k] = normal(rng);
        const Eigen::VectorXd y1 = x + chol * z;
        const double lp_y1 = target(y1);
        ++chain.evaluations;
        const double a1 = first_stage_acceptance(lp_x, lp_y1);
        if (uniform(rng) < a1) {
            x = y1;
            lp_x = lp_y1;
            ++accepted;
            ++chain.stage1_accepts;
        } else if (cfg.delayed_rejection) {
            ++chain.stage2_attempts;
            for (Eigen::Index k = 0; k < dim; ++k) z[k] = normal(rng);
            const Eigen::VectorXd y2 = x + stage2_factor * (chol * z);
            const double lp_y2 = target(y2);
            ++chain.evaluations;
            double a2 = 0.0;
            if (std::isfinite(lp_y2)) {
                const double a1_rev = first_stage_acceptance(lp_y2, lp_y1);
                if (a1_rev < 1.0) {
                    // Gaussian first-stage kernel densities q1(y1 | y2) / q1(y1 | x).
                    const auto& L = chol;
                    const double q_rev = L.triangularView<Eigen::Lower>().solve(y1 - y2).squaredNorm();
                    const double q_fwd = L.triangularView<Eigen::Lower>().solve(y1 - x).squaredNorm();
                    const double log_ratio = lp_y2 - lp_x - 0.5 * (q_rev - q_fwd) + std::log1p(-a1_rev) -
                                             std::log1p(-a1);
                    a2 = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
                }
            }
            if (uniform(rng) < a2) {
                x = y2;
                lp_x = lp_y2;
                ++accepted;
                ++chain.stage2_accepts;
            }
        }

        if (lp_x > chain.map_log_post) {
            chain.map_log_post = lp_x;
            chain.map_point = x;
        }
        ++count;
        const Eigen::VectorXd delta = x - run_mean;
        run_mean += delta / static_cast<double>(count);
        run_m2 += delta * (x - run_mean).transpose();
        store(i);
    }
    chain.acceptance_rate =
        cfg.n_samples > 1 ? static_cast<double>(accepted) / static_cast<double>(cfg.n_samples - 1) : 0.0;
    chain.final_proposal_cov = cov;
    return chain;
}

// --------------------------------------------------------------------------
// Prediction

PropagationResult map_trajectory(const ParameterVector& theta_map, const BasisDictionary& dictionary,
                                 const PhaseState& x0, std::size_t n_steps, double dt, double omega) {
    auto model = std::make_shared<const HamiltonianModel>(dictionary, theta_map.theta_psi);
    const Propagator prop(std::shared_ptr<const Hamiltonian>(std::move(model)), TaoScheme{TaoConfig{omega, dt}});
    return prop.try_propagate(x0, n_steps);
}

PredictiveResult posterior_predictive_mean(const PosteriorChain& chain, const BasisDictionary& dictionary,
                                           const PhaseState& x0, std::size_t n_steps, int thin, double dt,
                                           double omega) {
    if (thin < 1) throw std::invalid_argument("posterior_predictive_mean: thinning interval must be >= 1");
    PredictiveResult out;
    // Running mean, so identical samples reproduce their trajectory exactly.
    Eigen::MatrixXd mean;
    for (Eigen::Index i = 0; i < chain.samples.rows(); i += thin) {
        const ParameterVector theta = ParameterVector::unflatten(chain.samples.row(i).transpose());
        auto r = map_trajectory(theta, dictionary, x0, n_steps, dt, omega);
        if (r.diverged_at) {
            ++out.diverged_count;
            continue;
        }
        if (mean.size() == 0) {
            mean = r.trajectory.states;
            out.mean.times = r.trajectory.times;
        } else {
            mean += (r.trajectory.states - mean) / static_cast<double>(out.ensemble.size() + 1);
        }
        out.sample_indices.push_back(i);
        out.ensemble.push_back(std::move(r.trajectory));
    }
    if (out.ensemble.empty()) throw std::runtime_error("posterior_predictive_mean: every thinned sample diverged");
    out.mean.states = std::move(mean);
    return out;
}

void write_chain_csv(const std::string& path, const PosteriorChain& chain, const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != chain.samples.cols())
        throw DimensionError("write_chain_csv: name count does not match parameter dimension");
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    for (const auto& n : names) f << n << ',';
    f << "log_post\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < chain.samples.cols(); ++j) f << chain.samples(i, j) << ',';
        f << chain.log_posts[i] << '\n';
    }
    if (!f) throw std::ios_base::failure("failed writing " + path);
}

PosteriorChain read_chain_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::ios_base::failure("chain CSV: missing header");
    const auto n_cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
    std::vector<double> values;
    Eigen::Index rows = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Eigen::Index cols = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != n_cols) throw std::ios_base::failure("chain CSV: ragged row");
        ++rows;
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(values.data(), rows,
                                                                                              n_cols);
    PosteriorChain chain;
    chain.samples = m.leftCols(n_cols - 1);
    chain.log_posts = m.col(n_cols - 1);
    return chain;
}

nlohmann::json mcmc_config_to_json(const McmcConfig& cfg) {
    const Eigen::VectorXd diag = cfg.init_proposal_cov.diagonal();
    return {
        {"n_samples", cfg.n_samples},
        {"burn_in", cfg.burn_in},
        {"adapt_start", cfg.adapt_start},
        {"dr_scale", cfg.dr_scale},
        {"dr_mode", cfg.dr_mode == DrScaleMode::Covariance ? "covariance" : "stddev"},
        {"jitter", cfg.jitter},
        {"adapt", cfg.adapt},
        {"delayed_rejection", cfg.delayed_rejection},
        {"init_proposal_diag", std::vector<double>(diag.begin(), diag.end())},
        {"rng_seed", cfg.rng_seed},
    };
}

nlohmann::json chain_sidecar_json(const McmcConfig& cfg, const PosteriorChain& chain) {
    return {
        {"mcmc", mcmc_config_to_json(cfg)},
        {"acceptance_rate", chain.acceptance_rate},
        {"seed", cfg.rng_seed},
        {"evaluations", chain.evaluations},
        {"stage1_accepts", chain.stage1_accepts},
        {"stage2_attempts", chain.stage2_attempts},
        {"stage2_accepts", chain.stage2_accepts},
        {"map_log_post", chain.map_log_post},
        {"retained_samples", chain.samples.rows()},
    };
}

}  // namespace hamid
