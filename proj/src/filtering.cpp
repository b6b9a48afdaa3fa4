#include "hamid/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

namespace hamid {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a, double jitter) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return Eigen::MatrixXd(llt.matrixL());
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    llt.compute(b);
    if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return Eigen::MatrixXd(llt.matrixL());
    return std::nullopt;
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace

double UkfConfig::lambda(Eigen::Index n) const {
    const double k = kappa ? *kappa : 3.0 - static_cast<double>(n);
    return alpha * alpha * (static_cast<double>(n) + k) - static_cast<double>(n);
}

void UkfConfig::validate(Eigen::Index n) const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("UkfConfig: alpha must be in (0, 1]");
    if (!(static_cast<double>(n) + lambda(n) > 0.0))
        throw std::invalid_argument("UkfConfig: n + lambda must be positive");
    if (!(jitter > 0.0)) throw std::invalid_argument("UkfConfig: jitter must be > 0");
}

std::optional<SigmaPoints> sigma_points(const GaussianBelief& belief, const UkfConfig& cfg) {
    const Eigen::Index n = belief.mean.size();
    const double lam = cfg.lambda(n);
    const double scale = static_cast<double>(n) + lam;
    auto chol = robust_cholesky(scale * belief.cov, cfg.jitter);
    if (!chol) return std::nullopt;

    SigmaPoints sp;
    sp.points.resize(n, 2 * n + 1);
    sp.points.col(0) = belief.mean;
    for (Eigen::Index i = 0; i < n; ++i) {
        sp.points.col(1 + i) = belief.mean + chol->col(i);
        sp.points.col(1 + n + i) = belief.mean - chol->col(i);
    }
    sp.wm = Eigen::VectorXd::Constant(2 * n + 1, 0.5 / scale);
    sp.wc = sp.wm;
    sp.wm[0] = lam / scale;
    sp.wc[0] = lam / scale + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
    return sp;
}

ObservationModel ObservationModel::identity(Eigen::Index n) {
    return {n, [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); }};
}

std::optional<GaussianBelief> ukf_predict(const GaussianBelief& belief, const TransitionFn& transition,
                                          double theta_sigma, const UkfConfig& cfg) {
    auto sp = sigma_points(belief, cfg);
    if (!sp) return std::nullopt;
    const Eigen::Index n = belief.mean.size();
    Eigen::MatrixXd& pts = sp->points;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        std::span<double> col(pts.col(i).data(), static_cast<std::size_t>(n));
        if (!transition(col)) return std::nullopt;
    }
    GaussianBelief out;
    out.mean = pts * sp->wm;
    const Eigen::MatrixXd dev = pts.colwise() - out.mean;
    out.cov = dev * sp->wc.asDiagonal() * dev.transpose();
    out.cov.diagonal().array() += theta_sigma;
    symmetrize(out.cov);
    if (!out.mean.allFinite() || !out.cov.allFinite()) return std::nullopt;
    return out;
}

std::optional<UkfUpdate> ukf_update(const GaussianBelief& predicted, const Eigen::VectorXd& y,
                                    const ObservationModel& obs, double theta_gamma, const UkfConfig& cfg) {
    if (y.size() != obs.output_dim) throw DimensionError("ukf_update: observation length mismatch");
    if (!y.allFinite()) throw std::invalid_argument("ukf_update: non-finite observation");
    auto sp = sigma_points(predicted, cfg);
    if (!sp) return std::nullopt;
    const Eigen::Index n = predicted.mean.size();
    const Eigen::Index m = obs.output_dim;
    const Eigen::Index n_pts = sp->points.cols();

    Eigen::MatrixXd z(m, n_pts);
    for (Eigen::Index i = 0; i < n_pts; ++i)
        obs.apply(std::span<const double>(sp->points.col(i).data(), static_cast<std::size_t>(n)),
                  std::span<double>(z.col(i).data(), static_cast<std::size_t>(m)));
    const Eigen::VectorXd z_mean = z * sp->wm;
    const Eigen::MatrixXd dz = z.colwise() - z_mean;
    const Eigen::MatrixXd dx = sp->points.colwise() - predicted.mean;

    Eigen::MatrixXd s = dz * sp->wc.asDiagonal() * dz.transpose();
    s.diagonal().array() += theta_gamma;
    symmetrize(s);
    const Eigen::MatrixXd cross = dx * sp->wc.asDiagonal() * dz.transpose();

    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return std::nullopt;

    UkfUpdate out;
    out.innovation = y - z_mean;
    out.innovation_cov = s;
    const Eigen::MatrixXd gain = llt.solve(cross.transpose()).transpose();  // cross S^{-1}
    out.belief.mean = predicted.mean + gain * out.innovation;
    out.belief.cov = predicted.cov - gain * s * gain.transpose();
    symmetrize(out.belief.cov);

    const Eigen::MatrixXd l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const Eigen::VectorXd white = llt.matrixL().solve(out.innovation);
    out.log_lik = -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det + white.squaredNorm());
    if (!std::isfinite(out.log_lik) || !out.belief.mean.allFinite()) return std::nullopt;
    return out;
}

std::optional<UkfStep> ukf_step(const GaussianBelief& belief, const Eigen::VectorXd& y, const TransitionFn& transition,
                                const ObservationModel& obs, const NoiseParams& noise, const UkfConfig& cfg) {
    auto pred = ukf_predict(belief, transition, noise.theta_sigma, cfg);
    if (!pred) return std::nullopt;
    auto upd = ukf_update(*pred, y, obs, noise.theta_gamma, cfg);
    if (!upd) return std::nullopt;
    return UkfStep{std::move(upd->belief), upd->log_lik};
}

double log_marginal_likelihood(const GaussianBelief& initial, const Eigen::MatrixXd& observations, int steps_per_obs,
                               const TransitionFn& transition, const ObservationModel& obs, const NoiseParams& noise,
                               const UkfConfig& cfg, std::vector<InnovationRecord>* diagnostics) {
    if (steps_per_obs < 1) throw std::invalid_argument("log_marginal_likelihood: steps_per_obs must be >= 1");
    if (noise.theta_sigma < 0.0 || noise.theta_gamma < 0.0)
        throw std::invalid_argument("log_marginal_likelihood: noise variances must be >= 0");
    cfg.validate(initial.mean.size());
    GaussianBelief belief = initial;
    double total = 0.0;
    for (Eigen::Index k = 0; k < observations.rows(); ++k) {
        for (int s = 0; s < steps_per_obs; ++s) {
            auto pred = ukf_predict(belief, transition, noise.theta_sigma, cfg);
            if (!pred) return kNegInf;
            belief = std::move(*pred);
        }
        auto upd = ukf_update(belief, observations.row(k).transpose(), obs, noise.theta_gamma, cfg);
        if (!upd) return kNegInf;
        total += upd->log_lik;
        if (diagnostics)
            diagnostics->push_back({k, upd->innovation, upd->innovation_cov.diagonal(), upd->log_lik});
        belief = std::move(upd->belief);
    }
    return total;
}

double log_marginal_likelihood(const Eigen::MatrixXd& observations, int steps_per_obs, const TransitionFn& transition,
                               const ObservationModel& obs, const NoiseParams& noise, const UkfConfig& cfg,
                               std::vector<InnovationRecord>* diagnostics) {
    if (observations.rows() == 0) throw std::invalid_argument("log_marginal_likelihood: empty data");
    const Eigen::Index n = observations.cols();
    if (obs.output_dim != n)
        throw DimensionError("log_marginal_likelihood: initialization from y_0 needs a full-state observation");
    GaussianBelief init{observations.row(0).transpose(), noise.theta_gamma * Eigen::MatrixXd::Identity(n, n)};
    const Eigen::MatrixXd rest = observations.bottomRows(observations.rows() - 1);
    if (diagnostics) {
        std::vector<InnovationRecord> local;
        const double ll = log_marginal_likelihood(init, rest, steps_per_obs, transition, obs, noise, cfg, &local);
        for (auto& r : local) {
            r.obs_index += 1;
            diagnostics->push_back(std::move(r));
        }
        return ll;
    }
    return log_marginal_likelihood(init, rest, steps_per_obs, transition, obs, noise, cfg, nullptr);
}

double log_marginal_likelihood(const Eigen::MatrixXd& observations, const ParameterVector& params,
                               const ModelSkeleton& skeleton, const UkfConfig& cfg,
                               std::vector<InnovationRecord>* diagnostics) {
    if (!params.theta_psi.allFinite() || !std::isfinite(params.log_theta_sigma) ||
        !std::isfinite(params.log_theta_gamma))
        return kNegInf;
    const Propagator prop = skeleton.make_propagator(params.theta_psi);
    const TransitionFn transition = [&prop](std::span<double> x) { return prop.step(x); };
    const NoiseParams noise{params.theta_sigma(), params.theta_gamma()};
    if (!std::isfinite(noise.theta_sigma) || !std::isfinite(noise.theta_gamma)) return kNegInf;
    return log_marginal_likelihood(observations, skeleton.steps_per_obs, transition,
                                   ObservationModel::identity(observations.cols()), noise, cfg, diagnostics);
}

double multi_trajectory_log_likelihood(const std::vector<Eigen::MatrixXd>& datasets, const ParameterVector& params,
                                       const ModelSkeleton& skeleton, const UkfConfig& cfg) {
    if (datasets.empty()) throw std::invalid_argument("multi_trajectory_log_likelihood: need at least one trajectory");
    std::vector<double> terms;
    terms.reserve(datasets.size());
    for (const auto& data : datasets) {
        const double ll = log_marginal_likelihood(data, params, skeleton, cfg);
        if (!std::isfinite(ll)) return kNegInf;
        terms.push_back(ll);
    }
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
}

void write_innovations_csv(const std::string& path, const std::vector<InnovationRecord>& records) {
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    const Eigen::Index m = records.empty() ? 0 : records.front().innovation.size();
    f << "k";
    for (Eigen::Index i = 0; i < m; ++i) f << ",nu" << i + 1;
    for (Eigen::Index i = 0; i < m; ++i) f << ",s" << i + 1;
    f << ",log_lik\n" << std::setprecision(17);
    for (const auto& r : records) {
        f << r.obs_index;
        for (Eigen::Index i = 0; i < m; ++i) f << ',' << r.innovation[i];
        for (Eigen::Index i = 0; i < m; ++i) f << ',' << r.innovation_var[i];
        f << ',' << r.log_lik << '\n';
    }
}

}  // namespace hamid
