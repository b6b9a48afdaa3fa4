#include "hamid/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace hamid {

bool state_is_bounded(std::span<const double> x) {
    for (double v : x)
        if (!(std::abs(v) <= kDivergenceBound)) return false;  // also catches NaN
    return true;
}

AugmentedState::AugmentedState(const Eigen::VectorXd& q, const Eigen::VectorXd& p, const Eigen::VectorXd& qt,
                               const Eigen::VectorXd& pt)
    : data_(4 * q.size()), d_(q.size()) {
    if (p.size() != d_ || qt.size() != d_ || pt.size() != d_ || d_ < 1)
        throw DimensionError("AugmentedState: all four blocks must have the same length >= 1");
    data_ << q, p, qt, pt;
}

AugmentedState AugmentedState::from_vector(Eigen::VectorXd data) {
    if (data.size() % 4 != 0 || data.size() == 0)
        throw DimensionError("AugmentedState: length must be a positive multiple of 4");
    AugmentedState a(data.size() / 4);
    a.data_ = std::move(data);
    return a;
}

void TaoConfig::validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("TaoConfig: omega must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("TaoConfig: dt must be > 0");
}

AugmentedState lift(const PhaseState& s) { return AugmentedState(s.q, s.p, s.q, s.p); }

PhaseState restrict_state(const AugmentedState& aug) { return PhaseState(aug.q(), aug.p()); }

namespace detail {

void flow_a_inplace(std::span<double> aug, double dt, const GradientFn& grad, std::span<double> work) {
    const std::size_t d = aug.size() / 4;
    double* q = aug.data();
    double* p = q + d;
    double* qt = p + d;
    double* pt = qt + d;
    std::span<double> x = work.subspan(0, 2 * d);
    std::span<double> g = work.subspan(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        x[i] = q[i];
        x[d + i] = pt[i];
    }
    grad(x, g);
    for (std::size_t i = 0; i < d; ++i) {
        p[i] -= dt * g[i];
        qt[i] += dt * g[d + i];
    }
}

void flow_b_inplace(std::span<double> aug, double dt, const GradientFn& grad, std::span<double> work) {
    const std::size_t d = aug.size() / 4;
    double* q = aug.data();
    double* p = q + d;
    double* qt = p + d;
    double* pt = qt + d;
    std::span<double> x = work.subspan(0, 2 * d);
    std::span<double> g = work.subspan(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        x[i] = qt[i];
        x[d + i] = p[i];
    }
    grad(x, g);
    for (std::size_t i = 0; i < d; ++i) {
        q[i] += dt * g[d + i];
        pt[i] -= dt * g[i];
    }
}

void flow_c_inplace(std::span<double> aug, double dt, double omega) {
    const std::size_t d = aug.size() / 4;
    double* q = aug.data();
    double* p = q + d;
    double* qt = p + d;
    double* pt = qt + d;
    const double c = std::cos(2.0 * omega * dt);
    const double s = std::sin(2.0 * omega * dt);
    for (std::size_t i = 0; i < d; ++i) {
        const double sq = q[i] + qt[i], sp = p[i] + pt[i];
        const double dq = q[i] - qt[i], dp = p[i] - pt[i];
        const double rq = c * dq + s * dp;
        const double rp = -s * dq + c * dp;
        q[i] = 0.5 * (sq + rq);
        p[i] = 0.5 * (sp + rp);
        qt[i] = 0.5 * (sq - rq);
        pt[i] = 0.5 * (sp - rp);
    }
}

void tao_step_inplace(std::span<double> aug, const TaoConfig& cfg, const GradientFn& grad, std::span<double> work) {
    const double h = 0.5 * cfg.dt;
    flow_a_inplace(aug, h, grad, work);
    flow_b_inplace(aug, h, grad, work);
    flow_c_inplace(aug, cfg.dt, cfg.omega);
    flow_b_inplace(aug, h, grad, work);
    flow_a_inplace(aug, h, grad, work);
}

void rk2_step_inplace(std::span<double> x, double dt, const GradientFn& grad, std::span<double> work) {
    const std::size_t n = x.size();
    const std::size_t d = n / 2;
    std::span<double> g = work.subspan(0, n);
    std::span<double> mid = work.subspan(n, n);
    grad(x, g);
    for (std::size_t i = 0; i < d; ++i) {
        mid[i] = x[i] + 0.5 * dt * g[d + i];
        mid[d + i] = x[d + i] - 0.5 * dt * g[i];
    }
    grad(mid, g);
    for (std::size_t i = 0; i < d; ++i) {
        x[i] += dt * g[d + i];
        x[d + i] -= dt * g[i];
    }
}

}  // namespace detail

namespace {

void require_finite(const AugmentedState& a, const char* what) {
    if (!a.data().allFinite()) throw DivergenceError(0, std::string(what) + ": non-finite state");
}

}  // namespace

AugmentedState flow_a(const AugmentedState& aug, double dt, const GradientFn& grad) {
    AugmentedState out = aug;
    std::vector<double> work(4 * static_cast<std::size_t>(aug.dim()));
    detail::flow_a_inplace(as_span(out.data()), dt, grad, work);
    require_finite(out, "flow_a");
    return out;
}

AugmentedState flow_b(const AugmentedState& aug, double dt, const GradientFn& grad) {
    AugmentedState out = aug;
    std::vector<double> work(4 * static_cast<std::size_t>(aug.dim()));
    detail::flow_b_inplace(as_span(out.data()), dt, grad, work);
    require_finite(out, "flow_b");
    return out;
}

AugmentedState flow_c(const AugmentedState& aug, double dt, double omega) {
    AugmentedState out = aug;
    detail::flow_c_inplace(as_span(out.data()), dt, omega);
    return out;
}

AugmentedState tao_step(const AugmentedState& aug, const TaoConfig& cfg, const GradientFn& grad) {
    AugmentedState out = aug;
    std::vector<double> work(4 * static_cast<std::size_t>(aug.dim()));
    detail::tao_step_inplace(as_span(out.data()), cfg, grad, work);
    require_finite(out, "tao_step");
    return out;
}

PhaseState rk2_step(const PhaseState& state, double dt, const GradientFn& grad) {
    Eigen::VectorXd x = state.to_vector();
    std::vector<double> work(3 * static_cast<std::size_t>(x.size()));
    detail::rk2_step_inplace(as_span(x), dt, grad, work);
    if (!x.allFinite()) throw DivergenceError(0, "rk2_step: non-finite state");
    return PhaseState::from_vector(x);
}

Propagator::Propagator(GradientFn grad, Scheme scheme) : grad_(std::move(grad)), scheme_(scheme) {
    if (!grad_) throw std::invalid_argument("Propagator: empty gradient function");
    if (const auto* tao = std::get_if<TaoScheme>(&scheme_))
        tao->config.validate();
    else if (!(std::get<Rk2Scheme>(scheme_).dt > 0.0))
        throw std::invalid_argument("Propagator: RK2 dt must be > 0");
}

Propagator::Propagator(std::shared_ptr<const Hamiltonian> h, Scheme scheme)
    : Propagator(Hamiltonian::gradient_fn(std::move(h)), scheme) {}

double Propagator::dt() const {
    if (const auto* tao = std::get_if<TaoScheme>(&scheme_)) return tao->config.dt;
    return std::get<Rk2Scheme>(scheme_).dt;
}

bool Propagator::step(std::span<double> x) const {
    const std::size_t n = x.size();
    if (const auto* tao = std::get_if<TaoScheme>(&scheme_)) {
        // aug occupies 2n doubles, flow scratch another 2n
        thread_local std::vector<double> buf;
        if (buf.size() < 4 * n) buf.resize(4 * n);
        std::span<double> aug(buf.data(), 2 * n);
        std::span<double> work(buf.data() + 2 * n, 2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            aug[i] = x[i];
            aug[n + i] = x[i];
        }
        detail::tao_step_inplace(aug, tao->config, grad_, work);
        for (std::size_t i = 0; i < n; ++i) x[i] = aug[i];
        return state_is_bounded(aug);
    }
    thread_local std::vector<double> work;
    if (work.size() < 3 * n) work.resize(3 * n);
    detail::rk2_step_inplace(x, std::get<Rk2Scheme>(scheme_).dt, grad_, work);
    return state_is_bounded(x);
}

PropagationResult Propagator::try_propagate(const PhaseState& x0, std::size_t n_steps, double t0) const {
    const Eigen::Index n = 2 * x0.dim();
    const double h = dt();
    Eigen::MatrixXd states(static_cast<Eigen::Index>(n_steps) + 1, n);
    states.row(0) = x0.to_vector().transpose();
    std::optional<std::size_t> diverged;
    std::size_t filled = 1;

    if (const auto* tao = std::get_if<TaoScheme>(&scheme_)) {
        Eigen::VectorXd aug = lift(x0).data();
        std::vector<double> work(4 * static_cast<std::size_t>(x0.dim()));
        for (std::size_t k = 1; k <= n_steps; ++k) {
            detail::tao_step_inplace(as_span(aug), tao->config, grad_, work);
            if (!state_is_bounded(as_span(aug))) {
                diverged = k;
                break;
            }
            states.row(static_cast<Eigen::Index>(k)) = aug.head(n).transpose();
            ++filled;
        }
    } else {
        Eigen::VectorXd x = x0.to_vector();
        std::vector<double> work(3 * static_cast<std::size_t>(n));
        for (std::size_t k = 1; k <= n_steps; ++k) {
            detail::rk2_step_inplace(as_span(x), h, grad_, work);
            if (!state_is_bounded(as_span(x))) {
                diverged = k;
                break;
            }
            states.row(static_cast<Eigen::Index>(k)) = x.transpose();
            ++filled;
        }
    }

    PropagationResult out;
    out.diverged_at = diverged;
    out.trajectory.states = states.topRows(static_cast<Eigen::Index>(filled));
    out.trajectory.times.resize(static_cast<Eigen::Index>(filled));
    for (std::size_t k = 0; k < filled; ++k)
        out.trajectory.times[static_cast<Eigen::Index>(k)] = t0 + static_cast<double>(k) * h;
    return out;
}

Trajectory Propagator::propagate(const PhaseState& x0, std::size_t n_steps, double t0) const {
    auto r = try_propagate(x0, n_steps, t0);
    if (r.diverged_at) throw DivergenceError(*r.diverged_at, "propagation diverged");
    return std::move(r.trajectory);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const Eigen::Index n = traj.state_dim();
    const Eigen::Index d = n / 2;
    os << 't';
    for (Eigen::Index i = 0; i < d; ++i) os << ",q" << i + 1;
    for (Eigen::Index i = 0; i < d; ++i) os << ",p" << i + 1;
    os << '\n' << std::setprecision(17);
    for (Eigen::Index k = 0; k < traj.size(); ++k) {
        os << traj.times[k];
        for (Eigen::Index j = 0; j < n; ++j) os << ',' << traj.states(k, j);
        os << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    write_trajectory_csv(f, traj);
    if (!f) throw std::ios_base::failure("failed writing " + path);
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::ios_base::failure("trajectory CSV: missing header");
    const auto n_cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
    if (n_cols < 3 || (n_cols - 1) % 2 != 0) throw std::ios_base::failure("trajectory CSV: bad header");
    std::vector<double> values;
    Eigen::Index rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Eigen::Index cols = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != n_cols) throw std::ios_base::failure("trajectory CSV: ragged row " + std::to_string(rows + 1));
        ++rows;
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(values.data(), rows,
                                                                                              n_cols);
    Trajectory t;
    t.times = m.col(0);
    t.states = m.rightCols(n_cols - 1);
    return t;
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::ios_base::failure("cannot open " + path);
    return read_trajectory_csv(f);
}

}  // namespace hamid
