// Independent reference computations shared by unit and acceptance tests.
#ifndef HAMID_TESTS_SUPPORT_HPP
#define HAMID_TESTS_SUPPORT_HPP

#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hamid/filtering.hpp"
#include "hamid/hamiltonian.hpp"
#include "hamid/inference.hpp"
#include "hamid/integrators.hpp"

namespace hamid::testing {

inline PhaseState reference_ic() {
    Eigen::VectorXd q(2), p(2);
    q << 0.15, 0.1;
    p << -0.05, 0.1;
    return {q, p};
}

inline GradientFn cherry_grad() { return Hamiltonian::gradient_fn(std::make_shared<CherryHamiltonian>()); }

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Log-log slope of the final-state error at t = 1 over dt in
/// {0.04, 0.02, 0.01, 0.005} against a dt = 1e-5 Tao reference.
inline double convergence_slope(bool tao, double omega = 10.0) {
    const auto grad = cherry_grad();
    const auto x0 = reference_ic();
    Propagator ref(grad, TaoScheme{{omega, 1e-5}});
    const Eigen::VectorXd exact = ref.propagate(x0, 100000).states.bottomRows(1).transpose();
    std::vector<double> lx, ly;
    for (double dt : {0.04, 0.02, 0.01, 0.005}) {
        Scheme s = tao ? Scheme(TaoScheme{{omega, dt}}) : Scheme(Rk2Scheme{dt});
        Propagator prop(grad, s);
        const auto n = static_cast<std::size_t>(std::llround(1.0 / dt));
        const Eigen::VectorXd end = prop.propagate(x0, n).states.bottomRows(1).transpose();
        lx.push_back(std::log(dt));
        ly.push_back(std::log((end - exact).norm()));
    }
    return slope(lx, ly);
}

/// Canonical form on (q, p, q~, p~) with conjugate pairs (q_i, p_i) and
/// (q~_i, p~_i).
inline Eigen::MatrixXd augmented_symplectic_form(Eigen::Index d) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(4 * d, 4 * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        S(i, d + i) = 1;
        S(d + i, i) = -1;
        S(2 * d + i, 3 * d + i) = 1;
        S(3 * d + i, 2 * d + i) = -1;
    }
    return S;
}

/// max |J^T S J - S| for a central-difference Jacobian of one Tao step.
inline double symplectic_defect(const Eigen::VectorXd& aug, const TaoConfig& cfg, const GradientFn& grad,
                                double h = 1e-5) {
    const Eigen::Index n = aug.size();
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd a = aug, b = aug;
        a(j) += h;
        b(j) -= h;
        J.col(j) = (tao_step(AugmentedState::from_vector(a), cfg, grad).data() -
                    tao_step(AugmentedState::from_vector(b), cfg, grad).data()) /
                   (2 * h);
    }
    const Eigen::MatrixXd S = augmented_symplectic_form(n / 4);
    return (J.transpose() * S * J - S).cwiseAbs().maxCoeff();
}

/// Textbook Kalman filter for x+ = F x + N(0, s I), y = x + N(0, g I)
/// with steps_per_obs transitions between updates. Starts at N(y0, g I).
inline double kalman_log_likelihood(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y, int steps_per_obs, double s,
                                    double g) {
    const Eigen::Index n = F.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd m = Y.row(0).transpose();
    Eigen::MatrixXd P = g * I;
    double ll = 0.0;
    for (Eigen::Index k = 1; k < Y.rows(); ++k) {
        for (int j = 0; j < steps_per_obs; ++j) {
            m = F * m;
            P = F * P * F.transpose() + s * I;
        }
        const Eigen::MatrixXd S = P + g * I;
        const Eigen::VectorXd e = Y.row(k).transpose() - m;
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        ll += -0.5 * (static_cast<double>(n) * std::log(2 * std::numbers::pi) + logdet + e.dot(llt.solve(e)));
        const Eigen::MatrixXd K = P * S.inverse();
        m += K * e;
        P = (I - K) * P;
        P = 0.5 * (P + P.transpose());
    }
    return ll;
}

/// Random F with spectral norm 0.95.
inline Eigen::MatrixXd random_stable_matrix(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd F(n, n);
    for (Eigen::Index i = 0; i < n * n; ++i) F.data()[i] = z(rng);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F);
    return 0.95 * F / svd.singularValues()(0);
}

inline Eigen::MatrixXd simulate_linear(const Eigen::MatrixXd& F, const Eigen::VectorXd& x0, int n_obs,
                                       int steps_per_obs, double s, double g, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    const Eigen::Index n = F.rows();
    Eigen::MatrixXd Y(n_obs + 1, n);
    Eigen::VectorXd x = x0;
    auto noisy = [&](const Eigen::VectorXd& v, double var) {
        Eigen::VectorXd out = v;
        for (Eigen::Index i = 0; i < n; ++i) out(i) += std::sqrt(var) * z(rng);
        return out;
    };
    Y.row(0) = noisy(x, g).transpose();
    for (int k = 1; k <= n_obs; ++k) {
        for (int j = 0; j < steps_per_obs; ++j) x = noisy(F * x, s);
        Y.row(k) = noisy(x, g).transpose();
    }
    return Y;
}

inline TransitionFn linear_transition(const Eigen::MatrixXd& F) {
    return [F](std::span<double> x) {
        Eigen::Map<Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        const Eigen::VectorXd next = F * v;
        v = next;
        return true;
    };
}

struct GaussianTarget {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd precision;

    double operator()(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd e = x - mean;
        return -0.5 * e.dot(precision * e);
    }
};

/// 5-D target with unit-ish variances and correlation 0.5 between
/// neighbours.
inline GaussianTarget correlated_gaussian(Eigen::Index d = 5) {
    GaussianTarget t;
    t.mean = Eigen::VectorXd::LinSpaced(d, -1.0, 2.0);
    t.cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        t.cov(i, i) = 1.0 + 0.25 * static_cast<double>(i);
        if (i + 1 < d) t.cov(i, i + 1) = t.cov(i + 1, i) = 0.5;
    }
    t.precision = t.cov.inverse();
    return t;
}

/// Batch-means standard error of each column's mean.
inline Eigen::VectorXd batch_means_se(const Eigen::MatrixXd& samples, int n_batches = 40) {
    const Eigen::Index b = samples.rows() / n_batches;
    Eigen::MatrixXd means(n_batches, samples.cols());
    for (int k = 0; k < n_batches; ++k) means.row(k) = samples.middleRows(k * b, b).colwise().mean();
    const Eigen::RowVectorXd mu = means.colwise().mean();
    const Eigen::MatrixXd c = means.rowwise() - mu;
    return (c.colwise().squaredNorm() / (n_batches - 1.0) / n_batches).cwiseSqrt().transpose();
}

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace hamid::testing

#endif  // HAMID_TESTS_SUPPORT_HPP
