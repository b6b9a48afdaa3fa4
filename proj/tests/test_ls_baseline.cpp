#include <cmath>
#include <random>

#include "doctest.h"
#include "hamid/ls_baseline.hpp"
#include "support.hpp"

using namespace hamid;
using namespace hamid::testing;

namespace {

Eigen::MatrixXd cherry_dense(double dt, int n) {
    return Propagator(cherry_grad(), TaoScheme{{10.0, dt}}).propagate(reference_ic(), n).states;
}

// Exact time derivatives: qdot = H_p, pdot = -H_q.
DerivativeEstimates exact_derivatives(const Eigen::MatrixXd& states) {
    const Eigen::Index k = states.rows(), d = states.cols() / 2;
    DerivativeEstimates de{Eigen::MatrixXd(k, d), Eigen::MatrixXd(k, d)};
    for (Eigen::Index i = 0; i < k; ++i) {
        auto g = cherry_gradient(PhaseState::from_vector(states.row(i).transpose()));
        de.qdot.row(i) = g.tail(d).transpose();
        de.pdot.row(i) = -g.head(d).transpose();
    }
    return de;
}

}  // namespace

TEST_CASE("finite differences are exact on quadratics") {
    const double h = 0.1;
    Eigen::MatrixXd s(6, 2);
    for (int i = 0; i < 6; ++i) {
        const double t = i * h;
        s(i, 0) = t * t;
        s(i, 1) = 3 * t - t * t;
    }
    auto de = finite_difference(s, h);
    for (int i = 0; i < 6; ++i) {
        const double t = i * h;
        CHECK(de.qdot(i, 0) == doctest::Approx(2 * t).scale(1.0).epsilon(1e-12));
        CHECK(de.pdot(i, 0) == doctest::Approx(3 - 2 * t).epsilon(1e-12));
    }
}

TEST_CASE("finite differences of a sine are second order") {
    auto err = [](double h) {
        const int n = static_cast<int>(std::lround(1.0 / h)) + 1;
        Eigen::MatrixXd s(n, 2);
        for (int i = 0; i < n; ++i) s.row(i) << std::sin(i * h), std::cos(i * h);
        auto de = finite_difference(s, h);
        double e = 0.0;
        for (int i = 0; i < n; ++i) e = std::max(e, std::abs(de.qdot(i, 0) - std::cos(i * h)));
        return e;
    };
    CHECK(err(0.01) <= 1e-4);
    CHECK(err(0.02) / err(0.01) == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("finite difference errors") {
    CHECK_THROWS(finite_difference(Eigen::MatrixXd::Zero(2, 2), 0.1));
    CHECK_THROWS(finite_difference(Eigen::MatrixXd::Zero(5, 2), 0.0));
    CHECK_THROWS_AS(finite_difference(Eigen::MatrixXd::Zero(5, 3), 0.1), DimensionError);
}

TEST_CASE("solve_ls conventions") {
    Eigen::VectorXd b(3);
    b << 1, -2, 3;
    CHECK(solve_ls(Eigen::MatrixXd::Identity(3, 3), b) == b);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    A(0, 0) = 2.0;
    A(1, 1) = 1.0;
    Eigen::VectorXd rhs(3);
    rhs << 4, 5, 0;
    Eigen::VectorXd c = solve_ls(A, rhs);
    CHECK(c(0) == doctest::Approx(2.0));
    CHECK(c(1) == doctest::Approx(5.0));
    CHECK(c(2) == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS(solve_ls(A, Eigen::VectorXd::Zero(2)));
}

TEST_CASE("oscillator orientation recovers +H") {
    // q = cos t, p = -sin t is the flow of (q^2 + p^2) / 2.
    const double h = 0.01;
    Eigen::MatrixXd s(300, 2);
    for (int i = 0; i < 300; ++i) s.row(i) << std::cos(i * h), -std::sin(i * h);
    BasisDictionary quad(BasisKind::Monomial, 2, 2);
    auto model = fit_ls({s}, h, quad);
    const Eigen::VectorXd& c = model.coefficients();  // q, p, q^2, qp, p^2
    CHECK(c(2) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(c(4) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(std::abs(c(3)) < 1e-3);
}

TEST_CASE("linear dictionary recovers identity-coupled drift") {
    // H = q + p: qdot = 1, pdot = -1.
    const double h = 0.05;
    Eigen::MatrixXd s(40, 2);
    for (int i = 0; i < 40; ++i) s.row(i) << i * h, -i * h;
    auto model = fit_ls({s}, h, BasisDictionary(BasisKind::Monomial, 2, 1));
    CHECK(model.coefficients()(0) == doctest::Approx(1.0));
    CHECK(model.coefficients()(1) == doctest::Approx(1.0));
}

TEST_CASE("exact derivatives recover Cherry to 1e-10") {
    const Eigen::MatrixXd s = cherry_dense(0.01, 1600);
    BasisDictionary dict(BasisKind::Monomial, 4, 3);
    auto sys = assemble(s, exact_derivatives(s), dict);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.A);
    REQUIRE(lu.rank() == sys.A.rows());
    const Eigen::VectorXd c = solve_ls(sys.A, sys.b);
    CHECK((c - cherry_coefficients(dict)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("dense noiseless Cherry data recovers coefficients to 1e-3") {
    BasisDictionary dict(BasisKind::Monomial, 4, 3);
    auto model = fit_ls({cherry_dense(0.01, 1600)}, 0.01, dict);
    CHECK((model.coefficients() - cherry_coefficients(dict)).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("zero-gradient terms do not enter the system") {
    // Degree-1 dictionary gradients are constant; a shifted copy of the data
    // gives the same A and b.
    const Eigen::MatrixXd s = cherry_dense(0.01, 200);
    BasisDictionary dict(BasisKind::Monomial, 4, 1);
    auto de = finite_difference(s, 0.01);
    auto a = assemble(s, de, dict);
    auto b = assemble((s.array() + 5.0).matrix(), de, dict);
    CHECK((a.A - b.A).norm() < 1e-14);
    CHECK((a.b - b.b).norm() < 1e-14);
}

TEST_CASE("coefficient error grows with measurement noise") {
    BasisDictionary dict(BasisKind::Monomial, 4, 3);
    const Eigen::MatrixXd clean = cherry_dense(0.01, 800);
    const Eigen::VectorXd truth = cherry_coefficients(dict);
    std::vector<double> errs;
    for (double sigma : {0.0, 0.01, 0.05}) {
        double total = 0.0;
        for (int seed = 0; seed < 10; ++seed) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> z(0.0, sigma > 0 ? sigma : 1.0);
            Eigen::MatrixXd noisy = clean;
            if (sigma > 0)
                for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += z(rng);
            total += (fit_ls({noisy}, 0.01, dict).coefficients() - truth).norm();
        }
        errs.push_back(total / 10);
    }
    CHECK(errs[0] < errs[1]);
    CHECK(errs[1] < errs[2]);
}

TEST_CASE("pooling several trajectories") {
    BasisDictionary dict(BasisKind::Monomial, 4, 3);
    const Eigen::MatrixXd s = cherry_dense(0.01, 1600);
    auto one = fit_ls({s}, 0.01, dict);
    auto two = fit_ls({s, s}, 0.01, dict);
    CHECK((one.coefficients() - two.coefficients()).norm() < 1e-9);
    CHECK_THROWS(fit_ls({}, 0.01, dict));
}
