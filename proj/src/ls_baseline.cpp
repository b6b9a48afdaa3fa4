#include "hamid/ls_baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace hamid {

DerivativeEstimates finite_difference(const Eigen::MatrixXd& states, double h) {
    const Eigen::Index k = states.rows();
    if (k < 3) throw std::invalid_argument("finite_difference: need at least 3 samples");
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference: spacing must be > 0");
    if (states.cols() % 2 != 0) throw DimensionError("finite_difference: state width must be even");

    Eigen::MatrixXd deriv(k, states.cols());
    const double inv = 1.0 / (2.0 * h);
    deriv.row(0) = (-3.0 * states.row(0) + 4.0 * states.row(1) - states.row(2)) * inv;
    for (Eigen::Index i = 1; i + 1 < k; ++i) deriv.row(i) = (states.row(i + 1) - states.row(i - 1)) * inv;
    deriv.row(k - 1) = (3.0 * states.row(k - 1) - 4.0 * states.row(k - 2) + states.row(k - 3)) * inv;

    const Eigen::Index d = states.cols() / 2;
    return {deriv.leftCols(d), deriv.rightCols(d)};
}

NormalSystem assemble(const Eigen::MatrixXd& states, const DerivativeEstimates& derivs,
                      const BasisDictionary& dictionary) {
    const Eigen::Index k = states.rows();
    const Eigen::Index d = states.cols() / 2;
    if (k < 1) throw std::invalid_argument("assemble: need at least one sample");
    if (derivs.qdot.rows() != k || derivs.pdot.rows() != k)
        throw DimensionError("assemble: derivative rows must match state rows");
    if (derivs.qdot.cols() != d || derivs.pdot.cols() != d) throw DimensionError("assemble: derivative width mismatch");

    const auto n = static_cast<Eigen::Index>(dictionary.size());
    NormalSystem sys{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
    Eigen::MatrixXd grads(n, 2 * d);
    Eigen::VectorXd target(2 * d);
    Eigen::VectorXd x(2 * d);
    for (Eigen::Index i = 0; i < k; ++i) {
        x = states.row(i).transpose();
        dictionary.evaluate_gradients(as_span(x), grads);
        target << -derivs.pdot.row(i).transpose(), derivs.qdot.row(i).transpose();
        sys.A.selfadjointView<Eigen::Lower>().rankUpdate(grads);
        sys.b.noalias() += grads * target;
    }
    sys.A.triangularView<Eigen::StrictlyUpper>() = sys.A.transpose();
    sys.A /= static_cast<double>(k);
    sys.b /= static_cast<double>(k);
    return sys;
}

Eigen::VectorXd solve_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double ridge) {
    if (A.rows() != b.size()) throw DimensionError("solve_ls: A rows must match b length");
    if (ridge < 0.0) throw std::invalid_argument("solve_ls: ridge must be >= 0");
    if (ridge == 0.0) return A.completeOrthogonalDecomposition().solve(b);
    const Eigen::Index n = A.cols();
    Eigen::MatrixXd aug(A.rows() + n, n);
    aug << A, std::sqrt(ridge) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(A.rows() + n);
    rhs.head(A.rows()) = b;
    return aug.completeOrthogonalDecomposition().solve(rhs);
}

HamiltonianModel fit_ls(const std::vector<Eigen::MatrixXd>& trajectories, double h, const BasisDictionary& dictionary,
                        double ridge) {
    if (trajectories.empty()) throw std::invalid_argument("fit_ls: no trajectories");
    Eigen::Index total = 0;
    for (const auto& t : trajectories) total += t.rows();
    const Eigen::Index width = trajectories.front().cols();
    const Eigen::Index d = width / 2;
    Eigen::MatrixXd states(total, width);
    DerivativeEstimates all{Eigen::MatrixXd(total, d), Eigen::MatrixXd(total, d)};
    Eigen::Index row = 0;
    for (const auto& t : trajectories) {
        if (t.cols() != width) throw DimensionError("fit_ls: trajectories differ in width");
        const auto de = finite_difference(t, h);
        states.middleRows(row, t.rows()) = t;
        all.qdot.middleRows(row, t.rows()) = de.qdot;
        all.pdot.middleRows(row, t.rows()) = de.pdot;
        row += t.rows();
    }
    const auto sys = assemble(states, all, dictionary);
    return HamiltonianModel(dictionary, solve_ls(sys.A, sys.b, ridge));
}

}  // namespace hamid
