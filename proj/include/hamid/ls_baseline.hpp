#ifndef HAMID_LS_BASELINE_HPP
#define HAMID_LS_BASELINE_HPP

#include <vector>

#include <Eigen/Dense>

#include "hamid/hamiltonian.hpp"

namespace hamid {

/// Time derivatives aligned row-for-row with the sampled states.
struct DerivativeEstimates {
    Eigen::MatrixXd qdot;  // K x d
    Eigen::MatrixXd pdot;  // K x d
};

/// Second-order differences: central in the interior, one-sided three-point
/// stencils at both ends. `states` rows are [q; p] at uniform spacing h.
DerivativeEstimates finite_difference(const Eigen::MatrixXd& states, double h);

struct NormalSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

/// a_ij = mean_k grad(phi_i) . grad(phi_j),
/// b_i  = mean_k [-pdot_k, qdot_k] . grad(phi_i)
/// with gradients ordered (d/dq, d/dp), so that the solution satisfies
/// grad H ~ (-pdot, qdot) and reproduces +H.
NormalSystem assemble(const Eigen::MatrixXd& states, const DerivativeEstimates& derivs,
                      const BasisDictionary& dictionary);

/// Minimum-norm least-squares solution of A c = b via complete orthogonal
/// decomposition; ridge > 0 adds ridge * |c|^2 to the objective.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double ridge = 0.0);

/// Finite-difference every trajectory at spacing h, pool all samples into a
/// single normal system and solve it.
HamiltonianModel fit_ls(const std::vector<Eigen::MatrixXd>& trajectories, double h, const BasisDictionary& dictionary,
                        double ridge = 0.0);

}  // namespace hamid

#endif  // HAMID_LS_BASELINE_HPP
