#ifndef HAMID_INTEGRATORS_HPP
#define HAMID_INTEGRATORS_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "hamid/hamiltonian.hpp"

namespace hamid {

/// Raised when a state entry becomes non-finite or exceeds the blowup bound.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// Entries with magnitude above this are treated as a blowup.
inline constexpr double kDivergenceBound = 1e6;

bool state_is_bounded(std::span<const double> x);

/// Point (q, p, q~, p~) of the extended phase space, stored contiguously in
/// that block order.
class AugmentedState {
public:
    explicit AugmentedState(Eigen::Index d) : data_(Eigen::VectorXd::Zero(4 * d)), d_(d) {}
    AugmentedState(const Eigen::VectorXd& q, const Eigen::VectorXd& p, const Eigen::VectorXd& qt,
                   const Eigen::VectorXd& pt);
    static AugmentedState from_vector(Eigen::VectorXd data);

    Eigen::Index dim() const { return d_; }

    auto q() { return data_.segment(0, d_); }
    auto p() { return data_.segment(d_, d_); }
    auto qt() { return data_.segment(2 * d_, d_); }
    auto pt() { return data_.segment(3 * d_, d_); }
    auto q() const { return data_.segment(0, d_); }
    auto p() const { return data_.segment(d_, d_); }
    auto qt() const { return data_.segment(2 * d_, d_); }
    auto pt() const { return data_.segment(3 * d_, d_); }

    const Eigen::VectorXd& data() const { return data_; }
    Eigen::VectorXd& data() { return data_; }

private:
    Eigen::VectorXd data_;
    Eigen::Index d_;
};

struct TaoConfig {
    double omega = 10.0;
    double dt = 0.01;

    void validate() const;
};

/// L: (q, p) -> (q, p, q, p)
AugmentedState lift(const PhaseState& state);
/// L^dagger: (q, p, q~, p~) -> (q, p)
PhaseState restrict_state(const AugmentedState& aug);

/// Exact flow of H(q, p~): p -= dt H_q(q, p~), q~ += dt H_p(q, p~).
AugmentedState flow_a(const AugmentedState& aug, double dt, const GradientFn& grad);
/// Exact flow of H(q~, p): q += dt H_p(q~, p), p~ -= dt H_q(q~, p).
AugmentedState flow_b(const AugmentedState& aug, double dt, const GradientFn& grad);
/// Exact flow of omega (|q - q~|^2 + |p - p~|^2) / 2: rotation of the
/// difference block by angle 2 omega dt.
AugmentedState flow_c(const AugmentedState& aug, double dt, double omega);

/// Second-order Strang composition A(dt/2) B(dt/2) C(dt) B(dt/2) A(dt/2),
/// applied right to left.
AugmentedState tao_step(const AugmentedState& aug, const TaoConfig& cfg, const GradientFn& grad);

/// Explicit midpoint rule on (H_p, -H_q).
PhaseState rk2_step(const PhaseState& state, double dt, const GradientFn& grad);

namespace detail {
// In-place kernels on raw storage; `work` must hold at least 4 d doubles.
void flow_a_inplace(std::span<double> aug, double dt, const GradientFn& grad, std::span<double> work);
void flow_b_inplace(std::span<double> aug, double dt, const GradientFn& grad, std::span<double> work);
void flow_c_inplace(std::span<double> aug, double dt, double omega);
void tao_step_inplace(std::span<double> aug, const TaoConfig& cfg, const GradientFn& grad, std::span<double> work);
// `work` must hold at least 6 d doubles.
void rk2_step_inplace(std::span<double> x, double dt, const GradientFn& grad, std::span<double> work);
}  // namespace detail

struct TaoScheme {
    TaoConfig config;
};
struct Rk2Scheme {
    double dt = 0.01;
};
using Scheme = std::variant<TaoScheme, Rk2Scheme>;

/// Uniform time grid of states; row k of `states` is [q; p] at times[k].
struct Trajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;

    Eigen::Index size() const { return states.rows(); }
    Eigen::Index state_dim() const { return states.cols(); }
    PhaseState state(Eigen::Index k) const { return PhaseState::from_vector(states.row(k).transpose()); }
};

struct PropagationResult {
    Trajectory trajectory;
    /// Index of the first step whose state failed the divergence guard; the
    /// trajectory holds only the states before it.
    std::optional<std::size_t> diverged_at;
};

/// One-step map Psi in the original phase space plus multi-step propagation.
/// Immutable after construction.
class Propagator {
public:
    Propagator(GradientFn grad, Scheme scheme);
    Propagator(std::shared_ptr<const Hamiltonian> h, Scheme scheme);

    double dt() const;
    const Scheme& scheme() const { return scheme_; }
    const GradientFn& gradient() const { return grad_; }

    /// Psi = L^dagger o psi o L for Tao, one RK2 step otherwise. Returns false
    /// when the result fails the divergence guard.
    bool step(std::span<double> x) const;

    /// For Tao the augmented state is lifted once and carried across steps.
    /// Throws DivergenceError naming the step index.
    Trajectory propagate(const PhaseState& x0, std::size_t n_steps, double t0 = 0.0) const;
    PropagationResult try_propagate(const PhaseState& x0, std::size_t n_steps, double t0 = 0.0) const;

private:
    GradientFn grad_;
    Scheme scheme_;
};

/// Header `t,q1,..,qd,p1,..,pd`; 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace hamid

#endif  // HAMID_INTEGRATORS_HPP
