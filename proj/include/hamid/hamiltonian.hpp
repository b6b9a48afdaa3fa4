#ifndef HAMID_HAMILTONIAN_HPP
#define HAMID_HAMILTONIAN_HPP

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace hamid {

inline std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<double> as_span(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Canonical position/momentum pair. Both blocks have length d >= 1 and
/// finite entries.
struct PhaseState {
    Eigen::VectorXd q;
    Eigen::VectorXd p;

    PhaseState(Eigen::VectorXd q_, Eigen::VectorXd p_);

    /// Splits x = [q; p] in half.
    static PhaseState from_vector(const Eigen::VectorXd& x);
    Eigen::VectorXd to_vector() const;
    Eigen::Index dim() const { return q.size(); }
};

/// Gradient callback on the stacked state x = [q; p]. Writes
/// (dH/dq_1..dH/dq_d, dH/dp_1..dH/dp_d) into grad.
using GradientFn = std::function<void(std::span<const double> x, std::span<double> grad)>;

/// Anything with a scalar value and an analytic gradient on [q; p].
class Hamiltonian {
public:
    virtual ~Hamiltonian() = default;
    virtual int state_dim() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    virtual void gradient(std::span<const double> x, std::span<double> grad) const = 0;

    /// Binds this object's gradient into a callback. The callback keeps a
    /// shared reference, so the Hamiltonian outlives it.
    static GradientFn gradient_fn(std::shared_ptr<const Hamiltonian> h);
};

enum class BasisKind { Monomial, Legendre };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& s);

/// Polynomial dictionary over the stacked state [q; p] with every multi-index
/// of total degree 1..max_total_degree (the constant is excluded).
///
/// Ordering is graded lexicographic: terms are grouped by increasing total
/// degree and, within a degree, sorted by exponent tuple in descending
/// lexicographic order with variables ordered (q_1..q_d, p_1..p_d). For
/// state_dim 4 and degree 1 this gives q1, q2, p1, p2.
///
/// Legendre terms are tensor products of the standard P_k on [-1, 1] with no
/// domain rescaling.
class BasisDictionary {
public:
    BasisDictionary(BasisKind kind, int state_dim, int max_total_degree);

    BasisKind kind() const { return kind_; }
    int state_dim() const { return state_dim_; }
    int max_total_degree() const { return max_degree_; }
    std::size_t size() const { return n_terms_; }

    std::vector<int> multi_index(std::size_t i) const;
    std::vector<std::vector<int>> multi_indices() const;

    /// Human readable label, e.g. "q1^2*p2" or "P2(q1)*P1(p2)".
    std::string term_name(std::size_t i) const;

    void evaluate(std::span<const double> x, std::span<double> phi) const;
    /// Row i of grads holds the gradient of basis function i.
    void evaluate_gradients(std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> grads) const;

    double combine(std::span<const double> x, const Eigen::VectorXd& coeffs) const;
    void combine_gradient(std::span<const double> x, const Eigen::VectorXd& coeffs,
                          std::span<double> grad) const;

    bool operator==(const BasisDictionary& other) const {
        return kind_ == other.kind_ && state_dim_ == other.state_dim_ &&
               max_degree_ == other.max_degree_;
    }

private:
    void fill_univariate(std::span<const double> x, double* vals, double* ders) const;
    void check_state(std::span<const double> x) const;

    BasisKind kind_;
    int state_dim_;
    int max_degree_;
    std::size_t n_terms_;
    std::vector<int> exponents_;  // n_terms_ x state_dim_, row major
};

BasisDictionary build_dictionary(BasisKind kind, int state_dim, int max_total_degree);

/// binom(state_dim + degree, degree) - 1
std::size_t dictionary_size(int state_dim, int max_total_degree);

/// H(q, p) = Phi(q, p)^T theta. The additive constant is pinned to zero.
class HamiltonianModel : public Hamiltonian {
public:
    HamiltonianModel(BasisDictionary dictionary, Eigen::VectorXd coefficients);

    const BasisDictionary& dictionary() const { return dictionary_; }
    const Eigen::VectorXd& coefficients() const { return coefficients_; }

    int state_dim() const override { return dictionary_.state_dim(); }
    double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;

private:
    BasisDictionary dictionary_;
    Eigen::VectorXd coefficients_;
};

double eval_model(const HamiltonianModel& model, const PhaseState& state);
Eigen::VectorXd eval_model_gradient(const HamiltonianModel& model, const PhaseState& state);

/// H = (q1^2 + p1^2)/2 - (q2^2 + p2^2) + p2 (p1^2 - q1^2)/2 - q1 q2 p1
class CherryHamiltonian : public Hamiltonian {
public:
    int state_dim() const override { return 4; }
    double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;
};

double cherry_eval(const PhaseState& state);
Eigen::VectorXd cherry_gradient(const PhaseState& state);

/// Exact Cherry coefficients in a monomial dictionary with state_dim 4 and
/// degree >= 3.
Eigen::VectorXd cherry_coefficients(const BasisDictionary& dictionary);

nlohmann::json model_to_json(const HamiltonianModel& model);
HamiltonianModel model_from_json(const nlohmann::json& j);

}  // namespace hamid

#endif  // HAMID_HAMILTONIAN_HPP
