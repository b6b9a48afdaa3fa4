#include "hamid/hamiltonian.hpp"

#include <cmath>
#include <sstream>

namespace hamid {

namespace {

void enumerate_fixed_degree(int n_vars, int degree, std::vector<int>& prefix, std::vector<int>& out) {
    if (static_cast<int>(prefix.size()) == n_vars - 1) {
        prefix.push_back(degree);
        out.insert(out.end(), prefix.begin(), prefix.end());
        prefix.pop_back();
        return;
    }
    for (int e = degree; e >= 0; --e) {
        prefix.push_back(e);
        enumerate_fixed_degree(n_vars, degree - e, prefix, out);
        prefix.pop_back();
    }
}

std::string variable_name(int var, int state_dim) {
    const int d = state_dim / 2;
    return (var < d ? "q" : "p") + std::to_string(var % d + 1);
}

// Per-thread scratch for univariate tables so gradient evaluation in the
// integrator inner loop does not allocate.
std::vector<double>& scratch(std::size_t n) {
    thread_local std::vector<double> buf;
    if (buf.size() < n) buf.resize(n);
    return buf;
}

}  // namespace

PhaseState::PhaseState(Eigen::VectorXd q_, Eigen::VectorXd p_) : q(std::move(q_)), p(std::move(p_)) {
    if (q.size() != p.size() || q.size() < 1)
        throw DimensionError("PhaseState: q and p must have equal length >= 1");
    if (!q.allFinite() || !p.allFinite())
        throw std::invalid_argument("PhaseState: non-finite entry");
}

PhaseState PhaseState::from_vector(const Eigen::VectorXd& x) {
    if (x.size() % 2 != 0 || x.size() < 2)
        throw DimensionError("PhaseState: stacked vector must have even length >= 2");
    const Eigen::Index d = x.size() / 2;
    return PhaseState(x.head(d), x.tail(d));
}

Eigen::VectorXd PhaseState::to_vector() const {
    Eigen::VectorXd x(2 * q.size());
    x << q, p;
    return x;
}

GradientFn Hamiltonian::gradient_fn(std::shared_ptr<const Hamiltonian> h) {
    return [h = std::move(h)](std::span<const double> x, std::span<double> g) { h->gradient(x, g); };
}

std::string to_string(BasisKind kind) {
    return kind == BasisKind::Monomial ? "monomial" : "legendre";
}

BasisKind basis_kind_from_string(const std::string& s) {
    if (s == "monomial" || s == "Monomial") return BasisKind::Monomial;
    if (s == "legendre" || s == "Legendre") return BasisKind::Legendre;
    throw std::invalid_argument("unknown basis kind '" + s + "'");
}

std::size_t dictionary_size(int state_dim, int max_total_degree) {
    // binom(n + k, k) computed incrementally stays exact in integers
    std::size_t c = 1;
    for (int i = 1; i <= max_total_degree; ++i)
        c = c * static_cast<std::size_t>(state_dim + i) / static_cast<std::size_t>(i);
    return c - 1;
}

BasisDictionary::BasisDictionary(BasisKind kind, int state_dim, int max_total_degree)
    : kind_(kind), state_dim_(state_dim), max_degree_(max_total_degree) {
    if (state_dim < 2 || state_dim % 2 != 0)
        throw DimensionError("BasisDictionary: state_dim must be even and >= 2 (pairs q with p)");
    if (max_total_degree < 1)
        throw std::invalid_argument("BasisDictionary: max_total_degree must be >= 1");
    std::vector<int> prefix;
    for (int g = 1; g <= max_total_degree; ++g)
        enumerate_fixed_degree(state_dim, g, prefix, exponents_);
    n_terms_ = exponents_.size() / static_cast<std::size_t>(state_dim);
}

BasisDictionary build_dictionary(BasisKind kind, int state_dim, int max_total_degree) {
    return BasisDictionary(kind, state_dim, max_total_degree);
}

std::vector<int> BasisDictionary::multi_index(std::size_t i) const {
    auto first = exponents_.begin() + static_cast<std::ptrdiff_t>(i * state_dim_);
    return {first, first + state_dim_};
}

std::vector<std::vector<int>> BasisDictionary::multi_indices() const {
    std::vector<std::vector<int>> out;
    out.reserve(n_terms_);
    for (std::size_t i = 0; i < n_terms_; ++i) out.push_back(multi_index(i));
    return out;
}

std::string BasisDictionary::term_name(std::size_t i) const {
    std::ostringstream os;
    bool first = true;
    for (int v = 0; v < state_dim_; ++v) {
        const int e = exponents_[i * state_dim_ + v];
        if (e == 0) continue;
        if (!first) os << '*';
        first = false;
        if (kind_ == BasisKind::Monomial) {
            os << variable_name(v, state_dim_);
            if (e > 1) os << '^' << e;
        } else {
            os << 'P' << e << '(' << variable_name(v, state_dim_) << ')';
        }
    }
    return os.str();
}

void BasisDictionary::check_state(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != state_dim_)
        throw DimensionError("state dimension " + std::to_string(x.size()) +
                             " does not match dictionary state_dim " + std::to_string(state_dim_));
}

void BasisDictionary::fill_univariate(std::span<const double> x, double* vals, double* ders) const {
    const int stride = max_degree_ + 1;
    for (int v = 0; v < state_dim_; ++v) {
        double* pv = vals + v * stride;
        double* pd = ders + v * stride;
        const double xv = x[v];
        pv[0] = 1.0;
        pd[0] = 0.0;
        if (max_degree_ >= 1) {
            pv[1] = xv;
            pd[1] = 1.0;
        }
        if (kind_ == BasisKind::Monomial) {
            for (int k = 2; k <= max_degree_; ++k) {
                pv[k] = pv[k - 1] * xv;
                pd[k] = k * pv[k - 1];
            }
        } else {
            // (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1};  P'_{k+1} = P'_{k-1} + (2k+1) P_k
            for (int k = 1; k < max_degree_; ++k) {
                pv[k + 1] = ((2 * k + 1) * xv * pv[k] - k * pv[k - 1]) / (k + 1);
                pd[k + 1] = pd[k - 1] + (2 * k + 1) * pv[k];
            }
        }
    }
}

void BasisDictionary::evaluate(std::span<const double> x, std::span<double> phi) const {
    check_state(x);
    if (phi.size() != n_terms_) throw DimensionError("evaluate: output length must equal dictionary size");
    const int stride = max_degree_ + 1;
    auto& buf = scratch(2 * static_cast<std::size_t>(state_dim_ * stride));
    double* vals = buf.data();
    fill_univariate(x, vals, vals + state_dim_ * stride);
    for (std::size_t t = 0; t < n_terms_; ++t) {
        const int* e = exponents_.data() + t * state_dim_;
        double prod = 1.0;
        for (int v = 0; v < state_dim_; ++v) prod *= vals[v * stride + e[v]];
        phi[t] = prod;
    }
}

void BasisDictionary::evaluate_gradients(std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> grads) const {
    check_state(x);
    if (grads.rows() != static_cast<Eigen::Index>(n_terms_) || grads.cols() != state_dim_)
        throw DimensionError("evaluate_gradients: output must be N x state_dim");
    const int stride = max_degree_ + 1;
    auto& buf = scratch(2 * static_cast<std::size_t>(state_dim_ * stride));
    double* vals = buf.data();
    double* ders = vals + state_dim_ * stride;
    fill_univariate(x, vals, ders);
    for (std::size_t t = 0; t < n_terms_; ++t) {
        const int* e = exponents_.data() + t * state_dim_;
        for (int j = 0; j < state_dim_; ++j) {
            if (e[j] == 0) {
                grads(static_cast<Eigen::Index>(t), j) = 0.0;
                continue;
            }
            double prod = ders[j * stride + e[j]];
            for (int v = 0; v < state_dim_; ++v)
                if (v != j) prod *= vals[v * stride + e[v]];
            grads(static_cast<Eigen::Index>(t), j) = prod;
        }
    }
}

double BasisDictionary::combine(std::span<const double> x, const Eigen::VectorXd& coeffs) const {
    check_state(x);
    if (coeffs.size() != static_cast<Eigen::Index>(n_terms_))
        throw DimensionError("coefficient length must equal dictionary size");
    const int stride = max_degree_ + 1;
    auto& buf = scratch(2 * static_cast<std::size_t>(state_dim_ * stride));
    double* vals = buf.data();
    fill_univariate(x, vals, vals + state_dim_ * stride);
    double sum = 0.0;
    for (std::size_t t = 0; t < n_terms_; ++t) {
        const double c = coeffs[static_cast<Eigen::Index>(t)];
        if (c == 0.0) continue;
        const int* e = exponents_.data() + t * state_dim_;
        double prod = c;
        for (int v = 0; v < state_dim_; ++v) prod *= vals[v * stride + e[v]];
        sum += prod;
    }
    return sum;
}

void BasisDictionary::combine_gradient(std::span<const double> x, const Eigen::VectorXd& coeffs,
                                       std::span<double> grad) const {
    check_state(x);
    if (coeffs.size() != static_cast<Eigen::Index>(n_terms_))
        throw DimensionError("coefficient length must equal dictionary size");
    if (static_cast<int>(grad.size()) != state_dim_) throw DimensionError("gradient output length mismatch");
    const int stride = max_degree_ + 1;
    auto& buf = scratch(2 * static_cast<std::size_t>(state_dim_ * stride));
    double* vals = buf.data();
    double* ders = vals + state_dim_ * stride;
    fill_univariate(x, vals, ders);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t t = 0; t < n_terms_; ++t) {
        const double c = coeffs[static_cast<Eigen::Index>(t)];
        if (c == 0.0) continue;
        const int* e = exponents_.data() + t * state_dim_;
        for (int j = 0; j < state_dim_; ++j) {
            if (e[j] == 0) continue;
            double prod = c * ders[j * stride + e[j]];
            for (int v = 0; v < state_dim_; ++v)
                if (v != j) prod *= vals[v * stride + e[v]];
            grad[j] += prod;
        }
    }
}

HamiltonianModel::HamiltonianModel(BasisDictionary dictionary, Eigen::VectorXd coefficients)
    : dictionary_(std::move(dictionary)), coefficients_(std::move(coefficients)) {
    if (coefficients_.size() != static_cast<Eigen::Index>(dictionary_.size()))
        throw DimensionError("HamiltonianModel: coefficient length " + std::to_string(coefficients_.size()) +
                             " != dictionary size " + std::to_string(dictionary_.size()));
}

double HamiltonianModel::value(std::span<const double> x) const {
    return dictionary_.combine(x, coefficients_);
}

void HamiltonianModel::gradient(std::span<const double> x, std::span<double> grad) const {
    dictionary_.combine_gradient(x, coefficients_, grad);
}

double eval_model(const HamiltonianModel& model, const PhaseState& state) {
    const Eigen::VectorXd x = state.to_vector();
    return model.value(as_span(x));
}

Eigen::VectorXd eval_model_gradient(const HamiltonianModel& model, const PhaseState& state) {
    const Eigen::VectorXd x = state.to_vector();
    Eigen::VectorXd g(x.size());
    model.gradient(as_span(x), as_span(g));
    return g;
}

double CherryHamiltonian::value(std::span<const double> x) const {
    if (x.size() != 4) throw DimensionError("Cherry Hamiltonian requires d = 2");
    const double q1 = x[0], q2 = x[1], p1 = x[2], p2 = x[3];
    return 0.5 * (q1 * q1 + p1 * p1) - (q2 * q2 + p2 * p2) + 0.5 * p2 * (p1 * p1 - q1 * q1) - q1 * q2 * p1;
}

void CherryHamiltonian::gradient(std::span<const double> x, std::span<double> g) const {
    if (x.size() != 4 || g.size() != 4) throw DimensionError("Cherry Hamiltonian requires d = 2");
    const double q1 = x[0], q2 = x[1], p1 = x[2], p2 = x[3];
    g[0] = q1 - p2 * q1 - q2 * p1;
    g[1] = -2.0 * q2 - q1 * p1;
    g[2] = p1 + p2 * p1 - q1 * q2;
    g[3] = -2.0 * p2 + 0.5 * (p1 * p1 - q1 * q1);
}

double cherry_eval(const PhaseState& state) {
    if (state.dim() != 2) throw DimensionError("Cherry Hamiltonian requires d = 2");
    const Eigen::VectorXd x = state.to_vector();
    return CherryHamiltonian{}.value(as_span(x));
}

Eigen::VectorXd cherry_gradient(const PhaseState& state) {
    if (state.dim() != 2) throw DimensionError("Cherry Hamiltonian requires d = 2");
    Eigen::VectorXd g(4);
    const Eigen::VectorXd x = state.to_vector();
    CherryHamiltonian{}.gradient(as_span(x), as_span(g));
    return g;
}

Eigen::VectorXd cherry_coefficients(const BasisDictionary& dictionary) {
    if (dictionary.kind() != BasisKind::Monomial || dictionary.state_dim() != 4 ||
        dictionary.max_total_degree() < 3)
        throw std::invalid_argument("cherry_coefficients: needs a monomial dictionary, state_dim 4, degree >= 3");
    struct Term {
        std::vector<int> e;
        double c;
    };
    // exponent order (q1, q2, p1, p2)
    const Term terms[] = {
        {{2, 0, 0, 0}, 0.5},  {{0, 0, 2, 0}, 0.5},  {{0, 2, 0, 0}, -1.0}, {{0, 0, 0, 2}, -1.0},
        {{0, 0, 2, 1}, 0.5},  {{2, 0, 0, 1}, -0.5}, {{1, 1, 1, 0}, -1.0},
    };
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dictionary.size()));
    for (std::size_t i = 0; i < dictionary.size(); ++i) {
        const auto mi = dictionary.multi_index(i);
        for (const auto& t : terms)
            if (t.e == mi) theta[static_cast<Eigen::Index>(i)] = t.c;
    }
    return theta;
}

nlohmann::json model_to_json(const HamiltonianModel& model) {
    const auto& dict = model.dictionary();
    return {
        {"kind", to_string(dict.kind())},
        {"state_dim", dict.state_dim()},
        {"max_total_degree", dict.max_total_degree()},
        {"coefficients", std::vector<double>(model.coefficients().begin(), model.coefficients().end())},
    };
}

HamiltonianModel model_from_json(const nlohmann::json& j) {
    BasisDictionary dict(basis_kind_from_string(j.at("kind").get<std::string>()), j.at("state_dim").get<int>(),
                         j.at("max_total_degree").get<int>());
    const auto c = j.at("coefficients").get<std::vector<double>>();
    return HamiltonianModel(std::move(dict), Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
}

}  // namespace hamid
