#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "adiakit/numerics.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/types.hpp"

#include "json.hpp"

namespace adiakit {

struct HamiltonianData {
    Operator hamiltonian;
    std::vector<Operator> lindblad_ops;
};

inline Superop assemble_liouvillian(const HamiltonianData& data, double herm_tol = kHermitianTol) {
    const int d = static_cast<int>(data.hamiltonian.rows());
    return hamiltonian_superop(data.hamiltonian, herm_tol) +
           dissipator_superop(data.lindblad_ops, d);
}

// Product-rule derivative of assemble_liouvillian given (H', {L_l'}).
inline Superop assemble_liouvillian_derivative(const HamiltonianData& data,
                                               const HamiltonianData& deriv) {
    if (deriv.lindblad_ops.size() != data.lindblad_ops.size())
        throw DimensionMismatch("liouvillian derivative: operator count mismatch");
    const int d = static_cast<int>(data.hamiltonian.rows());
    Superop out = hamiltonian_superop(deriv.hamiltonian);
    for (std::size_t l = 0; l < data.lindblad_ops.size(); ++l) {
        out += dissipator_term(deriv.lindblad_ops[l], data.lindblad_ops[l]);
        out += dissipator_term(data.lindblad_ops[l], deriv.lindblad_ops[l]);
    }
    (void)d;
    return out;
}

// A differentiable schedule s in [0,1] -> generator matrix. Families built from
// Hilbert-space data (H(s), {L_l(s)}) assemble Lindblad superoperators of size d^2;
// direct superoperator schedules (unitary conjugation, synthetic crossings, the
// shifted closed-system generator) supply the matrix directly.
class LiouvillianFamily {
public:
    using SuperopFn = std::function<Superop(double)>;
    using HilbertFn = std::function<HamiltonianData(double)>;
    using OperatorFn = std::function<Operator(double)>;

    LiouvillianFamily() = default;

    static LiouvillianFamily from_hilbert(std::string name, HilbertFn eval,
                                          HilbertFn deriv = nullptr,
                                          nlohmann::json params = nlohmann::json::object()) {
        LiouvillianFamily f;
        f.name_ = std::move(name);
        f.params_ = std::move(params);
        f.hilbert_ = std::move(eval);
        f.hilbert_deriv_ = std::move(deriv);
        const HamiltonianData probe = f.hilbert_(0.0);
        f.hilbert_dim_ = static_cast<int>(probe.hamiltonian.rows());
        f.matrix_dim_ = f.hilbert_dim_ * f.hilbert_dim_;
        f.superop_ = [fn = f.hilbert_](double s) { return assemble_liouvillian(fn(s)); };
        if (f.hilbert_deriv_) {
            f.superop_deriv_ = [fn = f.hilbert_, dfn = f.hilbert_deriv_](double s) {
                return assemble_liouvillian_derivative(fn(s), dfn(s));
            };
        }
        f.hamiltonian_ = [fn = f.hilbert_](double s) { return fn(s).hamiltonian; };
        if (f.hilbert_deriv_)
            f.hamiltonian_deriv_ = [dfn = f.hilbert_deriv_](double s) {
                return dfn(s).hamiltonian;
            };
        return f;
    }

    static LiouvillianFamily from_superop(std::string name, int matrix_dim, SuperopFn eval,
                                          SuperopFn deriv = nullptr,
                                          nlohmann::json params = nlohmann::json::object()) {
        LiouvillianFamily f;
        f.name_ = std::move(name);
        f.params_ = std::move(params);
        f.matrix_dim_ = matrix_dim;
        const int d = static_cast<int>(std::llround(std::sqrt(double(matrix_dim))));
        f.hilbert_dim_ = (d * d == matrix_dim) ? d : matrix_dim;
        f.superop_ = std::move(eval);
        f.superop_deriv_ = std::move(deriv);
        return f;
    }

    const std::string& name() const { return name_; }
    const nlohmann::json& params() const { return params_; }

    // Hilbert-space dimension d for families acting on vectorized operators
    // (matrix_dim == d^2); equals matrix_dim otherwise.
    int dim() const { return hilbert_dim_; }
    int matrix_dim() const { return matrix_dim_; }
    bool acts_on_operators() const { return hilbert_dim_ * hilbert_dim_ == matrix_dim_; }

    Superop operator()(double s) const { return superop_(s); }

    bool has_analytic_derivative() const { return static_cast<bool>(superop_deriv_); }
    Superop analytic_derivative(double s) const {
        if (!superop_deriv_) throw Error("family '" + name_ + "' has no analytic derivative");
        return superop_deriv_(s);
    }

    bool has_hilbert_data() const { return static_cast<bool>(hilbert_); }
    HamiltonianData hilbert(double s) const {
        if (!hilbert_) throw Error("family '" + name_ + "' has no Hilbert-space data");
        return hilbert_(s);
    }

    bool has_hamiltonian() const { return static_cast<bool>(hamiltonian_); }
    Operator hamiltonian(double s) const {
        if (!hamiltonian_) throw Error("family '" + name_ + "' has no bare Hamiltonian");
        return hamiltonian_(s);
    }
    bool has_hamiltonian_derivative() const { return static_cast<bool>(hamiltonian_deriv_); }
    Operator hamiltonian_derivative(double s) const {
        if (!hamiltonian_deriv_)
            throw Error("family '" + name_ + "' has no Hamiltonian derivative");
        return hamiltonian_deriv_(s);
    }

    void set_hamiltonian(OperatorFn h, OperatorFn dh = nullptr) {
        hamiltonian_ = std::move(h);
        hamiltonian_deriv_ = std::move(dh);
    }

    // Closed-form ideal adiabatic transport, for schedules whose transported
    // kernel state is known exactly (engineered families, non-trace-preserving
    // generators where the steady-state normalization is not Tr = 1).
    bool has_ideal_state() const { return static_cast<bool>(ideal_state_); }
    Operator ideal_state(double s) const {
        if (!ideal_state_) throw Error("family '" + name_ + "' has no closed-form ideal state");
        return ideal_state_(s);
    }
    void set_ideal_state(OperatorFn fn) { ideal_state_ = std::move(fn); }

    // Replace point evaluation by a cubic-spline interpolant built once on a uniform
    // s-grid. Propagation sweeps evaluate L(s) at millions of substep midpoints;
    // for quadrature-backed generators (Davies) the interpolant makes that affordable.
    // Interpolation error is O(nodes^-4) entry-wise; 4097 nodes keep it near 1e-13.
    LiouvillianFamily with_grid_cache(int nodes = 4097) const {
        LiouvillianFamily f = *this;
        auto spline = std::make_shared<MatrixSpline>(superop_, 0.0, 1.0, nodes);
        f.superop_ = [spline](double s) { return spline->eval(s); };
        if (!f.superop_deriv_)
            f.superop_deriv_ = [spline](double s) { return spline->derivative(s); };
        f.params_["grid_cache_nodes"] = nodes;
        return f;
    }

private:
    std::string name_;
    nlohmann::json params_ = nlohmann::json::object();
    int hilbert_dim_ = 0;
    int matrix_dim_ = 0;
    SuperopFn superop_;
    SuperopFn superop_deriv_;
    HilbertFn hilbert_;
    HilbertFn hilbert_deriv_;
    OperatorFn hamiltonian_;
    OperatorFn hamiltonian_deriv_;
    OperatorFn ideal_state_;
};

}  // namespace adiakit
