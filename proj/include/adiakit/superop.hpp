#pragma once

#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "adiakit/types.hpp"

namespace adiakit {

// Column-stacking vectorization: column j of X occupies slots j*d .. j*d+d-1.
// Under this convention A rho B^dag maps to (conj(B) kron A) vec(rho).
inline OpVector vectorize(const Operator& x) {
    return Eigen::Map<const OpVector>(x.data(), x.size());
}

inline Operator devectorize(const OpVector& v) {
    const int d = static_cast<int>(std::llround(std::sqrt(double(v.size()))));
    if (static_cast<long long>(d) * d != v.size())
        throw DimensionMismatch("devectorize: length is not a perfect square");
    return Eigen::Map<const Operator>(v.data(), d, d);
}

// <1| as a vector: contracting with vec(X) gives Tr X.
inline OpVector trace_functional(int d) {
    return vectorize(Operator::Identity(d, d));
}

inline int superop_hilbert_dim(const Superop& m) {
    const int d = static_cast<int>(std::llround(std::sqrt(double(m.rows()))));
    if (static_cast<long long>(d) * d != m.rows() || m.rows() != m.cols())
        throw DimensionMismatch("superoperator is not d^2 x d^2");
    return d;
}

namespace detail {

inline Superop kron(const Operator& a, const Operator& b) {
    Superop out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int j = 0; j < a.cols(); ++j)
        for (int i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace detail

// Superoperator for X -> A X B^dag - (1/2){B^dag A, X}. The plain dissipator of a
// Lindblad operator L is dissipator_term(L, L); mixed terms appear in derivatives.
inline Superop dissipator_term(const Operator& a, const Operator& b) {
    if (a.rows() != a.cols() || a.rows() != b.rows() || b.rows() != b.cols())
        throw DimensionMismatch("dissipator_term: operators must be square and equal-sized");
    const int d = static_cast<int>(a.rows());
    const Operator i2 = Operator::Identity(d, d);
    const Operator bda = b.adjoint() * a;
    return detail::kron(b.conjugate(), a) - 0.5 * detail::kron(i2, bda) -
           0.5 * detail::kron(bda.transpose(), i2);
}

// K = -i[H, .] as a matrix on vectorized operators.
inline Superop hamiltonian_superop(const Operator& h, double herm_tol = kHermitianTol) {
    require_hermitian(h, "hamiltonian_superop", herm_tol);
    const int d = static_cast<int>(h.rows());
    const Operator i2 = Operator::Identity(d, d);
    return Complex(0, -1) * (detail::kron(i2, h) - detail::kron(h.transpose(), i2));
}

inline Superop dissipator_superop(const std::vector<Operator>& lindblad_ops) {
    if (lindblad_ops.empty()) return Superop();  // resolved by caller or explicit dim overload
    const int d = static_cast<int>(lindblad_ops.front().rows());
    Superop out = Superop::Zero(d * d, d * d);
    for (const auto& l : lindblad_ops) {
        if (l.rows() != d || l.cols() != d)
            throw DimensionMismatch("dissipator_superop: inconsistent operator dimensions");
        out += dissipator_term(l, l);
    }
    return out;
}

inline Superop dissipator_superop(const std::vector<Operator>& lindblad_ops, int d) {
    if (lindblad_ops.empty()) return Superop::Zero(d * d, d * d);
    if (lindblad_ops.front().rows() != d)
        throw DimensionMismatch("dissipator_superop: dimension mismatch");
    return dissipator_superop(lindblad_ops);
}

// Choi matrix J[i*d+k, j*d+l] = M[k+d*l, i+d*j]; positive semidefinite iff M is CP.
inline Operator choi_matrix(const Superop& m) {
    const int d = superop_hilbert_dim(m);
    Operator j(d * d, d * d);
    for (int i = 0; i < d; ++i)
        for (int jj = 0; jj < d; ++jj)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) j(i * d + k, jj * d + l) = m(k + d * l, i + d * jj);
    return j;
}

struct CptpReport {
    double cp_violation = 0;  // max(0, -lambda_min of the Choi matrix)
    double tp_violation = 0;  // ||1^dag M - 1^dag||_2
    double tol = 0;
    bool passed = false;
};

inline CptpReport is_cptp(const Superop& m, double tol = 1e-8) {
    CptpReport rep;
    rep.tol = tol;
    const Operator choi = choi_matrix(m);
    Eigen::SelfAdjointEigenSolver<Operator> es((choi + choi.adjoint()) / 2.0);
    rep.cp_violation = std::max(0.0, -es.eigenvalues().minCoeff());
    const int d = superop_hilbert_dim(m);
    const OpVector one = trace_functional(d);
    rep.tp_violation = (m.adjoint() * one - one).norm();
    rep.passed = rep.cp_violation <= tol && rep.tp_violation <= tol;
    return rep;
}

// ||1^dag M||: residual of trace annihilation, zero for any Lindblad generator.
inline double trace_annihilation_defect(const Superop& m) {
    const int d = superop_hilbert_dim(m);
    return (m.adjoint() * trace_functional(d)).norm();
}

inline Superop superop_exp(const Superop& m) {
    return m.exp();
}

}  // namespace adiakit
