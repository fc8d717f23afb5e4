#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "adiakit/family.hpp"
#include "adiakit/numerics.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/types.hpp"

namespace adiakit {

// Eigenstructure of a (generally non-normal) matrix with eigenvalues grouped into
// clusters and spectral projectors built from biorthonormal right/left eigenvectors.
struct SpectralData {
    Eigen::VectorXcd eigenvalues;           // raw solver output
    Eigen::MatrixXcd right_vectors;         // columns
    Eigen::MatrixXcd left_vectors;          // rows, normalized so left*right = identity
    std::vector<std::vector<int>> clusters; // index groups after merging
    std::vector<Complex> cluster_values;    // mean eigenvalue per cluster
    std::vector<Superop> projectors;        // one per cluster; sum is the identity
    int zero_cluster = -1;
    double scale = 0;                       // spectral radius
    double residual = 0;                    // ||M - V diag(lambda) V^-1||_F / max(scale, tiny)

    int zero_multiplicity() const {
        return zero_cluster < 0 ? 0 : static_cast<int>(clusters[zero_cluster].size());
    }

    const Superop& zero_projector() const {
        if (zero_cluster < 0) throw EmptyKernel("no zero eigenvalue cluster");
        return projectors[zero_cluster];
    }

    // Distance from zero to the rest of the spectrum.
    double gap() const {
        double g = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            if (static_cast<int>(c) == zero_cluster) continue;
            for (int idx : clusters[c]) g = std::min(g, std::abs(eigenvalues(idx)));
        }
        return std::isfinite(g) ? g : 0.0;
    }
};

inline SpectralData decompose(const Superop& m, double zero_tol = kZeroEigTol,
                              double cluster_tol = kClusterTol,
                              double defective_tol = kDefectiveTol) {
    if (!m.allFinite()) throw Error("decompose: non-finite entries");
    const int n = static_cast<int>(m.rows());
    SpectralData out;

    Eigen::ComplexEigenSolver<Superop> ces(m, /*computeEigenvectors=*/true);
    if (ces.info() != Eigen::Success) throw DefectiveMatrix("decompose: eigensolver failed");
    out.eigenvalues = ces.eigenvalues();
    out.right_vectors = ces.eigenvectors();
    out.scale = out.eigenvalues.cwiseAbs().maxCoeff();

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(out.right_vectors);
    out.left_vectors = lu.solve(Eigen::MatrixXcd::Identity(n, n));

    const double eff_scale = std::max(out.scale, 1e-300);
    out.residual = (m - out.right_vectors * out.eigenvalues.asDiagonal() * out.left_vectors)
                       .norm() / eff_scale;
    if (!std::isfinite(out.residual) || out.residual > defective_tol)
        throw DefectiveMatrix("decompose: reconstruction residual " +
                              std::to_string(out.residual) +
                              " (Jordan structure or ill-conditioned eigenbasis)");

    // Union-find clustering; the zero disk |lambda| <= zero_tol*scale is one cluster.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    auto unite = [&](int i, int j) { parent[find(i)] = find(j); };
    int zero_anchor = -1;
    for (int i = 0; i < n; ++i) {
        if (std::abs(out.eigenvalues(i)) <= zero_tol * eff_scale) {
            if (zero_anchor < 0)
                zero_anchor = i;
            else
                unite(i, zero_anchor);
        }
        for (int j = i + 1; j < n; ++j)
            if (std::abs(out.eigenvalues(i) - out.eigenvalues(j)) <= cluster_tol * eff_scale)
                unite(i, j);
    }
    if (out.scale == 0.0) {  // zero matrix: single zero cluster
        zero_anchor = 0;
        for (int i = 1; i < n; ++i) unite(i, 0);
    }

    std::vector<int> root_to_cluster(n, -1);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (root_to_cluster[r] < 0) {
            root_to_cluster[r] = static_cast<int>(out.clusters.size());
            out.clusters.emplace_back();
        }
        out.clusters[root_to_cluster[r]].push_back(i);
    }
    for (auto& cluster : out.clusters) {
        Complex mean = 0;
        for (int idx : cluster) mean += out.eigenvalues(idx);
        mean /= double(cluster.size());
        out.cluster_values.push_back(mean);
        Superop p = Superop::Zero(n, n);
        for (int idx : cluster)
            p += out.right_vectors.col(idx) * out.left_vectors.row(idx);
        out.projectors.push_back(std::move(p));
    }
    if (zero_anchor >= 0) out.zero_cluster = root_to_cluster[find(zero_anchor)];
    return out;
}

inline Superop zero_projector(const Superop& m, double zero_tol = kZeroEigTol) {
    return decompose(m, zero_tol).zero_projector();
}

struct GapReport {
    double s = 0;
    double gap = 0;
    int zero_multiplicity = 0;
    double semisimple_defect = 0;
};

// D = M P is the nilpotent part of the zero block when P is its spectral projector;
// the symmetric max over MP and PM also flags a naive (range-only) kernel projector.
// Frobenius norm.
inline double semisimplicity_defect(const Superop& m, const Superop& p) {
    return std::max((m * p).norm(), (p * m).norm());
}

inline GapReport gap_report(const Superop& m, double s = 0, double zero_tol = kZeroEigTol) {
    const SpectralData sd = decompose(m, zero_tol);
    GapReport rep;
    rep.s = s;
    rep.gap = sd.gap();
    rep.zero_multiplicity = sd.zero_multiplicity();
    rep.semisimple_defect = semisimplicity_defect(m, sd.zero_projector());
    return rep;
}

// S = (M + P)^-1 - P, the inverse of M on the complement of its kernel.
// Equals the eigenprojector sum over nonzero clusters of P_j / lambda_j.
inline Superop reduced_resolvent(const Superop& m, const Superop& p) {
    const int n = static_cast<int>(m.rows());
    const Superop shifted = m + p;
    Eigen::PartialPivLU<Superop> lu(shifted);
    const Superop inv = lu.solve(Superop::Identity(n, n));
    // A second eigenvalue within roundoff of zero makes the shift ill-conditioned.
    const double cond_proxy = inv.norm() * shifted.norm() / n;
    if (!inv.allFinite() || cond_proxy > 1e13)
        throw SingularShift("reduced_resolvent: M + P numerically singular (near-crossing)");
    return inv - p;
}

enum class DerivScheme { Auto, Analytic, CentralDifference };

// L'(s): analytic assembly when the family provides derivatives, otherwise central
// differences with step h (one-sided second-order stencil at the ends of [0,1],
// reported through boundary_stencil_used).
inline Superop liouvillian_derivative(const LiouvillianFamily& family, double s,
                                      DerivScheme scheme = DerivScheme::Auto, double h = 1e-5,
                                      bool* boundary_stencil_used = nullptr) {
    if (boundary_stencil_used) *boundary_stencil_used = false;
    const bool analytic = scheme == DerivScheme::Analytic ||
                          (scheme == DerivScheme::Auto && family.has_analytic_derivative());
    if (analytic) {
        if (!family.has_analytic_derivative())
            throw Error("liouvillian_derivative: analytic scheme requested but unavailable");
        return family.analytic_derivative(s);
    }
    if (s - h >= 0.0 && s + h <= 1.0) return (family(s + h) - family(s - h)) / (2.0 * h);
    if (boundary_stencil_used) *boundary_stencil_used = true;
    if (s - h < 0.0)
        return (-3.0 * family(s) + 4.0 * family(s + h) - family(s + 2.0 * h)) / (2.0 * h);
    return (3.0 * family(s) - 4.0 * family(s - h) + family(s - 2.0 * h)) / (2.0 * h);
}

namespace detail {

struct PointSpectral {
    Superop liouvillian, projector, resolvent;
    double gap = 0;
    double scale = 0;
};

inline PointSpectral point_spectral(const LiouvillianFamily& family, double s,
                                    double zero_tol = kZeroEigTol) {
    PointSpectral ps;
    ps.liouvillian = family(s);
    const SpectralData sd = decompose(ps.liouvillian, zero_tol);
    ps.projector = sd.zero_projector();
    ps.gap = sd.gap();
    ps.scale = sd.scale;
    ps.resolvent = reduced_resolvent(ps.liouvillian, ps.projector);
    return ps;
}

inline void require_gap(const PointSpectral& ps, double s, double gap_floor) {
    if (ps.gap < gap_floor * std::max(ps.scale, 1e-300))
        throw GapTooSmall("gap " + std::to_string(ps.gap) + " at s=" + std::to_string(s) +
                          " below threshold; perturbative formula unreliable");
}

}  // namespace detail

// First-order perturbation theory: P' = -P L' S - S L' P.
inline Superop projector_derivative(const LiouvillianFamily& family, double s,
                                    DerivScheme scheme = DerivScheme::Auto,
                                    double gap_floor = 1e-9) {
    const auto ps = detail::point_spectral(family, s);
    detail::require_gap(ps, s, gap_floor);
    const Superop lp = liouvillian_derivative(family, s, scheme);
    return -ps.projector * lp * ps.resolvent - ps.resolvent * lp * ps.projector;
}

// S' = S^2 L' P + P L' S^2 - S L' S.
inline Superop resolvent_derivative(const LiouvillianFamily& family, double s,
                                    DerivScheme scheme = DerivScheme::Auto,
                                    double gap_floor = 1e-9) {
    const auto ps = detail::point_spectral(family, s);
    detail::require_gap(ps, s, gap_floor);
    const Superop lp = liouvillian_derivative(family, s, scheme);
    const Superop s2 = ps.resolvent * ps.resolvent;
    return s2 * lp * ps.projector + ps.projector * lp * s2 - ps.resolvent * lp * ps.resolvent;
}

struct XSequenceConfig {
    int max_order = 3;
    double base_step = 1e-4;   // step for differentiating X_n is base_step * 10^((n-1)/2)
    double gap_floor = 1e-9;
};

// X_1 = S, X_{n+1} = S X_n' with X_n' by central differences over a stencil of
// reduced resolvents. Wider stencils at higher order trade truncation for roundoff.
inline std::vector<Superop> x_sequence(const LiouvillianFamily& family, double s, int m,
                                       XSequenceConfig cfg = {}) {
    if (m < 1 || m > cfg.max_order)
        throw OrderTooHigh("x_sequence: order " + std::to_string(m) + " outside [1, " +
                           std::to_string(cfg.max_order) + "]");
    std::function<Superop(int, double)> x_at = [&](int order, double sigma) -> Superop {
        if (order == 1) {
            const auto ps = detail::point_spectral(family, sigma);
            detail::require_gap(ps, sigma, cfg.gap_floor);
            return ps.resolvent;
        }
        const double h = cfg.base_step * std::pow(10.0, (order - 2) / 2.0);
        Superop dx;
        if (sigma - h >= 0.0 && sigma + h <= 1.0)
            dx = (x_at(order - 1, sigma + h) - x_at(order - 1, sigma - h)) / (2.0 * h);
        else if (sigma - h < 0.0)
            dx = (-3.0 * x_at(order - 1, sigma) + 4.0 * x_at(order - 1, sigma + h) -
                  x_at(order - 1, sigma + 2.0 * h)) / (2.0 * h);
        else
            dx = (3.0 * x_at(order - 1, sigma) - 4.0 * x_at(order - 1, sigma - h) +
                  x_at(order - 1, sigma - 2.0 * h)) / (2.0 * h);
        const auto ps = detail::point_spectral(family, sigma);
        detail::require_gap(ps, sigma, cfg.gap_floor);
        return ps.resolvent * dx;
    };
    std::vector<Superop> out;
    out.reserve(m);
    for (int n = 1; n <= m; ++n) out.push_back(x_at(n, s));
    return out;
}

struct NormBudget {
    int restarts = 24;
    int iterations = 80;
    std::uint64_t seed = 12345;
    bool certify = true;        // dense refinement for d <= 4
    int certify_starts = 4096;
    int certify_iterations = 8;
};

struct NormEstimate {
    double value = 0;
    bool certified = false;
};

namespace detail {

inline OpVector random_unit_vector(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    OpVector v(d);
    for (int i = 0; i < d; ++i) v(i) = Complex(gauss(rng), gauss(rng));
    const double n = v.norm();
    return n > 0 ? OpVector(v / n) : random_unit_vector(d, rng);
}

// Alternating ascent on f(u, v) = ||M(u v^dag)||_1. The polar unitary of the image
// gives the trace-norm dual; the top singular pair of the pulled-back matrix gives
// the next (u, v). Each step is nondecreasing in the dual value.
inline double ascend_trace_norm(const Superop& m, const Superop& madj, OpVector& u, OpVector& v,
                                int iterations) {
    double best = 0;
    double prev = -1;
    for (int it = 0; it < iterations; ++it) {
        const Operator y = devectorize(m * vectorize(Operator(u * v.adjoint())));
        Eigen::JacobiSVD<Operator> ysvd(y, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const double val = ysvd.singularValues().sum();
        best = std::max(best, val);
        if (std::abs(val - prev) <= 1e-13 * std::max(1.0, val) && it > 2) break;
        prev = val;
        const Operator polar = ysvd.matrixU() * ysvd.matrixV().adjoint();
        const Operator z = devectorize(madj * vectorize(polar)).adjoint();
        Eigen::JacobiSVD<Operator> zsvd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
        v = zsvd.matrixU().col(0);
        u = zsvd.matrixV().col(0);
    }
    return best;
}

}  // namespace detail

// Lower-bound estimate of the induced trace norm sup ||M(x)||_1 / ||x||_1 by
// multi-start local maximization over rank-one x = u v^dag (the extreme points of
// the trace-norm unit ball). certified is set when d <= 4 and a dense random
// refinement moves the estimate by less than 1e-4.
inline NormEstimate induced_trace_norm(const Superop& m, NormBudget budget = {}) {
    const int d = superop_hilbert_dim(m);
    const Superop madj = m.adjoint();
    std::mt19937_64 rng(budget.seed);
    NormEstimate est;
    for (int r = 0; r < budget.restarts; ++r) {
        OpVector u = detail::random_unit_vector(d, rng);
        OpVector v = detail::random_unit_vector(d, rng);
        est.value = std::max(est.value, detail::ascend_trace_norm(m, madj, u, v,
                                                                  budget.iterations));
    }
    if (budget.certify && d <= 4) {
        double refined = est.value;
        for (int r = 0; r < budget.certify_starts; ++r) {
            OpVector u = detail::random_unit_vector(d, rng);
            OpVector v = detail::random_unit_vector(d, rng);
            refined = std::max(refined, detail::ascend_trace_norm(m, madj, u, v,
                                                                  budget.certify_iterations));
        }
        est.certified = (refined - est.value) < 1e-4;
        est.value = refined;
    }
    return est;
}

}  // namespace adiakit
