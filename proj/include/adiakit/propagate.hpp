#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "adiakit/family.hpp"
#include "adiakit/numerics.hpp"
#include "adiakit/spectral.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/types.hpp"

namespace adiakit {

enum class PropagatorMethod { ExponentialMidpoint, AdaptiveRk };

struct PropagatorConfig {
    PropagatorMethod method = PropagatorMethod::ExponentialMidpoint;
    double step_rate = 5.0;        // target h * T * ||L|| per substep
    double base_tol = 1e-8;        // Richardson target: base_tol * max(1, T * t_scale)
    double t_scale = 1e-4;
    int min_substeps = 16;
    int max_doublings = 18;
    long long max_substeps = 50'000'000;
    bool richardson_extrapolate = true;  // return (4 E_2N - E_N)/3; cancels the h^2 term
    int checkpoints = 0;           // record E(s_k, 0) on a uniform grid of this many intervals
    double rk_tol = 1e-10;         // adaptive RK tolerance
    bool cptp_diagnostics = false;
};

struct EvolutionRecord {
    Superop final_op;                        // E(s_end, 0)
    std::vector<double> s_grid;              // checkpoint locations (when requested)
    std::vector<Superop> evolution;          // E(s_k, 0)
    std::vector<Superop> interval_transfer;  // E(s_{k+1}, s_k)
    std::vector<CptpReport> cptp_checks;
    double richardson_discrepancy = 0;
    double tolerance = 0;
    long long substeps = 0;
};

namespace detail {

inline double family_norm_bound(const LiouvillianFamily& family, double s_end) {
    double worst = 0;
    for (int i = 0; i <= 16; ++i) worst = std::max(worst, spectral_norm(family(s_end * i / 16.0)));
    return worst;
}

struct MidpointRun {
    Superop final_op;
    std::vector<Superop> interval_transfer;
};

inline MidpointRun midpoint_run(const LiouvillianFamily& family, double t, double s_end,
                                long long substeps, int intervals) {
    MidpointRun run;
    const int n = family.matrix_dim();
    run.final_op = Superop::Identity(n, n);
    const long long per_interval = substeps / intervals;
    const double h = s_end / double(substeps);
    run.interval_transfer.reserve(intervals);
    for (int k = 0; k < intervals; ++k) {
        Superop transfer = Superop::Identity(n, n);
        for (long long j = 0; j < per_interval; ++j) {
            const double mid = (double(k) * per_interval + j + 0.5) * h;
            transfer = superop_exp(Superop((h * t) * family(mid))) * transfer;
        }
        run.interval_transfer.push_back(transfer);
        run.final_op = transfer * run.final_op;
    }
    return run;
}

}  // namespace detail

// Solve E'(s, 0) = T L(s) E(s, 0) up to s_end. Default method: per-substep
// exponential midpoint E <- exp(h T L(s + h/2)) E with the substep count started
// at h T ||L|| <= step_rate and doubled until the discrepancy against the
// double-resolution run is below base_tol * max(1, T * t_scale).
inline EvolutionRecord propagate(const LiouvillianFamily& family, double t,
                                 PropagatorConfig config = {}, double s_end = 1.0) {
    if (t <= 0) throw Error("propagate: T must be positive");
    EvolutionRecord rec;
    rec.tolerance = config.base_tol * std::max(1.0, t * config.t_scale);
    const int intervals = std::max(1, config.checkpoints);
    const int n = family.matrix_dim();

    if (config.method == PropagatorMethod::AdaptiveRk) {
        OdeOptions opt;
        opt.rel_tol = config.rk_tol;
        opt.abs_tol = config.rk_tol;
        opt.initial_step = 1.0 / std::max(1.0, t * detail::family_norm_bound(family, s_end));
        auto rhs = [&](double s, const Eigen::MatrixXcd& y) {
            return Eigen::MatrixXcd(t * family(s) * y);
        };
        Superop e = Superop::Identity(n, n);
        double s_prev = 0;
        for (int k = 1; k <= intervals; ++k) {
            const double s_next = s_end * k / intervals;
            auto res = integrate_matrix_ode(rhs, Superop(Superop::Identity(n, n)), s_prev,
                                            s_next, opt);
            rec.substeps += res.steps;
            rec.interval_transfer.push_back(res.y);
            e = res.y * e;
            rec.evolution.push_back(e);
            rec.s_grid.push_back(s_next);
            s_prev = s_next;
        }
        rec.final_op = e;
        rec.richardson_discrepancy = 0;  // controlled per-step instead
    } else {
        const double norm_bound = std::max(detail::family_norm_bound(family, s_end), 1e-12);
        long long substeps = std::max<long long>(
            config.min_substeps, static_cast<long long>(std::ceil(t * norm_bound * s_end /
                                                                  config.step_rate)));
        substeps = ((substeps + intervals - 1) / intervals) * intervals;

        detail::MidpointRun coarse = detail::midpoint_run(family, t, s_end, substeps, intervals);
        detail::MidpointRun fine;
        bool converged = false;
        for (int doubling = 0; doubling < config.max_doublings; ++doubling) {
            if (2 * substeps > config.max_substeps)
                throw NonConvergence("propagate: substep budget exhausted at discrepancy " +
                                     std::to_string(rec.richardson_discrepancy));
            fine = detail::midpoint_run(family, t, s_end, 2 * substeps, intervals);
            rec.richardson_discrepancy = (fine.final_op - coarse.final_op).norm();
            rec.substeps = 2 * substeps;
            if (rec.richardson_discrepancy < rec.tolerance) {
                converged = true;
                break;
            }
            coarse = std::move(fine);
            substeps *= 2;
        }
        if (!converged)
            throw NonConvergence("propagate: Richardson discrepancy " +
                                 std::to_string(rec.richardson_discrepancy) +
                                 " above tolerance " + std::to_string(rec.tolerance) +
                                 " at max substeps");
        if (config.richardson_extrapolate) {
            rec.final_op = (4.0 * fine.final_op - coarse.final_op) / 3.0;
            rec.interval_transfer.reserve(intervals);
            for (int k = 0; k < intervals; ++k)
                rec.interval_transfer.push_back(
                    (4.0 * fine.interval_transfer[k] - coarse.interval_transfer[k]) / 3.0);
        } else {
            rec.final_op = fine.final_op;
            rec.interval_transfer = std::move(fine.interval_transfer);
        }
        if (config.checkpoints > 0) {
            Superop acc = Superop::Identity(n, n);
            for (int k = 0; k < intervals; ++k) {
                acc = rec.interval_transfer[k] * acc;
                rec.s_grid.push_back(s_end * (k + 1) / intervals);
                rec.evolution.push_back(acc);
            }
        }
    }
    if (config.cptp_diagnostics && family.acts_on_operators()) {
        for (const auto& e : rec.evolution) rec.cptp_checks.push_back(is_cptp(e));
        if (rec.evolution.empty()) rec.cptp_checks.push_back(is_cptp(rec.final_op));
    }
    return rec;
}

// W(s) as the Euler-line product P(s) ... P(2s/N) P(s/N) P(0).
inline Superop intertwiner_euler(const LiouvillianFamily& family, double s, int n_steps,
                                 double zero_tol = kZeroEigTol) {
    if (n_steps < 1) throw Error("intertwiner_euler: N must be >= 1");
    const int n = family.matrix_dim();
    Superop w = Superop::Identity(n, n);
    for (int k = 0; k <= n_steps; ++k) {
        const double sk = s * k / n_steps;
        try {
            w = zero_projector(family(sk), zero_tol) * w;
        } catch (const Error& e) {
            throw ProjectorFailure("intertwiner_euler at s=" + std::to_string(sk) + ": " +
                                   e.what());
        }
    }
    return w;
}

// Richardson extrapolation of the O(1/N) Euler-line error: 2 W_{2N} - W_N.
inline Superop intertwiner_euler_richardson(const LiouvillianFamily& family, double s,
                                            int n_steps, double zero_tol = kZeroEigTol) {
    const Superop w1 = intertwiner_euler(family, s, n_steps, zero_tol);
    const Superop w2 = intertwiner_euler(family, s, 2 * n_steps, zero_tol);
    return 2.0 * w2 - w1;
}

// W(s) by integrating W' = [P'(s), P(s)] W from W(0) = P(0), returning values at
// the requested grid points (ascending, in [0, 1]).
inline std::vector<Superop> intertwiner_ode_grid(const LiouvillianFamily& family,
                                                 const std::vector<double>& grid,
                                                 double tolerance = 1e-10) {
    auto rhs = [&](double s, const Eigen::MatrixXcd& w) {
        const Superop p = zero_projector(family(s));
        const Superop dp = projector_derivative(family, s);
        return Eigen::MatrixXcd((dp * p - p * dp) * w);
    };
    OdeOptions opt;
    opt.rel_tol = tolerance;
    opt.abs_tol = tolerance;
    std::vector<Superop> out;
    out.reserve(grid.size());
    Superop w = zero_projector(family(0.0));
    double s_prev = 0.0;
    for (double s : grid) {
        if (s < s_prev) throw Error("intertwiner_ode_grid: grid must be ascending");
        if (s > s_prev) {
            auto res = integrate_matrix_ode(rhs, w, s_prev, s, opt);
            w = res.y;
            s_prev = s;
        }
        out.push_back(w);
    }
    return out;
}

inline Superop intertwiner_ode(const LiouvillianFamily& family, double s,
                               double tolerance = 1e-10) {
    return intertwiner_ode_grid(family, {s}, tolerance).back();
}

// Kernel state at schedule point s. Rank-one kernels give the unique steady state;
// degenerate kernels project the maximally mixed state and renormalize.
inline Operator kernel_state(const LiouvillianFamily& family, double s,
                             double zero_tol = kZeroEigTol) {
    if (!family.acts_on_operators())
        throw Error("kernel_state: family does not act on vectorized operators");
    const int d = family.dim();
    const Superop p = zero_projector(family(s), zero_tol);
    const OpVector v = p * vectorize(Operator(Operator::Identity(d, d) / double(d)));
    const Operator raw = devectorize(v);
    const Complex tr = raw.trace();
    if (std::abs(tr) < 1e-12)
        throw DegenerateKernel("kernel_state: projected state is traceless");
    return raw / tr;
}

struct PositivityWitness {
    Operator x0;
    Operator v_applied;              // V(s) x0
    double negative_eigenvalue = 0;  // most negative eigenvalue of V(s) x0
    double alpha = 0;                // most negative eigenvalue of rho(0) - rho(s)
    double lambda = 0;
};

// For a rank-one kernel the intertwiner is V(s) = 1 + (|rho(s)> - |rho(0)>)<1|.
// The state x0 = lambda/d + (1 - lambda) |a_perp><a_perp| with lambda < alpha d
// exposes a negative eigenvalue of V(s) x0: positivity fails although W = V P(0)
// is CPTP.
inline PositivityWitness v_nonpositivity_witness(const LiouvillianFamily& family, double s,
                                                 double degenerate_tol = 1e-10) {
    const int d = family.dim();
    const SpectralData sd0 = decompose(family(0.0));
    if (sd0.zero_multiplicity() != 1)
        throw DegenerateKernel("v_nonpositivity_witness: kernel must be rank one");
    const Operator rho0 = kernel_state(family, 0.0);
    const Operator rho_s = kernel_state(family, s);
    const Operator delta = ((rho_s - rho0 + (rho_s - rho0).adjoint()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Operator> es(delta);
    const double alpha = -es.eigenvalues().minCoeff();
    if (alpha < degenerate_tol)
        throw DegenerateCase("v_nonpositivity_witness: rho(s) = rho(0) within tolerance");
    const OpVector a = es.eigenvectors().col(0);

    // unit vector orthogonal to |a>: next eigenvector of delta (Hermitian basis)
    const OpVector a_perp = es.eigenvectors().col(1);
    PositivityWitness wit;
    wit.alpha = alpha;
    wit.lambda = 0.5 * std::min(alpha * d, 1.0);
    wit.x0 = wit.lambda * Operator::Identity(d, d) / double(d) +
             (1.0 - wit.lambda) * (a_perp * a_perp.adjoint());
    // V(s) x = x + (rho_s - rho0) Tr x with Tr x0 = 1
    wit.v_applied = wit.x0 + (rho_s - rho0);
    Eigen::SelfAdjointEigenSolver<Operator> es2(
        (wit.v_applied + wit.v_applied.adjoint()) / 2.0);
    wit.negative_eigenvalue = es2.eigenvalues().minCoeff();
    return wit;
}

struct AdiabaticErrorResult {
    double error = 0;                  // || rho(s_end) - rho_ideal(s_end) ||_1
    double richardson_discrepancy = 0;
    double tolerance = 0;
    long long substeps = 0;
    bool rank_one_kernel = true;
};

// Trace-norm deviation of the propagated kernel state from the ideal adiabatic
// transport at s_end. For a rank-one kernel the transported state is the
// instantaneous steady state itself (the projector product telescopes); degenerate
// kernels use the intertwiner ODE.
inline AdiabaticErrorResult adiabatic_error_detailed(const LiouvillianFamily& family, double t,
                                                     PropagatorConfig config = {},
                                                     double s_end = 1.0) {
    AdiabaticErrorResult res;
    const Operator rho0 =
        family.has_ideal_state() ? family.ideal_state(0.0) : kernel_state(family, 0.0);
    EvolutionRecord rec = propagate(family, t, config, s_end);
    res.richardson_discrepancy = rec.richardson_discrepancy;
    res.tolerance = rec.tolerance;
    res.substeps = rec.substeps;
    const Operator rho_final = devectorize(rec.final_op * vectorize(rho0));

    Operator ideal;
    if (family.has_ideal_state()) {
        ideal = family.ideal_state(s_end);
    } else {
        const Superop l_end = family(s_end);
        res.rank_one_kernel = decompose(l_end).zero_multiplicity() == 1 &&
                              decompose(family(0.0)).zero_multiplicity() == 1;
        const bool trace_preserving =
            trace_annihilation_defect(l_end) <= 1e-8 * std::max(1.0, l_end.norm());
        if (res.rank_one_kernel && trace_preserving) {
            // rank-one trace-preserving kernels: the projector product telescopes,
            // the transported state is the instantaneous steady state itself
            ideal = kernel_state(family, s_end);
        } else {
            const Superop w = intertwiner_ode(family, s_end);
            ideal = devectorize(w * vectorize(rho0));
        }
    }
    res.error = trace_norm(rho_final - ideal);
    return res;
}

inline double adiabatic_error(const LiouvillianFamily& family, double t,
                              PropagatorConfig config = {}, double s_end = 1.0) {
    return adiabatic_error_detailed(family, t, config, s_end).error;
}

}  // namespace adiakit
