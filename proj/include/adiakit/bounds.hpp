#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "adiakit/davies.hpp"
#include "adiakit/family.hpp"
#include "adiakit/numerics.hpp"
#include "adiakit/propagate.hpp"
#include "adiakit/spectral.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/types.hpp"

namespace adiakit {

struct BoundConfig {
    int grid_points = 101;
    double p2_step = 1e-4;      // central-difference step for P''
    double gap_floor = 1e-9;
    double refine_xtol = 1e-6;  // golden-section refinement of the sup
    NormBudget norm_budget;
};

struct BoundReport {
    double c = 0;              // the full constant
    double term_final = 0;     // ||S(s)|| ||P'(s)||
    double term_initial = 0;   // ||S(0)|| ||P'(0)||
    double term_sup = 0;       // sup over sigma of ||S'P' + S P''||
    double sup_location = 0;
    bool norm_estimator_certified = false;
    std::vector<double> s_grid;
};

namespace detail {

inline Superop projector_second_derivative(const LiouvillianFamily& family, double s,
                                           double h, double gap_floor) {
    auto dp = [&](double sigma) {
        return projector_derivative(family, sigma, DerivScheme::Auto, gap_floor);
    };
    if (s - h >= 0.0 && s + h <= 1.0) return (dp(s + h) - 2.0 * dp(s) + dp(s - h)) / (h * h);
    if (s - h < 0.0) return (dp(s) - 2.0 * dp(s + h) + dp(s + 2.0 * h)) / (h * h);
    return (dp(s) - 2.0 * dp(s - h) + dp(s - 2.0 * h)) / (h * h);
}

inline Superop sup_integrand(const LiouvillianFamily& family, double sigma,
                             const BoundConfig& cfg) {
    const auto ps = point_spectral(family, sigma);
    require_gap(ps, sigma, cfg.gap_floor);
    const Superop lp = liouvillian_derivative(family, sigma);
    const Superop s2 = ps.resolvent * ps.resolvent;
    const Superop s_deriv =
        s2 * lp * ps.projector + ps.projector * lp * s2 - ps.resolvent * lp * ps.resolvent;
    const Superop p_deriv = -ps.projector * lp * ps.resolvent - ps.resolvent * lp * ps.projector;
    const Superop p_second = projector_second_derivative(family, sigma, cfg.p2_step,
                                                         cfg.gap_floor);
    return s_deriv * p_deriv + ps.resolvent * p_second;
}

}  // namespace detail

// C = ||S(s)|| ||P'(s)|| + ||S(0)|| ||P'(0)|| + sup_sigma ||S'P' + SP''||, all in the
// induced trace norm (multi-start lower-bound estimator). The sup is a grid scan
// with golden-section refinement around the discrete maximum.
inline BoundReport constant_C(const LiouvillianFamily& family, double s_end = 1.0,
                              BoundConfig cfg = {}) {
    BoundReport rep;
    bool all_certified = true;

    NormBudget scan_budget = cfg.norm_budget;
    scan_budget.certify = false;  // certification only for the reported values
    auto scan_norm = [&](double sigma) {
        return induced_trace_norm(detail::sup_integrand(family, sigma, cfg), scan_budget).value;
    };

    double best = -1, best_sigma = 0;
    rep.s_grid.reserve(cfg.grid_points);
    for (int k = 0; k < cfg.grid_points; ++k) {
        const double sigma = s_end * k / (cfg.grid_points - 1);
        rep.s_grid.push_back(sigma);
        const double val = scan_norm(sigma);
        if (val > best) {
            best = val;
            best_sigma = sigma;
        }
    }
    const double spacing = s_end / (cfg.grid_points - 1);
    const double lo = std::max(0.0, best_sigma - spacing);
    const double hi = std::min(s_end, best_sigma + spacing);
    double refined_sigma = best_sigma;
    golden_section_max(scan_norm, lo, hi, cfg.refine_xtol, &refined_sigma);
    auto sup_est =
        induced_trace_norm(detail::sup_integrand(family, refined_sigma, cfg), cfg.norm_budget);
    // the refined point may undershoot the discrete max when the integrand is flat
    rep.term_sup = std::max(sup_est.value, best);
    rep.sup_location = refined_sigma;
    all_certified = all_certified && sup_est.certified;

    auto endpoint = [&](double sigma) {
        const auto ps = detail::point_spectral(family, sigma);
        detail::require_gap(ps, sigma, cfg.gap_floor);
        auto s_norm = induced_trace_norm(ps.resolvent, cfg.norm_budget);
        auto p_norm = induced_trace_norm(
            projector_derivative(family, sigma, DerivScheme::Auto, cfg.gap_floor),
            cfg.norm_budget);
        all_certified = all_certified && s_norm.certified && p_norm.certified;
        return s_norm.value * p_norm.value;
    };
    rep.term_final = endpoint(s_end);
    rep.term_initial = endpoint(0.0);
    rep.c = rep.term_final + rep.term_initial + rep.term_sup;
    rep.norm_estimator_certified = all_certified;
    return rep;
}

struct ExpansionConfig {
    int quadrature_points = 129;  // odd, composite Simpson
    double p2_step = 1e-4;
    double gap_floor = 1e-9;
    PropagatorConfig propagator;
    XSequenceConfig x_config;
};

// Expansion terms of the adiabatic series,
//   Omega_n = E(s, sigma) X_n(sigma) W'(sigma) |_0^s
//             - int_0^s E(s, sigma) X_n(sigma) W''(sigma) d sigma,
// with the propagators E(s, sigma) taken from checkpointed propagation,
// W' = P'W and W'' = [P'' + (P')^2] W.
inline std::vector<Superop> expansion_terms(const LiouvillianFamily& family, double s_end,
                                            double t, int m, ExpansionConfig cfg = {}) {
    if (m < 1 || m > 3) throw OrderTooHigh("expansion_terms: m must be in [1, 3]");
    const int n_nodes = cfg.quadrature_points | 1;  // force odd
    const int n = family.matrix_dim();

    std::vector<double> nodes(n_nodes);
    for (int k = 0; k < n_nodes; ++k) nodes[k] = s_end * k / (n_nodes - 1);

    // kernel rank along the path
    bool rank_one = true;
    for (double sigma : {0.0, 0.5 * s_end, s_end})
        rank_one = rank_one && decompose(family(sigma)).zero_multiplicity() == 1;
    if (!rank_one && m > 1)
        throw DegenerateKernel("expansion_terms: degenerate kernel supports only m = 1");

    // E(s_end, sigma_k) by suffix products of the checkpoint transfers
    PropagatorConfig prop = cfg.propagator;
    prop.checkpoints = n_nodes - 1;
    EvolutionRecord rec = propagate(family, t, prop, s_end);
    std::vector<Superop> from(n_nodes, Superop::Identity(n, n));
    for (int k = n_nodes - 2; k >= 0; --k)
        from[k] = from[k + 1] * rec.interval_transfer[k];

    // intertwiner and its derivatives on the nodes
    std::vector<Superop> w =
        rank_one && trace_annihilation_defect(family(0.0)) < 1e-8
            ? std::vector<Superop>()
            : intertwiner_ode_grid(family, nodes);
    const OpVector one = family.acts_on_operators() ? trace_functional(family.dim()) : OpVector();
    auto w_at = [&](int k) -> Superop {
        if (!w.empty()) return w[k];
        return vectorize(kernel_state(family, nodes[k])) * one.adjoint();
    };

    // Pointwise data needed at sigma and at Taylor-shifted points: the integral of
    // E(s, sigma) X_n W'' concentrates in a boundary layer of width 1/(T Delta) at
    // sigma = s, which no fixed quadrature grid resolves. One more integration by
    // parts (E X_n W'' = E L S X_n W'' = -(1/T) dE/dsigma S X_n W'') replaces it by
    // exact boundary terms plus a 1/T-prefixed integral of the smooth derivative.
    struct NodeData {
        Superop w_prime;                 // P' W
        std::vector<Superop> x;          // X_1..X_m
        std::vector<Superop> sxw;        // S X_n W''
        std::vector<Superop> sxw_deriv;  // d/dsigma (S X_n W'')
    };
    auto eval_point = [&](double sigma, const Superop& wk, bool with_deriv) {
        NodeData data;
        const auto ps = detail::point_spectral(family, sigma);
        detail::require_gap(ps, sigma, cfg.gap_floor);
        const Superop lp = liouvillian_derivative(family, sigma);
        const Superop dp = -ps.projector * lp * ps.resolvent - ps.resolvent * lp * ps.projector;
        const Superop d2p =
            detail::projector_second_derivative(family, sigma, cfg.p2_step, cfg.gap_floor);
        data.w_prime = dp * wk;
        const Superop w_second = (d2p + dp * dp) * wk;
        data.x = x_sequence(family, sigma, m, cfg.x_config);
        for (int order = 0; order < m; ++order)
            data.sxw.push_back(ps.resolvent * data.x[order] * w_second);
        if (with_deriv) {
            // W at the shifted points from a Taylor step of the transport equation
            const double h = cfg.p2_step;
            auto w_shift = [&](double delta) {
                return Superop(wk + delta * data.w_prime +
                               0.5 * delta * delta * w_second);
            };
            auto sxw_at = [&](double shifted, const Superop& w_shifted) {
                const auto ps2 = detail::point_spectral(family, shifted);
                const Superop lp2 = liouvillian_derivative(family, shifted);
                const Superop dp2 =
                    -ps2.projector * lp2 * ps2.resolvent - ps2.resolvent * lp2 * ps2.projector;
                const Superop d2p2 = detail::projector_second_derivative(family, shifted,
                                                                         cfg.p2_step,
                                                                         cfg.gap_floor);
                const Superop w_second2 = (d2p2 + dp2 * dp2) * w_shifted;
                const auto xs2 = x_sequence(family, shifted, m, cfg.x_config);
                std::vector<Superop> out;
                for (int order = 0; order < m; ++order)
                    out.push_back(ps2.resolvent * xs2[order] * w_second2);
                return out;
            };
            const double lo_shift = (sigma - h >= 0.0) ? -h : 0.0;
            const double hi_shift = (sigma + h <= s_end) ? h : 0.0;
            const auto plus = sxw_at(sigma + hi_shift, w_shift(hi_shift));
            const auto minus = sxw_at(sigma + lo_shift, w_shift(lo_shift));
            for (int order = 0; order < m; ++order)
                data.sxw_deriv.push_back((plus[order] - minus[order]) /
                                         (hi_shift - lo_shift));
        }
        return data;
    };

    std::vector<Superop> boundary_hi(m), boundary_lo(m);
    std::vector<Superop> layer_hi(m), layer_lo(m);
    std::vector<std::vector<Superop>> integrand(m, std::vector<Superop>(n_nodes));
    for (int k = 0; k < n_nodes; ++k) {
        const double sigma = nodes[k];
        const NodeData data = eval_point(sigma, w_at(k), /*with_deriv=*/true);
        for (int order = 0; order < m; ++order) {
            if (k == 0) {
                boundary_lo[order] = from[0] * data.x[order] * data.w_prime;
                layer_lo[order] = from[0] * data.sxw[order];
            }
            if (k == n_nodes - 1) {
                boundary_hi[order] = data.x[order] * data.w_prime;
                layer_hi[order] = data.sxw[order];
            }
            integrand[order][k] = from[k] * data.sxw_deriv[order];
        }
    }

    const double h = s_end / (n_nodes - 1);
    std::vector<Superop> omega(m);
    for (int order = 0; order < m; ++order) {
        Superop smooth = Superop::Zero(n, n);
        for (int k = 0; k < n_nodes; ++k) {
            const double weight = (k == 0 || k == n_nodes - 1) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            smooth += weight * integrand[order][k];
        }
        smooth *= h / 3.0;
        // int E X_n W'' = -(1/T)[E S X_n W'']_0^s + (1/T) int E (S X_n W'')'
        const Superop integral =
            (-(layer_hi[order] - layer_lo[order]) + smooth) / t;
        omega[order] = boundary_hi[order] - boundary_lo[order] - integral;
    }
    return omega;
}

// || P' || = || rho_G' ||_1 <= 2 beta sqrt(<(H')^2>_G) for thermal projectors.
inline double kms_pprime_bound(const Operator& h_prime, const DensityMatrix& rho_g,
                               double beta) {
    require_hermitian(h_prime, "kms_pprime_bound");
    const double mean_sq = (rho_g.rho * h_prime * h_prime).trace().real();
    return 2.0 * beta * std::sqrt(std::max(0.0, mean_sq));
}

struct TimeEstimate {
    double t_sufficient = 0;
    double delta_min = 0;
    double lprime_max = 0;
    double hprime_sq_max = 0;  // max over the grid of <(H')^2>_G
    double c_norm = 0;         // measured sup of ||S|| Delta
};

// T ~ c^2 beta ||L'||_max sqrt(<(H')^2>_G,max) / (Delta_min^2 epsilon) with c taken
// as the measured sup over the grid of ||S|| Delta.
inline TimeEstimate adiabatic_time_estimate(const LiouvillianFamily& family, int grid_points,
                                            double beta, double epsilon,
                                            NormBudget budget = {}) {
    if (!family.has_hamiltonian() || !family.has_hamiltonian_derivative())
        throw Error("adiabatic_time_estimate: family must expose H(s) and H'(s)");
    // KMS certificate spot checks
    for (double sigma : {0.0, 0.5}) {
        auto rep = detailed_balance_certificate(family(sigma),
                                                gibbs_state(family.hamiltonian(sigma), beta));
        if (rep.stationarity > 1e-8 || rep.normality_defect > 1e-6)
            throw Error("adiabatic_time_estimate: family fails the KMS certificates");
    }
    NormBudget scan = budget;
    scan.certify = false;
    TimeEstimate est;
    est.delta_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid_points; ++k) {
        const double sigma = double(k) / (grid_points - 1);
        const auto ps = detail::point_spectral(family, sigma);
        if (ps.gap <= 0) throw GapTooSmall("adiabatic_time_estimate: closed gap on the grid");
        est.delta_min = std::min(est.delta_min, ps.gap);
        est.c_norm = std::max(est.c_norm,
                              induced_trace_norm(ps.resolvent, scan).value * ps.gap);
        est.lprime_max = std::max(
            est.lprime_max, induced_trace_norm(liouvillian_derivative(family, sigma),
                                               scan).value);
        const Operator hp = family.hamiltonian_derivative(sigma);
        const DensityMatrix rho_g = gibbs_state(family.hamiltonian(sigma), beta);
        est.hprime_sq_max =
            std::max(est.hprime_sq_max, (rho_g.rho * hp * hp).trace().real());
    }
    est.t_sufficient = est.c_norm * est.c_norm * beta * est.lprime_max *
                       std::sqrt(est.hprime_sq_max) / (est.delta_min * est.delta_min * epsilon);
    return est;
}

struct CrossingScanConfig {
    int grid_points = 401;
    double zero_tol = 1e-13;     // tightened: the closing eigenvalue must stay resolved
    double cluster_tol = 1e-13;
    double threshold_factor = 1e-3;  // crossing when gap < factor * median gap
    double fit_distance_max = 0.05;  // fit |s - s*| window: [2 grid spacings, this]
    double gap_floor_factor = 100.0; // keep fitted gaps above this multiple of zero_tol * scale
    int min_fit_points = 4;
};

struct Crossing {
    double s_star = 0;
    double alpha = 0;
    double v = 0;    // gap prefactor e^{intercept}
    double eta = 0;  // 1 / (1 + alpha)
    double fit_residual = 0;
    int points_used = 0;
};

struct CrossingReport {
    std::vector<Crossing> crossings;
    double median_gap = 0;
    double threshold = 0;
    std::vector<double> s_grid;
    std::vector<double> gaps;
};

// Scan the gap for level crossings Delta ~ v |s - s*|^alpha and fit the closing
// exponent on both sides; eta = 1/(1 + alpha) is the predicted sweep exponent.
// An empty crossing list (all gaps above threshold) is a result, not an error.
inline CrossingReport crossing_scan(const LiouvillianFamily& family,
                                    CrossingScanConfig cfg = {}) {
    CrossingReport rep;
    const int n = cfg.grid_points;
    rep.s_grid.resize(n);
    rep.gaps.resize(n);
    std::vector<int> mult(n);
    double scale = 0;
    for (int k = 0; k < n; ++k) {
        rep.s_grid[k] = double(k) / (n - 1);
        const SpectralData sd = decompose(family(rep.s_grid[k]), cfg.zero_tol, cfg.cluster_tol);
        rep.gaps[k] = sd.gap();
        mult[k] = sd.zero_multiplicity();
        scale = std::max(scale, sd.scale);
    }
    std::vector<double> sorted = rep.gaps;
    std::sort(sorted.begin(), sorted.end());
    rep.median_gap = sorted[n / 2];
    rep.threshold = cfg.threshold_factor * rep.median_gap;
    // typical kernel dimension along the path: a grid point sitting exactly on a
    // crossing shows a larger multiplicity (and a spuriously reopened gap)
    std::vector<int> msorted = mult;
    std::sort(msorted.begin(), msorted.end());
    const int base_mult = msorted[n / 2];

    auto gap_at = [&](double s) {
        return decompose(family(s), cfg.zero_tol, cfg.cluster_tol).gap();
    };

    // candidates: argmin of each contiguous below-threshold run, plus every
    // multiplicity jump (an exactly-hit crossing)
    std::vector<int> candidates;
    int k = 0;
    while (k < n) {
        if (rep.gaps[k] > rep.threshold || mult[k] > base_mult) {
            ++k;
            continue;
        }
        int argmin = k;
        while (k < n && rep.gaps[k] <= rep.threshold && mult[k] == base_mult) {
            if (rep.gaps[k] < rep.gaps[argmin]) argmin = k;
            ++k;
        }
        candidates.push_back(argmin);
    }
    for (int i = 0; i < n; ++i)
        if (mult[i] > base_mult) candidates.push_back(i);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                 [](int a, int b) { return std::abs(a - b) <= 2; }),
                     candidates.end());

    for (int argmin : candidates) {
        Crossing cross;
        const double left = rep.s_grid[std::max(0, argmin - 1)];
        const double right = rep.s_grid[std::min(n - 1, argmin + 1)];
        if (mult[argmin] > base_mult) {
            cross.s_star = rep.s_grid[argmin];  // exactly-hit crossing
        } else if (argmin == 0 || argmin == n - 1) {
            cross.s_star = rep.s_grid[argmin];
        } else {
            golden_section_min(gap_at, left, right, 1e-10, &cross.s_star);
            // snap to the boundary of the refinement window if the minimum sits there
            if (cross.s_star - left < 1e-8) cross.s_star = left;
            if (right - cross.s_star < 1e-8) cross.s_star = right;
        }

        // two-sided log-log fit of the gap against |s - s*|; a distance-based
        // window keeps slowly varying prefactors from biasing the exponent
        const double floor = cfg.gap_floor_factor * cfg.zero_tol * std::max(scale, 1e-300);
        const double spacing = 1.0 / (n - 1);
        const double dist_max = std::max(8.0 * spacing, cfg.fit_distance_max);
        std::vector<double> xs, ys;
        for (int i = 0; i < n; ++i) {
            const double dist = std::abs(rep.s_grid[i] - cross.s_star);
            if (dist < 2.0 * spacing || dist > dist_max) continue;
            if (rep.gaps[i] > 0.5 * rep.median_gap || rep.gaps[i] < floor) continue;
            if (mult[i] > base_mult) continue;
            xs.push_back(std::log(dist));
            ys.push_back(std::log(rep.gaps[i]));
        }
        cross.points_used = static_cast<int>(xs.size());
        if (cross.points_used >= cfg.min_fit_points) {
            const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
            const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
            double sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxx += (xs[i] - mx) * (xs[i] - mx);
                sxy += (xs[i] - mx) * (ys[i] - my);
            }
            cross.alpha = sxy / sxx;
            cross.v = std::exp(my - cross.alpha * mx);
            cross.eta = 1.0 / (1.0 + cross.alpha);
            double ss = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double r = ys[i] - (std::log(cross.v) + cross.alpha * xs[i]);
                ss += r * r;
            }
            cross.fit_residual = std::sqrt(ss / xs.size());
            rep.crossings.push_back(cross);
        }
    }
    return rep;
}

struct SweepRow {
    double t = 0;
    double error = 0;
    double richardson_discrepancy = 0;
    double tolerance = 0;
    long long substeps = 0;
    bool flagged = false;  // integrator above tolerance; excluded from fits
};

struct PowerLawFit {
    double prefactor = 0;
    double exponent = 0;
    double t_min = 0, t_max = 0;
    double residual = 0;  // rms in log-log
    int points_used = 0;
};

// Ordinary least squares of log(error) against log(T) inside the window.
inline PowerLawFit fit_power_law(const std::vector<SweepRow>& rows, double t_min,
                                 double t_max) {
    std::vector<double> xs, ys;
    // tolerate roundoff at the window edges from log-spaced ladder construction
    const double lo = t_min * (1.0 - 1e-12), hi = t_max * (1.0 + 1e-12);
    for (const auto& row : rows) {
        if (row.t < lo || row.t > hi || row.flagged) continue;
        if (!(row.error > 0))
            throw InsufficientData("fit_power_law: nonpositive error in the fit window");
        xs.push_back(std::log(row.t));
        ys.push_back(std::log(row.error));
    }
    if (xs.size() < 4)
        throw InsufficientData("fit_power_law: need at least 4 rows in the window, have " +
                               std::to_string(xs.size()));
    PowerLawFit fit;
    fit.t_min = t_min;
    fit.t_max = t_max;
    fit.points_used = static_cast<int>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    fit.exponent = -slope;
    fit.prefactor = std::exp(my - slope * mx);
    double ss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (my + slope * (xs[i] - mx));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / xs.size());
    return fit;
}

// Default fit window: the top 40% of the ladder in log T.
inline std::pair<double, double> default_fit_window(const std::vector<SweepRow>& rows) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& row : rows) {
        lo = std::min(lo, row.t);
        hi = std::max(hi, row.t);
    }
    const double log_lo = std::log10(lo), log_hi = std::log10(hi);
    return {std::pow(10.0, log_lo + 0.6 * (log_hi - log_lo)), hi};
}

}  // namespace adiakit
