// Acceptance suite: quantitative reproduction of the published scalings and the
// cross-module invariant checks, one verdict line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "adiakit/adiakit.hpp"

using namespace adiakit;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string name;
    bool passed = true;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        passed = passed && ok;
        notes.push_back((ok ? "" : "!! ") + what);
    }

    void expect_in(double value, double lo, double hi, const std::string& what) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s %.6g in [%.4g, %.4g]", what.c_str(), value, lo, hi);
        expect(value >= lo && value <= hi, buf);
    }

    void expect_le(double value, double limit, const std::string& what) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s %.6g <= %.4g", what.c_str(), value, limit);
        expect(value <= limit, buf);
    }
};

void run(int id, const std::string& name, const std::function<void(Criterion&)>& body) {
    Criterion c{id, name};
    const auto start = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%d] %s  %s  (%.1f s)\n", id, c.passed ? "PASS" : "FAIL", name.c_str(), secs);
    for (const auto& note : c.notes) std::printf("      %s\n", note.c_str());
    std::fflush(stdout);
    if (!c.passed) ++g_failures;
}

ExperimentConfig sweep_config(nlohmann::json family, double t_min, double t_max, int count) {
    ExperimentConfig cfg;
    cfg.family = std::move(family);
    cfg.t_min = t_min;
    cfg.t_max = t_max;
    cfg.t_count = count;
    cfg.seed = 20240801;
    return cfg;
}

double worst_eq8_error(const LiouvillianFamily& fam, const Operator& coupling,
                       const BathSpec& bath) {
    double worst = 0;
    for (int k = 1; k <= 19; ++k) {
        const double s = 0.05 * k;
        const Operator h = fam.hamiltonian(s);
        const auto closed = example2_spectrum_closed_form(h, coupling, bath);
        const SpectralData sd = decompose(fam(s));
        for (const Complex& lam : closed) {
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < sd.eigenvalues.size(); ++i)
                best = std::min(best, std::abs(lam - sd.eigenvalues(i)));
            worst = std::max(worst, best / std::max(std::abs(lam), 1e-8 * sd.scale));
        }
    }
    return worst;
}

}  // namespace

int main() {
    std::printf("adiakit %s acceptance suite\n", kVersion);

    SweepResult sweep_ex1, sweep_ex2y;

    run(1, "gapped amplitude-damping sweep reproduces 7.88/T", [&](Criterion& c) {
        auto cfg = sweep_config({{"name", "example1"}}, 1e2, 1e6, 13);
        sweep_ex1 = run_sweep(cfg);
        for (const auto& row : sweep_ex1.rows) c.expect(!row.flagged, "row converged");
        c.expect(sweep_ex1.fit_valid, "fit available");
        if (sweep_ex1.fit_valid) {
            c.expect_in(sweep_ex1.fit.exponent, 0.95, 1.05, "exponent");
            c.expect_in(sweep_ex1.fit.prefactor, 6.3, 9.5, "prefactor");
        }
    });

    run(2, "thermal qubit, sigma_y coupling: 148.5/T^0.999", [&](Criterion& c) {
        auto cfg = sweep_config(
            {{"name", "example2"}, {"coupling", "y"}, {"grid_cache", 4097}}, 1e2, 1e6, 13);
        sweep_ex2y = run_sweep(cfg);
        for (const auto& row : sweep_ex2y.rows) c.expect(!row.flagged, "row converged");
        c.expect(sweep_ex2y.fit_valid, "fit available");
        if (sweep_ex2y.fit_valid) {
            c.expect_in(sweep_ex2y.fit.exponent, 0.97, 1.03, "exponent");
            c.expect_in(sweep_ex2y.fit.prefactor, 148.5 * 0.75, 148.5 * 1.25, "prefactor");
        }
    });

    run(3, "thermal qubit, sigma_z coupling: T^-1/3 above 10^5.4", [&](Criterion& c) {
        auto cfg = sweep_config(
            {{"name", "example2"}, {"coupling", "z"}, {"grid_cache", 4097}}, 1e3,
            std::pow(10.0, 6.4), 18);
        cfg.fit_t_min = std::pow(10.0, 5.4);
        cfg.fit_t_max = cfg.t_max;
        auto sweep = run_sweep(cfg);
        for (const auto& row : sweep.rows) c.expect(!row.flagged, "row converged");
        c.expect(sweep.fit_valid, "fit available");
        if (sweep.fit_valid) {
            c.expect(sweep.fit.points_used >= 4, "at least 4 rows in the window");
            c.expect_in(sweep.fit.exponent, 0.30, 0.36, "exponent (theory 1/3)");
        }
    });

    run(4, "closed-form qubit spectrum matches numerics at 1e-8", [&](Criterion& c) {
        const BathSpec bath = BathSpec::ohmic_exponential_cutoff(1.0);
        for (auto axis : {CouplingAxis::Y, CouplingAxis::Z}) {
            LiouvillianFamily fam = example2_family(-0.5, -0.5, 1e-2, axis, bath);
            const Operator a =
                1e-2 * (axis == CouplingAxis::Y ? sigma_y() : sigma_z());
            const double worst = worst_eq8_error(fam, a, bath);
            c.expect_le(worst, 1e-8, axis == CouplingAxis::Y
                                         ? "sigma_y relative eigenvalue error"
                                         : "sigma_z relative eigenvalue error");
        }
    });

    run(5, "amplitude-damping steady state closed form", [&](Criterion& c) {
        std::mt19937_64 rng(911);
        std::normal_distribution<double> g;
        double worst_residual = 0;
        for (int rep = 0; rep < 50; ++rep) {
            const double mx = g(rng), my = g(rng), mz = g(rng);
            const double gamma = std::abs(g(rng)) + 0.05;
            const Superop l = assemble_liouvillian(
                {pauli_hamiltonian(mx, my, mz), {std::sqrt(2.0 * gamma) * sigma_minus()}});
            const DensityMatrix rho = example1_iss_closed_form(mx, my, mz, gamma);
            worst_residual = std::max(worst_residual, (l * vectorize(rho.rho)).norm());
        }
        c.expect_le(worst_residual, 1e-12, "kernel residual over 50 draws");
        double worst_state = 0;
        LiouvillianFamily fam = example1_family();
        for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const Operator from_kernel = kernel_state(fam, s);
            const DensityMatrix closed =
                example1_iss_closed_form(1.0 - s, 0.0, s / 150.0, 0.5);
            worst_state = std::max(worst_state, (from_kernel - closed.rho).norm());
        }
        c.expect_le(worst_state, 1e-10, "closed form vs kernel vector");
    });

    run(6, "error bound C/T holds on every sweep row", [&](Criterion& c) {
        BoundConfig bc;
        bc.norm_budget.seed = 20240801;
        const auto bound1 = constant_C(example1_family(), 1.0, bc);
        c.expect(bound1.norm_estimator_certified, "norm estimates certified (example 1)");
        for (const auto& row : sweep_ex1.rows)
            c.expect(row.error <= 2.0 * bound1.c / row.t,
                     "example-1 row T=" + std::to_string(row.t));
        char buf[96];
        std::snprintf(buf, sizeof(buf), "example-1 C = %.4g", bound1.c);
        c.notes.push_back(buf);

        const auto bound2 = constant_C(example2_family(), 1.0, bc);
        c.expect(bound2.norm_estimator_certified, "norm estimates certified (example 2)");
        for (const auto& row : sweep_ex2y.rows)
            c.expect(row.error <= 2.0 * bound2.c / row.t,
                     "example-2 row T=" + std::to_string(row.t));
        std::snprintf(buf, sizeof(buf), "example-2 C = %.4g", bound2.c);
        c.notes.push_back(buf);
    });

    run(7, "level-crossing exponent law eta = 1/(1+alpha)", [&](Criterion& c) {
        auto crossing_sweep = [&](double alpha, bool coupled) {
            nlohmann::json fam{{"name", "synthetic_crossing"},
                               {"alpha", alpha},
                               {"s_star", 1.0},
                               {"v", 1.0},
                               {"theta0", 0.8},
                               {"coupled", coupled}};
            auto cfg = sweep_config(fam, 1e2, 1e6, 13);
            return run_sweep(cfg);
        };
        auto s1 = crossing_sweep(1.0, true);
        c.expect(s1.fit_valid, "alpha=1 fit available");
        if (s1.fit_valid) c.expect_in(s1.fit.exponent, 0.45, 0.55, "alpha=1 exponent");
        auto s2 = crossing_sweep(2.0, true);
        c.expect(s2.fit_valid, "alpha=2 fit available");
        if (s2.fit_valid) c.expect_in(s2.fit.exponent, 1.0 / 3 - 0.05, 1.0 / 3 + 0.05,
                                      "alpha=2 exponent");
        auto sd = crossing_sweep(2.0, false);
        c.expect(sd.fit_valid, "decoupled fit available");
        if (sd.fit_valid) c.expect_in(sd.fit.exponent, 0.95, 1.05, "decoupled exponent");
    });

    run(8, "invariant property suite", [&](Criterion& c) {
        const BathSpec bath = BathSpec::ohmic_exponential_cutoff(1.0);
        LiouvillianFamily ex1 = example1_family();
        LiouvillianFamily ex2 = example2_family(-0.5, -0.5, 1e-2, CouplingAxis::Y, bath);

        {  // CPTP of exp(hL)
            double worst = 0;
            for (const auto& fam : {ex1, ex2})
                for (int k = 0; k <= 6; ++k)
                    for (double h : {1e-3, 1e-2, 1e-1}) {
                        auto r = is_cptp(superop_exp(Superop(h * fam(k / 6.0))), 1e-8);
                        worst = std::max({worst, r.cp_violation, r.tp_violation});
                    }
            c.expect_le(worst, 1e-8, "exp(hL) CPTP violation");
        }
        {  // CPTP of the Euler-limit extrapolated intertwiner
            double worst = 0;
            for (const auto& fam : {ex1, ex2}) {
                const Operator choi =
                    choi_matrix(intertwiner_euler_richardson(fam, 1.0, 2048));
                Eigen::SelfAdjointEigenSolver<Operator> es((choi + choi.adjoint()) / 2.0);
                worst = std::max(worst, -es.eigenvalues().minCoeff());
            }
            auto kfam = closed_system_family(
                [](double s) { return pauli_hamiltonian(1.0 - s, 0.2, s); });
            const Operator choi = choi_matrix(intertwiner_euler_richardson(kfam, 1.0, 2048));
            Eigen::SelfAdjointEigenSolver<Operator> es((choi + choi.adjoint()) / 2.0);
            worst = std::max(worst, -es.eigenvalues().minCoeff());
            c.expect_le(worst, 1e-6, "W Choi negativity after extrapolation");
        }
        {  // intertwining residuals
            double worst = 0;
            const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
            for (const auto& fam : {ex1, ex2}) {
                const auto ws = intertwiner_ode_grid(fam, grid);
                const Superop p0 = zero_projector(fam(0.0));
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const Superop p = zero_projector(fam(grid[i]));
                    worst = std::max(worst, (p * ws[i] - ws[i]).norm());
                    worst = std::max(worst, (ws[i] - ws[i] * p0).norm());
                }
            }
            c.expect_le(worst, 1e-6, "intertwining residual");
        }
        {  // semisimplicity along the path
            double worst = 0;
            for (const auto& fam : {ex1, ex2})
                for (int k = 0; k <= 20; ++k) {
                    const Superop l = fam(k / 20.0);
                    worst = std::max(worst, semisimplicity_defect(l, zero_projector(l)) /
                                                std::max(l.norm(), 1e-300));
                }
            c.expect_le(worst, 1e-9, "semisimplicity defect / ||L||");
        }
        {  // KMS rate symmetry
            std::vector<double> ws;
            for (int i = 1; i <= 40; ++i) ws.push_back(0.05 * i);
            c.expect_le(bath.kms_defect(ws), 1e-10, "KMS rate symmetry defect");
        }
        {  // S' identity against finite differences
            double worst = 0;
            for (const auto& fam : {ex1, ex2})
                for (double s : {0.3, 0.5, 0.7}) {
                    const Superop ds = resolvent_derivative(fam, s);
                    auto s_at = [&](double sigma) {
                        const Superop l = fam(sigma);
                        return reduced_resolvent(l, zero_projector(l));
                    };
                    const Superop fd = (s_at(s + 1e-5) - s_at(s - 1e-5)) / 2e-5;
                    worst = std::max(worst, (ds - fd).norm() / std::max(1.0, ds.norm()));
                }
            c.expect_le(worst, 1e-6, "S' identity vs finite differences");
        }
        {  // thermal projector-derivative bound
            bool dominated = true;
            for (int k = 1; k <= 20; ++k) {
                const double s = k / 21.0;
                const DensityMatrix rho = gibbs_state(ex2.hamiltonian(s), 1.0);
                const double bound =
                    kms_pprime_bound(ex2.hamiltonian_derivative(s), rho, 1.0);
                const Operator drho = (gibbs_state(ex2.hamiltonian(s + 1e-6), 1.0).rho -
                                       gibbs_state(ex2.hamiltonian(s - 1e-6), 1.0).rho) /
                                      2e-6;
                dominated = dominated && bound >= trace_norm(drho) - 1e-6;
            }
            c.expect(dominated, "2 beta sqrt(<H'^2>) dominates ||rho_G'||_1 at 20 points");
        }
        {  // unitary-family commutator identities
            const Superop k = hamiltonian_superop(pauli_hamiltonian(0.0, 0.3, 0.4));
            LiouvillianFamily uf = unitary_family(ex1(0.0), k);
            double worst = 0;
            for (double s : {0.2, 0.7}) {
                const Superop l = uf(s);
                const Superop p = zero_projector(l);
                const Superop sr = reduced_resolvent(l, p);
                worst = std::max(worst,
                                 (projector_derivative(uf, s) - (k * p - p * k)).norm());
                worst = std::max(worst,
                                 (resolvent_derivative(uf, s) - (k * sr - sr * k)).norm());
            }
            c.expect_le(worst, 1e-9, "unitary-family P', S' commutator identities");
        }
        {  // non-positivity witness
            auto wit = v_nonpositivity_witness(ex1, 1.0);
            c.expect(wit.negative_eigenvalue < -1e-6,
                     "V witness eigenvalue " + std::to_string(wit.negative_eigenvalue) +
                         " < -1e-6");
        }
    });

    run(9, "first-order expansion term steepens the decay to T^-2", [&](Criterion& c) {
        LiouvillianFamily fam = example1_family();
        const Superop p0 = zero_projector(fam(0.0));
        const Superop w1 =
            vectorize(example1_iss_closed_form(0.0, 0.0, 1.0 / 150.0, 0.5).rho) *
            trace_functional(2).adjoint();
        ExpansionConfig cfg;
        cfg.propagator.t_scale = 0.0;  // keep the integrator below the T^-2 signal
        std::vector<SweepRow> corrected;
        for (double t : {1.0e3, 3.162e3, 1.0e4, 3.162e4, 1.0e5}) {
            const auto omega = expansion_terms(fam, 1.0, t, 1, cfg);
            const Superop e = propagate(fam, t, cfg.propagator).final_op;
            const Superop deviation = (e - w1) * p0;
            corrected.push_back({t, (deviation - omega[0] / t).norm()});
        }
        auto fit = fit_power_law(corrected, 1e3, 1e5);
        c.expect_in(fit.exponent, 1.9, 2.1, "residual decay exponent");
    });

    std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "SUCCESS" : "FAILURE",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
