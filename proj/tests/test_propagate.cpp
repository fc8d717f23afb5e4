#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "adiakit/models.hpp"
#include "adiakit/propagate.hpp"
#include "adiakit/spectral.hpp"

using namespace adiakit;

namespace {

Superop iss_projector(double s) {
    // |rho_tilde(s)><1| for the amplitude-damping defaults
    const DensityMatrix rho = example1_iss_closed_form(1.0 - s, 0.0, s / 150.0, 0.5);
    return vectorize(rho.rho) * trace_functional(2).adjoint();
}

}  // namespace

TEST_CASE("propagator on a constant generator") {
    LiouvillianFamily cf = constant_family(example1_family(), 0.3);
    const double t = 7.0;
    SECTION("E(1,0) equals exp(T L) to high accuracy") {
        EvolutionRecord rec = propagate(cf, t);
        const Superop expect = superop_exp(Superop(t * cf(0.0)));
        REQUIRE((rec.final_op - expect).norm() < 1e-9 * expect.norm());
    }
    SECTION("the steady state is invariant") {
        const Operator rho_ss = kernel_state(cf, 0.0);
        for (double s_end : {0.25, 1.0}) {
            EvolutionRecord rec = propagate(cf, t, {}, s_end);
            const Operator moved = devectorize(rec.final_op * vectorize(rho_ss));
            REQUIRE((moved - rho_ss).norm() < 1e-9);
        }
    }
}

TEST_CASE("closed-system propagation conserves purity") {
    auto fam = closed_system_family(
        [](double s) { return pauli_hamiltonian(1.0 - s, 0.2, s); },
        [](double) { return pauli_hamiltonian(-1.0, 0.0, 1.0); });
    Operator psi_proj = Operator::Zero(2, 2);
    psi_proj(0, 0) = 1.0;  // pure state |0><0|
    EvolutionRecord rec = propagate(fam, 50.0, {});
    const Operator rho = devectorize(rec.final_op * vectorize(psi_proj));
    REQUIRE(std::abs((rho * rho).trace().real() - 1.0) < 1e-8);
    REQUIRE(std::abs(rho.trace().real() - 1.0) < 1e-10);
}

TEST_CASE("propagator composition property") {
    LiouvillianFamily fam = example1_family();
    const double t = 300.0;
    const Superop e_full = propagate(fam, t).final_op;
    const Superop e_first = propagate(fam, t, {}, 0.5).final_op;
    // second half via reparametrization: E(1, 1/2) solves dE/du = (T/2) L(1/2 + u/2) E
    auto second = LiouvillianFamily::from_superop(
        "example1-second-half", 4, [&fam](double u) { return fam(0.5 + 0.5 * u); });
    const Superop e_second = propagate(second, t / 2.0).final_op;
    const double tol = propagate(fam, t).tolerance;
    REQUIRE((e_full - e_second * e_first).norm() <= 10.0 * tol);
}

TEST_CASE("midpoint and adaptive RK agree at small T") {
    LiouvillianFamily fam = example1_family();
    PropagatorConfig rk;
    rk.method = PropagatorMethod::AdaptiveRk;
    rk.rk_tol = 1e-11;
    const Superop e_mid = propagate(fam, 100.0).final_op;
    const Superop e_rk = propagate(fam, 100.0, rk).final_op;
    REQUIRE((e_mid - e_rk).norm() < 1e-6);
}

TEST_CASE("propagated CPTP diagnostics") {
    LiouvillianFamily fam = example1_family();
    PropagatorConfig cfg;
    cfg.checkpoints = 4;
    cfg.cptp_diagnostics = true;
    EvolutionRecord rec = propagate(fam, 40.0, cfg);
    REQUIRE(rec.cptp_checks.size() == 4);
    for (const auto& rep : rec.cptp_checks) REQUIRE(rep.passed);
}

TEST_CASE("euler-line intertwiner") {
    LiouvillianFamily fam = example1_family();
    SECTION("constant family: W(s) = P(0) for any N") {
        LiouvillianFamily cf = constant_family(fam, 0.2);
        const Superop p0 = zero_projector(cf(0.0));
        for (int n : {1, 7, 64}) {
            REQUIRE((intertwiner_euler(cf, 1.0, n) - p0).norm() < 1e-11);
        }
    }
    SECTION("rank-one trace-preserving chain telescopes exactly to |rho(s)><1|") {
        // P(s_k) P(s_{k-1}) = |rho(s_k)><1| at every step, so any N is exact
        const Superop closed = iss_projector(1.0);
        REQUIRE((intertwiner_euler(fam, 1.0, 4) - closed).norm() < 1e-12);
        REQUIRE((intertwiner_euler(fam, 1.0, 1024) - closed).norm() < 1e-12);
    }
    SECTION("degenerate-kernel chain converges at first order to the ODE limit") {
        auto kfam = closed_system_family(
            [](double s) { return pauli_hamiltonian(1.0 - s, 0.2, s); },
            [](double) { return pauli_hamiltonian(-1.0, 0.0, 1.0); });
        const Superop reference = intertwiner_ode(kfam, 1.0, 1e-11);
        const double err_256 = (intertwiner_euler(kfam, 1.0, 256) - reference).norm();
        const double err_512 = (intertwiner_euler(kfam, 1.0, 512) - reference).norm();
        REQUIRE(err_256 / err_512 == Catch::Approx(2.0).margin(0.5));
        const Superop extrap = intertwiner_euler_richardson(kfam, 1.0, 512);
        REQUIRE((extrap - reference).norm() < 5e-6);
    }
    SECTION("W passes the CPTP check at N = 4096") {
        const Superop w = intertwiner_euler(fam, 1.0, 4096);
        REQUIRE(is_cptp(w, 1e-6).passed);
        auto kfam = closed_system_family(
            [](double s) { return pauli_hamiltonian(1.0 - s, 0.2, s); });
        // every factor is a pinching channel, so the product is CPTP at any N
        REQUIRE(is_cptp(intertwiner_euler(kfam, 1.0, 4096), 1e-6).passed);
    }
}

TEST_CASE("ODE intertwiner") {
    LiouvillianFamily fam = example1_family();
    SECTION("agrees with the Richardson-extrapolated Euler limit") {
        const Superop w_ode = intertwiner_ode(fam, 1.0);
        const Superop w_euler = intertwiner_euler_richardson(fam, 1.0, 4096);
        REQUIRE((w_ode - w_euler).norm() < 1e-6);
    }
    SECTION("constant family returns P(0)") {
        LiouvillianFamily cf = constant_family(fam, 0.6);
        REQUIRE((intertwiner_ode(cf, 1.0) - zero_projector(cf(0.0))).norm() < 1e-9);
    }
    SECTION("unitary family: W(s) = e^{sK} P(0)") {
        const Superop k = hamiltonian_superop(pauli_hamiltonian(0.0, 0.3, 0.4));
        LiouvillianFamily uf = unitary_family(example1_family()(0.0), k);
        const Superop p0 = zero_projector(uf(0.0));
        for (double s : {0.5, 1.0}) {
            const Superop expect = superop_exp(Superop(s * k)) * p0;
            REQUIRE((intertwiner_ode(uf, s) - expect).norm() < 1e-7);
        }
    }
    SECTION("intertwining relation and contraction norm on a grid") {
        NormBudget budget;
        budget.seed = 4242;
        const Superop p0 = zero_projector(fam(0.0));
        auto ws = intertwiner_ode_grid(fam, {0.25, 0.5, 0.75, 1.0});
        const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Superop p = zero_projector(fam(grid[i]));
            REQUIRE((p * ws[i] - ws[i]).norm() <= 1e-6);
            REQUIRE((ws[i] - ws[i] * p0).norm() <= 1e-6);
            REQUIRE(induced_trace_norm(ws[i], budget).value <= 1.0 + 1e-8);
            REQUIRE(is_cptp(ws[i], 1e-6).passed);
        }
    }
}

TEST_CASE("V non-positivity witness") {
    LiouvillianFamily fam = example1_family();
    SECTION("the rank-one intertwiner V(s) itself is not completely positive") {
        // V(s) = 1 + (|rho(s)> - |rho(0)>)<1| while W = V P(0) stays CPTP
        const OpVector d =
            vectorize(kernel_state(fam, 1.0)) - vectorize(kernel_state(fam, 0.0));
        const Superop v = Superop::Identity(4, 4) + d * trace_functional(2).adjoint();
        auto rep = is_cptp(v, 1e-8);
        REQUIRE(rep.cp_violation > 1e-3);
        REQUIRE(is_cptp(Superop(v * zero_projector(fam(0.0))), 1e-8).passed);
    }
    SECTION("amplitude damping at s = 1 exposes a negative eigenvalue") {
        auto wit = v_nonpositivity_witness(fam, 1.0);
        REQUIRE(wit.negative_eigenvalue < -1e-6);
        // the witness state is a valid density matrix
        REQUIRE_NOTHROW(DensityMatrix::checked(wit.x0));
    }
    SECTION("the exposed eigenvalue equals lambda/d - alpha") {
        auto wit = v_nonpositivity_witness(fam, 1.0);
        REQUIRE(wit.negative_eigenvalue ==
                Catch::Approx(wit.lambda / 2.0 - wit.alpha).margin(1e-9));
    }
    SECTION("constant family has no witness") {
        LiouvillianFamily cf = constant_family(fam, 0.5);
        REQUIRE_THROWS_AS(v_nonpositivity_witness(cf, 1.0), DegenerateCase);
    }
}

TEST_CASE("adiabatic error for the amplitude-damping schedule") {
    LiouvillianFamily fam = example1_family();
    auto res = adiabatic_error_detailed(fam, 1e4);
    REQUIRE(res.rank_one_kernel);
    REQUIRE(res.richardson_discrepancy < res.tolerance);
    // Fig.-1b scaling: error ~= 7.88 / T within 25%
    REQUIRE(res.error == Catch::Approx(7.88e-4).epsilon(0.25));
}

TEST_CASE("adiabatic error decreases along a dyadic ladder") {
    LiouvillianFamily fam = example1_family();
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {500.0, 1000.0, 2000.0, 4000.0}) {
        const double err = adiabatic_error(fam, t);
        REQUIRE(err < prev);
        prev = err;
    }
}
