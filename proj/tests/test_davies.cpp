#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "adiakit/davies.hpp"
#include "adiakit/models.hpp"
#include "adiakit/spectral.hpp"

using namespace adiakit;

namespace {

Operator example2_hamiltonian(double s, double wx = -0.5, double wz = -0.5) {
    return wx * (1 - s) * sigma_x() + wz * s * sigma_z();
}

// Match each closed-form eigenvalue to its nearest numerical cluster value.
double worst_relative_eigenvalue_error(const std::array<Complex, 4>& closed,
                                       const SpectralData& sd, double scale) {
    double worst = 0;
    for (const Complex& lam : closed) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < sd.eigenvalues.size(); ++i)
            best = std::min(best, std::abs(lam - sd.eigenvalues(i)));
        worst = std::max(worst, best / std::max(std::abs(lam), 1e-8 * scale));
    }
    return worst;
}

}  // namespace

TEST_CASE("bohr decomposition") {
    SECTION("commuting coupling: a single zero frequency") {
        auto bd = bohr_decompose(sigma_z(), sigma_z());
        REQUIRE(bd.frequencies.size() == 1);
        REQUIRE(bd.frequencies[0] == Catch::Approx(0.0).margin(1e-14));
        REQUIRE((bd.components[0] - sigma_z()).norm() < 1e-14);
    }
    SECTION("H = sigma_z, A = sigma_x: frequencies {-2, +2} with projector components") {
        auto bd = bohr_decompose(sigma_z(), sigma_x());
        REQUIRE(bd.frequencies.size() == 2);
        REQUIRE(bd.frequencies[0] == Catch::Approx(-2.0).margin(1e-12));
        REQUIRE(bd.frequencies[1] == Catch::Approx(2.0).margin(1e-12));
        // oracle via explicit 2x2 projector algebra: eigenbasis of sigma_z is
        // {|1>(E=-1), |0>(E=+1)}; the omega=+2 component is Pi_- sigma_x Pi_+.
        Operator pi_minus = Operator::Zero(2, 2), pi_plus = Operator::Zero(2, 2);
        pi_minus(1, 1) = 1;
        pi_plus(0, 0) = 1;
        REQUIRE((bd.component(2.0, 1e-9) - pi_minus * sigma_x() * pi_plus).norm() < 1e-13);
        REQUIRE((bd.component(-2.0, 1e-9) - pi_plus * sigma_x() * pi_minus).norm() < 1e-13);
    }
    SECTION("coupling matrix element of the driven qubit") {
        const double g = 1e-2, wx = -0.5, wz = -0.5;
        for (double s : {0.1, 0.5, 0.9}) {
            const Operator h = example2_hamiltonian(s, wx, wz);
            auto bd = bohr_decompose(h, Operator(g * sigma_z()));
            const double m2 = wx * wx * (1 - s) * (1 - s) + wz * wz * s * s;
            const double delta = 2.0 * std::sqrt(m2);
            const Operator a_low = bd.component(delta, 1e-9);
            const double a01_sq = a_low.squaredNorm();
            const double expect = g * g * wx * wx * (1 - s) * (1 - s) / m2;
            REQUIRE(a01_sq == Catch::Approx(expect).epsilon(1e-10));
        }
    }
    SECTION("round trip and conjugation symmetry") {
        for (double s : {0.25, 0.75}) {
            const Operator h = example2_hamiltonian(s);
            const Operator a = 0.01 * sigma_y();
            auto bd = bohr_decompose(h, a);
            Operator sum = Operator::Zero(2, 2);
            for (const auto& c : bd.components) sum += c;
            REQUIRE((sum - a).norm() < 1e-12);
            for (std::size_t i = 0; i < bd.frequencies.size(); ++i) {
                const Operator conj = bd.component(-bd.frequencies[i], 1e-9);
                REQUIRE((conj - bd.components[i].adjoint()).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("bath spectral functions") {
    SECTION("ohmic gamma(0) equals the 2 pi / beta limit") {
        for (double beta : {0.5, 1.0, 2.0}) {
            auto bath = BathSpec::ohmic_exponential_cutoff(beta);
            REQUIRE(std::abs(bath.gamma(0.0) - 2.0 * M_PI / beta) <= 1e-10);
            // continuity of the extension
            REQUIRE(bath.gamma(1e-9) == Catch::Approx(bath.gamma(0.0)).epsilon(1e-6));
        }
    }
    SECTION("KMS symmetry of the ohmic bath") {
        auto bath = BathSpec::ohmic_exponential_cutoff(1.0);
        std::vector<double> ws;
        for (int i = 1; i <= 40; ++i) ws.push_back(0.05 * i);
        REQUIRE(bath.kms_defect(ws) <= 1e-10);
    }
    SECTION("flat bath violates KMS at beta > 0 (negative control)") {
        auto bath = BathSpec::flat(1.0, 2.0);
        REQUIRE(bath.kms_defect({0.5, 1.0}) > 1e-3);
    }
}

TEST_CASE("lamb shift principal value integral") {
    SECTION("even spectral density gives S(0) = 0") {
        auto bath = BathSpec::flat(1.0, 1.5, /*lamb_shift_enabled=*/true);
        auto res = bath.lamb_shift(0.0);
        REQUIRE(std::abs(res.value) < 1e-9);
    }
    SECTION("Fig.-2 bath at omega = 1 agrees with an independent quadrature oracle") {
        auto bath = BathSpec::ohmic_exponential_cutoff(1.0);
        const double w = 1.0;
        const double value = bath.lamb_shift(w).value;
        REQUIRE(bath.lamb_shift(w).error_estimate <= 1e-8 * std::max(1.0, std::abs(value)));

        // oracle: plain singularity subtraction on [w - R, w + R] plus tails,
        // composite Simpson at high resolution (different splitting and rule).
        auto gamma = [&](double x) { return bath.gamma(x); };
        auto simpson = [](const std::function<double(double)>& f, double a, double b, int n) {
            if (n % 2) ++n;
            const double h = (b - a) / n;
            double acc = f(a) + f(b);
            for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
            return acc * h / 3.0;
        };
        const double r = 30.0;
        const double g_w = gamma(w);
        // split at the |omega| kink of gamma (omega' = 0) and at the singular point
        auto sub = [&](double x) { return x == w ? 0.0 : (gamma(x) - g_w) / (w - x); };
        double oracle = simpson(sub, w - r, 0.0, 200001) + simpson(sub, 0.0, w, 100001) +
                        simpson(sub, w, w + r, 200001);
        oracle += simpson([&](double x) { return gamma(x) / (w - x); }, w + r, w + r + 2200.0,
                          400001);
        oracle += simpson([&](double x) { return gamma(x) / (w - x); }, w - r - 2200.0, w - r,
                          400001);
        REQUIRE(value == Catch::Approx(oracle).margin(1e-6 * std::max(1.0, std::abs(oracle))));
    }
    SECTION("S(delta) - S(-delta) is finite and cached") {
        auto bath = BathSpec::ohmic_exponential_cutoff(1.0);
        const double d1 = bath.lamb_shift(0.7).value;
        const double d2 = bath.lamb_shift(0.7).value;  // cache hit
        REQUIRE(d1 == d2);
        REQUIRE(std::isfinite(bath.lamb_shift(0.7).value - bath.lamb_shift(-0.7).value));
    }
}

TEST_CASE("davies generator") {
    auto bath = BathSpec::ohmic_exponential_cutoff(1.0);
    SECTION("Gibbs state is stationary") {
        for (double s : {0.1, 0.5, 0.9}) {
            const Operator h = example2_hamiltonian(s);
            for (const Operator a : {Operator(0.01 * sigma_y()), Operator(0.01 * sigma_z())}) {
                const Superop l = davies_generator(h, a, bath);
                const DensityMatrix rho_g = gibbs_state(h, bath.beta());
                REQUIRE((l * vectorize(rho_g.rho)).norm() < 1e-10);
            }
        }
    }
    SECTION("zero rates reduce to the bare Hamiltonian part") {
        auto silent = BathSpec::flat(1.0, 0.0, /*lamb_shift_enabled=*/false);
        const Operator h = example2_hamiltonian(0.3);
        REQUIRE((davies_generator(h, Operator(0.01 * sigma_y()), silent) -
                 hamiltonian_superop(h)).norm() < 1e-14);
    }
    SECTION("dissipator, K and K_LS all commute at equal time") {
        for (double s : {0.2, 0.8}) {
            const Operator h = example2_hamiltonian(s);
            auto parts = davies_parts(h, Operator(0.01 * sigma_z()), bath);
            const Superop coherent = parts.hamiltonian + parts.lamb_shift;
            const Superop comm = coherent * parts.dissipator - parts.dissipator * coherent;
            REQUIRE(comm.norm() <= 1e-9 * parts.dissipator.norm());
        }
    }
    SECTION("spectrum matches the closed form, both couplings") {
        for (double s : {0.15, 0.5, 0.85}) {
            const Operator h = example2_hamiltonian(s);
            for (const Operator a : {Operator(0.01 * sigma_y()), Operator(0.01 * sigma_z())}) {
                const Superop l = davies_generator(h, a, bath);
                const SpectralData sd = decompose(l);
                const auto closed = example2_spectrum_closed_form(h, a, bath);
                REQUIRE(worst_relative_eigenvalue_error(closed, sd, sd.scale) < 1e-8);
            }
        }
    }
    SECTION("degenerate Hamiltonian is rejected by the closed form") {
        REQUIRE_THROWS_AS(
            example2_spectrum_closed_form(Operator::Zero(2, 2), Operator(sigma_y()), bath),
            DegenerateHamiltonian);
    }
}

TEST_CASE("gibbs state") {
    SECTION("infinite temperature is maximally mixed") {
        auto rho = gibbs_state(pauli_hamiltonian(0.3, -0.2, 0.7), 0.0);
        REQUIRE((rho.rho - Operator::Identity(2, 2) / 2.0).norm() < 1e-14);
    }
    SECTION("sigma_z at beta = 1") {
        auto rho = gibbs_state(sigma_z(), 1.0);
        const double z = std::exp(-1.0) + std::exp(1.0);
        REQUIRE(rho.rho(0, 0).real() == Catch::Approx(std::exp(-1.0) / z).epsilon(1e-12));
        REQUIRE(rho.rho(1, 1).real() == Catch::Approx(std::exp(1.0) / z).epsilon(1e-12));
        REQUIRE(std::abs(rho.rho(0, 1)) < 1e-15);
    }
    SECTION("matches the Davies kernel state at s = 1 (kernel-vector oracle)") {
        auto bath = BathSpec::ohmic_exponential_cutoff(1.0);
        const Operator h = example2_hamiltonian(1.0);  // omega_z = -1/2
        const Superop l = davies_generator(h, Operator(0.01 * sigma_y()), bath);
        const SpectralData sd = decompose(l);
        REQUIRE(sd.zero_multiplicity() == 1);
        const Operator kernel_state =
            devectorize(sd.zero_projector() * vectorize(Operator(Operator::Identity(2, 2) / 2.0)));
        REQUIRE((kernel_state - gibbs_state(h, 1.0).rho).norm() < 1e-9);
    }
}

TEST_CASE("detailed balance certificate") {
    auto bath = BathSpec::ohmic_exponential_cutoff(1.0);
    SECTION("Davies generators are stationary and normal in the Gibbs inner product") {
        for (double s : {0.2, 0.6}) {
            const Operator h = example2_hamiltonian(s);
            const Superop l = davies_generator(h, Operator(0.01 * sigma_y()), bath);
            auto rep = detailed_balance_certificate(l, gibbs_state(h, bath.beta()));
            REQUIRE(rep.stationarity <= 1e-9);
            REQUIRE(rep.normality_defect <= 1e-9);
        }
    }
    SECTION("amplitude damping with a detuned Hamiltonian is not KMS-normal") {
        const Superop l = example1_family()(0.5);
        const Operator kernel =
            devectorize(zero_projector(l) * vectorize(Operator(Operator::Identity(2, 2) / 2.0)));
        auto rep = detailed_balance_certificate(l, DensityMatrix{kernel});
        REQUIRE(rep.stationarity <= 1e-9);
        REQUIRE(rep.normality_defect > 1e-3);  // regression value, measured
    }
    SECTION("Hamiltonian part alone with its own Gibbs weighting") {
        const Operator h = pauli_hamiltonian(0.0, 0.0, 0.8);
        const Superop k = hamiltonian_superop(h);
        auto rep = detailed_balance_certificate(k, gibbs_state(h, 1.3));
        REQUIRE(rep.stationarity <= 1e-12);
        REQUIRE(rep.normality_defect <= 1e-12);
    }
    SECTION("singular Gibbs weight is rejected") {
        Operator rho = Operator::Zero(2, 2);
        rho(0, 0) = 1.0;
        REQUIRE_THROWS_AS(
            detailed_balance_certificate(hamiltonian_superop(sigma_z()), DensityMatrix{rho}),
            SingularGibbs);
    }
}
