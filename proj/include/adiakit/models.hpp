#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "adiakit/davies.hpp"
#include "adiakit/family.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/types.hpp"

#include "json.hpp"

namespace adiakit {

// Scalar schedule with an analytic derivative.
struct Schedule {
    std::function<double(double)> value;
    std::function<double(double)> derivative;

    static Schedule polynomial(std::vector<double> coeffs) {
        auto eval = [coeffs](double s) {
            double acc = 0;
            for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * s + *it;
            return acc;
        };
        auto deriv = [coeffs](double s) {
            double acc = 0;
            for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k)
                acc = acc * s + k * coeffs[k];
            return acc;
        };
        return {eval, deriv};
    }

    static Schedule constant(double c) {
        return {[c](double) { return c; }, [](double) { return 0.0; }};
    }
};

// Time-dependent amplitude damping: H(s) = m(s).sigma with a single Lindblad
// operator sqrt(2 gamma) sigma_minus. Defaults reproduce the gapped worked example
// (m_x = 1 - s, m_y = 0, m_z = s/150, gamma = 1/2).
inline LiouvillianFamily example1_family(Schedule mx, Schedule my, Schedule mz, double gamma,
                                         nlohmann::json params = nlohmann::json::object()) {
    const Operator lop = std::sqrt(2.0 * gamma) * sigma_minus();
    auto eval = [mx, my, mz, lop](double s) {
        return HamiltonianData{pauli_hamiltonian(mx.value(s), my.value(s), mz.value(s)), {lop}};
    };
    auto deriv = [mx, my, mz](double s) {
        return HamiltonianData{
            pauli_hamiltonian(mx.derivative(s), my.derivative(s), mz.derivative(s)),
            {Operator::Zero(2, 2)}};
    };
    params["gamma"] = gamma;
    return LiouvillianFamily::from_hilbert("example1", eval, deriv, std::move(params));
}

inline LiouvillianFamily example1_family(double gamma = 0.5) {
    nlohmann::json params{{"mx", {1.0, -1.0}}, {"my", {0.0}}, {"mz", {0.0, 1.0 / 150.0}}};
    return example1_family(Schedule::polynomial({1.0, -1.0}), Schedule::constant(0.0),
                           Schedule::polynomial({0.0, 1.0 / 150.0}), gamma, std::move(params));
}

// Unique steady state of the amplitude-damping generator, in the sigma_z basis:
//   rho = (1/c) [ m^2 - mz^2,            -m_-(2 mz + i gamma) ]
//               [ -m_+(2 mz - i gamma),   m^2 + 3 mz^2 + gamma^2 ]
// with c = 2(m^2 + mz^2) + gamma^2 and m_+- = mx +- i my.
inline DensityMatrix example1_iss_closed_form(double mx, double my, double mz, double gamma) {
    const double m2 = mx * mx + my * my + mz * mz;
    const double c = 2.0 * (m2 + mz * mz) + gamma * gamma;
    if (c <= 0) throw Error("example1_iss_closed_form: vanishing normalization");
    const Complex m_minus(mx, -my), m_plus(mx, my);
    Operator rho(2, 2);
    rho(0, 0) = m2 - mz * mz;
    rho(0, 1) = -m_minus * Complex(2.0 * mz, gamma);
    rho(1, 0) = -m_plus * Complex(2.0 * mz, -gamma);
    rho(1, 1) = m2 + 3.0 * mz * mz + gamma * gamma;
    return DensityMatrix{rho / c};
}

enum class CouplingAxis { Y, Z };

// Qubit in a thermal bath: H(s) = omega_x (1-s) sigma_x + omega_z s sigma_z with
// coupling A = g sigma_{y,z}; the generator at each s is the Davies construction.
inline LiouvillianFamily example2_family(double omega_x = -0.5, double omega_z = -0.5,
                                         double g = 1e-2, CouplingAxis axis = CouplingAxis::Y,
                                         BathSpec bath = BathSpec::ohmic_exponential_cutoff(1.0)) {
    const Operator a = g * (axis == CouplingAxis::Y ? sigma_y() : sigma_z());
    auto hamiltonian = [omega_x, omega_z](double s) {
        return Operator(omega_x * (1.0 - s) * sigma_x() + omega_z * s * sigma_z());
    };
    auto eval = [hamiltonian, a, bath](double s) {
        return davies_generator(hamiltonian(s), a, bath);
    };
    nlohmann::json params{{"omega_x", omega_x},
                          {"omega_z", omega_z},
                          {"g", g},
                          {"coupling", axis == CouplingAxis::Y ? "y" : "z"},
                          {"bath", bath.name()},
                          {"beta", bath.beta()},
                          {"lamb_shift", bath.lamb_shift_enabled()}};
    auto fam = LiouvillianFamily::from_superop("example2", 4, eval, nullptr, std::move(params));
    fam.set_hamiltonian(hamiltonian, [omega_x, omega_z](double) {
        return Operator(-omega_x * sigma_x() + omega_z * sigma_z());
    });
    // the transported steady state of a thermal generator is the instantaneous
    // Gibbs state; the closed form also extends through an endpoint crossing,
    // where the kernel itself momentarily degenerates
    const double beta = bath.beta();
    fam.set_ideal_state(
        [hamiltonian, beta](double s) { return gibbs_state(hamiltonian(s), beta).rho; });
    return fam;
}

// L(s) = e^{sK} L0 e^{-sK} with anti-Hermitian K; L' = K L - L K analytically.
inline LiouvillianFamily unitary_family(const Superop& l0, const Superop& k) {
    if (l0.rows() != l0.cols() || k.rows() != k.cols() || l0.rows() != k.rows())
        throw DimensionMismatch("unitary_family: L0 and K must be square and equal-sized");
    if ((k + k.adjoint()).norm() > 1e-12 * std::max(1.0, k.norm()))
        throw NonAntiHermitianK("unitary_family: K is not anti-Hermitian");
    const int n = static_cast<int>(l0.rows());
    const int d = static_cast<int>(std::llround(std::sqrt(double(n))));
    if (d * d == n && trace_annihilation_defect(l0) > 1e-10 * std::max(1.0, l0.norm()))
        throw Error("unitary_family: L0 does not annihilate the trace functional");
    auto conj = [l0, k](double s) {
        const Superop u = superop_exp(Superop(s * k));
        return Superop(u * l0 * u.adjoint());
    };
    auto deriv = [conj, k](double s) {
        const Superop l = conj(s);
        return Superop(k * l - l * k);
    };
    return LiouvillianFamily::from_superop("unitary", n, conj, deriv);
}

struct SyntheticCrossingSpec {
    double alpha = 2.0;
    double s_star = 1.0;
    double v = 1.0;       // gap prefactor: Delta(s) = v |s - s_star|^alpha near the crossing
    double theta0 = 0.8;  // rotation rate of the kernel direction
    bool coupled = true;  // rotate kernel into the crossing mode; false: into a fast mode
    double fast_rate_1 = 1.0;
    double fast_rate_2 = 1.5;
};

// Direct-sum schedule with a controlled crossing: M(s) = R(s) D(s) R(s)^T where
// D = diag(0, -v|s-s*|^alpha, -c1, -c2) and R rotates the kernel axis at rate theta0
// into the crossing mode (coupled) or into a gapped fast mode (decoupled control).
// Not a Lindbladian; a test harness for the crossing exponent law.
inline LiouvillianFamily synthetic_crossing_family(const SyntheticCrossingSpec& spec) {
    if (spec.alpha <= 0) throw Error("synthetic_crossing_family: alpha must be positive");
    const int mix = spec.coupled ? 1 : 2;  // index of the mode the kernel rotates into
    auto rotation = [mix](double theta) {
        Superop r = Superop::Identity(4, 4);
        r(0, 0) = std::cos(theta);
        r(mix, mix) = std::cos(theta);
        r(0, mix) = -std::sin(theta);
        r(mix, 0) = std::sin(theta);
        return r;
    };
    auto rates = [spec](double s) {
        Eigen::Vector4d d;
        d << 0.0, -spec.v * std::pow(std::abs(s - spec.s_star), spec.alpha), -spec.fast_rate_1,
            -spec.fast_rate_2;
        return d;
    };
    auto eval = [rotation, rates, spec](double s) {
        const Superop r = rotation(spec.theta0 * s);
        return Superop(r * rates(s).cast<Complex>().asDiagonal() * r.transpose());
    };
    auto deriv = [rotation, rates, eval, spec](double s) {
        const Superop m = eval(s);
        Superop g = Superop::Zero(4, 4);
        g(0, spec.coupled ? 1 : 2) = -1;
        g(spec.coupled ? 1 : 2, 0) = 1;
        Eigen::Vector4d dr = Eigen::Vector4d::Zero();
        const double x = s - spec.s_star;
        dr(1) = -spec.v * spec.alpha * std::pow(std::abs(x), spec.alpha - 1.0) *
                (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
        const Superop r = rotation(spec.theta0 * s);
        return Superop(spec.theta0 * (g * m - m * g) +
                       r * dr.cast<Complex>().asDiagonal() * r.transpose());
    };
    nlohmann::json params{{"alpha", spec.alpha},   {"s_star", spec.s_star},
                          {"v", spec.v},           {"theta0", spec.theta0},
                          {"coupled", spec.coupled}};
    auto fam = LiouvillianFamily::from_superop("synthetic_crossing", 4, eval, deriv,
                                               std::move(params));
    // Parallel transport of the rotating kernel line R(s) e0: the product of
    // orthogonal rank-one projectors telescopes with unit weight, so the ideal
    // state is exactly devec(R(s) e0).
    fam.set_ideal_state([rotation, spec](double s) {
        Eigen::Vector4cd e0 = Eigen::Vector4cd::Zero();
        e0(0) = 1;
        return devectorize(rotation(spec.theta0 * s) * e0);
    });
    return fam;
}

enum class ClosedSystemMode { Superoperator, ShiftedGenerator };

// Closed-system schedules. Superoperator mode uses K(s) = -i[H(s), .] with its
// >= d dimensional kernel; ShiftedGenerator mode uses the d-dimensional
// anti-Hermitian generator -i(H(s) - E0(s)) acting on state vectors.
inline LiouvillianFamily closed_system_family(
    std::function<Operator(double)> h, std::function<Operator(double)> dh = nullptr,
    ClosedSystemMode mode = ClosedSystemMode::Superoperator) {
    if (mode == ClosedSystemMode::Superoperator) {
        auto eval = [h](double s) { return HamiltonianData{h(s), {}}; };
        LiouvillianFamily::HilbertFn deriv;
        if (dh) deriv = [dh](double s) { return HamiltonianData{dh(s), {}}; };
        return LiouvillianFamily::from_hilbert("closed_system", eval, deriv);
    }
    const int d = static_cast<int>(h(0.0).rows());
    auto eval = [h](double s) {
        const Operator hs = h(s);
        Eigen::SelfAdjointEigenSolver<Operator> es(hs);
        const double e0 = es.eigenvalues().minCoeff();
        return Superop(Complex(0, -1) *
                       (hs - e0 * Operator::Identity(hs.rows(), hs.cols())));
    };
    auto fam = LiouvillianFamily::from_superop("closed_system_shifted", d, eval);
    fam.set_hamiltonian(h, dh);
    return fam;
}

inline LiouvillianFamily landau_zener_family(double a = 1.0, double b = 0.25,
                                             ClosedSystemMode mode =
                                                 ClosedSystemMode::Superoperator) {
    auto h = [a, b](double s) {
        return Operator(a * (2.0 * s - 1.0) * sigma_z() + b * sigma_x());
    };
    auto dh = [a](double) { return Operator(2.0 * a * sigma_z()); };
    return closed_system_family(h, dh, mode);
}

// Freeze another family at a fixed point of its schedule.
inline LiouvillianFamily constant_family(const LiouvillianFamily& base, double at) {
    const Superop frozen = base(at);
    const int n = static_cast<int>(frozen.rows());
    auto fam = LiouvillianFamily::from_superop(
        base.name() + "-constant", n, [frozen](double) { return frozen; },
        [n](double) { return Superop(Superop::Zero(n, n)); },
        nlohmann::json{{"base", base.name()}, {"at", at}});
    if (base.has_hamiltonian()) {
        const Operator h0 = base.hamiltonian(at);
        fam.set_hamiltonian([h0](double) { return h0; },
                            [h0](double) { return Operator(Operator::Zero(h0.rows(), h0.cols())); });
    }
    return fam;
}

namespace detail {

inline BathSpec bath_from_json(const nlohmann::json& j) {
    const std::string type = j.value("type", "ohmic-exp-cutoff");
    const double beta = j.value("beta", 1.0);
    if (type == "ohmic-exp-cutoff")
        return BathSpec::ohmic_exponential_cutoff(beta, j.value("cutoff", 8.0 * M_PI),
                                                  j.value("prefactor", 2.0 * M_PI),
                                                  j.value("lamb_shift", true));
    // the hard window edge of the flat density breaks the Lamb-shift quadrature,
    // so the shift defaults off here
    if (type == "flat") return BathSpec::flat(beta, j.value("level", 1.0),
                                              j.value("lamb_shift", false));
    if (type == "tabulated") {
        std::vector<std::pair<double, double>> samples;
        for (const auto& row : j.at("samples"))
            samples.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
        return BathSpec::tabulated(beta, std::move(samples), j.value("lamb_shift", false));
    }
    throw ConfigError("unknown bath type '" + type + "'");
}

inline std::vector<double> coeffs_from_json(const nlohmann::json& j, const char* key,
                                            std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<std::vector<double>>();
}

}  // namespace detail

// Config-driven construction: {"name": ..., parameters...}. Unknown names and
// malformed parameter records raise ConfigError.
inline LiouvillianFamily family_from_json(const nlohmann::json& j) {
    if (!j.contains("name")) throw ConfigError("family record is missing 'name'");
    const std::string name = j.at("name").get<std::string>();
    LiouvillianFamily fam;
    try {
        if (name == "example1") {
            auto mx = detail::coeffs_from_json(j, "mx", {1.0, -1.0});
            auto my = detail::coeffs_from_json(j, "my", {0.0});
            auto mz = detail::coeffs_from_json(j, "mz", {0.0, 1.0 / 150.0});
            nlohmann::json params{{"mx", mx}, {"my", my}, {"mz", mz}};
            fam = example1_family(Schedule::polynomial(mx), Schedule::polynomial(my),
                                  Schedule::polynomial(mz), j.value("gamma", 0.5), params);
        } else if (name == "example2") {
            const std::string axis = j.value("coupling", "y");
            if (axis != "y" && axis != "z") throw ConfigError("coupling must be 'y' or 'z'");
            fam = example2_family(j.value("omega_x", -0.5), j.value("omega_z", -0.5),
                                  j.value("g", 1e-2),
                                  axis == "y" ? CouplingAxis::Y : CouplingAxis::Z,
                                  detail::bath_from_json(j.value("bath", nlohmann::json::object())));
        } else if (name == "synthetic_crossing") {
            SyntheticCrossingSpec spec;
            spec.alpha = j.value("alpha", 2.0);
            spec.s_star = j.value("s_star", 1.0);
            spec.v = j.value("v", 1.0);
            spec.theta0 = j.value("theta0", 0.8);
            spec.coupled = j.value("coupled", true);
            fam = synthetic_crossing_family(spec);
        } else if (name == "unitary") {
            const auto field = j.value("k_field", std::vector<double>{0.0, 0.3, 0.4});
            if (field.size() != 3) throw ConfigError("k_field must have 3 entries");
            const Superop k =
                hamiltonian_superop(pauli_hamiltonian(field[0], field[1], field[2]));
            const Superop l0 = example1_family(j.value("gamma", 0.5))(j.value("s0", 0.0));
            fam = unitary_family(l0, k);
        } else if (name == "closed_system") {
            fam = landau_zener_family(j.value("a", 1.0), j.value("b", 0.25),
                                      j.value("shifted", false)
                                          ? ClosedSystemMode::ShiftedGenerator
                                          : ClosedSystemMode::Superoperator);
        } else if (name == "constant") {
            fam = constant_family(family_from_json(j.at("base")), j.value("at", 0.0));
        } else {
            throw ConfigError("unknown family '" + name + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("family '" + name + "': " + e.what());
    }
    if (j.contains("grid_cache")) fam = fam.with_grid_cache(j.at("grid_cache").get<int>());
    return fam;
}

}  // namespace adiakit
