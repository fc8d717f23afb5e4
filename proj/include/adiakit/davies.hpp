#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "adiakit/numerics.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/types.hpp"

namespace adiakit {

struct LambShiftResult {
    double value = 0;
    double error_estimate = 0;
};

struct PvQuadratureConfig {
    double radius = 0;      // half-width of the symmetric window; 0 = 2x cutoff scale
    double tail_span = 0;   // length of each tail; 0 = until the integrand is negligible
    int panels = 32;        // Gauss-Legendre panels over the symmetric window
    int nodes = 15;
    double rel_tol = 1e-8;
};

// Bath spectral data: inverse temperature, rate function gamma(omega) >= 0, and the
// principal-value Lamb-shift integral S(omega) = P int gamma(w')/(omega - w') dw'.
// Thermal baths satisfy the KMS symmetry gamma(-w) = e^{-beta w} gamma(w); the
// constructor does not force it, verify_kms reports the defect.
class BathSpec {
public:
    BathSpec() = default;

    BathSpec(std::string name, double beta, std::function<double(double)> gamma_fn,
             double cutoff_scale, bool lamb_shift_enabled = true, PvQuadratureConfig pv = {})
        : name_(std::move(name)),
          beta_(beta),
          gamma_(std::move(gamma_fn)),
          cutoff_scale_(cutoff_scale),
          lamb_shift_enabled_(lamb_shift_enabled),
          pv_(pv),
          cache_(std::make_shared<Cache>()) {}

    // Fig.-2-style Ohmic bath gamma(w) = pref * w * e^{-|w|/cutoff} / (1 - e^{-beta w}),
    // continuously extended by gamma(0) = pref/beta.
    static BathSpec ohmic_exponential_cutoff(double beta, double cutoff = 8.0 * M_PI,
                                             double prefactor = 2.0 * M_PI,
                                             bool lamb_shift_enabled = true,
                                             PvQuadratureConfig pv = {}) {
        if (beta <= 0) throw Error("ohmic_exponential_cutoff: beta must be positive");
        auto gamma_fn = [beta, cutoff, prefactor](double w) {
            const double envelope = std::exp(-std::abs(w) / cutoff);
            const double x = beta * w;
            if (std::abs(x) < 1e-5) {
                // w/(1 - e^{-beta w}) = (1/beta)(1 + x/2 + x^2/12 + O(x^4))
                return prefactor / beta * envelope * (1.0 + 0.5 * x + x * x / 12.0);
            }
            return prefactor * w * envelope / (-std::expm1(-x));
        };
        return BathSpec("ohmic-exp-cutoff", beta, gamma_fn, cutoff, lamb_shift_enabled, pv);
    }

    static BathSpec flat(double beta, double level, bool lamb_shift_enabled = false,
                         double window = 10.0) {
        // gamma constant on [-window, window], zero outside so the Lamb shift exists.
        auto gamma_fn = [level, window](double w) {
            return std::abs(w) <= window ? level : 0.0;
        };
        return BathSpec("flat", beta, gamma_fn, window, lamb_shift_enabled);
    }

    static BathSpec tabulated(double beta, std::vector<std::pair<double, double>> samples,
                              bool lamb_shift_enabled = false) {
        std::sort(samples.begin(), samples.end());
        if (samples.size() < 2) throw Error("tabulated bath needs at least two samples");
        const double span = std::max(std::abs(samples.front().first),
                                     std::abs(samples.back().first));
        auto gamma_fn = [samples](double w) -> double {
            if (w <= samples.front().first) return samples.front().second;
            if (w >= samples.back().first) return samples.back().second;
            auto hi = std::upper_bound(samples.begin(), samples.end(),
                                       std::make_pair(w, std::numeric_limits<double>::max()));
            auto lo = hi - 1;
            const double t = (w - lo->first) / (hi->first - lo->first);
            return (1 - t) * lo->second + t * hi->second;
        };
        return BathSpec("tabulated", beta, gamma_fn, span, lamb_shift_enabled);
    }

    const std::string& name() const { return name_; }
    double beta() const { return beta_; }
    bool lamb_shift_enabled() const { return lamb_shift_enabled_; }
    double cutoff_scale() const { return cutoff_scale_; }
    const PvQuadratureConfig& pv_config() const { return pv_; }

    double gamma(double w) const {
        const double g = gamma_(w);
        if (!(g >= 0) || !std::isfinite(g))
            throw Error("BathSpec: gamma(" + std::to_string(w) + ") = " + std::to_string(g));
        return g;
    }

    // max over sampled w of |gamma(-w) - e^{-beta w} gamma(w)| / max(gamma(w), floor)
    double kms_defect(const std::vector<double>& ws) const {
        double worst = 0;
        for (double w : ws) {
            const double g = gamma(w);
            const double viol = std::abs(gamma(-w) - std::exp(-beta_ * w) * g);
            worst = std::max(worst, viol / std::max(g, 1e-300));
        }
        return worst;
    }

    // S(omega), cached per omega. Throws QuadratureFailure when the two-resolution
    // error estimate exceeds rel_tol * max(1, |S|).
    LambShiftResult lamb_shift(double w) const {
        if (!lamb_shift_enabled_) return {0.0, 0.0};
        {
            std::lock_guard<std::mutex> lock(cache_->mutex);
            auto it = cache_->values.find(w);
            if (it != cache_->values.end()) return it->second;
        }
        const double coarse = pv_integral(w, pv_.panels);
        const double fine = pv_integral(w, 2 * pv_.panels);
        LambShiftResult res{fine, std::abs(fine - coarse)};
        if (res.error_estimate > pv_.rel_tol * std::max(1.0, std::abs(fine)))
            throw QuadratureFailure("lamb_shift(" + std::to_string(w) + "): error estimate " +
                                    std::to_string(res.error_estimate));
        std::lock_guard<std::mutex> lock(cache_->mutex);
        cache_->values.emplace(w, res);
        return res;
    }

private:
    struct Cache {
        std::mutex mutex;
        std::map<double, LambShiftResult> values;
    };

    // Symmetric singularity subtraction: over |w' - w| <= R the principal value
    // reduces to int_0^R [gamma(w-u) - gamma(w+u)]/u du (smooth; -> -2 gamma'(w) at 0),
    // plus ordinary tail integrals. Panels are split at gamma's |w| kink.
    double pv_integral(double w, int panels) const {
        const double r = pv_.radius > 0 ? pv_.radius : 2.0 * cutoff_scale_;
        auto sym = [&](double u) { return (gamma_(w - u) - gamma_(w + u)) / u; };
        double total = 0;
        const double kink = std::abs(w);  // u where w -+ u crosses zero
        if (kink > 1e-14 && kink < r) {
            const int p1 = std::max(2, int(panels * kink / r) + 1);
            total += gl_integrate(sym, 0.0, kink, p1, pv_.nodes);
            total += gl_integrate(sym, kink, r, panels, pv_.nodes);
        } else {
            total += gl_integrate(sym, 0.0, r, panels, pv_.nodes);
        }
        // tails with geometrically graded panels
        auto tail = [&](double a, double b) {
            auto f = [&](double wp) { return gamma_(wp) / (w - wp); };
            double acc = 0;
            double lo = a;
            double width = (b - a) / 64.0;
            while (lo < b - 1e-12) {
                const double hi = std::min(b, lo + width);
                acc += gl_integrate(f, lo, hi, 1, pv_.nodes);
                lo = hi;
                width *= 1.5;
            }
            return acc;
        };
        const double span = pv_.tail_span > 0 ? pv_.tail_span : 80.0 * cutoff_scale_;
        // split a tail at w' = 0 if gamma's kink lies inside it
        auto tail_split = [&](double a, double b) {
            if (a < 0 && b > 0) return tail(a, 0.0) + tail(0.0, b);
            return tail(a, b);
        };
        total += tail_split(w + r, w + r + span);
        total += tail_split(w - r - span, w - r);
        return total;
    }

    std::string name_;
    double beta_ = 1.0;
    std::function<double(double)> gamma_;
    double cutoff_scale_ = 1.0;
    bool lamb_shift_enabled_ = true;
    PvQuadratureConfig pv_;
    std::shared_ptr<Cache> cache_;
};

inline LambShiftResult lamb_shift_coefficient(const BathSpec& bath, double w) {
    return bath.lamb_shift(w);
}

struct BohrDecomposition {
    std::vector<double> frequencies;   // ascending
    std::vector<Operator> components;  // A_w = sum_{E_b - E_a = w} Pi_a A Pi_b
    double clustering_tol = 0;

    Operator component(double w, double tol) const {
        for (std::size_t i = 0; i < frequencies.size(); ++i)
            if (std::abs(frequencies[i] - w) <= tol) return components[i];
        const int d = components.empty() ? 0 : static_cast<int>(components.front().rows());
        return Operator::Zero(d, d);
    }
};

inline BohrDecomposition bohr_decompose(const Operator& h, const Operator& a, double tol = 0) {
    require_hermitian(h, "bohr_decompose");
    const int d = static_cast<int>(h.rows());
    Eigen::SelfAdjointEigenSolver<Operator> es(h);
    const auto& evals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    if (tol <= 0) tol = 1e-9 * std::max(evals.cwiseAbs().maxCoeff(), 1e-300);

    std::map<long long, std::pair<double, Operator>> clusters;  // key: round(w / tol)
    for (int ai = 0; ai < d; ++ai)
        for (int bi = 0; bi < d; ++bi) {
            const double w = evals(bi) - evals(ai);
            const Operator term = vecs.col(ai) * (vecs.col(ai).adjoint() * a * vecs.col(bi)) *
                                  vecs.col(bi).adjoint();
            const long long key = std::llround(w / tol);
            auto it = clusters.find(key);
            if (it == clusters.end())
                clusters.emplace(key, std::make_pair(w, term));
            else
                it->second.second += term;
        }
    BohrDecomposition out;
    out.clustering_tol = tol;
    const double a_scale = std::max(max_abs(a), 1e-300);
    for (auto& [key, entry] : clusters) {
        if (entry.second.norm() <= 1e-14 * a_scale) continue;  // empty frequency line
        out.frequencies.push_back(entry.first);
        out.components.push_back(std::move(entry.second));
    }
    return out;
}

struct DaviesParts {
    Superop total;        // K + K_LS + dissipator
    Superop hamiltonian;  // K = -i[H, .]
    Superop lamb_shift;   // K_LS = -i[H_LS, .]
    Superop dissipator;
    Operator h_ls;
    BohrDecomposition bohr;
};

inline DaviesParts davies_parts(const Operator& h, const Operator& a, const BathSpec& bath) {
    DaviesParts parts;
    parts.bohr = bohr_decompose(h, a);
    const int d = static_cast<int>(h.rows());
    parts.hamiltonian = hamiltonian_superop(h);
    parts.dissipator = Superop::Zero(d * d, d * d);
    parts.h_ls = Operator::Zero(d, d);
    for (std::size_t i = 0; i < parts.bohr.frequencies.size(); ++i) {
        const double w = parts.bohr.frequencies[i];
        const Operator& aw = parts.bohr.components[i];
        parts.dissipator += bath.gamma(w) * dissipator_term(aw, aw);
        if (bath.lamb_shift_enabled()) parts.h_ls += bath.lamb_shift(w).value * (aw.adjoint() * aw);
    }
    parts.h_ls = ((parts.h_ls + parts.h_ls.adjoint()) / 2.0).eval();
    parts.lamb_shift = hamiltonian_superop(parts.h_ls);
    parts.total = parts.hamiltonian + parts.lamb_shift + parts.dissipator;
    return parts;
}

inline Superop davies_generator(const Operator& h, const Operator& a, const BathSpec& bath) {
    return davies_parts(h, a, bath).total;
}

inline DensityMatrix gibbs_state(const Operator& h, double beta) {
    require_hermitian(h, "gibbs_state");
    Eigen::SelfAdjointEigenSolver<Operator> es(h);
    const auto& evals = es.eigenvalues();
    const double e_min = evals.minCoeff();
    Eigen::VectorXd weights = (-beta * (evals.array() - e_min)).exp();
    weights /= weights.sum();
    Operator rho = es.eigenvectors() * weights.cast<Complex>().asDiagonal() *
                   es.eigenvectors().adjoint();
    return DensityMatrix{(rho + rho.adjoint()) / 2.0};
}

// Closed-form qubit Davies spectrum {0, lambda_2, -Gamma +- i mu} in terms of the
// coupling matrix elements in the instantaneous eigenbasis:
//   lambda_2 = -gamma(delta) |A01|^2 (1 + e^{-beta delta})
//   2 Gamma  = gamma(0) (A00 - A11)^2 + gamma(delta) |A01|^2 (1 + e^{-beta delta})
//   mu       = delta - S(0)(A00^2 - A11^2) + |A01|^2 [S(delta) - S(-delta)]
inline std::array<Complex, 4> example2_spectrum_closed_form(const Operator& h, const Operator& a,
                                                            const BathSpec& bath,
                                                            double degeneracy_tol = 1e-12) {
    if (h.rows() != 2) throw DimensionMismatch("example2_spectrum_closed_form: d must be 2");
    require_hermitian(h, "example2_spectrum_closed_form");
    Eigen::SelfAdjointEigenSolver<Operator> es(h);
    const double delta = es.eigenvalues()(1) - es.eigenvalues()(0);
    const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    if (delta < degeneracy_tol * scale)
        throw DegenerateHamiltonian("example2_spectrum_closed_form: Hamiltonian gap " +
                                    std::to_string(delta));
    const Operator a_eig = es.eigenvectors().adjoint() * a * es.eigenvectors();
    const double a00 = a_eig(0, 0).real();
    const double a11 = a_eig(1, 1).real();
    const double a01_sq = std::norm(a_eig(0, 1));
    const double boltz = std::exp(-bath.beta() * delta);

    const double lambda2 = -bath.gamma(delta) * a01_sq * (1.0 + boltz);
    const double two_gamma =
        bath.gamma(0.0) * (a00 - a11) * (a00 - a11) + bath.gamma(delta) * a01_sq * (1.0 + boltz);
    double mu = delta;
    if (bath.lamb_shift_enabled()) {
        const double s0 = bath.lamb_shift(0.0).value;
        const double sp = bath.lamb_shift(delta).value;
        const double sm = bath.lamb_shift(-delta).value;
        mu += -s0 * (a00 * a00 - a11 * a11) + a01_sq * (sp - sm);
    }
    return {Complex(0, 0), Complex(lambda2, 0), Complex(-two_gamma / 2.0, mu),
            Complex(-two_gamma / 2.0, -mu)};
}

struct DetailedBalanceReport {
    double stationarity = 0;      // ||L vec(rho_G)||_2
    double normality_defect = 0;  // ||L L* - L* L||_F, * the rho_G-weighted adjoint
};

// The normality test applies the rho_G-weighted scalar product
// <X, Y>_G = Tr[rho_G X^dag Y] (Gram matrix rho_G^T kron identity) to the
// Heisenberg-picture generator, the Hilbert-Schmidt dual of L. Detailed balance
// with KMS rates makes that dual's dissipative part G-self-adjoint and the whole
// dual normal; the Schrodinger-picture generator taken directly in the same
// product retains a commutator of order ||D||^2.
inline DetailedBalanceReport detailed_balance_certificate(const Superop& l,
                                                          const DensityMatrix& rho_g) {
    const int d = rho_g.dim();
    if (l.rows() != d * d) throw DimensionMismatch("detailed_balance_certificate");
    Eigen::SelfAdjointEigenSolver<Operator> es((rho_g.rho + rho_g.rho.adjoint()) / 2.0);
    if (es.eigenvalues().minCoeff() < 1e-14)
        throw SingularGibbs("detailed_balance_certificate: Gibbs weight below 1e-14");
    const Operator id = Operator::Identity(d, d);
    const Superop metric = detail::kron(rho_g.rho.transpose(), id);
    const Superop metric_inv =
        detail::kron(Operator(rho_g.rho.transpose().inverse()), id);
    const Superop dual = l.adjoint();
    const Superop dual_star = metric_inv * dual.adjoint() * metric;

    DetailedBalanceReport rep;
    rep.stationarity = (l * vectorize(rho_g.rho)).norm();
    rep.normality_defect = (dual * dual_star - dual_star * dual).norm();
    return rep;
}

}  // namespace adiakit
