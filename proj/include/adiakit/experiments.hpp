#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adiakit/bounds.hpp"
#include "adiakit/davies.hpp"
#include "adiakit/models.hpp"
#include "adiakit/numerics.hpp"
#include "adiakit/propagate.hpp"
#include "adiakit/spectral.hpp"

#include "json.hpp"

namespace adiakit {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    nlohmann::json family = {{"name", "example1"}};
    double t_min = 1e2;
    double t_max = 1e6;
    int t_count = 13;
    double fit_t_min = 0;  // 0: top 40% of the ladder in log T
    double fit_t_max = 0;
    int spectrum_points = 201;
    double zero_tol = kZeroEigTol;
    double cluster_tol = kClusterTol;
    int bound_grid_points = 101;
    double bound_safety = 2.0;
    double cptp_tol = 1e-8;
    std::string out_dir = ".";
    std::uint64_t seed = 12345;
    PropagatorConfig propagator;

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig cfg;
        try {
            if (j.contains("family")) cfg.family = j.at("family");
            if (j.contains("sweep")) {
                const auto& sw = j.at("sweep");
                cfg.t_min = sw.value("t_min", cfg.t_min);
                cfg.t_max = sw.value("t_max", cfg.t_max);
                cfg.t_count = sw.value("count", cfg.t_count);
                cfg.fit_t_min = sw.value("fit_t_min", 0.0);
                cfg.fit_t_max = sw.value("fit_t_max", 0.0);
            }
            if (j.contains("spectrum")) {
                cfg.spectrum_points = j.at("spectrum").value("points", cfg.spectrum_points);
            }
            if (j.contains("tolerances")) {
                const auto& tol = j.at("tolerances");
                cfg.zero_tol = tol.value("zero", cfg.zero_tol);
                cfg.cluster_tol = tol.value("cluster", cfg.cluster_tol);
                cfg.cptp_tol = tol.value("cptp", cfg.cptp_tol);
                cfg.propagator.base_tol = tol.value("integrator", cfg.propagator.base_tol);
            }
            if (j.contains("bound")) {
                cfg.bound_grid_points = j.at("bound").value("grid_points", cfg.bound_grid_points);
                cfg.bound_safety = j.at("bound").value("safety", cfg.bound_safety);
            }
            if (j.contains("outputs")) cfg.out_dir = j.at("outputs").value("dir", cfg.out_dir);
            cfg.seed = j.value("seed", cfg.seed);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config parse: ") + e.what());
        }
        if (cfg.t_min <= 0 || cfg.t_max < cfg.t_min)
            throw ConfigError("config: T ladder must be positive and increasing");
        if (cfg.t_count < 1) throw ConfigError("config: sweep count must be >= 1");
        return cfg;
    }

    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config '" + path + "': " + e.what());
        }
        return from_json(j);
    }

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"family", family},
            {"sweep",
             {{"t_min", t_min},
              {"t_max", t_max},
              {"count", t_count},
              {"fit_t_min", fit_t_min},
              {"fit_t_max", fit_t_max}}},
            {"spectrum", {{"points", spectrum_points}}},
            {"tolerances",
             {{"zero", zero_tol},
              {"cluster", cluster_tol},
              {"cptp", cptp_tol},
              {"integrator", propagator.base_tol}}},
            {"bound", {{"grid_points", bound_grid_points}, {"safety", bound_safety}}},
            {"seed", seed}};
    }

    std::uint64_t config_hash() const { return fnv1a(to_json().dump()); }

    std::vector<double> t_ladder() const {
        std::vector<double> ts(t_count);
        for (int i = 0; i < t_count; ++i) {
            const double f = t_count == 1 ? 0.0 : double(i) / (t_count - 1);
            ts[i] = std::pow(10.0, std::log10(t_min) + f * (std::log10(t_max) - std::log10(t_min)));
        }
        return ts;
    }
};

namespace detail {

inline std::string format_sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12e", x);
    return buf;
}

inline std::string csv_header(const ExperimentConfig& cfg, const std::string& columns) {
    std::ostringstream out;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    out << "# adiakit " << kVersion << "\n";
    out << "# config_hash: " << hash << "\n";
    out << "# family: " << cfg.family.value("name", "?") << "\n";
    out << "# seed: " << cfg.seed << "\n";
    out << "# tolerances: zero=" << format_sci(cfg.zero_tol)
        << " cluster=" << format_sci(cfg.cluster_tol)
        << " integrator=" << format_sci(cfg.propagator.base_tol) << "\n";
    out << columns << "\n";
    return out.str();
}

inline void write_file(const std::string& dir, const std::string& name,
                       const std::string& content) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + name + " under " + dir);
    out << content;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumResult {
    std::vector<double> s_grid;
    std::vector<std::vector<double>> tracks;  // continuity-ordered |lambda_j|, per grid point
    std::vector<double> gap;
    std::vector<double> semisimple_defect;
    std::string csv;
};

inline SpectrumResult run_spectrum(const ExperimentConfig& cfg) {
    const LiouvillianFamily fam = family_from_json(cfg.family);
    SpectrumResult res;
    const int n = cfg.spectrum_points;
    const int dim = fam.matrix_dim();
    std::vector<Complex> prev;
    for (int k = 0; k < n; ++k) {
        const double s = double(k) / (n - 1);
        const SpectralData sd = decompose(fam(s), cfg.zero_tol, cfg.cluster_tol);
        std::vector<Complex> evs(sd.eigenvalues.data(), sd.eigenvalues.data() + dim);
        if (prev.empty()) {
            std::sort(evs.begin(), evs.end(),
                      [](Complex a, Complex b) { return std::abs(a) < std::abs(b); });
        } else {
            // nearest-neighbor continuity matching against the previous point
            std::vector<Complex> ordered(dim);
            std::vector<bool> used(dim, false);
            for (int j = 0; j < dim; ++j) {
                int best = -1;
                double best_d = std::numeric_limits<double>::infinity();
                for (int i = 0; i < dim; ++i) {
                    if (used[i]) continue;
                    const double d = std::abs(evs[i] - prev[j]);
                    if (d < best_d) {
                        best_d = d;
                        best = i;
                    }
                }
                ordered[j] = evs[best];
                used[best] = true;
            }
            evs = std::move(ordered);
        }
        prev = evs;
        res.s_grid.push_back(s);
        std::vector<double> row(dim);
        for (int j = 0; j < dim; ++j) row[j] = std::abs(evs[j]);
        res.tracks.push_back(std::move(row));
        res.gap.push_back(sd.gap());
        res.semisimple_defect.push_back(
            semisimplicity_defect(fam(s), sd.zero_projector()));
    }
    std::ostringstream columns;
    columns << "s";
    for (int j = 0; j < dim; ++j) columns << ",abs_lambda_" << j;
    columns << ",gap,semisimple_defect";
    std::ostringstream csv;
    csv << detail::csv_header(cfg, columns.str());
    for (int k = 0; k < n; ++k) {
        csv << detail::format_sci(res.s_grid[k]);
        for (double v : res.tracks[k]) csv << "," << detail::format_sci(v);
        csv << "," << detail::format_sci(res.gap[k]) << ","
            << detail::format_sci(res.semisimple_defect[k]) << "\n";
    }
    res.csv = csv.str();
    return res;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepResult {
    std::vector<SweepRow> rows;
    PowerLawFit fit;
    bool fit_valid = false;
    std::uint64_t config_hash = 0;
    std::string csv;
    std::string plot_script;
};

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    const LiouvillianFamily fam = family_from_json(cfg.family);
    const std::vector<double> ladder = cfg.t_ladder();
    SweepResult res;
    res.config_hash = cfg.config_hash();
    res.rows.resize(ladder.size());

    const unsigned workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(ladder.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= ladder.size()) return;
            SweepRow row;
            row.t = ladder[i];
            try {
                auto r = adiabatic_error_detailed(fam, row.t, cfg.propagator);
                row.error = r.error;
                row.richardson_discrepancy = r.richardson_discrepancy;
                row.tolerance = r.tolerance;
                row.substeps = r.substeps;
                row.flagged = r.richardson_discrepancy > r.tolerance;
            } catch (const NonConvergence&) {
                row.flagged = true;
            }
            res.rows[i] = row;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    double fit_lo = cfg.fit_t_min, fit_hi = cfg.fit_t_max;
    if (fit_lo <= 0 || fit_hi <= 0) {
        auto [lo, hi] = default_fit_window(res.rows);
        if (fit_lo <= 0) fit_lo = lo;
        if (fit_hi <= 0) fit_hi = hi;
    }
    try {
        res.fit = fit_power_law(res.rows, fit_lo, fit_hi);
        res.fit_valid = true;
    } catch (const InsufficientData&) {
        res.fit_valid = false;
    }

    std::ostringstream csv;
    csv << detail::csv_header(cfg, "T,error,richardson_discrepancy,tolerance,substeps,flagged");
    for (const auto& row : res.rows) {
        csv << detail::format_sci(row.t) << "," << detail::format_sci(row.error) << ","
            << detail::format_sci(row.richardson_discrepancy) << ","
            << detail::format_sci(row.tolerance) << "," << row.substeps << ","
            << (row.flagged ? 1 : 0) << "\n";
    }
    if (res.fit_valid) {
        csv << "# fit: error ~= " << detail::format_sci(res.fit.prefactor) << " * T^-"
            << detail::format_sci(res.fit.exponent) << " over ["
            << detail::format_sci(res.fit.t_min) << ", " << detail::format_sci(res.fit.t_max)
            << "], rms(log) = " << detail::format_sci(res.fit.residual) << "\n";
    }
    res.csv = csv.str();

    std::ostringstream plot;
    plot << "#!/usr/bin/env python3\n"
         << "\"\"\"Log-log adiabatic error against total time, with the fitted power law.\"\"\"\n"
         << "import csv\n"
         << "import matplotlib\n"
         << "matplotlib.use(\"Agg\")\n"
         << "import matplotlib.pyplot as plt\n\n"
         << "ts, errs = [], []\n"
         << "with open(\"sweep.csv\") as fh:\n"
         << "    for line in fh:\n"
         << "        if line.startswith(\"#\") or line.startswith(\"T,\"):\n"
         << "            continue\n"
         << "        cols = line.strip().split(\",\")\n"
         << "        if len(cols) < 6 or cols[5] == \"1\":\n"
         << "            continue\n"
         << "        ts.append(float(cols[0]))\n"
         << "        errs.append(float(cols[1]))\n\n"
         << "fig, ax = plt.subplots(figsize=(5, 4))\n"
         << "ax.loglog(ts, errs, \"o\", label=\"measured\")\n";
    if (res.fit_valid) {
        plot << "fit_pref, fit_exp = " << detail::format_sci(res.fit.prefactor) << ", "
             << detail::format_sci(res.fit.exponent) << "\n"
             << "ax.loglog(ts, [fit_pref * t ** (-fit_exp) for t in ts],\n"
             << "          \"-\", label=f\"{fit_pref:.4g}/T^{fit_exp:.4g}\")\n";
    }
    plot << "ax.set_xlabel(\"T\")\n"
         << "ax.set_ylabel(\"trace-norm error at s = 1\")\n"
         << "ax.legend()\n"
         << "fig.tight_layout()\n"
         << "fig.savefig(\"sweep.png\", dpi=160)\n"
         << "print(\"wrote sweep.png\")\n";
    res.plot_script = plot.str();
    return res;
}

// ---------------------------------------------------------------------------
// verify

struct VerificationCheck {
    std::string name;
    bool applicable = true;
    bool passed = false;
    double measured = 0;
    double tolerance = 0;
    std::string detail;
};

struct VerificationReport {
    std::vector<VerificationCheck> checks;
    bool all_passed = true;

    void add(VerificationCheck check) {
        if (check.applicable && !check.passed) all_passed = false;
        checks.push_back(std::move(check));
    }

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& c : checks) {
            out.push_back({{"name", c.name},
                           {"applicable", c.applicable},
                           {"pass", c.passed},
                           {"measured", c.measured},
                           {"tolerance", c.tolerance},
                           {"detail", c.detail}});
        }
        return nlohmann::json{{"version", kVersion}, {"all_passed", all_passed}, {"checks", out}};
    }
};

inline VerificationReport run_verify(const ExperimentConfig& cfg) {
    const LiouvillianFamily fam = family_from_json(cfg.family);
    const std::string fam_name = cfg.family.value("name", "");
    VerificationReport rep;
    // failures are report entries, not exceptions
    auto guarded = [&rep](VerificationCheck check, auto&& body) {
        try {
            body(check);
        } catch (const Error& e) {
            check.passed = false;
            check.detail = e.what();
        }
        rep.add(std::move(check));
    };

    // semigroup CPTP at several substep scales and schedule points
    guarded(VerificationCheck{.name = "cptp_semigroup", .tolerance = cfg.cptp_tol},
            [&](VerificationCheck& c) {
                c.applicable = fam.acts_on_operators() &&
                               trace_annihilation_defect(fam(0.0)) < 1e-8;
                if (!c.applicable) return;
                double worst = 0;
                for (int k = 0; k <= 6; ++k)
                    for (double h : {1e-3, 1e-2, 1e-1}) {
                        auto r = is_cptp(superop_exp(Superop(h * fam(k / 6.0))), cfg.cptp_tol);
                        worst = std::max({worst, r.cp_violation, r.tp_violation});
                    }
                c.measured = worst;
                c.passed = worst <= cfg.cptp_tol;
            });
    // intertwiner is CPTP
    guarded(VerificationCheck{.name = "intertwiner_cptp", .tolerance = 1e-6},
            [&](VerificationCheck& c) {
                c.applicable = fam.acts_on_operators() &&
                               trace_annihilation_defect(fam(0.0)) < 1e-8;
                if (!c.applicable) return;
                const Superop w = intertwiner_euler(fam, 1.0, 4096);
                auto r = is_cptp(w, 1e-6);
                c.measured = std::max(r.cp_violation, r.tp_violation);
                c.passed = r.passed;
            });
    guarded(VerificationCheck{.name = "intertwining_residual", .tolerance = 1e-6},
            [&](VerificationCheck& c) {
                const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
                const auto ws = intertwiner_ode_grid(fam, grid);
                const Superop p0 = zero_projector(fam(0.0), cfg.zero_tol);
                double worst = 0;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const Superop p = zero_projector(fam(grid[i]), cfg.zero_tol);
                    worst = std::max(worst, (p * ws[i] - ws[i]).norm());
                    worst = std::max(worst, (ws[i] - ws[i] * p0).norm());
                }
                c.measured = worst;
                c.passed = worst <= c.tolerance;
            });
    // no nilpotent part in the zero sector along the path
    guarded(VerificationCheck{.name = "semisimplicity", .tolerance = 1e-9},
            [&](VerificationCheck& c) {
                double worst = 0;
                for (int k = 0; k <= 20; ++k) {
                    const Superop l = fam(k / 20.0);
                    const double defect =
                        semisimplicity_defect(l, zero_projector(l, cfg.zero_tol));
                    worst = std::max(worst, defect / std::max(l.norm(), 1e-300));
                }
                c.measured = worst;
                c.passed = worst <= c.tolerance;
            });
    if (fam_name == "example2") {  // thermal-bath checks
        const BathSpec bath =
            detail::bath_from_json(cfg.family.value("bath", nlohmann::json::object()));
        guarded(VerificationCheck{.name = "kms_rate_symmetry", .tolerance = 1e-10},
                [&](VerificationCheck& c) {
                    std::vector<double> ws;
                    for (int i = 1; i <= 30; ++i) ws.push_back(0.05 * i);
                    c.measured = bath.kms_defect(ws);
                    c.passed = c.measured <= c.tolerance;
                });
        guarded(VerificationCheck{.name = "detailed_balance", .tolerance = 1e-9},
                [&](VerificationCheck& c) {
                    double worst = 0;
                    for (double s : {0.2, 0.5, 0.8}) {
                        auto db = detailed_balance_certificate(
                            fam(s), gibbs_state(fam.hamiltonian(s), bath.beta()));
                        worst = std::max({worst, db.stationarity, db.normality_defect});
                    }
                    c.measured = worst;
                    c.passed = worst <= c.tolerance;
                });
        guarded(VerificationCheck{.name = "eq8_spectrum_match", .tolerance = 1e-8},
                [&](VerificationCheck& c) {
                    const Operator a =
                        cfg.family.value("g", 1e-2) *
                        (cfg.family.value("coupling", "y") == "y" ? sigma_y() : sigma_z());
                    double worst = 0;
                    for (int k = 1; k <= 19; ++k) {
                        const double s = 0.05 * k;
                        const Operator h = fam.hamiltonian(s);
                        const auto closed = example2_spectrum_closed_form(h, a, bath);
                        const SpectralData sd = decompose(fam(s));
                        for (const Complex& lam : closed) {
                            double best = std::numeric_limits<double>::infinity();
                            for (int i = 0; i < sd.eigenvalues.size(); ++i)
                                best = std::min(best, std::abs(lam - sd.eigenvalues(i)));
                            worst = std::max(worst,
                                             best / std::max(std::abs(lam), 1e-8 * sd.scale));
                        }
                    }
                    c.measured = worst;
                    c.passed = worst <= c.tolerance;
                });
    }
    // S' identity against finite differences
    guarded(VerificationCheck{.name = "sprime_identity", .tolerance = 1e-6},
            [&](VerificationCheck& c) {
                double worst = 0;
                for (double s : {0.3, 0.5, 0.7}) {
                    const Superop ds = resolvent_derivative(fam, s);
                    auto s_at = [&](double sigma) {
                        const Superop l = fam(sigma);
                        return reduced_resolvent(l, zero_projector(l, cfg.zero_tol));
                    };
                    const double h = 1e-5;
                    const Superop fd = (s_at(s + h) - s_at(s - h)) / (2.0 * h);
                    worst = std::max(worst, (ds - fd).norm() / std::max(1.0, ds.norm()));
                }
                c.measured = worst;
                c.passed = worst <= c.tolerance;
            });
    // bound validity on a short ladder
    guarded(VerificationCheck{.name = "bound_validity", .tolerance = cfg.bound_safety},
            [&](VerificationCheck& c) {
                BoundConfig bc;
                bc.grid_points = std::min(cfg.bound_grid_points, 51);
                bc.norm_budget.seed = cfg.seed;
                const auto bound = [&] {
                    try {
                        return constant_C(fam, 1.0, bc);
                    } catch (const GapTooSmall& e) {
                        c.applicable = false;
                        throw;
                    }
                }();
                double worst_ratio = 0;
                for (double t : {1e2, 1e3}) {
                    const double err = adiabatic_error(fam, t, cfg.propagator);
                    worst_ratio = std::max(worst_ratio, err * t / std::max(bound.c, 1e-300));
                }
                c.measured = worst_ratio;
                c.passed = worst_ratio <= cfg.bound_safety;
                c.detail = "C = " + detail::format_sci(bound.c);
            });
    // the bare intertwiner fails positivity where the theory says it must
    guarded(VerificationCheck{.name = "v_nonpositivity_witness", .tolerance = -1e-6},
            [&](VerificationCheck& c) {
                try {
                    auto wit = v_nonpositivity_witness(fam, 1.0);
                    c.measured = wit.negative_eigenvalue;
                    c.passed = wit.negative_eigenvalue < -1e-6;
                } catch (const DegenerateCase& e) {
                    c.applicable = false;
                    c.detail = e.what();
                } catch (const DegenerateKernel& e) {
                    c.applicable = false;
                    c.detail = e.what();
                }
            });
    return rep;
}

// ---------------------------------------------------------------------------
// bound

struct BoundRunResult {
    BoundReport bound;
    std::vector<SweepRow> rows;
    std::vector<bool> row_ok;
    bool all_ok = true;
    std::string csv;
};

inline BoundRunResult run_bound(const ExperimentConfig& cfg) {
    const LiouvillianFamily fam = family_from_json(cfg.family);
    BoundRunResult res;
    BoundConfig bc;
    bc.grid_points = cfg.bound_grid_points;
    bc.norm_budget.seed = cfg.seed;
    res.bound = constant_C(fam, 1.0, bc);

    for (double t : cfg.t_ladder()) {
        SweepRow row;
        row.t = t;
        auto r = adiabatic_error_detailed(fam, t, cfg.propagator);
        row.error = r.error;
        row.richardson_discrepancy = r.richardson_discrepancy;
        row.tolerance = r.tolerance;
        row.substeps = r.substeps;
        res.rows.push_back(row);
        const bool ok = row.error <= cfg.bound_safety * res.bound.c / t;
        res.row_ok.push_back(ok);
        res.all_ok = res.all_ok && ok;
    }
    std::ostringstream csv;
    csv << detail::csv_header(cfg, "T,error,C_over_T,ok");
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        csv << detail::format_sci(res.rows[i].t) << "," << detail::format_sci(res.rows[i].error)
            << "," << detail::format_sci(res.bound.c / res.rows[i].t) << ","
            << (res.row_ok[i] ? 1 : 0) << "\n";
    }
    csv << "# C = " << detail::format_sci(res.bound.c)
        << " (final " << detail::format_sci(res.bound.term_final) << ", initial "
        << detail::format_sci(res.bound.term_initial) << ", sup "
        << detail::format_sci(res.bound.term_sup) << " at s = "
        << detail::format_sci(res.bound.sup_location) << ")"
        << (res.bound.norm_estimator_certified ? " certified" : " uncertified") << "\n";
    res.csv = csv.str();
    return res;
}

}  // namespace adiakit
