// Command-line runner: spectrum scans, T-sweeps, invariant verification and
// error-bound evaluation over JSON experiment configs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "adiakit/adiakit.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
};

adiakit::ExperimentConfig load_config(const CommonOptions& opts) {
    adiakit::ExperimentConfig cfg = adiakit::ExperimentConfig::from_file(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "seed for randomized norm-estimator restarts");
}

int run_spectrum_cmd(const CommonOptions& opts) {
    auto cfg = load_config(opts);
    auto res = adiakit::run_spectrum(cfg);
    adiakit::detail::write_file(cfg.out_dir, "spectrum.csv", res.csv);
    std::cout << "spectrum: " << res.s_grid.size() << " points, min gap "
              << *std::min_element(res.gap.begin(), res.gap.end()) << "\n"
              << "wrote " << (std::filesystem::path(cfg.out_dir) / "spectrum.csv").string()
              << "\n";
    return 0;
}

int run_sweep_cmd(const CommonOptions& opts) {
    auto cfg = load_config(opts);
    auto res = adiakit::run_sweep(cfg);
    adiakit::detail::write_file(cfg.out_dir, "sweep.csv", res.csv);
    adiakit::detail::write_file(cfg.out_dir, "sweep_plot.py", res.plot_script);
    int flagged = 0;
    for (const auto& row : res.rows) flagged += row.flagged ? 1 : 0;
    std::cout << "sweep: " << res.rows.size() << " rows, " << flagged << " flagged\n";
    if (res.fit_valid) {
        std::printf("fit: error ~= %.6g / T^%.6g  (window [%.3g, %.3g], rms %.3g)\n",
                    res.fit.prefactor, res.fit.exponent, res.fit.t_min, res.fit.t_max,
                    res.fit.residual);
    }
    std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "sweep.csv").string()
              << " and sweep_plot.py\n";
    return flagged == 0 ? 0 : 1;
}

int run_verify_cmd(const CommonOptions& opts) {
    auto cfg = load_config(opts);
    auto rep = adiakit::run_verify(cfg);
    adiakit::detail::write_file(cfg.out_dir, "verify.json", rep.to_json().dump(2) + "\n");
    for (const auto& c : rep.checks) {
        std::printf("%-26s %s  measured %.3e (tol %.3e)%s%s\n", c.name.c_str(),
                    !c.applicable ? "SKIP" : (c.passed ? "pass" : "FAIL"), c.measured,
                    c.tolerance, c.detail.empty() ? "" : "  ", c.detail.c_str());
    }
    std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "verify.json").string()
              << "\n";
    return rep.all_passed ? 0 : 1;
}

int run_bound_cmd(const CommonOptions& opts) {
    auto cfg = load_config(opts);
    auto res = adiakit::run_bound(cfg);
    adiakit::detail::write_file(cfg.out_dir, "bound.csv", res.csv);
    std::printf("C = %.6g (final %.3g + initial %.3g + sup %.3g at s=%.4f)%s\n", res.bound.c,
                res.bound.term_final, res.bound.term_initial, res.bound.term_sup,
                res.bound.sup_location,
                res.bound.norm_estimator_certified ? "" : " [uncertified]");
    int violations = 0;
    for (bool ok : res.row_ok) violations += ok ? 0 : 1;
    std::cout << "rows: " << res.rows.size() << ", violations: " << violations << "\n"
              << "wrote " << (std::filesystem::path(cfg.out_dir) / "bound.csv").string()
              << "\n";
    return res.all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adiakit: adiabatic error analysis for time-dependent Lindblad generators"};
    app.require_subcommand(1);

    CommonOptions spectrum_opts, sweep_opts, verify_opts, bound_opts;
    add_common(app.add_subcommand("spectrum",
                                  "scan eigenvalue magnitudes, gap and semisimplicity "
                                  "(columns: s, |lambda_j|..., gap, semisimple_defect)"),
               spectrum_opts);
    add_common(app.add_subcommand("sweep",
                                  "run a T-ladder of propagations and fit the error power law "
                                  "(columns: T, error, discrepancy, tolerance, substeps, flagged)"),
               sweep_opts);
    add_common(app.add_subcommand("verify",
                                  "run the cross-module invariant suites, write verify.json"),
               verify_opts);
    add_common(app.add_subcommand("bound",
                                  "evaluate the error-bound constant and compare against "
                                  "measured errors (columns: T, error, C_over_T, ok)"),
               bound_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("spectrum")) return run_spectrum_cmd(spectrum_opts);
        if (app.got_subcommand("sweep")) return run_sweep_cmd(sweep_opts);
        if (app.got_subcommand("verify")) return run_verify_cmd(verify_opts);
        if (app.got_subcommand("bound")) return run_bound_cmd(bound_opts);
    } catch (const adiakit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const adiakit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
