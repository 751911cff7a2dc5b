// stocres: fit / simulate / solve / compare / portfolio experiments from a config file.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "stocres/stocres.hpp"

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kNumerical = 3 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> series;
    std::optional<unsigned> threads;
};

stocres::ExperimentConfig load(const Options& opt) {
    auto cfg = stocres::load_experiment(opt.config);
    if (opt.seed) cfg.mc.seed = *opt.seed;
    if (opt.out) cfg.output_dir = *opt.out;
    if (opt.threads) cfg.mc.parallelism.threads = *opt.threads;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic-intensity annuity reserving: Monte Carlo and moment PDEs"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&opt](CLI::App* cmd) {
        cmd->add_option("--seed", opt.seed, "RNG seed (overrides mc.seed)");
        cmd->add_option("--out", opt.out, "output directory (overrides io.output)");
        cmd->add_option("--threads", opt.threads, "worker threads, 0 = all cores (overrides mc.threads)");
    };

    auto* fit = app.add_subcommand("fit", "estimate random-walk drift and covariance from a parameter series");
    fit->add_option("--series", opt.series, "series CSV (year,nu_1_1,...)");
    fit->add_option("--config", opt.config, "config file; supplies model.series and io.output");
    add_common(fit);

    const char* const experiment_commands[][2] = {
        {"simulate", "Monte Carlo of the present value under the full model"},
        {"solve", "moment PDE chain on the mimicking diffusion"},
        {"compare", "all representations side by side: MC moments, PDE refinements, KS tests"},
        {"portfolio", "portfolio reserve and quantiles"},
    };
    for (const auto& [name, help] : experiment_commands) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--config", opt.config, "config file")->required();
        add_common(cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "fit") {
            std::filesystem::path series;
            std::filesystem::path out = opt.out ? *opt.out : "out";
            if (!opt.config.empty()) {
                const auto cfg = load(opt);
                if (cfg.series) series = *cfg.series;
                out = cfg.output_dir;
            }
            if (opt.series) series = *opt.series;
            if (series.empty()) throw stocres::ValidationError("fit: --series or model.series is required");
            const auto report = stocres::run_fit(series, out);
            std::cout << "fit: " << report.rows << " rows, n=" << report.n << " m=" << report.m
                      << " (dimension " << report.n * report.m << ") -> " << (out / "fit.json").string() << '\n';
        } else {
            const auto cfg = load(opt);
            if (command == "simulate") {
                const auto dist = stocres::run_simulate(cfg);
                std::cout << "simulate: " << dist.size() << " present values -> " << cfg.output_dir.string() << '\n';
            } else if (command == "solve") {
                const auto sol = stocres::run_solve(cfg);
                for (std::size_t i = 0; i < sol.point_values.size(); ++i) {
                    std::cout << "v" << i + 1 << " = " << stocres::fmt6(sol.point_values[i]) << '\n';
                }
            } else if (command == "compare") {
                const auto report = stocres::run_compare(cfg);
                for (const auto& row : report.ks) {
                    std::cout << "KS " << row.a << " vs " << row.b << ": D = " << stocres::fmt6(row.result.statistic)
                              << ", p = " << stocres::fmt6(row.result.p_value) << '\n';
                }
            } else if (command == "portfolio") {
                const auto report = stocres::run_portfolio(cfg);
                std::cout << "reserve (MC) = " << stocres::fmt6(report.reserve_mc)
                          << ", reserve (PDE) = " << stocres::fmt6(report.reserve_pde) << '\n';
            }
        }
    } catch (const stocres::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const stocres::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
