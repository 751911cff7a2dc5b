#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "stocres/config.hpp"
#include "stocres/io.hpp"
#include "stocres/pde.hpp"
#include "stocres/portfolio.hpp"
#include "stocres/projection.hpp"
#include "stocres/simulate.hpp"
#include "stocres/stats.hpp"

namespace stocres {

/// Confidence level of every Monte Carlo interval in the reports.
inline constexpr double kReportLevel = 0.99;

namespace detail {

inline std::ofstream open_report(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
}

inline nlohmann::json rounded(const Vector& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(round6(v[i]));
    return arr;
}

inline nlohmann::json rounded(const Matrix& m) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) arr.push_back(rounded(Vector(m.row(i).transpose())));
    return arr;
}

inline void warn_peclet(const MomentGrid& m, std::ostream& log) {
    if (m.peclet_warning()) {
        log << "warning: v" << m.order << " cell Peclet number reaches " << fmt6(m.max_peclet)
            << " (> 2); central differences may oscillate, consider a smaller dz\n";
    }
}

struct MomentRow {
    int n = 0;
    std::string method;
    double value = 0.0;
    std::optional<double> low;
    std::optional<double> high;
};

inline void write_moments_csv(std::ostream& out, const std::vector<MomentRow>& rows) {
    out << "n,method,value,ci_low,ci_high\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.method << ',' << fmt6(r.value) << ',' << (r.low ? fmt6(*r.low) : "") << ','
            << (r.high ? fmt6(*r.high) : "") << '\n';
    }
}

inline void append_mc_rows(std::vector<MomentRow>& rows, const std::string& method,
                           const EmpiricalDistribution& dist, int moments) {
    for (int n = 1; n <= moments; ++n) {
        const auto ci = moment_ci(dist, n, kReportLevel);
        rows.push_back({n, method, ci.estimate, ci.low, ci.high});
    }
}

inline MomentSolution solve_pde(const ExperimentConfig& cfg, double dz, double dt, std::ostream& log) {
    const DiffusionSpec spec = mimic_1d(cfg.model);
    const Grid1D grid = build_grid(spec, cfg.model, cfg.contract, cfg.pde.k_sigma, dz, dt);
    auto sol = solve_moments(cfg.pde.moments, spec, cfg.model, cfg.contract, grid);
    for (const auto& m : sol.moments) warn_peclet(m, log);
    return sol;
}

} // namespace detail

struct FitReport {
    std::size_t rows = 0;
    std::size_t n = 0;
    std::size_t m = 0;
    RandomWalkEstimate estimate;
    Matrix cholesky;
};

/// Estimates random-walk drift and covariance from a parameter series and writes fit.json.
inline FitReport run_fit(const std::filesystem::path& series_csv, const std::filesystem::path& out_dir,
                         std::optional<std::size_t> expected_dim = {}) {
    const auto series = read_parameter_series(series_csv, expected_dim);
    FitReport report;
    report.rows = series.rows.size();
    report.n = series.n;
    report.m = series.m;
    report.estimate = estimate_random_walk(series.rows);
    report.cholesky = cholesky_psd(report.estimate.sigma);

    nlohmann::ordered_json j;
    j["rows"] = report.rows;
    j["n"] = report.n;
    j["m"] = report.m;
    j["dimension"] = report.n * report.m;
    j["mu"] = detail::rounded(report.estimate.mu);
    j["sigma"] = detail::rounded(report.estimate.sigma);
    j["cholesky"] = detail::rounded(report.cholesky);
    auto out = detail::open_report(out_dir, "fit.json");
    out << j.dump(2) << '\n';
    return report;
}

/// Monte Carlo of the full model: moments.csv (MC rows) and dist_full.csv.
inline EmpiricalDistribution run_simulate(const ExperimentConfig& cfg) {
    const auto dist = sample_present_values(cfg.model, cfg.contract, cfg.mc);
    std::vector<detail::MomentRow> rows;
    detail::append_mc_rows(rows, "mc_full", dist, cfg.pde.moments);
    {
        auto out = detail::open_report(cfg.output_dir, "moments.csv");
        detail::write_moments_csv(out, rows);
    }
    auto out = detail::open_report(cfg.output_dir, "dist_full.csv");
    write_distribution_csv(out, dist);
    return dist;
}

/// Moment PDE chain on the mimicked diffusion: moments.csv (PDE rows) and optional grid dumps.
inline MomentSolution run_solve(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
    auto sol = detail::solve_pde(cfg, cfg.pde.dz, cfg.pde.dt, log);
    std::vector<detail::MomentRow> rows;
    for (std::size_t i = 0; i < sol.point_values.size(); ++i) {
        rows.push_back({static_cast<int>(i + 1), "pde", sol.point_values[i], std::nullopt, std::nullopt});
    }
    {
        auto out = detail::open_report(cfg.output_dir, "moments.csv");
        detail::write_moments_csv(out, rows);
    }
    if (cfg.pde.dump_grid) {
        for (const auto& m : sol.moments) {
            auto out = detail::open_report(cfg.output_dir, "moment_grid_n" + std::to_string(m.order) + ".csv");
            write_moment_grid_csv(out, m, cfg.pde.dump_stride);
        }
    }
    return sol;
}

struct CompareReport {
    std::vector<std::string> representations;
    std::vector<EmpiricalDistribution> samples;
    struct KsRow {
        std::string a;
        std::string b;
        KsResult result;
    };
    std::vector<KsRow> ks;
    std::vector<std::pair<double, std::vector<double>>> pde_levels;
};

/// Every available representation side by side:
///   full     nu model, exact Gaussian increments
///   markov2d exact two-dimensional Markov lift (linear time terms only), Euler
///   mimic1d  one-dimensional mimicking diffusion, Euler
/// Writes moments.csv, compare_pde.csv, compare_ks.csv and dist_<name>.csv.
inline CompareReport run_compare(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
    CompareReport report;
    report.representations.push_back("full");
    report.samples.push_back(sample_present_values(cfg.model, cfg.contract, cfg.mc));
    if (cfg.model.basis.has_constant_derivative()) {
        report.representations.push_back("markov2d");
        report.samples.push_back(
            sample_present_values(markov_2d(cfg.model), cfg.model.delta_d, cfg.contract, cfg.mc));
    }
    report.representations.push_back("mimic1d");
    report.samples.push_back(sample_present_values(mimic_1d(cfg.model), cfg.model.delta_d, cfg.contract, cfg.mc));

    std::vector<detail::MomentRow> rows;
    for (std::size_t i = 0; i < report.samples.size(); ++i) {
        detail::append_mc_rows(rows, "mc_" + report.representations[i], report.samples[i], cfg.pde.moments);
    }

    std::vector<double> levels = cfg.pde.refinements;
    if (levels.empty()) levels.push_back(cfg.pde.dz);
    for (double delta : levels) {
        const auto sol = detail::solve_pde(cfg, delta, delta, log);
        report.pde_levels.emplace_back(delta, sol.point_values);
    }
    const auto main_sol = detail::solve_pde(cfg, cfg.pde.dz, cfg.pde.dt, log);
    for (std::size_t i = 0; i < main_sol.point_values.size(); ++i) {
        rows.push_back({static_cast<int>(i + 1), "pde", main_sol.point_values[i], std::nullopt, std::nullopt});
    }

    for (std::size_t i = 0; i < report.samples.size(); ++i) {
        for (std::size_t j = i + 1; j < report.samples.size(); ++j) {
            report.ks.push_back({report.representations[i], report.representations[j],
                                 ks_two_sample(report.samples[i], report.samples[j])});
        }
    }

    {
        auto out = detail::open_report(cfg.output_dir, "moments.csv");
        detail::write_moments_csv(out, rows);
    }
    {
        auto out = detail::open_report(cfg.output_dir, "compare_pde.csv");
        out << "delta";
        for (int n = 1; n <= cfg.pde.moments; ++n) out << ",v" << n;
        out << '\n';
        for (const auto& [delta, values] : report.pde_levels) {
            out << fmt6(delta);
            for (double v : values) out << ',' << fmt6(v);
            out << '\n';
        }
    }
    {
        auto out = detail::open_report(cfg.output_dir, "compare_ks.csv");
        out << "sample_a,sample_b,statistic,p_value\n";
        for (const auto& row : report.ks) {
            out << row.a << ',' << row.b << ',' << fmt6(row.result.statistic) << ',' << fmt6(row.result.p_value)
                << '\n';
        }
    }
    for (std::size_t i = 0; i < report.samples.size(); ++i) {
        auto out = detail::open_report(cfg.output_dir, "dist_" + report.representations[i] + ".csv");
        write_distribution_csv(out, report.samples[i]);
    }
    return report;
}

struct PortfolioReport {
    double reserve_mc = 0.0;
    double reserve_pde = 0.0;
    std::vector<std::pair<double, double>> quantiles;
};

/// Portfolio reserve (MC mean and PDE v1) and homogeneity quantiles: portfolio.csv.
inline PortfolioReport run_portfolio(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
    const auto dist = sample_present_values(cfg.model, cfg.contract, cfg.mc);
    const auto ci = moment_ci(dist, 1, kReportLevel);
    ExperimentConfig first_moment = cfg;
    first_moment.pde.moments = 1;
    const auto sol = detail::solve_pde(first_moment, cfg.pde.dz, cfg.pde.dt, log);

    const std::size_t active = cfg.portfolio.active;
    PortfolioReport report;
    report.reserve_mc = portfolio_reserve(active, ci.estimate);
    report.reserve_pde = portfolio_reserve(active, sol.point_values.front());
    for (double p : cfg.portfolio.quantiles) report.quantiles.emplace_back(p, portfolio_quantile(active, dist, p));

    auto out = detail::open_report(cfg.output_dir, "portfolio.csv");
    out << "metric,p,value\n";
    out << "active,," << active << '\n';
    out << "reserve_mc,," << fmt6(report.reserve_mc) << '\n';
    out << "reserve_pde,," << fmt6(report.reserve_pde) << '\n';
    for (const auto& [p, q] : report.quantiles) out << "quantile," << fmt6(p) << ',' << fmt6(q) << '\n';
    return report;
}

} // namespace stocres
