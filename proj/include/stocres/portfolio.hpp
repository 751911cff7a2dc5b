#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stocres/errors.hpp"
#include "stocres/simulate.hpp"
#include "stocres/stats.hpp"

namespace stocres {

/// Homogeneous portfolio at the valuation time: which policies still receive payments.
struct PortfolioState {
    std::vector<bool> active;

    static PortfolioState all_active(std::size_t n) { return {std::vector<bool>(n, true)}; }

    std::size_t n_policies() const { return active.size(); }
    std::size_t active_count() const {
        std::size_t c = 0;
        for (bool a : active) c += a ? 1 : 0;
        return c;
    }
};

/// Realized present value of each policy along one intensity path; inactive policies get 0.
///
/// A policy terminating during step j is paid at nodes 0..j and not afterwards, integrated
/// with the same trapezoid as present_value.
inline std::vector<double> policy_present_values(const PortfolioState& portfolio, std::span<const double> q_path,
                                                 const ContractSpec& contract, std::span<const double> time_grid,
                                                 std::uint64_t seed, Parallelism par = {}) {
    const std::size_t n = portfolio.n_policies();
    std::vector<double> values(n, 0.0);
    if (n == 0) return values;
    PresentValueKernel kernel(contract, time_grid);
    const auto events = thinning_events(q_path, time_grid, n, seed, par);

    // paid_until[j] = trapezoid integral of the discounted payment rate over [s_0, s_j]
    const std::size_t nodes = time_grid.size();
    std::vector<double> paid_until(nodes, 0.0);
    for (std::size_t j = 1; j < nodes; ++j) {
        const double h = time_grid[j] - time_grid[j - 1];
        paid_until[j] = paid_until[j - 1] + 0.5 * h * (kernel.weight(j - 1) + kernel.weight(j));
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!portfolio.active[k]) continue;
        if (!events[k]) {
            values[k] = paid_until[nodes - 1];
        } else {
            const std::size_t j = *events[k];
            const double h = time_grid[j + 1] - time_grid[j];
            values[k] = paid_until[j] + 0.5 * h * kernel.weight(j);
        }
    }
    return values;
}

/// Total present value L of the portfolio along one intensity path.
inline double aggregate_pv(const PortfolioState& portfolio, std::span<const double> q_path,
                           const ContractSpec& contract, std::span<const double> time_grid, std::uint64_t seed,
                           Parallelism par = {}) {
    double total = 0.0;
    for (double v : policy_present_values(portfolio, q_path, contract, time_grid, seed, par)) total += v;
    return total;
}

/// Large-portfolio approximation L ~ (number of active policies) * V.
inline double lln_pv(std::size_t active_count, double v) { return static_cast<double>(active_count) * v; }

/// Approximate p-quantile of L by positive homogeneity: active * F_V^{-1}(p).
inline double portfolio_quantile(std::size_t active_count, const EmpiricalDistribution& dist, double p) {
    return static_cast<double>(active_count) * quantile(dist, p);
}

/// Portfolio reserve: active * E[V_t | F_t^Z].
inline double portfolio_reserve(std::size_t active_count, double mean_v) {
    return static_cast<double>(active_count) * mean_v;
}

} // namespace stocres
