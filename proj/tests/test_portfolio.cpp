#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stocres/pde.hpp"
#include "stocres/portfolio.hpp"

using namespace stocres;

namespace {

std::vector<double> intensity_path(const IntensityModel& m, const std::vector<double>& grid, std::uint64_t seed,
                                   std::size_t index = 0) {
    NuPathGenerator gen(m, grid, seed);
    std::vector<double> q(grid.size());
    gen.scores(index, q);
    for (double& z : q) z = softplus(z, m.delta_d);
    return q;
}

} // namespace

TEST(AggregatePv, InactivePortfolioIsWorthNothing) {
    const auto grid = make_time_grid(0.0, 10.0, 0.1);
    PortfolioState p{std::vector<bool>(50, false)};
    EXPECT_EQ(p.active_count(), 0u);
    EXPECT_EQ(aggregate_pv(p, std::vector<double>(grid.size(), 0.2), ContractSpec{}, grid, 1), 0.0);
}

TEST(AggregatePv, NoTerminationsGiveTheFlatAnnuity) {
    const auto grid = make_time_grid(0.0, 10.0, 0.01);
    ContractSpec c;
    c.r = 0.0;
    const std::size_t k = 37;
    const double total = aggregate_pv(PortfolioState::all_active(k), std::vector<double>(grid.size(), 0.0), c, grid, 2);
    EXPECT_NEAR(total, 10.0 * k, 1e-9);
}

TEST(AggregatePv, AverageConvergesToThePathPresentValue) {
    const auto m = oracle::linear_model();
    const auto grid = make_time_grid(0.0, 10.0, 0.01);
    const auto q = intensity_path(m, grid, 4);
    const ContractSpec c;
    const double v = present_value(q, c, grid);
    const std::size_t n = 10000;
    const auto values = policy_present_values(PortfolioState::all_active(n), q, c, grid, 17);
    double mean = 0.0;
    for (double x : values) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : values) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / (n - 1));
    EXPECT_LE(std::abs(mean - v), 5.0 * sd / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(aggregate_pv(PortfolioState::all_active(n), q, c, grid, 17), mean * n, 1e-9 * mean * n);
}

TEST(AggregatePv, SinglePolicyIsUnbiasedForThePathValue) {
    const auto m = oracle::exp3_model();
    const auto grid = make_time_grid(0.0, 10.0, 0.01);
    const auto q = intensity_path(m, grid, 5);
    const ContractSpec c;
    const double v = present_value(q, c, grid);
    const auto one = PortfolioState::all_active(1);
    const int reps = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < reps; ++s) {
        const double x = aggregate_pv(one, q, c, grid, static_cast<std::uint64_t>(s) + 1000);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    EXPECT_NEAR(mean, v, 4.0 * se);
}

TEST(AggregatePv, MixedActivityAndThreadIndependence) {
    const auto grid = make_time_grid(0.0, 10.0, 0.05);
    const std::vector<double> q(grid.size(), 0.15);
    PortfolioState p{std::vector<bool>(1000, true)};
    for (std::size_t i = 0; i < 1000; i += 3) p.active[i] = false;
    const auto a = policy_present_values(p, q, ContractSpec{}, grid, 3, Parallelism{1});
    const auto b = policy_present_values(p, q, ContractSpec{}, grid, 3, Parallelism{4});
    EXPECT_EQ(a, b);
    for (std::size_t i = 0; i < 1000; i += 3) EXPECT_EQ(a[i], 0.0);
    EXPECT_EQ(p.active_count(), 666u);
}

TEST(Lln, Examples) {
    EXPECT_EQ(lln_pv(50, 2.0), 100.0);
    EXPECT_EQ(lln_pv(0, 2.0), 0.0);
    EXPECT_EQ(portfolio_reserve(0, 4.2), 0.0);
    EXPECT_EQ(portfolio_reserve(10, 4.25), 42.5);
}

TEST(PortfolioQuantile, HomogeneityAndEdgeCases) {
    const EmpiricalDistribution d({3.0, 1.0, 4.0, 1.5, 9.0, 2.6});
    EXPECT_EQ(portfolio_quantile(100, d, 0.5), 100 * quantile(d, 0.5));
    EXPECT_EQ(portfolio_quantile(100, d, 1.0), 100 * d.max());
    EXPECT_EQ(portfolio_quantile(0, d, 0.9), 0.0);
    const EmpiricalDistribution flat(std::vector<double>(20, 4.4));
    for (double p : {0.01, 0.5, 1.0}) EXPECT_EQ(portfolio_quantile(7, flat, p), 7 * 4.4);
    for (double c : {0.3, 2.0, 11.0}) {
        for (double p : {0.2, 0.5, 0.99}) EXPECT_EQ(quantile(d.scaled(c), p), c * quantile(d, p));
    }
    EXPECT_THROW(portfolio_quantile(5, d, 0.0), DomainError);
}

TEST(PortfolioReserve, PdeAndMonteCarloAgree) {
    const auto m = oracle::linear_model();
    const ContractSpec c;
    SimConfig cfg;
    cfg.n_paths = 10000;
    cfg.seed = 2;
    const auto ci = moment_ci(sample_present_values(m, c, cfg), 1, 0.99);
    const auto spec = mimic_1d(m);
    const auto sol = solve_moments(1, spec, m, c, build_grid(spec, m, c, 6.0, 0.005, 0.005));
    const double pde = portfolio_reserve(1, sol.point_values[0]);
    EXPECT_GE(pde, ci.low);
    EXPECT_LE(pde, ci.high);
}
