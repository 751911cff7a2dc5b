#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stocres/errors.hpp"
#include "stocres/linalg.hpp"
#include "stocres/model.hpp"
#include "stocres/projection.hpp"

namespace stocres {

/// Uniform space-time lattice for the one-dimensional moment equations.
struct Grid1D {
    double z_min = 0.0;
    double z_max = 0.0;
    double dz = 0.0;
    double dt = 0.0;
    double t0 = 0.0;
    double T = 0.0;
    std::size_t nz = 0;
    std::size_t nt = 0;

    double z(std::size_t i) const { return i + 1 == nz ? z_max : z_min + static_cast<double>(i) * dz; }
    double t(std::size_t k) const { return k + 1 == nt ? T : t0 + static_cast<double>(k) * dt; }

    bool operator==(const Grid1D&) const = default;

    static Grid1D make(double z_min, double z_max, double dz, double t0, double T, double dt) {
        if (!(dz > 0.0) || !(dt > 0.0)) throw ValidationError("grid: dz and dt must be > 0");
        if (!(z_max > z_min)) throw ValidationError("grid: z_min must be < z_max");
        if (!(T >= t0)) throw ValidationError("grid: T must not precede t0");
        auto count = [](double span, double step, const char* what) {
            const double q = span / step;
            const double r = std::round(q);
            if (std::abs(q - r) > 1e-9 * std::max(1.0, q)) {
                throw ValidationError(std::string("grid: ") + what + " is not a multiple of its step");
            }
            return static_cast<std::size_t>(r);
        };
        Grid1D g{z_min, z_max, dz, dt, t0, T, 0, 0};
        g.nz = count(z_max - z_min, dz, "z range") + 1;
        g.nt = count(T - t0, dt, "time range") + 1;
        return g;
    }
};

/// v_n on a Grid1D, stored time-major: values[k * nz + i] = v_n(t_k, z_i).
struct MomentGrid {
    int order = 0;
    Grid1D grid;
    std::vector<double> values;
    /// Largest cell Peclet number |alpha| dz / gamma^2 seen while solving (infinite when gamma = 0
    /// with nonzero drift); above 2 central differencing may oscillate.
    double max_peclet = 0.0;

    double at(std::size_t k, std::size_t i) const { return values[k * grid.nz + i]; }
    std::span<const double> row(std::size_t k) const { return {values.data() + k * grid.nz, grid.nz}; }
    bool peclet_warning() const { return max_peclet > 2.0; }

    static MomentGrid constant_one(const Grid1D& grid) {
        return {0, grid, std::vector<double>(grid.nz * grid.nt, 1.0), 0.0};
    }
};

/// Computational domain: mean trajectory of Z widened by k_sigma times the largest standard
/// deviation over [t0, T], rounded outward to the dz lattice through z0.
inline Grid1D build_grid(const DiffusionSpec& spec, const IntensityModel& model, const ContractSpec& contract,
                         double k_sigma, double dz, double dt, double t0 = 0.0) {
    if (spec.dim != 1) throw ValidationError("build_grid: a one-dimensional diffusion is required");
    if (!(k_sigma > 0.0)) throw ValidationError("build_grid: k_sigma must be > 0");
    if (!(dz > 0.0) || !(dt > 0.0)) throw ValidationError("build_grid: dz and dt must be > 0");
    contract.validate();
    if (!(t0 >= 0.0) || t0 > contract.T) throw ValidationError("build_grid: t0 must lie in [0, T]");

    const double z0 = spec.initial_state[0];
    // time_probe only sets up the time lattice; its z range is a placeholder
    const Grid1D time_probe = Grid1D::make(z0 - dz, z0 + dz, dz, t0, contract.T, dt);
    double m_lo = std::numeric_limits<double>::infinity();
    double m_hi = -m_lo;
    double s_max = 0.0;
    for (std::size_t k = 0; k < time_probe.nt; ++k) {
        const auto stats = z_marginal_stats(model, time_probe.t(k));
        m_lo = std::min(m_lo, stats.mean);
        m_hi = std::max(m_hi, stats.mean);
        s_max = std::max(s_max, std::sqrt(std::max(0.0, stats.variance)));
    }
    double lo = std::min(m_lo, z0) - k_sigma * s_max;
    double hi = std::max(m_hi, z0) + k_sigma * s_max;
    if (s_max == 0.0) {
        lo -= dz;
        hi += dz;
    }
    auto cells = [dz](double distance) {
        const double c = std::ceil(distance / dz - 1e-9);
        return std::max(1.0, c);
    };
    const double below = cells(z0 - lo);
    const double above = cells(hi - z0);
    return Grid1D::make(z0 - below * dz, z0 + above * dz, dz, t0, contract.T, dt);
}

/// Backward implicit Euler for
///   -dv_n/ds + n (f(z) + r) v_n = alpha dv_n/dz + gamma^2/2 d2v_n/dz2 + n g(s) v_{n-1},  v_n(T) = 0
/// with central differences inside and linear extrapolation (zero second derivative,
/// one-sided first derivative) at both edges.
inline MomentGrid solve_moment(int n, const MomentGrid& prev, const DiffusionSpec& spec, const IntensityModel& model,
                               const ContractSpec& contract, const Grid1D& grid) {
    if (n < 1) throw ValidationError("solve_moment: order must be >= 1");
    if (prev.order != n - 1) throw ValidationError("solve_moment: previous moment has the wrong order");
    if (!(prev.grid == grid) || prev.values.size() != grid.nz * grid.nt) {
        throw ValidationError("solve_moment: previous moment lives on a different grid");
    }
    if (spec.dim != 1) throw ValidationError("solve_moment: a one-dimensional diffusion is required");
    if (grid.nz < 3) throw ValidationError("solve_moment: grid needs at least 3 space nodes");

    const std::size_t nz = grid.nz;
    const double order = static_cast<double>(n);
    const double dz = grid.dz;
    MomentGrid out{n, grid, std::vector<double>(grid.nz * grid.nt, 0.0), 0.0};

    std::vector<double> killing(nz);
    for (std::size_t i = 0; i < nz; ++i) killing[i] = order * (softplus(grid.z(i), model.delta_d) + contract.r);

    std::vector<double> lower(nz - 1);
    std::vector<double> diag(nz);
    std::vector<double> upper(nz - 1);
    std::vector<double> rhs(nz);
    std::vector<double> scratch(nz);

    for (std::size_t k = grid.nt - 1; k-- > 0;) {
        const double s = grid.t(k);
        const double h = grid.t(k + 1) - s;
        const AffineDrift drift = spec.affine_drift(s);
        const double gamma = spec.diffusion(s)(0, 0);
        const double half_g2 = 0.5 * gamma * gamma;
        const double source = order * contract.payment(s);
        const auto next = out.row(k + 1);
        const auto lower_moment = prev.row(k);

        for (std::size_t i = 0; i < nz; ++i) {
            const double alpha = drift.offset[0] + drift.slope(0, 0) * grid.z(i);
            rhs[i] = next[i] + h * source * lower_moment[i];
            if (i == 0) {
                diag[i] = 1.0 + h * killing[i] + h * alpha / dz;
                upper[i] = -h * alpha / dz;
            } else if (i + 1 == nz) {
                diag[i] = 1.0 + h * killing[i] - h * alpha / dz;
                lower[i - 1] = h * alpha / dz;
            } else {
                const double adv = alpha / (2.0 * dz);
                const double dif = half_g2 / (dz * dz);
                lower[i - 1] = h * (adv - dif);
                diag[i] = 1.0 + h * killing[i] + 2.0 * h * dif;
                upper[i] = -h * (adv + dif);
                if (alpha != 0.0) {
                    const double pe = gamma > 0.0 ? std::abs(alpha) * dz / (gamma * gamma)
                                                  : std::numeric_limits<double>::infinity();
                    out.max_peclet = std::max(out.max_peclet, pe);
                }
            }
        }
        std::span<double> target(out.values.data() + k * nz, nz);
        tridiagonal_solve(lower, diag, upper, rhs, target, scratch);
    }
    return out;
}

/// Bilinear interpolation on a moment grid; exact at nodes, no extrapolation.
inline double interpolate(const MomentGrid& m, double t, double z) {
    const Grid1D& g = m.grid;
    const double tol_t = 1e-12 * std::max(1.0, std::abs(g.T));
    const double tol_z = 1e-12 * std::max(1.0, std::abs(g.z_max) + std::abs(g.z_min));
    if (t < g.t0 - tol_t || t > g.T + tol_t || z < g.z_min - tol_z || z > g.z_max + tol_z) {
        throw DomainError("interpolate: (" + std::to_string(t) + ", " + std::to_string(z) + ") lies outside the grid");
    }
    auto locate = [](double x, double origin, double step, std::size_t count) {
        if (count == 1) return std::pair<std::size_t, double>{0, 0.0};
        double pos = (x - origin) / step;
        pos = std::clamp(pos, 0.0, static_cast<double>(count - 1));
        auto idx = static_cast<std::size_t>(std::floor(pos));
        if (idx >= count - 1) idx = count - 2;
        return std::pair<std::size_t, double>{idx, pos - static_cast<double>(idx)};
    };
    const auto [k, wt] = locate(t, g.t0, g.dt, g.nt);
    const auto [i, wz] = locate(z, g.z_min, g.dz, g.nz);
    auto value = [&](std::size_t kk, std::size_t ii) { return m.at(std::min(kk, g.nt - 1), std::min(ii, g.nz - 1)); };
    const double lo = (1.0 - wz) * value(k, i) + (wz > 0.0 ? wz * value(k, i + 1) : 0.0);
    if (wt == 0.0) return lo;
    const double hi = (1.0 - wz) * value(k + 1, i) + (wz > 0.0 ? wz * value(k + 1, i + 1) : 0.0);
    return (1.0 - wt) * lo + wt * hi;
}

struct MomentSolution {
    std::vector<MomentGrid> moments;  // v_1 ... v_nmax
    std::vector<double> point_values; // v_n(t0, z0)
    double z0 = 0.0;
};

/// Solves the moment chain v_1, ..., v_{n_max} starting from v_0 = 1.
inline MomentSolution solve_moments(int n_max, const DiffusionSpec& spec, const IntensityModel& model,
                                    const ContractSpec& contract, const Grid1D& grid) {
    if (n_max < 1) throw ValidationError("solve_moments: n_max must be >= 1");
    MomentSolution sol;
    sol.z0 = spec.initial_state[0];
    MomentGrid prev = MomentGrid::constant_one(grid);
    for (int n = 1; n <= n_max; ++n) {
        MomentGrid next = solve_moment(n, prev, spec, model, contract, grid);
        sol.point_values.push_back(interpolate(next, grid.t0, sol.z0));
        sol.moments.push_back(next);
        prev = std::move(next);
    }
    return sol;
}

} // namespace stocres
