#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stocres/errors.hpp"
#include "stocres/model.hpp"
#include "stocres/parallel.hpp"
#include "stocres/projection.hpp"
#include "stocres/rng.hpp"
#include "stocres/stats.hpp"

namespace stocres {

struct SimConfig {
    std::size_t n_paths = 10000;
    double dt = 0.01;
    std::uint64_t seed = 1;
    double t0 = 0.0;
    Parallelism parallelism{};
};

/// Uniform grid t0, t0 + dt, ..., T; T - t0 must be a multiple of dt to within 1e-9.
inline std::vector<double> make_time_grid(double t0, double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time grid: dt must be > 0");
    if (!(T >= t0)) throw ValidationError("time grid: T must not precede t0");
    const double steps = (T - t0) / dt;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
        throw ValidationError("time grid: T - t0 is not a multiple of dt");
    }
    const auto k = static_cast<std::size_t>(rounded);
    std::vector<double> grid(k + 1);
    for (std::size_t i = 0; i <= k; ++i) grid[i] = t0 + static_cast<double>(i) * dt;
    grid[k] = T;
    return grid;
}

inline void validate_sim_config(const SimConfig& cfg) {
    if (cfg.n_paths < 1) throw ValidationError("simulation: n_paths must be >= 1");
    if (!(cfg.dt > 0.0)) throw ValidationError("simulation: dt must be > 0");
    if (!std::isfinite(cfg.t0) || cfg.t0 < 0.0) throw ValidationError("simulation: t0 must be >= 0");
}

enum class PathSource { nu_exact, euler_1d, euler_2d };

/// n_paths x (K + 1) x dim array of environment states on a shared time grid.
struct PathSet {
    std::vector<double> time_grid;
    std::size_t n_paths = 0;
    std::size_t dim = 0;
    PathSource source = PathSource::nu_exact;
    std::vector<double> states;

    std::size_t steps() const { return time_grid.size(); }
    double at(std::size_t path, std::size_t step, std::size_t component) const {
        return states[(path * steps() + step) * dim + component];
    }
    std::span<const double> path(std::size_t index) const {
        return {states.data() + index * steps() * dim, steps() * dim};
    }
};

namespace detail {

inline void require_model_origin(const SimConfig& cfg) {
    // nu0 is the parameter value at duration 0, so model-driven paths start there
    if (cfg.t0 != 0.0) throw ValidationError("simulation: model-driven paths require t0 = 0");
}

} // namespace detail

/// Exact Gaussian increments of nu_t = nu0 + mu t + A W_t on a uniform grid, with the
/// score a(s)^T nu_s (and optionally adot(s)^T nu_s) read off per node.
class NuPathGenerator {
public:
    NuPathGenerator(const IntensityModel& model, std::vector<double> grid, std::uint64_t seed)
        : grid_(std::move(grid)), seed_(seed), dim_(static_cast<Eigen::Index>(model.dim())) {
        model.validate();
        if (grid_.size() < 1) throw ValidationError("nu paths: empty time grid");
        const double dt = grid_.size() > 1 ? grid_[1] - grid_[0] : 0.0;
        noise_step_ = model.params.chol * std::sqrt(dt);
        nu0_ = model.params.nu0;
        mu_ = model.params.mu;
        loadings_.resize(static_cast<Eigen::Index>(grid_.size()), dim_);
        derivs_.resize(static_cast<Eigen::Index>(grid_.size()), dim_);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            loadings_.row(static_cast<Eigen::Index>(k)) = loading_vector(model, grid_[k]).transpose();
            derivs_.row(static_cast<Eigen::Index>(k)) = loading_derivative(model, grid_[k]).transpose();
        }
    }

    const std::vector<double>& grid() const { return grid_; }
    std::size_t dim() const { return static_cast<std::size_t>(dim_); }

    /// Walks path `index`, calling visit(step, nu) at every node.
    template <typename Visit>
    void walk(std::size_t index, Visit&& visit) const {
        StreamRng rng(seed_, StreamPurpose::nu_paths, index);
        // only the Brownian part accumulates; the drift is added in closed form per node
        Vector aw = Vector::Zero(dim_);
        Vector xi(dim_);
        Vector nu = nu0_;
        visit(std::size_t{0}, nu);
        for (std::size_t k = 1; k < grid_.size(); ++k) {
            for (Eigen::Index j = 0; j < dim_; ++j) xi[j] = rng.normal();
            aw.noalias() += noise_step_ * xi;
            nu = nu0_ + mu_ * (grid_[k] - grid_[0]) + aw;
            visit(k, nu);
        }
    }

    void states(std::size_t index, std::span<double> out) const {
        walk(index, [&](std::size_t k, const Vector& nu) {
            for (Eigen::Index j = 0; j < dim_; ++j) out[k * static_cast<std::size_t>(dim_) + j] = nu[j];
        });
    }

    /// z1[k] = a(s_k)^T nu_k; z2[k] = adot(s_k)^T nu_k when z2 is non-empty.
    void scores(std::size_t index, std::span<double> z1, std::span<double> z2 = {}) const {
        walk(index, [&](std::size_t k, const Vector& nu) {
            z1[k] = loadings_.row(static_cast<Eigen::Index>(k)).dot(nu);
            if (!z2.empty()) z2[k] = derivs_.row(static_cast<Eigen::Index>(k)).dot(nu);
        });
    }

private:
    std::vector<double> grid_;
    std::uint64_t seed_;
    Eigen::Index dim_;
    Vector nu0_;
    Vector mu_;
    Matrix noise_step_;
    Matrix loadings_;
    Matrix derivs_;
};

/// Explicit Euler-Maruyama for a DiffusionSpec with coefficients cached per grid node.
class EulerPathGenerator {
public:
    EulerPathGenerator(const DiffusionSpec& spec, std::vector<double> grid, std::uint64_t seed)
        : grid_(std::move(grid)), seed_(seed), dim_(spec.dim), initial_(spec.initial_state) {
        if (dim_ != 1 && dim_ != 2) throw ValidationError("diffusion paths: dim must be 1 or 2");
        const std::size_t steps = grid_.size() > 0 ? grid_.size() - 1 : 0;
        drift_.resize(steps);
        noise_.resize(steps);
        dts_.resize(steps);
        for (std::size_t k = 0; k < steps; ++k) {
            const double dt = grid_[k + 1] - grid_[k];
            dts_[k] = dt;
            drift_[k] = spec.affine_drift(grid_[k]);
            noise_[k] = spec.diffusion(grid_[k]) * std::sqrt(dt);
        }
    }

    const std::vector<double>& grid() const { return grid_; }
    int dim() const { return dim_; }

    template <typename Visit>
    void walk(std::size_t index, Visit&& visit) const {
        StreamRng rng(seed_, dim_ == 1 ? StreamPurpose::euler_1d : StreamPurpose::euler_2d, index);
        State z = initial_;
        visit(std::size_t{0}, z);
        for (std::size_t k = 0; k < drift_.size(); ++k) {
            const AffineDrift& d = drift_[k];
            if (dim_ == 1) {
                const double xi = rng.normal();
                z[0] += (d.offset[0] + d.slope(0, 0) * z[0]) * dts_[k] + noise_[k](0, 0) * xi;
            } else {
                const State xi(rng.normal(), rng.normal());
                z += (d.offset + d.slope * z) * dts_[k] + noise_[k] * xi;
            }
            visit(k + 1, z);
        }
    }

private:
    std::vector<double> grid_;
    std::uint64_t seed_;
    int dim_;
    State initial_;
    std::vector<AffineDrift> drift_;
    std::vector<StateMatrix> noise_;
    std::vector<double> dts_;
};

inline PathSet simulate_nu_paths(const IntensityModel& model, const SimConfig& cfg, double horizon) {
    validate_sim_config(cfg);
    detail::require_model_origin(cfg);
    NuPathGenerator gen(model, make_time_grid(cfg.t0, horizon, cfg.dt), cfg.seed);
    PathSet set{gen.grid(), cfg.n_paths, gen.dim(), PathSource::nu_exact, {}};
    const std::size_t stride = set.steps() * set.dim;
    set.states.resize(cfg.n_paths * stride);
    parallel_for(cfg.n_paths, cfg.parallelism, [&](std::size_t i) {
        gen.states(i, std::span<double>(set.states.data() + i * stride, stride));
    });
    return set;
}

inline PathSet simulate_diffusion_paths(const DiffusionSpec& spec, const SimConfig& cfg, double horizon) {
    validate_sim_config(cfg);
    EulerPathGenerator gen(spec, make_time_grid(cfg.t0, horizon, cfg.dt), cfg.seed);
    const auto dim = static_cast<std::size_t>(spec.dim);
    PathSet set{gen.grid(), cfg.n_paths, dim, dim == 1 ? PathSource::euler_1d : PathSource::euler_2d, {}};
    const std::size_t stride = set.steps() * dim;
    set.states.resize(cfg.n_paths * stride);
    parallel_for(cfg.n_paths, cfg.parallelism, [&](std::size_t i) {
        double* out = set.states.data() + i * stride;
        gen.walk(i, [&](std::size_t k, const State& z) {
            for (std::size_t c = 0; c < dim; ++c) out[k * dim + c] = z[static_cast<Eigen::Index>(c)];
        });
    });
    return set;
}

/// Terminal states Z_T of a diffusion, without storing whole paths.
inline std::vector<State> terminal_states(const DiffusionSpec& spec, const SimConfig& cfg, double horizon) {
    validate_sim_config(cfg);
    EulerPathGenerator gen(spec, make_time_grid(cfg.t0, horizon, cfg.dt), cfg.seed);
    const std::size_t last = gen.grid().size() - 1;
    std::vector<State> out(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.parallelism, [&](std::size_t i) {
        gen.walk(i, [&](std::size_t k, const State& z) {
            if (k == last) out[i] = z;
        });
    });
    return out;
}

/// Trapezoidal evaluation of V = int g(s) exp(-int q) exp(-r (s - t0)) ds on a fixed grid.
class PresentValueKernel {
public:
    PresentValueKernel(const ContractSpec& contract, std::span<const double> grid)
        : grid_(grid.begin(), grid.end()), weight_(grid.size()) {
        contract.validate();
        check_grid(grid_);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            weight_[k] = contract.payment(grid_[k]) * std::exp(-contract.r * (grid_[k] - grid_.front()));
        }
    }

    const std::vector<double>& grid() const { return grid_; }

    /// Discounted payment rate g(s) e^{-r(s - t0)} at node k.
    double weight(std::size_t k) const { return weight_[k]; }

    double evaluate(std::span<const double> q) const {
        if (q.size() != grid_.size()) {
            throw ValidationError("present value: intensity path has " + std::to_string(q.size()) +
                                  " nodes, grid has " + std::to_string(grid_.size()));
        }
        double cum = 0.0;
        double prev = weight_[0];
        double total = 0.0;
        for (std::size_t k = 1; k < grid_.size(); ++k) {
            const double h = grid_[k] - grid_[k - 1];
            cum += 0.5 * h * (q[k - 1] + q[k]);
            const double cur = weight_[k] * std::exp(-cum);
            total += 0.5 * h * (prev + cur);
            prev = cur;
        }
        return total;
    }

    static void check_grid(std::span<const double> grid) {
        if (grid.empty()) throw ValidationError("present value: empty time grid");
        for (std::size_t k = 1; k < grid.size(); ++k) {
            if (!(grid[k] > grid[k - 1])) throw ValidationError("present value: time grid must be strictly increasing");
        }
    }

private:
    std::vector<double> grid_;
    std::vector<double> weight_;
};

/// Present value of one intensity path, trapezoid for both the inner and outer integral.
inline double present_value(std::span<const double> q_path, const ContractSpec& contract,
                            std::span<const double> time_grid) {
    return PresentValueKernel(contract, time_grid).evaluate(q_path);
}

/// Same functional via backward integration of dV = (q + r) V ds - g ds, V(T) = 0,
/// using the trapezoidal (Crank-Nicolson) rule on each interval.
inline double present_value_backward(std::span<const double> q_path, const ContractSpec& contract,
                                     std::span<const double> time_grid) {
    contract.validate();
    PresentValueKernel::check_grid(time_grid);
    if (q_path.size() != time_grid.size()) throw ValidationError("present value: misaligned intensity path");
    double v = 0.0;
    for (std::size_t k = time_grid.size() - 1; k-- > 0;) {
        const double h = time_grid[k + 1] - time_grid[k];
        const double rate_hi = q_path[k + 1] + contract.r;
        const double rate_lo = q_path[k] + contract.r;
        const double g_mean = 0.5 * (contract.payment(time_grid[k]) + contract.payment(time_grid[k + 1]));
        v = (v * (1.0 - 0.5 * h * rate_hi) + h * g_mean) / (1.0 + 0.5 * h * rate_lo);
    }
    return v;
}

/// Present values of the full nu model, one per path, in path order.
inline std::vector<double> present_value_paths(const IntensityModel& model, const ContractSpec& contract,
                                               const SimConfig& cfg) {
    validate_sim_config(cfg);
    detail::require_model_origin(cfg);
    NuPathGenerator gen(model, make_time_grid(cfg.t0, contract.T, cfg.dt), cfg.seed);
    PresentValueKernel kernel(contract, gen.grid());
    const std::size_t nodes = gen.grid().size();
    std::vector<double> values(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.parallelism, [&](std::size_t i) {
        std::vector<double> q(nodes);
        gen.scores(i, q);
        for (double& z : q) z = softplus(z, model.delta_d);
        values[i] = kernel.evaluate(q);
    });
    return values;
}

/// Present values from the exact two-dimensional functionals (a^T nu, adot^T nu) of the
/// same nu paths, with the intensity read from the first component.
inline std::vector<double> present_value_paths_lifted(const IntensityModel& model, const ContractSpec& contract,
                                                      const SimConfig& cfg) {
    if (!model.basis.has_constant_derivative()) {
        throw UnsupportedBasisError("two-dimensional functionals need constant or linear time terms");
    }
    validate_sim_config(cfg);
    detail::require_model_origin(cfg);
    NuPathGenerator gen(model, make_time_grid(cfg.t0, contract.T, cfg.dt), cfg.seed);
    PresentValueKernel kernel(contract, gen.grid());
    const std::size_t nodes = gen.grid().size();
    std::vector<double> values(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.parallelism, [&](std::size_t i) {
        std::vector<double> z1(nodes);
        std::vector<double> z2(nodes);
        gen.scores(i, z1, z2);
        for (double& z : z1) z = softplus(z, model.delta_d);
        values[i] = kernel.evaluate(z1);
    });
    return values;
}

/// Present values of a diffusion representation; the intensity is f(first component).
inline std::vector<double> present_value_paths(const DiffusionSpec& spec, double delta_d,
                                               const ContractSpec& contract, const SimConfig& cfg) {
    validate_sim_config(cfg);
    if (!(delta_d > 0.0)) throw ValidationError("simulation: delta_d must be > 0");
    EulerPathGenerator gen(spec, make_time_grid(cfg.t0, contract.T, cfg.dt), cfg.seed);
    PresentValueKernel kernel(contract, gen.grid());
    const std::size_t nodes = gen.grid().size();
    std::vector<double> values(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.parallelism, [&](std::size_t i) {
        std::vector<double> q(nodes);
        gen.walk(i, [&](std::size_t k, const State& z) { q[k] = softplus(z[0], delta_d); });
        values[i] = kernel.evaluate(q);
    });
    return values;
}

inline EmpiricalDistribution sample_present_values(const IntensityModel& model, const ContractSpec& contract,
                                                   const SimConfig& cfg) {
    return EmpiricalDistribution(present_value_paths(model, contract, cfg));
}

inline EmpiricalDistribution sample_present_values(const DiffusionSpec& spec, double delta_d,
                                                   const ContractSpec& contract, const SimConfig& cfg) {
    return EmpiricalDistribution(present_value_paths(spec, delta_d, contract, cfg));
}

/// Termination step of each policy given an intensity path: policy k ends during step j
/// (between nodes j and j + 1) or survives to the horizon (nullopt).
///
/// Each active policy terminates in step j with probability 1 - exp(-q_j dt_j). Drawing one
/// Exp(1) threshold per policy and locating it in the left-endpoint cumulative hazard gives
/// exactly that law, without a Bernoulli draw per step.
inline std::vector<std::optional<std::size_t>> thinning_events(std::span<const double> q_path,
                                                               std::span<const double> time_grid,
                                                               std::size_t n_policies, std::uint64_t seed,
                                                               Parallelism par = {}) {
    if (n_policies < 1) throw ValidationError("thinning: n_policies must be >= 1");
    PresentValueKernel::check_grid(time_grid);
    if (q_path.size() != time_grid.size()) throw ValidationError("thinning: misaligned intensity path");
    const std::size_t steps = time_grid.size() - 1;
    // hazard[j] = cumulative left-endpoint hazard up to node j
    std::vector<double> hazard(time_grid.size(), 0.0);
    for (std::size_t j = 0; j < steps; ++j) {
        if (q_path[j] < 0.0) throw ValidationError("thinning: negative intensity");
        hazard[j + 1] = hazard[j] + q_path[j] * (time_grid[j + 1] - time_grid[j]);
    }
    std::vector<std::optional<std::size_t>> events(n_policies);
    parallel_for(n_policies, par, [&](std::size_t k) {
        StreamRng rng(seed, StreamPurpose::thinning, k);
        const double threshold = rng.exponential();
        if (steps == 0 || hazard[steps] < threshold) return;
        const auto it = std::lower_bound(hazard.begin() + 1, hazard.end(), threshold);
        events[k] = static_cast<std::size_t>(it - hazard.begin()) - 1;
    });
    return events;
}

/// Fraction of policies still active at every grid node.
inline std::vector<double> survivor_fractions(const std::vector<std::optional<std::size_t>>& events,
                                              std::size_t nodes) {
    std::vector<double> deaths(nodes + 1, 0.0);
    for (const auto& e : events) {
        if (e) deaths[*e + 1] += 1.0;
    }
    std::vector<double> alive(nodes);
    double remaining = static_cast<double>(events.size());
    for (std::size_t j = 0; j < nodes; ++j) {
        remaining -= deaths[j];
        alive[j] = remaining / static_cast<double>(events.size());
    }
    return alive;
}

} // namespace stocres
