#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stocres/errors.hpp"
#include "stocres/linalg.hpp"

namespace stocres {

/// Age basis function phi(x) = (intercept + slope * x) / divisor.
///
/// The divisor keeps rational coefficients such as (64 - x) / 39 exact at their roots.
struct AgeTerm {
    double intercept = 0.0;
    double slope = 0.0;
    double divisor = 1.0;

    double operator()(double x) const { return (intercept + slope * x) / divisor; }
};

enum class TimeKind { constant, linear, exponential };

/// Duration basis function psi(t): 1, t, or exp(-rate * t).
struct TimeTerm {
    TimeKind kind = TimeKind::constant;
    double rate = 0.0;

    static TimeTerm constant() { return {TimeKind::constant, 0.0}; }
    static TimeTerm linear() { return {TimeKind::linear, 0.0}; }
    static TimeTerm exponential(double rate) { return {TimeKind::exponential, rate}; }

    double value(double t) const {
        switch (kind) {
        case TimeKind::constant: return 1.0;
        case TimeKind::linear: return t;
        case TimeKind::exponential: return std::exp(-rate * t);
        }
        return 0.0;
    }

    double derivative(double t) const {
        switch (kind) {
        case TimeKind::constant: return 0.0;
        case TimeKind::linear: return 1.0;
        case TimeKind::exponential: return -rate * std::exp(-rate * t);
        }
        return 0.0;
    }
};

struct BasisSet {
    std::vector<AgeTerm> age_terms;
    std::vector<TimeTerm> time_terms;

    /// phi = {(64 - x)/39, (x - 25)/39}, psi = {1, t}
    static BasisSet linear() {
        return {{{64.0, -1.0, 39.0}, {-25.0, 1.0, 39.0}}, {TimeTerm::constant(), TimeTerm::linear()}};
    }

    /// phi as in linear(), psi = {1, exp(-t), exp(-2t)}
    static BasisSet exp3() {
        return {{{64.0, -1.0, 39.0}, {-25.0, 1.0, 39.0}},
                {TimeTerm::constant(), TimeTerm::exponential(1.0), TimeTerm::exponential(2.0)}};
    }

    std::size_t dim() const { return age_terms.size() * time_terms.size(); }

    /// True when every time term is constant or linear, i.e. the loading derivative is constant.
    bool has_constant_derivative() const {
        for (const auto& term : time_terms) {
            if (term.kind == TimeKind::exponential) return false;
        }
        return true;
    }

    void validate() const {
        if (age_terms.empty()) throw ValidationError("basis: at least one age term required");
        if (time_terms.empty()) throw ValidationError("basis: at least one time term required");
        for (const auto& a : age_terms) {
            if (!std::isfinite(a.intercept) || !std::isfinite(a.slope) || !std::isfinite(a.divisor) ||
                a.divisor == 0.0) {
                throw ValidationError("basis: age term coefficients must be finite with nonzero divisor");
            }
        }
        for (const auto& t : time_terms) {
            if (t.kind == TimeKind::exponential && (!std::isfinite(t.rate) || t.rate < 0.0)) {
                throw ValidationError("basis: exponential time term needs a finite rate >= 0");
            }
        }
    }
};

/// Gaussian random walk nu_t = nu0 + mu t + A W_t with A A^T = sigma.
struct RandomWalkParams {
    Vector nu0;
    Vector mu;
    Matrix sigma;
    Matrix chol;

    static RandomWalkParams make(Vector nu0, Vector mu, Matrix sigma) {
        const auto n = nu0.size();
        if (mu.size() != n || sigma.rows() != n || sigma.cols() != n) {
            throw DimensionError("random walk: nu0, mu and sigma dimensions disagree (nu0 has " +
                                 std::to_string(n) + ")");
        }
        Matrix chol = cholesky_psd(sigma);
        return {std::move(nu0), std::move(mu), std::move(sigma), std::move(chol)};
    }

    /// A random walk with no drift or noise: the environment stays at nu0.
    static RandomWalkParams frozen(Vector nu0) {
        const auto n = nu0.size();
        return make(std::move(nu0), Vector::Zero(n), Matrix::Zero(n, n));
    }
};

struct IntensityModel {
    BasisSet basis;
    double x = 55.0;
    double delta_d = 1.0;
    RandomWalkParams params;

    std::size_t dim() const { return basis.dim(); }

    void validate() const {
        basis.validate();
        if (!(delta_d > 0.0) || !std::isfinite(delta_d)) throw ValidationError("model: delta_d must be > 0");
        if (!std::isfinite(x)) throw ValidationError("model: inception age must be finite");
        const auto n = static_cast<Eigen::Index>(dim());
        if (params.nu0.size() != n || params.mu.size() != n || params.sigma.rows() != n ||
            params.sigma.cols() != n || params.chol.rows() != n || params.chol.cols() != n) {
            throw DimensionError("model: parameter vectors must have length n*m = " + std::to_string(n));
        }
    }
};

/// Annuity paying g(t) = g_const * exp(g_growth * t) continuously until T, discounted at r.
struct ContractSpec {
    double T = 10.0;
    double r = 0.02;
    double g_const = 1.0;
    double g_growth = 0.0;

    double payment(double t) const { return g_growth == 0.0 ? g_const : g_const * std::exp(g_growth * t); }

    void validate() const {
        if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("contract: T must be > 0");
        if (!(g_const >= 0.0) || !std::isfinite(g_const)) throw ValidationError("contract: g_const must be >= 0");
        if (!std::isfinite(r) || !std::isfinite(g_growth)) throw ValidationError("contract: r and g_growth must be finite");
    }
};

namespace detail {

template <typename TimeFn>
Vector loading_impl(const IntensityModel& model, TimeFn&& time_fn) {
    const auto& b = model.basis;
    Vector a(static_cast<Eigen::Index>(b.dim()));
    Eigen::Index k = 0;
    for (const auto& age : b.age_terms) {
        const double phi = age(model.x);
        for (const auto& term : b.time_terms) a[k++] = phi * time_fn(term);
    }
    return a;
}

} // namespace detail

/// a(t) with component (i, j) = phi^i(x) psi^j(t), flattened row-major in (i, j).
inline Vector loading_vector(const IntensityModel& model, double t) {
    return detail::loading_impl(model, [t](const TimeTerm& term) { return term.value(t); });
}

/// Analytic time derivative of loading_vector.
inline Vector loading_derivative(const IntensityModel& model, double t) {
    return detail::loading_impl(model, [t](const TimeTerm& term) { return term.derivative(t); });
}

/// log(1 + e^z) / delta_d without overflow for large z.
inline double softplus(double z, double delta_d) {
    if (z > 30.0) return (z + std::log1p(std::exp(-z))) / delta_d;
    return std::log1p(std::exp(z)) / delta_d;
}

inline double environment_score(const IntensityModel& model, double t, const Vector& nu) {
    if (nu.size() != static_cast<Eigen::Index>(model.dim())) {
        throw DimensionError("nu has length " + std::to_string(nu.size()) + ", expected " +
                             std::to_string(model.dim()));
    }
    return loading_vector(model, t).dot(nu);
}

/// Termination intensity q(t, nu) = softplus(a(t)^T nu) / delta_d.
inline double intensity(const IntensityModel& model, double t, const Vector& nu) {
    return softplus(environment_score(model, t, nu), model.delta_d);
}

/// Logistic termination probability over one delta_d period.
inline double termination_probability(const IntensityModel& model, double t, const Vector& nu) {
    const double z = environment_score(model, t, nu);
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct RandomWalkEstimate {
    Vector mu;
    Matrix sigma;
};

/// Drift and covariance of a unit-spaced parameter series from its first differences.
///
/// mu is the mean difference, sigma the unbiased covariance (divisor K - 2 for K rows).
inline RandomWalkEstimate estimate_random_walk(const std::vector<std::vector<double>>& series) {
    const std::size_t rows = series.size();
    if (rows < 3) {
        throw InsufficientDataError("estimate_random_walk: need at least 3 rows, got " + std::to_string(rows));
    }
    const std::size_t n = series.front().size();
    if (n == 0) throw ShapeError("estimate_random_walk: empty rows");
    for (std::size_t k = 0; k < rows; ++k) {
        if (series[k].size() != n) {
            throw ShapeError("estimate_random_walk: row " + std::to_string(k) + " has " +
                             std::to_string(series[k].size()) + " values, expected " + std::to_string(n));
        }
    }
    const auto dim = static_cast<Eigen::Index>(n);
    const std::size_t diffs = rows - 1;
    Matrix d(static_cast<Eigen::Index>(diffs), dim);
    for (std::size_t k = 0; k < diffs; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            d(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = series[k + 1][j] - series[k][j];
        }
    }
    Vector mu = d.colwise().mean().transpose();
    Matrix centered = d.rowwise() - mu.transpose();
    Matrix sigma = (centered.transpose() * centered) / static_cast<double>(diffs - 1);
    return {std::move(mu), std::move(sigma)};
}

} // namespace stocres
