#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "stocres/model.hpp"

namespace stocres {

enum class DiffusionKind { mimicked_1d, markov_2d };

inline const char* to_string(DiffusionKind kind) {
    return kind == DiffusionKind::mimicked_1d ? "mimicked_1d" : "markov_2d";
}

/// State of a Markov environment of dimension 1 or 2; unused components stay zero.
using State = Eigen::Vector2d;
using StateMatrix = Eigen::Matrix2d;

/// Drift of the form offset(t) + slope(t) * state.
struct AffineDrift {
    State offset = State::Zero();
    StateMatrix slope = StateMatrix::Zero();
};

/// Coefficients of dZ = drift(t, Z) dt + diffusion(t) dW for the environment.
///
/// Both constructions in this module have drift affine in the state, so the drift is
/// stored in that form; drift() evaluates it point-wise.
struct DiffusionSpec {
    int dim = 1;
    DiffusionKind kind = DiffusionKind::mimicked_1d;
    State initial_state = State::Zero();
    std::function<AffineDrift(double)> affine_drift;
    std::function<StateMatrix(double)> diffusion;

    State drift(double t, const State& z) const {
        const AffineDrift d = affine_drift(t);
        return d.offset + d.slope * z;
    }
};

struct MarginalStats {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean a(t)^T (nu0 + mu t) and variance t a(t)^T Sigma a(t) of Z_t = a(t)^T nu_t.
inline MarginalStats z_marginal_stats(const IntensityModel& model, double t) {
    const Vector a = loading_vector(model, t);
    const auto& p = model.params;
    return {a.dot(p.nu0 + p.mu * t), t * a.dot(p.sigma * a)};
}

/// gamma(t) = sqrt(a^T Sigma a).
inline double gamma_1d(const IntensityModel& model, double t) {
    const Vector a = loading_vector(model, t);
    return std::sqrt(std::max(0.0, a.dot(model.params.sigma * a)));
}

namespace detail {

struct MimicCoefficients {
    double base = 0.0;   // a^T mu + adot^T (nu0 + mu t)
    double mean = 0.0;   // a^T (nu0 + mu t)
    double beta = 0.0;   // a^T Sigma adot / a^T Sigma a, 0 when degenerate
    double gamma = 0.0;
};

inline MimicCoefficients mimic_coefficients(const IntensityModel& model, double t) {
    const auto& p = model.params;
    const Vector a = loading_vector(model, t);
    const Vector adot = loading_derivative(model, t);
    const Vector centre = p.nu0 + p.mu * t;
    const Vector sigma_a = p.sigma * a;
    const double var_rate = a.dot(sigma_a);

    MimicCoefficients c;
    c.base = a.dot(p.mu) + adot.dot(centre);
    c.mean = a.dot(centre);
    c.gamma = std::sqrt(std::max(0.0, var_rate));
    // Z_t is a.s. equal to its mean when a^T Sigma a vanishes; the regression term is dropped
    const double threshold = 1e-14 * (a.squaredNorm() * p.sigma.trace() + 1e-300);
    if (var_rate >= threshold) c.beta = adot.dot(sigma_a) / var_rate;
    return c;
}

} // namespace detail

/// Drift of the mimicking diffusion: E[adot^T nu_t + a^T mu | a^T nu_t = z].
inline double alpha_1d(const IntensityModel& model, double t, double z) {
    const auto c = detail::mimic_coefficients(model, t);
    return c.base + (z - c.mean) * c.beta;
}

/// One-dimensional Markov diffusion with the same one-time marginals as Z_t = a(t)^T nu_t.
///
/// This is an approximation for the present value: matching marginals of Z does not make
/// the path functional V match in law.
inline DiffusionSpec mimic_1d(const IntensityModel& model) {
    model.validate();
    DiffusionSpec spec;
    spec.dim = 1;
    spec.kind = DiffusionKind::mimicked_1d;
    spec.initial_state = State(loading_vector(model, 0.0).dot(model.params.nu0), 0.0);
    spec.affine_drift = [model](double t) {
        const auto c = detail::mimic_coefficients(model, t);
        AffineDrift d;
        d.offset[0] = c.base - c.beta * c.mean;
        d.slope(0, 0) = c.beta;
        return d;
    };
    spec.diffusion = [model](double t) {
        StateMatrix g = StateMatrix::Zero();
        g(0, 0) = gamma_1d(model, t);
        return g;
    };
    return spec;
}

/// Exact two-dimensional Markov lift (a^T nu_t, adot^T nu_t) for bases whose time terms are
/// constant or linear. Same law as the original environment, not an approximation.
inline DiffusionSpec markov_2d(const IntensityModel& model) {
    model.validate();
    if (!model.basis.has_constant_derivative()) {
        throw UnsupportedBasisError("markov_2d: every time term must be constant or linear");
    }
    const auto& p = model.params;
    const Vector adot = loading_derivative(model, 0.0);
    const double adot_mu = adot.dot(p.mu);
    const Vector sigma_adot = p.sigma * adot;
    const double adot_var = adot.dot(sigma_adot);

    DiffusionSpec spec;
    spec.dim = 2;
    spec.kind = DiffusionKind::markov_2d;
    spec.initial_state = State(loading_vector(model, 0.0).dot(p.nu0), adot.dot(p.nu0));
    spec.affine_drift = [model, adot_mu](double t) {
        AffineDrift d;
        d.offset = State(loading_vector(model, t).dot(model.params.mu), adot_mu);
        d.slope(0, 1) = 1.0;
        return d;
    };
    spec.diffusion = [model, sigma_adot, adot_var](double t) {
        const Vector a = loading_vector(model, t);
        const double c11 = a.dot(model.params.sigma * a);
        const double c12 = a.dot(sigma_adot);
        // closed-form 2x2 Cholesky of [[c11, c12], [c12, adot_var]]
        StateMatrix l = StateMatrix::Zero();
        if (c11 > 0.0) {
            l(0, 0) = std::sqrt(c11);
            l(1, 0) = c12 / l(0, 0);
            l(1, 1) = std::sqrt(std::max(0.0, adot_var - l(1, 0) * l(1, 0)));
        } else {
            l(1, 1) = std::sqrt(std::max(0.0, adot_var));
        }
        return l;
    };
    return spec;
}

} // namespace stocres
