#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stocres/errors.hpp"

namespace stocres {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace detail {

// Semidefinite Cholesky: a pivot that vanishes to within tol gets a zero column,
// provided the rest of that column vanishes too. Returns nullopt on failure.
inline std::optional<Matrix> try_cholesky_semidefinite(const Matrix& a, double tol, double off_tol) {
    const Eigen::Index n = a.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d > tol) {
            const double ljj = std::sqrt(d);
            l(j, j) = ljj;
            for (Eigen::Index i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
                l(i, j) = s / ljj;
            }
        } else if (d >= -tol) {
            for (Eigen::Index i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
                if (std::abs(s) > off_tol) return std::nullopt;
            }
        } else {
            return std::nullopt;
        }
    }
    return l;
}

} // namespace detail

/// Lower-triangular A with A·Aᵀ = sigma for a symmetric positive semidefinite sigma.
///
/// Tries a plain (semidefinite-tolerant) factorization first; if that fails the
/// matrix is regularized once with 1e-12·trace(sigma) on the diagonal. Anything
/// still failing is not PSD.
inline Matrix cholesky_psd(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) {
        throw ShapeError("cholesky_psd: matrix is " + std::to_string(sigma.rows()) + "x" +
                         std::to_string(sigma.cols()) + ", expected square");
    }
    const Eigen::Index n = sigma.rows();
    if (n == 0) return Matrix(0, 0);
    if (!sigma.allFinite()) throw NotPsdError("cholesky_psd: non-finite entries");
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
    if (asym > 1e-12 * scale) throw ShapeError("cholesky_psd: matrix is not symmetric");

    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    const double off_tol = std::sqrt(tol * scale);
    if (auto l = detail::try_cholesky_semidefinite(sigma, tol, off_tol)) return *l;

    const double eps = 1e-12 * sigma.trace();
    if (eps > 0.0) {
        Matrix reg = sigma;
        reg.diagonal().array() += eps;
        if (auto l = detail::try_cholesky_semidefinite(reg, tol, off_tol)) return *l;
    }
    throw NotPsdError("cholesky_psd: matrix has a negative eigenvalue beyond the regularization budget");
}

/// Thomas algorithm for the system with sub-diagonal `lower` (n-1), diagonal `diag` (n),
/// super-diagonal `upper` (n-1). `scratch` needs n entries; `out` may alias `rhs`.
inline void tridiagonal_solve(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<const double> rhs,
                              std::span<double> out, std::span<double> scratch) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    if (lower.size() + 1 != n || upper.size() + 1 != n || rhs.size() != n || out.size() != n ||
        scratch.size() < n) {
        throw ShapeError("tridiagonal_solve: inconsistent band sizes");
    }
    auto check_pivot = [&](double pivot, std::size_t i) {
        const double row_scale = std::abs(diag[i]) + (i > 0 ? std::abs(lower[i - 1]) : 0.0) +
                                 (i + 1 < n ? std::abs(upper[i]) : 0.0);
        if (!std::isfinite(pivot) || std::abs(pivot) <= 1e-14 * row_scale || pivot == 0.0) {
            throw NumericalError("tridiagonal_solve: zero pivot at row " + std::to_string(i));
        }
    };

    // scratch holds the modified super-diagonal, out the modified rhs
    check_pivot(diag[0], 0);
    double pivot = diag[0];
    scratch[0] = n > 1 ? upper[0] / pivot : 0.0;
    out[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i - 1] * scratch[i - 1];
        check_pivot(pivot, i);
        scratch[i] = i + 1 < n ? upper[i] / pivot : 0.0;
        out[i] = (rhs[i] - lower[i - 1] * out[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) out[i] -= scratch[i] * out[i + 1];
}

inline std::vector<double> tridiagonal_solve(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs) {
    std::vector<double> out(diag.size());
    std::vector<double> scratch(diag.size());
    tridiagonal_solve(lower, diag, upper, rhs, out, scratch);
    return out;
}

} // namespace stocres
