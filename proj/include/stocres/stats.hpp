#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "stocres/errors.hpp"

namespace stocres {

/// Immutable sorted sample.
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<double> sample) : sample_(std::move(sample)) {
        if (sample_.empty()) throw ValidationError("empirical distribution: sample is empty");
        for (double v : sample_) {
            if (std::isnan(v)) throw ValidationError("empirical distribution: NaN in sample");
        }
        std::sort(sample_.begin(), sample_.end());
    }

    std::span<const double> sample() const { return sample_; }
    std::size_t size() const { return sample_.size(); }
    double min() const { return sample_.front(); }
    double max() const { return sample_.back(); }

    EmpiricalDistribution scaled(double c) const {
        std::vector<double> s(sample_);
        for (double& v : s) v *= c;
        return EmpiricalDistribution(std::move(s));
    }

private:
    std::vector<double> sample_;
};

/// Fraction of the sample <= x.
inline double ecdf(const EmpiricalDistribution& dist, double x) {
    const auto s = dist.sample();
    const auto it = std::upper_bound(s.begin(), s.end(), x);
    return static_cast<double>(it - s.begin()) / static_cast<double>(s.size());
}

/// Lower empirical quantile sample[ceil(p n) - 1]; positively homogeneous.
inline double quantile(const EmpiricalDistribution& dist, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("quantile: p must lie in (0, 1]");
    const auto n = dist.size();
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return dist.sample()[rank - 1];
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct MomentEstimate {
    double estimate = 0.0;
    double low = 0.0;
    double high = 0.0;
};

/// Mean of V^k with a normal-approximation confidence interval at the given level.
inline MomentEstimate moment_ci(const EmpiricalDistribution& dist, int k, double level) {
    const std::size_t n = dist.size();
    if (n < 2) throw ValidationError("moment_ci: need at least 2 observations");
    if (k < 1) throw ValidationError("moment_ci: moment order must be >= 1");
    if (!(level >= 0.0 && level < 1.0)) throw DomainError("moment_ci: level must lie in [0, 1)");

    std::vector<double> powers(n);
    const auto s = dist.sample();
    for (std::size_t i = 0; i < n; ++i) powers[i] = std::pow(s[i], k);
    double mean = 0.0;
    for (double v : powers) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : powers) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    const double z = level == 0.0 ? 0.0 : normal_quantile(0.5 * (1.0 + level));
    const double half = z * sd / std::sqrt(static_cast<double>(n));
    return {mean, mean - half, mean + half};
}

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
inline double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // Jacobi-theta form of the same function; the alternating series converges slowly here
        const double pi = 3.14159265358979323846;
        double sum = 0.0;
        for (int j = 1; j < 100; ++j) {
            const double term = std::exp(-(2.0 * j - 1) * (2.0 * j - 1) * pi * pi / (8.0 * lambda * lambda));
            sum += term;
            if (term < 1e-12) break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int j = 1; j < 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1) ? term : -term;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline KsResult ks_two_sample(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    const auto sa = a.sample();
    const auto sb = b.sample();
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == x) ++i;
        while (j < sb.size() && sb[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double lambda = d * std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_survival(lambda)};
}

} // namespace stocres
