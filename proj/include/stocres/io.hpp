#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stocres/errors.hpp"
#include "stocres/pde.hpp"
#include "stocres/stats.hpp"

namespace stocres {

/// Six significant digits; every number in a report goes through here.
inline std::string fmt6(double v) {
    if (v == 0.0) return "0"; // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline double round6(double v) { return v == 0.0 ? 0.0 : std::stod(fmt6(v)); }

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// Yearly fitted parameter vectors nu, flattened row-major in (i, j).
struct ParameterSeries {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> years;
    std::vector<std::vector<double>> rows;
};

/// Parses `year,nu_1_1,...,nu_n_m` CSV text. When expected_dim is given, the header must
/// have exactly expected_dim + 1 columns.
inline ParameterSeries parse_parameter_series(std::istream& in, std::optional<std::size_t> expected_dim = {}) {
    std::string line;
    if (!std::getline(in, line)) throw ShapeError("series: missing header");
    const auto header = detail::split(line, ',');
    if (expected_dim && header.size() != *expected_dim + 1) {
        throw ShapeError("series: header has " + std::to_string(header.size()) + " columns, expected n*m+1 = " +
                         std::to_string(*expected_dim + 1));
    }
    if (header.size() < 2 || header[0] != "year") throw ShapeError("series: header must start with 'year,nu_1_1'");

    // nu_i_j names must enumerate a full n x m block in row-major order
    std::size_t n = 0;
    std::size_t m = 0;
    {
        const std::string& last = header.back();
        if (std::sscanf(last.c_str(), "nu_%zu_%zu", &n, &m) != 2 || n == 0 || m == 0) {
            throw ShapeError("series: column '" + last + "' is not of the form nu_i_j");
        }
        if (n * m + 1 != header.size()) {
            throw ShapeError("series: header has " + std::to_string(header.size()) + " columns, but last column '" +
                             last + "' implies n*m+1 = " + std::to_string(n * m + 1));
        }
        std::size_t c = 1;
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 1; j <= m; ++j, ++c) {
                const std::string want = "nu_" + std::to_string(i) + "_" + std::to_string(j);
                if (header[c] != want) {
                    throw ShapeError("series: column " + std::to_string(c + 1) + " is '" + header[c] + "', expected '" +
                                     want + "'");
                }
            }
        }
    }

    ParameterSeries series{n, m, {}, {}};
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw ShapeError("series: row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                             " columns, expected " + std::to_string(header.size()));
        }
        std::vector<double> values;
        values.reserve(cells.size() - 1);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = detail::parse_double(cells[c]);
            if (!v) {
                throw ShapeError("series: row " + std::to_string(line_no) + ", column '" + header[c] +
                                 "': not a decimal number: '" + cells[c] + "'");
            }
            if (c == 0) {
                if (!series.years.empty() && *v != series.years.back() + 1.0) {
                    throw ShapeError("series: row " + std::to_string(line_no) +
                                     ": years must ascend in steps of exactly 1");
                }
                series.years.push_back(*v);
            } else {
                values.push_back(*v);
            }
        }
        series.rows.push_back(std::move(values));
    }
    return series;
}

inline ParameterSeries read_parameter_series(const std::filesystem::path& path,
                                             std::optional<std::size_t> expected_dim = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("series: cannot open " + path.string());
    return parse_parameter_series(in, expected_dim);
}

/// `value,cdf` at every sample point.
inline void write_distribution_csv(std::ostream& out, const EmpiricalDistribution& dist) {
    out << "value,cdf\n";
    const auto s = dist.sample();
    const double n = static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        // right-continuous: the cdf at a tied value counts all its copies
        std::size_t j = i;
        while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;
        out << fmt6(s[i]) << ',' << fmt6(static_cast<double>(j + 1) / n) << '\n';
    }
}

/// `t,z,v` triples; every `stride`-th time level and space node.
inline void write_moment_grid_csv(std::ostream& out, const MomentGrid& m, std::size_t stride = 1) {
    stride = std::max<std::size_t>(stride, 1);
    out << "t,z,v\n";
    const auto& g = m.grid;
    for (std::size_t k = 0; k < g.nt; k += stride) {
        for (std::size_t i = 0; i < g.nz; i += stride) {
            out << fmt6(g.t(k)) << ',' << fmt6(g.z(i)) << ',' << fmt6(m.at(k, i)) << '\n';
        }
    }
}

} // namespace stocres
