#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stocres/errors.hpp"
#include "stocres/io.hpp"
#include "stocres/model.hpp"
#include "stocres/simulate.hpp"

namespace stocres {

/// Sectioned `key = value` text; values are scalars, strings or bracketed comma lists
/// (nested for matrices). `#` starts a comment.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string section;
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string_view line = raw;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string_view::npos) {
                section = std::string(detail::trim(line.substr(1, line.size() - 2)));
                if (section.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty section");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
            }
            if (section.empty()) {
                throw ValidationError("config line " + std::to_string(line_no) + ": key outside of a [section]");
            }
            const std::string key = section + "." + std::string(detail::trim(line.substr(0, eq)));
            if (cfg.values_.count(key)) throw ValidationError(key + ": duplicate key");
            cfg.values_[key] = std::string(detail::trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    void reject_unknown(const std::set<std::string>& allowed) const {
        for (const auto& [key, _] : values_) {
            if (!allowed.count(key)) throw ValidationError(key + ": unknown key");
        }
    }

    std::string get_string(const std::string& key) const { return at(key); }

    double get_number(const std::string& key) const {
        const auto v = detail::parse_double(at(key));
        if (!v) throw ValidationError(key + ": expected a number, got '" + at(key) + "'");
        return *v;
    }

    std::int64_t get_integer(const std::string& key) const {
        const std::string& s = at(key);
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ValidationError(key + ": expected an integer, got '" + s + "'");
        }
        return v;
    }

    std::uint64_t get_unsigned(const std::string& key) const {
        const std::string& s = at(key);
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ValidationError(key + ": expected a non-negative integer, got '" + s + "'");
        }
        return v;
    }

    bool get_bool(const std::string& key) const {
        const std::string& s = at(key);
        if (s == "true") return true;
        if (s == "false") return false;
        throw ValidationError(key + ": expected true or false, got '" + s + "'");
    }

    /// Flat list of tokens from `[a, b, c]`.
    std::vector<std::string> get_tokens(const std::string& key) const {
        const auto rows = nested(key);
        if (rows.size() != 1 || rows[0].nested) throw ValidationError(key + ": expected a flat list [a, b, ...]");
        return rows[0].items;
    }

    std::vector<double> get_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& tok : get_tokens(key)) out.push_back(to_number(key, tok));
        return out;
    }

    /// `[[a, b], [c, d]]` as rows.
    std::vector<std::vector<double>> get_matrix(const std::string& key) const {
        const auto rows = nested(key);
        if (rows.empty() || !rows[0].nested) throw ValidationError(key + ": expected a list of lists [[...], ...]");
        std::vector<std::vector<double>> out;
        for (const auto& row : rows) {
            std::vector<double> r;
            for (const auto& tok : row.items) r.push_back(to_number(key, tok));
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    struct Row {
        std::vector<std::string> items;
        bool nested = false;
    };

    const std::string& at(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError(key + ": missing");
        return it->second;
    }

    static double to_number(const std::string& key, const std::string& tok) {
        const auto v = detail::parse_double(tok);
        if (!v) throw ValidationError(key + ": '" + tok + "' is not a number");
        return *v;
    }

    std::vector<Row> nested(const std::string& key) const {
        std::string_view s = detail::trim(at(key));
        if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
            throw ValidationError(key + ": expected a bracketed list");
        }
        s = detail::trim(s.substr(1, s.size() - 2));
        std::vector<Row> rows;
        if (s.empty()) return {Row{}};
        if (s.front() != '[') {
            Row row;
            for (auto& tok : detail::split(s, ',')) {
                if (tok.empty() || tok.find_first_of("[]") != std::string::npos) {
                    throw ValidationError(key + ": malformed list");
                }
                row.items.push_back(tok);
            }
            return {row};
        }
        while (!s.empty()) {
            if (s.front() != '[') throw ValidationError(key + ": malformed nested list");
            const auto close = s.find(']');
            if (close == std::string_view::npos) throw ValidationError(key + ": unbalanced brackets");
            Row row;
            row.nested = true;
            const auto inner = detail::trim(s.substr(1, close - 1));
            if (!inner.empty()) {
                for (auto& tok : detail::split(inner, ',')) {
                    if (tok.empty() || tok.find('[') != std::string::npos) throw ValidationError(key + ": malformed nested list");
                    row.items.push_back(tok);
                }
            }
            rows.push_back(std::move(row));
            s = detail::trim(s.substr(close + 1));
            if (!s.empty()) {
                if (s.front() != ',') throw ValidationError(key + ": expected ',' between rows");
                s = detail::trim(s.substr(1));
            }
        }
        return rows;
    }

    std::map<std::string, std::string> values_;
};

struct PdeSettings {
    double dz = 0.005;
    double dt = 0.005;
    double k_sigma = 6.0;
    int moments = 3;
    std::vector<double> refinements; // Delta = dz = dt per level, for the convergence table
    bool dump_grid = false;
    std::size_t dump_stride = 10;
};

struct PortfolioSettings {
    std::size_t active = 0;
    std::vector<double> quantiles{0.5, 0.99, 0.995};
};

struct ExperimentConfig {
    std::string basis_tag = "linear";
    IntensityModel model;
    ContractSpec contract;
    SimConfig mc;
    PdeSettings pde;
    PortfolioSettings portfolio;
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> series;
};

namespace detail {

inline TimeTerm parse_time_term(const std::string& key, const std::string& tok) {
    if (tok == "constant") return TimeTerm::constant();
    if (tok == "linear") return TimeTerm::linear();
    if (tok.rfind("exp:", 0) == 0) {
        const auto rate = parse_double(std::string_view(tok).substr(4));
        if (!rate || *rate < 0.0) throw ValidationError(key + ": bad exponential rate in '" + tok + "'");
        return TimeTerm::exponential(*rate);
    }
    throw ValidationError(key + ": unknown time term '" + tok + "' (constant, linear, exp:<rate>)");
}

inline void require_multiple(const std::string& key, double span, double step) {
    const double q = span / step;
    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q)) {
        throw ValidationError(key + ": contract.T is not an integer multiple of this step");
    }
}

} // namespace detail

/// Reads and validates an experiment; every precondition is checked here, before any
/// computation, and errors name the offending key.
inline ExperimentConfig load_experiment(std::istream& in, const std::filesystem::path& base_dir = ".") {
    const KeyValueConfig kv = KeyValueConfig::parse(in);
    kv.reject_unknown({"model.basis", "model.age_terms", "model.time_terms", "model.x", "model.delta_d", "model.nu0",
                       "model.mu", "model.sigma", "model.series", "contract.T", "contract.r", "contract.g_const",
                       "contract.g_growth", "mc.paths", "mc.dt", "mc.seed", "mc.threads", "pde.dz", "pde.dt",
                       "pde.k_sigma", "pde.moments", "pde.refinements", "pde.dump_grid", "pde.dump_stride",
                       "portfolio.active", "portfolio.quantiles", "io.output"});
    ExperimentConfig cfg;

    // model
    cfg.basis_tag = kv.has("model.basis") ? kv.get_string("model.basis") : "linear";
    BasisSet basis;
    if (cfg.basis_tag == "linear") {
        basis = BasisSet::linear();
    } else if (cfg.basis_tag == "exp3") {
        basis = BasisSet::exp3();
    } else if (cfg.basis_tag == "custom") {
        for (const auto& row : kv.get_matrix("model.age_terms")) {
            if (row.size() != 2 && row.size() != 3) {
                throw ValidationError("model.age_terms: each term is [intercept, slope] or [intercept, slope, divisor]");
            }
            basis.age_terms.push_back({row[0], row[1], row.size() == 3 ? row[2] : 1.0});
        }
        for (const auto& tok : kv.get_tokens("model.time_terms")) {
            basis.time_terms.push_back(detail::parse_time_term("model.time_terms", tok));
        }
    } else {
        throw ValidationError("model.basis: unknown basis '" + cfg.basis_tag + "' (linear, exp3, custom)");
    }
    if (cfg.basis_tag != "custom" && (kv.has("model.age_terms") || kv.has("model.time_terms"))) {
        throw ValidationError("model.age_terms: only allowed with basis = custom");
    }
    try {
        basis.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("model.basis: ") + e.what());
    }
    const std::size_t dim = basis.dim();
    cfg.model.basis = basis;
    cfg.model.x = kv.has("model.x") ? kv.get_number("model.x") : 55.0;
    cfg.model.delta_d = kv.has("model.delta_d") ? kv.get_number("model.delta_d") : 1.0;
    if (!(cfg.model.delta_d > 0.0)) throw ValidationError("model.delta_d: must be > 0");

    std::optional<RandomWalkEstimate> fitted;
    std::optional<std::vector<double>> last_row;
    if (kv.has("model.series")) {
        std::filesystem::path p = kv.get_string("model.series");
        if (p.is_relative()) p = base_dir / p;
        cfg.series = p;
        try {
            const auto series = read_parameter_series(p, dim);
            std::vector<std::vector<double>> rows = series.rows;
            fitted = estimate_random_walk(rows);
            if (!rows.empty()) last_row = rows.back();
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("model.series: ") + e.what());
        }
    }

    auto vector_key = [&](const std::string& key, std::size_t n) {
        const auto v = kv.get_list(key);
        if (v.size() != n) {
            throw ValidationError(key + ": has " + std::to_string(v.size()) + " entries, expected n*m = " +
                                  std::to_string(n));
        }
        for (double x : v) {
            if (!std::isfinite(x)) throw ValidationError(key + ": non-finite entry");
        }
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(n)));
    };
    const auto n = static_cast<Eigen::Index>(dim);
    Vector nu0;
    if (kv.has("model.nu0")) {
        nu0 = vector_key("model.nu0", dim);
    } else if (last_row) {
        nu0 = Eigen::Map<const Vector>(last_row->data(), n);
    } else {
        throw ValidationError("model.nu0: missing (required unless model.series is given)");
    }
    Vector mu = kv.has("model.mu") ? vector_key("model.mu", dim) : (fitted ? fitted->mu : Vector::Zero(n));
    Matrix sigma = fitted ? fitted->sigma : Matrix::Zero(n, n);
    if (kv.has("model.sigma")) {
        const auto rows = kv.get_matrix("model.sigma");
        if (rows.size() != dim) {
            throw ValidationError("model.sigma: has " + std::to_string(rows.size()) + " rows, expected " +
                                  std::to_string(dim));
        }
        for (std::size_t i = 0; i < dim; ++i) {
            if (rows[i].size() != dim) {
                throw ValidationError("model.sigma: row " + std::to_string(i + 1) + " has " +
                                      std::to_string(rows[i].size()) + " entries, expected " + std::to_string(dim));
            }
            for (std::size_t j = 0; j < dim; ++j) sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    try {
        cfg.model.params = RandomWalkParams::make(nu0, mu, sigma);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("model.sigma: ") + e.what());
    }

    // contract
    cfg.contract.T = kv.has("contract.T") ? kv.get_number("contract.T") : 10.0;
    cfg.contract.r = kv.has("contract.r") ? kv.get_number("contract.r") : 0.02;
    cfg.contract.g_const = kv.has("contract.g_const") ? kv.get_number("contract.g_const") : 1.0;
    cfg.contract.g_growth = kv.has("contract.g_growth") ? kv.get_number("contract.g_growth") : 0.0;
    if (!(cfg.contract.T > 0.0)) throw ValidationError("contract.T: must be > 0");
    if (!(cfg.contract.g_const >= 0.0)) throw ValidationError("contract.g_const: must be >= 0");

    // mc
    if (kv.has("mc.paths")) {
        const auto p = kv.get_integer("mc.paths");
        if (p < 2) throw ValidationError("mc.paths: must be >= 2");
        cfg.mc.n_paths = static_cast<std::size_t>(p);
    }
    cfg.mc.dt = kv.has("mc.dt") ? kv.get_number("mc.dt") : 0.01;
    if (!(cfg.mc.dt > 0.0)) throw ValidationError("mc.dt: must be > 0");
    detail::require_multiple("mc.dt", cfg.contract.T, cfg.mc.dt);
    if (kv.has("mc.seed")) cfg.mc.seed = kv.get_unsigned("mc.seed");
    if (kv.has("mc.threads")) cfg.mc.parallelism.threads = static_cast<unsigned>(kv.get_unsigned("mc.threads"));

    // pde
    if (kv.has("pde.dz")) cfg.pde.dz = kv.get_number("pde.dz");
    if (kv.has("pde.dt")) cfg.pde.dt = kv.get_number("pde.dt");
    if (!(cfg.pde.dz > 0.0)) throw ValidationError("pde.dz: must be > 0");
    if (!(cfg.pde.dt > 0.0)) throw ValidationError("pde.dt: must be > 0");
    detail::require_multiple("pde.dt", cfg.contract.T, cfg.pde.dt);
    if (kv.has("pde.k_sigma")) cfg.pde.k_sigma = kv.get_number("pde.k_sigma");
    if (!(cfg.pde.k_sigma > 0.0)) throw ValidationError("pde.k_sigma: must be > 0");
    if (kv.has("pde.moments")) {
        const auto m = kv.get_integer("pde.moments");
        if (m < 1 || m > 10) throw ValidationError("pde.moments: must lie in [1, 10]");
        cfg.pde.moments = static_cast<int>(m);
    }
    if (kv.has("pde.refinements")) {
        cfg.pde.refinements = kv.get_list("pde.refinements");
        for (double d : cfg.pde.refinements) {
            if (!(d > 0.0)) throw ValidationError("pde.refinements: every level must be > 0");
            detail::require_multiple("pde.refinements", cfg.contract.T, d);
        }
    }
    if (kv.has("pde.dump_grid")) cfg.pde.dump_grid = kv.get_bool("pde.dump_grid");
    if (kv.has("pde.dump_stride")) {
        cfg.pde.dump_stride = kv.get_unsigned("pde.dump_stride");
        if (cfg.pde.dump_stride < 1) throw ValidationError("pde.dump_stride: must be >= 1");
    }

    // portfolio
    if (kv.has("portfolio.active")) cfg.portfolio.active = kv.get_unsigned("portfolio.active");
    if (kv.has("portfolio.quantiles")) {
        cfg.portfolio.quantiles = kv.get_list("portfolio.quantiles");
        for (double p : cfg.portfolio.quantiles) {
            if (!(p > 0.0 && p <= 1.0)) throw ValidationError("portfolio.quantiles: every p must lie in (0, 1]");
        }
    }

    if (kv.has("io.output")) cfg.output_dir = kv.get_string("io.output");
    return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path.string());
    return load_experiment(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

} // namespace stocres
