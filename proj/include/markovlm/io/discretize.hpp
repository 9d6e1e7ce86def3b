#ifndef MARKOVLM_IO_DISCRETIZE_HPP
#define MARKOVLM_IO_DISCRETIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "markovlm/error.hpp"
#include "markovlm/io/csv.hpp"

namespace markovlm::io {

// Groups [b0,b1], (b1,b2], ..., (b_{q-1},b_q]; a value equal to an inner
// break goes to the lower group.
struct DiscretizationRule {
    std::string source;
    std::size_t groups = 0;
    std::vector<double> breaks;

    // 0-based group of x.
    std::size_t group_of(double x) const {
        if (!(x >= breaks.front() && x <= breaks.back())) {
            throw ValidationError("value " + format_double(x) + " of " + (source.empty() ? "column" : source) +
                                  " lies outside [" + format_double(breaks.front()) + ", " +
                                  format_double(breaks.back()) + "]");
        }
        auto it = std::lower_bound(breaks.begin() + 1, breaks.end(), x);
        return static_cast<std::size_t>(it - (breaks.begin() + 1));
    }
};

// Linear-interpolation sample quantile (R's type 7) of sorted data.
inline double quantile_type7(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw PreconditionError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline DiscretizationRule quantile_discretize(std::vector<double> values, std::size_t q, std::string source = {}) {
    if (q < 2) throw InvalidArgument("number of groups must be >= 2");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("non-finite value in " + (source.empty() ? "column" : source));
    std::sort(values.begin(), values.end());
    const std::size_t distinct = std::set<double>(values.begin(), values.end()).size();
    if (distinct < q) {
        throw ValidationError("too few distinct values: " + std::to_string(distinct) + " for " + std::to_string(q) +
                              " groups");
    }
    DiscretizationRule rule{std::move(source), q, {}};
    for (std::size_t k = 0; k <= q; ++k) {
        const double p = static_cast<double>(k) / static_cast<double>(q);
        rule.breaks.push_back(quantile_type7(values, p));
    }
    for (std::size_t k = 1; k < rule.breaks.size(); ++k) {
        if (!(rule.breaks[k] > rule.breaks[k - 1])) {
            throw ValidationError("quantile breaks not strictly increasing at group " + std::to_string(k) +
                                  " (too many ties)");
        }
    }
    return rule;
}

inline std::vector<double> numeric_column(const CsvTable& table, const std::string& name) {
    const std::size_t col = table.column_index(name);
    std::vector<double> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto v = parse_double(table.rows[r][col]);
        if (!v) {
            throw ValidationError("row " + std::to_string(r + 1) + ": non-numeric value '" + table.rows[r][col] +
                                  "' in " + name);
        }
        out.push_back(*v);
    }
    return out;
}

// Appends column `target` holding the 1-based group of each row.
inline void apply_rule(CsvTable& table, const DiscretizationRule& rule, const std::string& target) {
    if (table.find(target)) throw ValidationError("column already exists: " + target);
    auto values = numeric_column(table, rule.source);
    table.header.push_back(target);
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        table.rows[r].push_back(std::to_string(rule.group_of(values[r]) + 1));
}

}  // namespace markovlm::io

#endif  // MARKOVLM_IO_DISCRETIZE_HPP
