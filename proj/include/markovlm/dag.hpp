#ifndef MARKOVLM_DAG_HPP
#define MARKOVLM_DAG_HPP

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "markovlm/error.hpp"
#include "markovlm/matrix.hpp"

namespace markovlm {

// Indices are 0-based throughout the library. File formats and reports use
// 1-based levels and columns; the conversion happens in io/.

// Layered DAG: column j offers levels[j] alternative nodes, and every
// source-to-sink path visits exactly one node per column. Source and sink
// are implicit.
struct DagSpec {
    std::vector<std::size_t> levels;
    // Optional category names, one list per column. Either empty or sized
    // like `levels`.
    std::vector<std::vector<std::string>> labels;

    std::size_t columns() const noexcept { return levels.size(); }

    std::size_t max_levels() const noexcept {
        return levels.empty() ? 0 : *std::max_element(levels.begin(), levels.end());
    }

    // Number of source-to-sink paths, saturating at uint64 max.
    std::uint64_t path_count() const noexcept {
        std::uint64_t total = 1;
        for (auto r : levels) {
            if (r == 0) return 0;
            if (total > std::numeric_limits<std::uint64_t>::max() / r)
                return std::numeric_limits<std::uint64_t>::max();
            total *= r;
        }
        return total;
    }

    std::string label(std::size_t column, std::size_t level) const {
        if (column < labels.size() && level < labels[column].size()) return labels[column][level];
        return std::to_string(level + 1);
    }

    bool same_shape(const DagSpec& other) const noexcept { return levels == other.levels; }
};

// A node (level i, column j) of the DAG.
struct Node {
    std::size_t level = 0;
    std::size_t column = 0;

    auto operator<=>(const Node&) const = default;
};

inline std::string to_string(const Node& node) {
    return "(" + std::to_string(node.level + 1) + "," + std::to_string(node.column + 1) + ")";
}

// Interior nodes of a path, one level per column.
struct Path {
    std::vector<std::uint32_t> nodes;

    Path() = default;
    explicit Path(std::vector<std::uint32_t> n) : nodes(std::move(n)) {}
    Path(std::initializer_list<std::uint32_t> n) : nodes(n) {}

    std::size_t size() const noexcept { return nodes.size(); }
    std::uint32_t operator[](std::size_t column) const { return nodes[column]; }
    bool passes_through(const Node& node) const {
        return node.column < nodes.size() && nodes[node.column] == node.level;
    }

    auto operator<=>(const Path&) const = default;
};

inline std::string to_string(const Path& path) {
    std::string out = "(";
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (k) out += ",";
        out += std::to_string(path[k] + 1);
    }
    return out + ")";
}

struct PathHash {
    std::size_t operator()(const Path& p) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (auto v : p.nodes) {
            h ^= v;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

// All invariant violations of the spec; an empty result means valid.
inline std::vector<std::string> validate_dag(const DagSpec& spec) {
    std::vector<std::string> violations;
    if (spec.levels.empty()) violations.emplace_back("no columns");
    for (std::size_t j = 0; j < spec.levels.size(); ++j) {
        if (spec.levels[j] == 0) violations.push_back("column " + std::to_string(j + 1) + " empty");
    }
    if (!spec.labels.empty()) {
        if (spec.labels.size() != spec.levels.size()) {
            violations.push_back("label lists: expected " + std::to_string(spec.levels.size()) +
                                 ", got " + std::to_string(spec.labels.size()));
        } else {
            for (std::size_t j = 0; j < spec.levels.size(); ++j) {
                const auto& names = spec.labels[j];
                if (names.size() != spec.levels[j]) {
                    violations.push_back("labels for column " + std::to_string(j + 1) + ": expected " +
                                         std::to_string(spec.levels[j]) + ", got " +
                                         std::to_string(names.size()));
                }
                std::set<std::string> distinct(names.begin(), names.end());
                if (distinct.size() != names.size()) {
                    violations.push_back("labels for column " + std::to_string(j + 1) + " not distinct");
                }
            }
        }
    }
    return violations;
}

inline void require_valid(const DagSpec& spec) {
    auto violations = validate_dag(spec);
    if (!violations.empty()) {
        std::string msg = "invalid DAG spec:";
        for (const auto& v : violations) msg += " " + v + ";";
        throw ValidationError(msg);
    }
}

inline bool path_valid(const Path& path, const DagSpec& spec) {
    if (path.size() != spec.columns()) return false;
    for (std::size_t j = 0; j < path.size(); ++j)
        if (path[j] >= spec.levels[j]) return false;
    return true;
}

inline void require_path(const Path& path, const DagSpec& spec) {
    if (!path_valid(path, spec)) throw ValidationError("path out of range: " + to_string(path));
}

inline bool node_valid(const Node& node, const DagSpec& spec) {
    return node.column < spec.columns() && node.level < spec.levels[node.column];
}

// r_max x c binary matrix with a single 1 per column at the visited level.
inline Matrix indicator_matrix(const Path& path, const DagSpec& spec) {
    require_path(path, spec);
    Matrix v(spec.max_levels(), spec.columns());
    for (std::size_t j = 0; j < path.size(); ++j) v(path[j], j) = 1.0;
    return v;
}

// Sum of the realized node contributions along the path. Entries of the
// realization that are NaN count as missing.
inline double cumulated_quality(const Path& path, const Matrix& realization) {
    if (path.size() > realization.cols()) {
        throw ValidationError("quality realization has " + std::to_string(realization.cols()) +
                              " columns, path needs " + std::to_string(path.size()));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < path.size(); ++j) {
        if (path[j] >= realization.rows() || std::isnan(realization(path[j], j))) {
            throw ValidationError("missing quality value at node " + to_string(Node{path[j], j}));
        }
        total += realization(path[j], j);
    }
    return total;
}

}  // namespace markovlm

#endif  // MARKOVLM_DAG_HPP
