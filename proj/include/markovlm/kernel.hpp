#ifndef MARKOVLM_KERNEL_HPP
#define MARKOVLM_KERNEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"
#include "markovlm/matrix.hpp"

namespace markovlm {

// Entries at or below this are treated as structural zeros when deciding
// support and equivalence.
inline constexpr double kZeroThreshold = 1e-15;
inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;
// Chains longer than this multiply path probabilities in log space.
inline constexpr std::size_t kLogSpaceColumns = 30;

// Time-inhomogeneous Markov kernel on a layered DAG: a distribution over
// the first column plus one row-stochastic matrix per column transition.
// The hop from the last column into the sink has probability one and is
// not stored.
class TransitionKernel {
public:
    TransitionKernel(std::vector<double> initial, std::vector<Matrix> steps)
        : initial_(std::move(initial)), steps_(std::move(steps)) {
        validate();
    }

    const std::vector<double>& initial() const noexcept { return initial_; }
    // Transition from column k to column k+1.
    const Matrix& step(std::size_t k) const { return steps_.at(k); }
    const std::vector<Matrix>& steps() const noexcept { return steps_; }

    std::size_t columns() const noexcept { return levels_.size(); }
    const std::vector<std::size_t>& levels() const noexcept { return levels_; }
    DagSpec spec() const { return DagSpec{levels_, {}}; }

    // Probability of entering `to` in `column` given the previous level
    // `from` (ignored for column 0, which is entered from the source).
    double entry(std::size_t column, std::size_t from, std::size_t to) const {
        return column == 0 ? initial_[to] : steps_[column - 1](from, to);
    }

    bool operator==(const TransitionKernel& other) const {
        return initial_ == other.initial_ && steps_ == other.steps_;
    }

private:
    void validate() {
        if (initial_.empty()) throw ValidationError("kernel: empty initial distribution");
        levels_.clear();
        levels_.push_back(initial_.size());
        check_distribution(initial_, "initial distribution");
        for (std::size_t k = 0; k < steps_.size(); ++k) {
            const Matrix& m = steps_[k];
            if (m.rows() != levels_.back()) {
                throw ValidationError("kernel: step " + std::to_string(k + 1) + " has " +
                                      std::to_string(m.rows()) + " rows, expected " +
                                      std::to_string(levels_.back()));
            }
            if (m.cols() == 0) {
                throw ValidationError("kernel: step " + std::to_string(k + 1) + " has no columns");
            }
            for (std::size_t r = 0; r < m.rows(); ++r) {
                check_distribution(m.row(r), "step " + std::to_string(k + 1) + " row " +
                                                 std::to_string(r + 1));
            }
            levels_.push_back(m.cols());
        }
    }

    static void check_distribution(std::span<const double> p, const std::string& what) {
        double total = 0.0;
        for (double v : p) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw ValidationError("kernel: " + what + " has a negative or non-finite entry");
            }
            total += v;
        }
        if (std::abs(total - 1.0) > kStochasticTolerance) {
            throw ValidationError("kernel: " + what + " sums to " + std::to_string(total) +
                                  ", expected 1");
        }
    }

    std::vector<double> initial_;
    std::vector<Matrix> steps_;
    std::vector<std::size_t> levels_;
};

inline void require_same_shape(const TransitionKernel& q, const DagSpec& spec) {
    if (q.levels() != spec.levels) throw ValidationError("kernel shape does not match DAG spec");
}

inline void require_same_shape(const TransitionKernel& a, const TransitionKernel& b) {
    if (a.levels() != b.levels()) throw ValidationError("kernels have different shapes");
}

inline void require_node(const TransitionKernel& q, const Node& node) {
    if (node.column >= q.columns() || node.level >= q.levels()[node.column]) {
        throw ValidationError("node out of range: " + to_string(node));
    }
}

// Independent uniform choice in every column.
inline TransitionKernel uniform_kernel(const DagSpec& spec) {
    require_valid(spec);
    std::vector<double> initial(spec.levels[0], 1.0 / static_cast<double>(spec.levels[0]));
    std::vector<Matrix> steps;
    for (std::size_t k = 0; k + 1 < spec.columns(); ++k) {
        steps.emplace_back(spec.levels[k], spec.levels[k + 1],
                           1.0 / static_cast<double>(spec.levels[k + 1]));
    }
    return TransitionKernel(std::move(initial), std::move(steps));
}

// log P^Q(path); -infinity off the support.
inline double log_path_probability(const TransitionKernel& q, const Path& path) {
    require_path(path, q.spec());
    double total = 0.0;
    for (std::size_t j = 0; j < path.size(); ++j) {
        double p = q.entry(j, j ? path[j - 1] : 0, path[j]);
        if (p <= 0.0) return -std::numeric_limits<double>::infinity();
        total += std::log(p);
    }
    return total;
}

inline double path_probability(const TransitionKernel& q, const Path& path) {
    if (q.columns() > kLogSpaceColumns) return std::exp(log_path_probability(q, path));
    require_path(path, q.spec());
    double total = 1.0;
    for (std::size_t j = 0; j < path.size(); ++j) total *= q.entry(j, j ? path[j - 1] : 0, path[j]);
    return total;
}

// Marginal distribution of the level visited in every column, by forward
// propagation of the initial distribution.
inline std::vector<std::vector<double>> forward_marginals(const TransitionKernel& q) {
    std::vector<std::vector<double>> out;
    out.reserve(q.columns());
    out.push_back(q.initial());
    for (std::size_t k = 0; k + 1 < q.columns(); ++k) {
        const Matrix& m = q.step(k);
        std::vector<double> next(m.cols(), 0.0);
        const auto& prev = out.back();
        for (std::size_t a = 0; a < m.rows(); ++a) {
            if (prev[a] == 0.0) continue;
            for (std::size_t b = 0; b < m.cols(); ++b) next[b] += prev[a] * m(a, b);
        }
        out.push_back(std::move(next));
    }
    return out;
}

inline double node_marginal(const TransitionKernel& q, const Node& node) {
    require_node(q, node);
    // Only propagate as far as the requested column.
    std::vector<double> current = q.initial();
    for (std::size_t k = 0; k < node.column; ++k) {
        const Matrix& m = q.step(k);
        std::vector<double> next(m.cols(), 0.0);
        for (std::size_t a = 0; a < m.rows(); ++a) {
            if (current[a] == 0.0) continue;
            for (std::size_t b = 0; b < m.cols(); ++b) next[b] += current[a] * m(a, b);
        }
        current = std::move(next);
    }
    return current[node.level];
}

inline bool node_reachable(const TransitionKernel& q, const Node& node) {
    return node_marginal(q, node) > 0.0;
}

// P^Q(P = path | P[j] = i). Throws when (i,j) is unreachable under Q.
inline double conditional_path_probability(const TransitionKernel& q, const Path& path,
                                           const Node& node, double marginal) {
    if (!(marginal > 0.0)) {
        throw PreconditionError("conditioning on null event: node " + to_string(node) +
                                " is unreachable");
    }
    if (!path.passes_through(node)) return 0.0;
    if (q.columns() > kLogSpaceColumns) {
        return std::exp(log_path_probability(q, path) - std::log(marginal));
    }
    return path_probability(q, path) / marginal;
}

inline double conditional_path_probability(const TransitionKernel& q, const Path& path,
                                           const Node& node) {
    require_path(path, q.spec());
    return conditional_path_probability(q, path, node, node_marginal(q, node));
}

struct WeightedPath {
    Path path;
    double probability = 0.0;
};

inline void check_enumeration_cap(const std::vector<std::size_t>& levels, std::uint64_t cap) {
    DagSpec spec{levels, {}};
    auto count = spec.path_count();
    if (count > cap) {
        throw PreconditionError("path enumeration over " + std::to_string(count) +
                                " paths exceeds the cap of " + std::to_string(cap) +
                                "; use sampling-based methods instead");
    }
}

// Every path of positive probability, optionally restricted to those
// passing through `through`. Probabilities are joint (unconditional), so
// the restricted list sums to node_marginal.
inline std::vector<WeightedPath> enumerate_support_paths(
        const TransitionKernel& q, std::optional<Node> through = std::nullopt,
        std::uint64_t cap = kDefaultEnumerationCap) {
    check_enumeration_cap(q.levels(), cap);
    if (through) require_node(q, *through);

    std::vector<WeightedPath> out;
    const std::size_t c = q.columns();
    std::vector<std::uint32_t> current(c, 0);
    std::vector<double> prefix(c + 1, 1.0);

    // Depth-first over columns, pruning zero-probability transitions.
    auto recurse = [&](auto&& self, std::size_t column) -> void {
        if (column == c) {
            out.push_back(WeightedPath{Path(current), prefix[c]});
            return;
        }
        std::size_t lo = 0;
        std::size_t hi = q.levels()[column];
        if (through && through->column == column) {
            lo = through->level;
            hi = lo + 1;
        }
        for (std::size_t i = lo; i < hi; ++i) {
            double p = q.entry(column, column ? current[column - 1] : 0, i);
            if (p <= kZeroThreshold) continue;
            current[column] = static_cast<std::uint32_t>(i);
            prefix[column + 1] = prefix[column] * p;
            self(self, column + 1);
        }
    };
    recurse(recurse, 0);
    return out;
}

// Same support pattern entry by entry (entries <= kZeroThreshold are zero).
inline bool kernels_equivalent(const TransitionKernel& a, const TransitionKernel& b) {
    require_same_shape(a, b);
    auto positive = [](double v) { return v > kZeroThreshold; };
    for (std::size_t i = 0; i < a.initial().size(); ++i)
        if (positive(a.initial()[i]) != positive(b.initial()[i])) return false;
    for (std::size_t k = 0; k < a.steps().size(); ++k) {
        const Matrix& x = a.step(k);
        const Matrix& y = b.step(k);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t col = 0; col < x.cols(); ++col)
                if (positive(x(r, col)) != positive(y(r, col))) return false;
    }
    return true;
}

struct KernelEstimate {
    TransitionKernel kernel;
    // Nodes never visited by the data. Outgoing rows of these nodes are
    // uniform placeholders; the nodes themselves have marginal zero when
    // smoothing is off, so anything conditioning on them refuses.
    std::vector<Node> unobserved;
};

// Empirical initial distribution and transition frequencies, with optional
// additive smoothing `alpha` (0 = raw frequencies).
inline KernelEstimate estimate_kernel(const PathDataset& data, double alpha = 0.0) {
    if (data.empty()) throw ValidationError("cannot estimate a kernel from an empty dataset");
    if (!(alpha >= 0.0)) throw InvalidArgument("smoothing parameter must be >= 0");
    const DagSpec& spec = data.spec();
    const std::size_t c = spec.columns();

    std::vector<double> first(spec.levels[0], 0.0);
    std::vector<Matrix> counts;
    std::vector<std::vector<std::size_t>> visits(c);
    for (std::size_t j = 0; j < c; ++j) visits[j].assign(spec.levels[j], 0);
    for (std::size_t k = 0; k + 1 < c; ++k) counts.emplace_back(spec.levels[k], spec.levels[k + 1]);

    for (const auto& rec : data.records()) {
        first[rec.path[0]] += 1.0;
        for (std::size_t j = 0; j < c; ++j) ++visits[j][rec.path[j]];
        for (std::size_t k = 0; k + 1 < c; ++k) counts[k](rec.path[k], rec.path[k + 1]) += 1.0;
    }

    KernelEstimate result{uniform_kernel(spec), {}};
    for (std::size_t j = 0; j < c; ++j)
        for (std::size_t i = 0; i < spec.levels[j]; ++i)
            if (visits[j][i] == 0) result.unobserved.push_back(Node{i, j});

    auto normalize = [alpha](std::span<double> row) {
        double total = 0.0;
        for (double& v : row) {
            v += alpha;
            total += v;
        }
        if (total == 0.0) {
            for (double& v : row) v = 1.0 / static_cast<double>(row.size());
            return;
        }
        for (double& v : row) v /= total;
    };
    normalize(first);
    for (auto& m : counts)
        for (std::size_t r = 0; r < m.rows(); ++r) normalize(m.row(r));

    result.kernel = TransitionKernel(std::move(first), std::move(counts));
    return result;
}

// True when nodes i and i2 of `column` have identical incoming kernel
// columns and identical outgoing rows; the naive estimators then compare
// the two nodes consistently.
inline bool check_column_exchangeable(const TransitionKernel& q, std::size_t column,
                                      std::size_t level, std::size_t other_level) {
    const Node a{level, column};
    const Node b{other_level, column};
    require_node(q, a);
    require_node(q, b);
    for (const Node& n : {a, b}) {
        if (!node_reachable(q, n)) {
            throw PreconditionError("node " + to_string(n) + " is unreachable");
        }
    }
    auto close = [](double x, double y) { return std::abs(x - y) <= kStochasticTolerance; };
    if (column == 0) {
        if (!close(q.initial()[level], q.initial()[other_level])) return false;
    } else {
        const Matrix& in = q.step(column - 1);
        for (std::size_t r = 0; r < in.rows(); ++r)
            if (!close(in(r, level), in(r, other_level))) return false;
    }
    if (column + 1 < q.columns()) {
        const Matrix& out = q.step(column);
        for (std::size_t col = 0; col < out.cols(); ++col)
            if (!close(out(level, col), out(other_level, col))) return false;
    }
    return true;
}

}  // namespace markovlm

#endif  // MARKOVLM_KERNEL_HPP
