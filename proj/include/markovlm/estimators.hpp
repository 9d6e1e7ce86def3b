#ifndef MARKOVLM_ESTIMATORS_HPP
#define MARKOVLM_ESTIMATORS_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/matrix.hpp"

namespace markovlm {

enum class EstimatorKind { naive, weighted, plugin };
enum class Target { mean, variance };

inline const char* to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::naive: return "naive";
        case EstimatorKind::weighted: return "weighted";
        case EstimatorKind::plugin: return "plugin";
    }
    return "?";
}

inline const char* to_string(Target target) { return target == Target::mean ? "mean" : "variance"; }

struct EstimatorOptions {
    // Multiply variances by N/(N-1). Off by default: every estimator here
    // uses the 1/N normalization.
    bool bessel = false;
};

// Visit counts V(i,j) and response sums B(i,j), one pass over the records.
struct CountMatrices {
    Matrix sums;
    Matrix visits;
};

inline CountMatrices accumulate_counts(const PathDataset& data) {
    const DagSpec& spec = data.spec();
    CountMatrices out{Matrix(spec.max_levels(), spec.columns()), Matrix(spec.max_levels(), spec.columns())};
    for (const auto& rec : data.records()) {
        for (std::size_t j = 0; j < rec.path.size(); ++j) {
            out.sums(rec.path[j], j) += rec.response;
            out.visits(rec.path[j], j) += 1.0;
        }
    }
    return out;
}

inline std::size_t node_count(const PathDataset& data, const Node& node) {
    std::size_t n = 0;
    for (const auto& rec : data.records()) n += rec.path.passes_through(node) ? 1 : 0;
    return n;
}

// C_{i,j}(p) = P^target(p | P[j]=i) / P^sampling(p | P[j]=i) for one node,
// with the node marginals computed once.
class MeasureChange {
public:
    MeasureChange(const TransitionKernel& sampling, const TransitionKernel& target, Node node)
        : sampling_(&sampling), target_(&target), node_(node) {
        require_same_shape(sampling, target);
        require_node(sampling, node);
        if (!kernels_equivalent(sampling, target)) {
            throw PreconditionError("measures not equivalent: sampling and target kernels have different supports");
        }
        sampling_marginal_ = node_marginal(sampling, node);
        target_marginal_ = node_marginal(target, node);
        if (!(sampling_marginal_ > 0.0)) {
            throw PreconditionError("conditioning on null event: node " + to_string(node) +
                                    " is unreachable under the sampling kernel");
        }
    }

    const Node& node() const noexcept { return node_; }

    double ratio(const Path& path) const {
        if (!path.passes_through(node_)) {
            throw PreconditionError("path " + to_string(path) + " does not pass through node " +
                                    to_string(node_));
        }
        const double denom = conditional_path_probability(*sampling_, path, node_, sampling_marginal_);
        if (!(denom > 0.0)) {
            throw PreconditionError("path " + to_string(path) +
                                    " has zero probability under the sampling kernel");
        }
        return conditional_path_probability(*target_, path, node_, target_marginal_) / denom;
    }

private:
    const TransitionKernel* sampling_;
    const TransitionKernel* target_;
    Node node_;
    double sampling_marginal_ = 0.0;
    double target_marginal_ = 0.0;
};

inline double measure_change_ratio(const TransitionKernel& sampling, const TransitionKernel& target,
                                   const Path& path, const Node& node) {
    require_path(path, sampling.spec());
    return MeasureChange(sampling, target, node).ratio(path);
}

struct CellEstimate {
    Node node;
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;
    EstimatorKind kind = EstimatorKind::naive;
    // Identifier of the target kernel ("uniform", a file name, ...).
    std::string target;
    bool has_data = false;
    // The raw variance came out negative and was set to 0.
    bool variance_clipped = false;
    double raw_variance = 0.0;
};

namespace detail {

struct WeightedSums {
    std::size_t count = 0;
    double first = 0.0;   // sum of w * b
    double second = 0.0;  // sum of w * b^2
};

// One pass over the records through `node`, in record order. `weight` is
// called once per distinct path; a weight of exactly 1.0 reproduces the
// unweighted sums bit for bit.
template <class WeightFn>
WeightedSums weighted_sums(const PathDataset& data, const Node& node, WeightFn&& weight) {
    WeightedSums s;
    std::unordered_map<Path, double, PathHash> cache;
    for (const auto& rec : data.records()) {
        if (!rec.path.passes_through(node)) continue;
        auto it = cache.find(rec.path);
        if (it == cache.end()) it = cache.emplace(rec.path, weight(rec.path)).first;
        const double w = it->second;
        const double b = rec.response;
        s.first += b * w;
        s.second += (b * b) * w;
        ++s.count;
    }
    return s;
}

struct PathGroup {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
};

// Distinct paths through `node` with their replication counts and response
// sums, ordered by path.
inline std::map<Path, PathGroup> group_by_path(const PathDataset& data, const Node& node) {
    std::map<Path, PathGroup> groups;
    for (const auto& rec : data.records()) {
        if (!rec.path.passes_through(node)) continue;
        auto& g = groups[rec.path];
        ++g.count;
        g.sum += rec.response;
        g.sum_sq += rec.response * rec.response;
    }
    return groups;
}

inline void finish(CellEstimate& est, double first, double second, const EstimatorOptions& opt) {
    const double n = static_cast<double>(est.count);
    est.mean = first / n;
    double var = second / n - est.mean * est.mean;
    if (opt.bessel && est.count > 1) var *= n / (n - 1.0);
    est.raw_variance = var;
    if (var < 0.0) {
        est.variance_clipped = true;
        var = 0.0;
    }
    est.variance = var;
}

// Target conditional probabilities P^target(q | node) for the observed
// distinct paths, validated against the plug-in preconditions.
inline std::vector<double> plugin_target_probabilities(const std::map<Path, PathGroup>& groups,
                                                       const TransitionKernel& target, const Node& node) {
    const double marginal = node_marginal(target, node);
    if (!(marginal > 0.0)) {
        throw PreconditionError("conditioning on null event: node " + to_string(node) +
                                " is unreachable under the target kernel");
    }
    std::vector<double> probs;
    probs.reserve(groups.size());
    double covered = 0.0;
    for (const auto& [path, g] : groups) {
        const double p = conditional_path_probability(target, path, node, marginal);
        if (p <= kZeroThreshold) {
            throw PreconditionError("target measure excludes observed path " + to_string(path));
        }
        probs.push_back(p);
        covered += p;
    }
    if (covered < 1.0 - 1e-9) {
        throw PreconditionError("target measure puts mass " + std::to_string(1.0 - covered) +
                                " on paths through node " + to_string(node) + " that were never observed");
    }
    return probs;
}

}  // namespace detail

// Estimator configuration: which estimator, and the kernels it needs.
class Estimator {
public:
    static Estimator naive(EstimatorOptions options = {}) {
        return Estimator(EstimatorKind::naive, std::nullopt, std::nullopt, options, "sampling");
    }

    static Estimator weighted(TransitionKernel sampling, TransitionKernel target,
                              EstimatorOptions options = {}, std::string target_id = "target") {
        require_same_shape(sampling, target);
        return Estimator(EstimatorKind::weighted, std::move(sampling), std::move(target), options,
                         std::move(target_id));
    }

    static Estimator plugin(TransitionKernel target, EstimatorOptions options = {},
                            std::string target_id = "target") {
        return Estimator(EstimatorKind::plugin, std::nullopt, std::move(target), options,
                         std::move(target_id));
    }

    EstimatorKind kind() const noexcept { return kind_; }
    const std::optional<TransitionKernel>& sampling_kernel() const noexcept { return sampling_; }
    const std::optional<TransitionKernel>& target_kernel() const noexcept { return target_; }
    const EstimatorOptions& options() const noexcept { return options_; }
    const std::string& target_id() const noexcept { return target_id_; }

    CellEstimate estimate(const PathDataset& data, const Node& node) const {
        if (!node_valid(node, data.spec())) throw ValidationError("node out of range: " + to_string(node));
        if (target_) require_same_shape(*target_, data.spec());
        if (sampling_) require_same_shape(*sampling_, data.spec());

        CellEstimate est;
        est.node = node;
        est.kind = kind_;
        est.target = target_id_;

        switch (kind_) {
            case EstimatorKind::naive: {
                auto s = detail::weighted_sums(data, node, [](const Path&) { return 1.0; });
                est.count = s.count;
                if (s.count == 0) return est;
                est.has_data = true;
                detail::finish(est, s.first, s.second, options_);
                return est;
            }
            case EstimatorKind::weighted: {
                est.count = node_count(data, node);
                if (est.count == 0) return est;
                MeasureChange change(*sampling_, *target_, node);
                auto s = detail::weighted_sums(data, node, [&](const Path& p) { return change.ratio(p); });
                est.has_data = true;
                detail::finish(est, s.first, s.second, options_);
                return est;
            }
            case EstimatorKind::plugin: {
                auto groups = detail::group_by_path(data, node);
                std::size_t n = 0;
                for (const auto& [path, g] : groups) n += g.count;
                est.count = n;
                if (n == 0) return est;
                auto probs = detail::plugin_target_probabilities(groups, *target_, node);
                double first = 0.0, second = 0.0;
                std::size_t k = 0;
                for (const auto& [path, g] : groups) {
                    // C_hat = P^target(q | node) * |D_ij| / |D_q|
                    const double c_hat = probs[k++] * static_cast<double>(n) / static_cast<double>(g.count);
                    first += c_hat * g.sum;
                    second += c_hat * g.sum_sq;
                }
                est.has_data = true;
                detail::finish(est, first, second, options_);
                return est;
            }
        }
        return est;
    }

    std::optional<double> value(const PathDataset& data, const Node& node, Target target) const {
        auto est = estimate(data, node);
        if (!est.has_data) return std::nullopt;
        return target == Target::mean ? est.mean : est.variance;
    }

private:
    Estimator(EstimatorKind kind, std::optional<TransitionKernel> sampling,
              std::optional<TransitionKernel> target, EstimatorOptions options, std::string id)
        : kind_(kind), sampling_(std::move(sampling)), target_(std::move(target)),
          options_(options), target_id_(std::move(id)) {}

    EstimatorKind kind_;
    std::optional<TransitionKernel> sampling_;
    std::optional<TransitionKernel> target_;
    EstimatorOptions options_;
    std::string target_id_;
};

// Free-function forms. A nullopt result means the node has no data.

inline std::optional<double> naive_mean(const PathDataset& data, const Node& node) {
    return Estimator::naive().value(data, node, Target::mean);
}

inline std::optional<double> naive_variance(const PathDataset& data, const Node& node,
                                            EstimatorOptions options = {}) {
    return Estimator::naive(options).value(data, node, Target::variance);
}

inline std::optional<double> weighted_mean(const PathDataset& data, const TransitionKernel& sampling,
                                           const TransitionKernel& target, const Node& node) {
    return Estimator::weighted(sampling, target).value(data, node, Target::mean);
}

inline std::optional<double> weighted_variance(const PathDataset& data, const TransitionKernel& sampling,
                                               const TransitionKernel& target, const Node& node,
                                               EstimatorOptions options = {}) {
    return Estimator::weighted(sampling, target, options).value(data, node, Target::variance);
}

inline std::optional<double> plugin_mean(const PathDataset& data, const TransitionKernel& target,
                                         const Node& node) {
    return Estimator::plugin(target).value(data, node, Target::mean);
}

inline std::optional<double> plugin_variance(const PathDataset& data, const TransitionKernel& target,
                                             const Node& node, EstimatorOptions options = {}) {
    return Estimator::plugin(target, options).value(data, node, Target::variance);
}

// C_hat_{i,j}(p, n) = P^target(p | P[j]=i) * (#{p_k = p} / #{p_k[j] = i})^{-1}
inline double empirical_ratio(const PathDataset& data, const TransitionKernel& target, const Path& path,
                              const Node& node) {
    require_path(path, data.spec());
    if (!path.passes_through(node)) {
        throw PreconditionError("path " + to_string(path) + " does not pass through node " + to_string(node));
    }
    std::size_t through = 0, same = 0;
    for (const auto& rec : data.records()) {
        if (!rec.path.passes_through(node)) continue;
        ++through;
        if (rec.path == path) ++same;
    }
    if (same == 0) {
        throw PreconditionError("zero empirical frequency: path " + to_string(path) + " never observed");
    }
    const double p = conditional_path_probability(target, path, node);
    return p * static_cast<double>(through) / static_cast<double>(same);
}

// estimate(i,j) - estimate(i2,j) for the given estimator and quantity.
inline double pairwise_difference(const PathDataset& data, const Estimator& estimator, std::size_t column,
                                  std::size_t level, std::size_t other_level, Target target) {
    const Node a{level, column};
    const Node b{other_level, column};
    auto x = estimator.value(data, a, target);
    if (!x) throw PreconditionError("no data at node " + to_string(a));
    if (level == other_level) return *x - *x;
    auto y = estimator.value(data, b, target);
    if (!y) throw PreconditionError("no data at node " + to_string(b));
    return *x - *y;
}

}  // namespace markovlm

#endif  // MARKOVLM_ESTIMATORS_HPP
