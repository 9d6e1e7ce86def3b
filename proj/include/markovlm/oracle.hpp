#ifndef MARKOVLM_ORACLE_HPP
#define MARKOVLM_ORACLE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/matrix.hpp"
#include "markovlm/quality.hpp"

// Brute-force reference computations for small DAGs. Deliberately naive:
// every path of the full product space is visited and probabilities are
// plain products, with no pruning and no log space.
namespace markovlm::oracle {

// Calls fn(path, probability) for every path of the product space.
template <class Fn>
void for_each_path(const TransitionKernel& q, std::uint64_t cap, Fn&& fn) {
    check_enumeration_cap(q.levels(), cap);
    const auto& levels = q.levels();
    const std::size_t c = levels.size();
    std::vector<std::uint32_t> idx(c, 0);
    while (true) {
        double prob = q.initial()[idx[0]];
        for (std::size_t k = 1; k < c; ++k) prob *= q.entry(k, idx[k - 1], idx[k]);
        fn(Path(idx), prob);
        std::size_t k = c;
        while (k > 0) {
            --k;
            if (++idx[k] < levels[k]) break;
            idx[k] = 0;
            if (k == 0) return;
        }
    }
}

// E[(X_1+...+X_c)^k] by expanding the multinomial over all ways to split k
// among the c independent summands.
inline double sum_raw_moment(const std::vector<const NodeDistribution*>& parts, int k) {
    const std::size_t c = parts.size();
    std::vector<int> split(c, 0);
    double total = 0.0;
    auto recurse = [&](auto&& self, std::size_t pos, int left) -> void {
        if (pos + 1 == c) {
            split[pos] = left;
            // k! / prod(a_i!)
            double coef = std::tgamma(k + 1.0);
            double prod = 1.0;
            for (std::size_t t = 0; t < c; ++t) {
                coef /= std::tgamma(split[t] + 1.0);
                prod *= parts[t]->raw_moment(split[t]);
            }
            total += coef * prod;
            return;
        }
        for (int a = 0; a <= left; ++a) {
            split[pos] = a;
            self(self, pos + 1, left - a);
        }
    };
    if (c == 0) return k == 0 ? 1.0 : 0.0;
    recurse(recurse, 0, k);
    return total;
}

// E^Q[b^k | P[j]=i] for k = 1..order.
inline std::vector<double> exact_conditional_moments(const TransitionKernel& q, const QualityModel& model,
                                                     const Node& node, int order,
                                                     std::uint64_t cap = kDefaultEnumerationCap) {
    if (order < 1 || order > kMaxMomentOrder) {
        throw InvalidArgument("moment order must lie in [1,4], got " + std::to_string(order));
    }
    require_node(q, node);
    std::vector<double> acc(static_cast<std::size_t>(order), 0.0);
    double mass = 0.0;
    for_each_path(q, cap, [&](const Path& p, double prob) {
        if (!p.passes_through(node) || prob <= 0.0) return;
        std::vector<const NodeDistribution*> parts;
        for (std::size_t j = 0; j < p.size(); ++j) parts.push_back(&model.at(Node{p[j], j}));
        mass += prob;
        for (int k = 1; k <= order; ++k) acc[static_cast<std::size_t>(k - 1)] += prob * sum_raw_moment(parts, k);
    });
    if (!(mass > 0.0)) {
        throw PreconditionError("conditioning on null event: node " + to_string(node) + " is unreachable");
    }
    for (auto& v : acc) v /= mass;
    return acc;
}

// |E^Q[b^power C | P[j]=i] - E^target[b^power | P[j]=i]|, with C from the
// library's measure_change_ratio and everything else by brute force.
inline double verify_measure_change(const TransitionKernel& q, const TransitionKernel& target,
                                    const QualityModel& model, const Node& node, int power,
                                    std::uint64_t cap = kDefaultEnumerationCap) {
    if (power != 1 && power != 2) throw InvalidArgument("verify_measure_change: f must be b or b^2");
    if (!kernels_equivalent(q, target)) throw PreconditionError("measures not equivalent");
    MeasureChange change(q, target, node);
    double lhs = 0.0, mass = 0.0;
    for_each_path(q, cap, [&](const Path& p, double prob) {
        if (!p.passes_through(node) || prob <= 0.0) return;
        std::vector<const NodeDistribution*> parts;
        for (std::size_t j = 0; j < p.size(); ++j) parts.push_back(&model.at(Node{p[j], j}));
        mass += prob;
        lhs += prob * change.ratio(p) * sum_raw_moment(parts, power);
    });
    lhs /= mass;
    const auto rhs = exact_conditional_moments(target, model, node, power, cap);
    return std::abs(lhs - rhs[static_cast<std::size_t>(power - 1)]);
}

// Almost-sure limits of the weighted and plug-in estimators: mean and
// variance of b given P[j]=i under the target kernel, for every node.
struct EstimatorTargets {
    Matrix mean;
    Matrix variance;
    // false where the node is unreachable; the entries are NaN there.
    std::vector<std::vector<bool>> defined;
};

inline EstimatorTargets exact_estimator_targets(const TransitionKernel& q, const TransitionKernel& target,
                                                const QualityModel& model,
                                                std::uint64_t cap = kDefaultEnumerationCap) {
    require_same_shape(q, target);
    if (!kernels_equivalent(q, target)) throw PreconditionError("measures not equivalent");
    const DagSpec spec = target.spec();
    EstimatorTargets out{Matrix(spec.max_levels(), spec.columns(), std::nan("")),
                         Matrix(spec.max_levels(), spec.columns(), std::nan("")), {}};
    out.defined.resize(spec.columns());
    for (std::size_t j = 0; j < spec.columns(); ++j) {
        out.defined[j].assign(spec.levels[j], false);
        for (std::size_t i = 0; i < spec.levels[j]; ++i) {
            const Node node{i, j};
            if (!node_reachable(target, node)) continue;
            auto m = exact_conditional_moments(target, model, node, 2, cap);
            out.mean(i, j) = m[0];
            out.variance(i, j) = std::max(0.0, m[1] - m[0] * m[0]);
            out.defined[j][i] = true;
        }
    }
    return out;
}

}  // namespace markovlm::oracle

#endif  // MARKOVLM_ORACLE_HPP
