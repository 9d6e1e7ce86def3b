#ifndef MARKOVLM_QUALITY_HPP
#define MARKOVLM_QUALITY_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/error.hpp"
#include "markovlm/kernel.hpp"

namespace markovlm {

inline constexpr int kMaxMomentOrder = 4;

// Raw moments E[X^0..X^4]; index 0 is always 1.
using RawMoments = std::array<double, kMaxMomentOrder + 1>;

enum class DistributionKind { gaussian, bernoulli, point_mass, empirical_moments };

inline const char* to_string(DistributionKind kind) {
    switch (kind) {
        case DistributionKind::gaussian: return "gaussian";
        case DistributionKind::bernoulli: return "bernoulli";
        case DistributionKind::point_mass: return "point-mass";
        case DistributionKind::empirical_moments: return "empirical-moments";
    }
    return "?";
}

// Law of one node contribution S(i,j).
class NodeDistribution {
public:
    static NodeDistribution gaussian(double mean, double variance) {
        if (!(variance >= 0.0) || !std::isfinite(mean) || !std::isfinite(variance)) {
            throw ValidationError("gaussian node: variance must be finite and >= 0");
        }
        NodeDistribution d(DistributionKind::gaussian);
        d.a_ = mean;
        d.b_ = variance;
        return d;
    }

    static NodeDistribution bernoulli(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("bernoulli node: p must lie in [0,1]");
        NodeDistribution d(DistributionKind::bernoulli);
        d.a_ = p;
        return d;
    }

    static NodeDistribution point_mass(double value) {
        if (!std::isfinite(value)) throw ValidationError("point-mass node: value must be finite");
        NodeDistribution d(DistributionKind::point_mass);
        d.a_ = value;
        return d;
    }

    // Raw moments E[S], E[S^2], ... (two or four of them).
    static NodeDistribution from_moments(std::vector<double> raw) {
        if (raw.size() != 2 && raw.size() != 4) {
            throw ValidationError("empirical-moments node: expected 2 or 4 raw moments, got " +
                                  std::to_string(raw.size()));
        }
        for (double v : raw)
            if (!std::isfinite(v)) throw ValidationError("empirical-moments node: non-finite moment");
        if (raw[1] - raw[0] * raw[0] < -1e-12) {
            throw ValidationError("empirical-moments node: negative variance");
        }
        NodeDistribution d(DistributionKind::empirical_moments);
        d.raw_ = std::move(raw);
        return d;
    }

    DistributionKind kind() const noexcept { return kind_; }

    // Parameters as given: mean/variance, p, value, or the moment list.
    double parameter_a() const noexcept { return a_; }
    double parameter_b() const noexcept { return b_; }
    const std::vector<double>& moments() const noexcept { return raw_; }

    int moment_order() const noexcept {
        return kind_ == DistributionKind::empirical_moments ? static_cast<int>(raw_.size())
                                                            : kMaxMomentOrder;
    }

    double raw_moment(int k) const {
        if (k == 0) return 1.0;
        if (k < 0 || k > moment_order()) {
            throw PreconditionError("moment of order " + std::to_string(k) +
                                    " not available for a " + to_string(kind_) + " node");
        }
        switch (kind_) {
            case DistributionKind::gaussian: {
                const double m = a_, v = b_;
                switch (k) {
                    case 1: return m;
                    case 2: return v + m * m;
                    case 3: return m * m * m + 3.0 * m * v;
                    default: return m * m * m * m + 6.0 * m * m * v + 3.0 * v * v;
                }
            }
            case DistributionKind::bernoulli: return a_;
            case DistributionKind::point_mass: return std::pow(a_, k);
            case DistributionKind::empirical_moments: return raw_[static_cast<std::size_t>(k - 1)];
        }
        return 0.0;
    }

    double mean() const { return raw_moment(1); }
    double variance() const {
        double m = raw_moment(1);
        return std::max(0.0, raw_moment(2) - m * m);
    }

    // Draw one value. Moment-only nodes carry no law to sample from.
    template <class Rng>
    double sample(Rng& rng) const {
        switch (kind_) {
            case DistributionKind::gaussian: return a_ + std::sqrt(b_) * rng.normal();
            case DistributionKind::bernoulli: return rng.uniform01() < a_ ? 1.0 : 0.0;
            case DistributionKind::point_mass: return a_;
            case DistributionKind::empirical_moments:
                throw PreconditionError("empirical-moments nodes specify moments only and cannot be sampled");
        }
        return 0.0;
    }

    bool operator==(const NodeDistribution&) const = default;

private:
    explicit NodeDistribution(DistributionKind kind) : kind_(kind) {}

    DistributionKind kind_;
    double a_ = 0.0;
    double b_ = 0.0;
    std::vector<double> raw_;
};

// Per-node distributions of the quality matrix S. Nodes may be left
// unspecified; only reachable nodes are required to have a law.
class QualityModel {
public:
    QualityModel() = default;
    explicit QualityModel(const DagSpec& spec) : levels_(spec.levels), nodes_(spec.columns()) {
        for (std::size_t j = 0; j < spec.columns(); ++j) nodes_[j].resize(spec.levels[j]);
    }

    void set(const Node& node, NodeDistribution dist) {
        check(node);
        nodes_[node.column][node.level] = std::move(dist);
    }

    bool has(const Node& node) const {
        return node.column < nodes_.size() && node.level < nodes_[node.column].size() &&
               nodes_[node.column][node.level].has_value();
    }

    const NodeDistribution& at(const Node& node) const {
        if (!has(node)) throw ValidationError("no quality distribution for node " + to_string(node));
        return *nodes_[node.column][node.level];
    }

    const std::vector<std::size_t>& levels() const noexcept { return levels_; }

    // Largest moment order available at every node on `path`.
    int moment_order(const Path& path) const {
        int order = kMaxMomentOrder;
        for (std::size_t j = 0; j < path.size(); ++j)
            order = std::min(order, at(Node{path[j], j}).moment_order());
        return order;
    }

    // Matrix of node means (NaN where unspecified).
    Matrix mean_matrix() const {
        std::size_t rmax = 0;
        for (auto r : levels_) rmax = std::max(rmax, r);
        Matrix out(rmax, levels_.size(), std::nan(""));
        for (std::size_t j = 0; j < levels_.size(); ++j)
            for (std::size_t i = 0; i < levels_[j]; ++i)
                if (has(Node{i, j})) out(i, j) = at(Node{i, j}).mean();
        return out;
    }

    bool operator==(const QualityModel&) const = default;

private:
    void check(const Node& node) const {
        if (node.column >= nodes_.size() || node.level >= nodes_[node.column].size()) {
            throw ValidationError("quality model: node out of range " + to_string(node));
        }
    }

    std::vector<std::size_t> levels_;
    std::vector<std::vector<std::optional<NodeDistribution>>> nodes_;
};

// Violations of the QualityModel invariants relative to a kernel: every
// Q-reachable node has a law.
inline std::vector<std::string> validate_quality(const QualityModel& model, const TransitionKernel& q) {
    std::vector<std::string> out;
    if (model.levels() != q.levels()) {
        out.emplace_back("quality model shape does not match kernel");
        return out;
    }
    auto marginals = forward_marginals(q);
    for (std::size_t j = 0; j < q.columns(); ++j)
        for (std::size_t i = 0; i < q.levels()[j]; ++i)
            if (marginals[j][i] > 0.0 && !model.has(Node{i, j}))
                out.push_back("reachable node " + to_string(Node{i, j}) + " has no quality distribution");
    return out;
}

// Raw moments of b(path) = sum of the independent node contributions along
// the path, up to `order`, by repeated binomial convolution
// E[(X+Y)^k] = sum_a C(k,a) E[X^a] E[Y^(k-a)].
inline RawMoments path_raw_moments(const QualityModel& model, const Path& path, int order) {
    if (order < 0 || order > kMaxMomentOrder) {
        throw InvalidArgument("moment order must lie in [0,4], got " + std::to_string(order));
    }
    static constexpr double binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    RawMoments acc{1.0, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < path.size(); ++j) {
        const NodeDistribution& d = model.at(Node{path[j], j});
        RawMoments node{};
        for (int k = 0; k <= order; ++k) node[k] = d.raw_moment(k);
        RawMoments next{};
        for (int k = 0; k <= order; ++k) {
            double s = 0.0;
            for (int a = 0; a <= k; ++a) s += binom[k][a] * acc[a] * node[k - a];
            next[k] = s;
        }
        acc = next;
    }
    return acc;
}

}  // namespace markovlm

#endif  // MARKOVLM_QUALITY_HPP
