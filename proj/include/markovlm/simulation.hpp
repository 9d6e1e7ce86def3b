#ifndef MARKOVLM_SIMULATION_HPP
#define MARKOVLM_SIMULATION_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "markovlm/asymptotics.hpp"
#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/normal.hpp"
#include "markovlm/oracle.hpp"
#include "markovlm/quality.hpp"
#include "markovlm/rng.hpp"

namespace markovlm {

// Records are drawn in blocks of this size, block k from stream k of the
// dataset seed, so the output does not depend on how blocks are scheduled.
inline constexpr std::size_t kSampleBlock = 1024;

struct ExperimentConfig {
    TransitionKernel sampling;
    QualityModel quality;
    TransitionKernel target;
    std::string target_id = "uniform";
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    std::vector<Node> nodes;
    double level = 0.95;
    // 0 picks the hardware concurrency.
    unsigned workers = 1;
};

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.n < 1) throw ValidationError("experiment: n must be >= 1");
    if (cfg.replicates < 1) throw ValidationError("experiment: replicates must be >= 1");
    require_same_shape(cfg.sampling, cfg.target);
    auto missing = validate_quality(cfg.quality, cfg.sampling);
    if (!missing.empty()) throw ValidationError("experiment: " + missing.front());
    for (const auto& node : cfg.nodes) require_node(cfg.sampling, node);
}

inline unsigned resolve_workers(unsigned workers) {
    if (workers != 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(k) for k in [0, count) on up to `workers` threads; results are
// stored by index. The first exception thrown by any task is rethrown.
template <class Fn>
auto run_indexed(std::size_t count, unsigned workers, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using T = decltype(fn(std::size_t{}));
    std::vector<std::optional<T>> slots(count);
    const unsigned w = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= count) return;
            try {
                slots[k].emplace(fn(k));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    if (w <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        for (unsigned t = 0; t < w; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<T> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

namespace detail {

template <class Rng>
std::uint32_t draw_index(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform01();
    double cum = 0.0;
    std::uint32_t last = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        cum += probs[k];
        last = static_cast<std::uint32_t>(k);
        if (u < cum) return last;
    }
    // u landed in the round-off gap above the cumulative sum
    return last;
}

}  // namespace detail

// p_1 ~ initial, p_{k+1} ~ row p_k of step k, inverse CDF.
template <class Rng>
Path sample_path(const TransitionKernel& q, Rng& rng) {
    std::vector<std::uint32_t> nodes(q.columns());
    nodes[0] = detail::draw_index(std::span<const double>(q.initial()), rng);
    for (std::size_t k = 1; k < q.columns(); ++k) nodes[k] = detail::draw_index(q.step(k - 1).row(nodes[k - 1]), rng);
    return Path(std::move(nodes));
}

// b(p) with fresh node values for the visited nodes only.
template <class Rng>
double sample_response(const QualityModel& model, const Path& path, Rng& rng) {
    double b = 0.0;
    for (std::size_t j = 0; j < path.size(); ++j) b += model.at(Node{path[j], j}).sample(rng);
    return b;
}

inline PathDataset sample_dataset(const TransitionKernel& q, const QualityModel& model, std::size_t n,
                                  std::uint64_t seed, unsigned workers = 1) {
    const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    auto parts = run_indexed(blocks, workers, [&](std::size_t b) {
        Rng rng(seed, b);
        const std::size_t lo = b * kSampleBlock, hi = std::min(n, lo + kSampleBlock);
        std::vector<Record> recs;
        recs.reserve(hi - lo);
        for (std::size_t k = lo; k < hi; ++k) {
            Path p = sample_path(q, rng);
            const double y = sample_response(model, p, rng);
            recs.push_back(Record{std::move(p), y});
        }
        return recs;
    });
    PathDataset data(q.spec());
    data.reserve(n);
    for (auto& part : parts)
        for (auto& r : part) data.add(std::move(r.path), r.response);
    return data;
}

// Dataset of replicate `r` of an experiment.
inline PathDataset replicate_dataset(const ExperimentConfig& cfg, std::size_t r) {
    return sample_dataset(cfg.sampling, cfg.quality, cfg.n, derive_stream_seed(cfg.seed, r), 1);
}

// fn(replicate index, dataset) for every replicate, in parallel over
// replicates; results in replicate order.
template <class Fn>
auto run_replicates(const ExperimentConfig& cfg, Fn&& fn) {
    validate_config(cfg);
    return run_indexed(cfg.replicates, cfg.workers,
                       [&](std::size_t r) { return fn(r, replicate_dataset(cfg, r)); });
}

// Estimator matching a kind under an experiment: naive estimates under the
// sampling kernel itself.
inline Estimator experiment_estimator(const ExperimentConfig& cfg, EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::naive: return Estimator::naive();
        case EstimatorKind::weighted: return Estimator::weighted(cfg.sampling, cfg.target, {}, cfg.target_id);
        case EstimatorKind::plugin: return Estimator::plugin(cfg.target, {}, cfg.target_id);
    }
    return Estimator::naive();
}

inline Regime regime_of(EstimatorKind kind) {
    return kind == EstimatorKind::plugin ? Regime::unknown_q : Regime::known_q;
}

inline const TransitionKernel& limit_kernel(const ExperimentConfig& cfg, EstimatorKind kind) {
    return kind == EstimatorKind::naive ? cfg.sampling : cfg.target;
}

enum class AvSource { plugin, exact };

struct ReplicateSummary {
    std::size_t replicate = 0;
    Node node;
    std::size_t count = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool covered = false;
};

struct CoverageResult {
    double coverage = 0.0;
    std::size_t intervals = 0;
    std::size_t covered = 0;
    std::vector<ReplicateSummary> replicates;
};

// Fraction of level-`cfg.level` intervals that contain the exact target,
// over all replicates and all nodes of interest. `av_override` replaces
// the asymptotic variance by a constant.
inline CoverageResult coverage_study(const ExperimentConfig& cfg, EstimatorKind kind, Target target,
                                     AvSource source = AvSource::plugin,
                                     std::optional<double> av_override = std::nullopt) {
    if (cfg.replicates < 100) throw PreconditionError("coverage study needs at least 100 replicates");
    if (cfg.nodes.empty()) throw PreconditionError("coverage study needs at least one node");
    check_level(cfg.level);
    const TransitionKernel& limit = limit_kernel(cfg, kind);
    auto truth = oracle::exact_estimator_targets(cfg.sampling, limit, cfg.quality);
    const Estimator est = experiment_estimator(cfg, kind);
    const Regime regime = regime_of(kind);
    std::vector<double> exact_av;
    for (const auto& node : cfg.nodes) {
        exact_av.push_back(source == AvSource::exact
                               ? asym_var(cfg.sampling, limit, cfg.quality, node, target, regime).value
                               : 0.0);
    }

    auto per_rep = run_replicates(cfg, [&](std::size_t r, const PathDataset& data) {
        std::vector<ReplicateSummary> out;
        for (std::size_t k = 0; k < cfg.nodes.size(); ++k) {
            const Node& node = cfg.nodes[k];
            auto cell = est.estimate(data, node);
            ReplicateSummary s;
            s.replicate = r;
            s.node = node;
            s.count = cell.count;
            if (!cell.has_data) {
                out.push_back(s);
                continue;
            }
            double av;
            if (av_override) {
                av = *av_override;
            } else if (source == AvSource::exact) {
                av = exact_av[k];
            } else {
                std::optional<TransitionKernel> sampling;
                if (kind != EstimatorKind::plugin) sampling = cfg.sampling;
                av = plugin_asym_var(data, limit, node, target, regime, sampling).value;
            }
            const double point = target == Target::mean ? cell.mean : cell.variance;
            auto ci = confidence_interval(point, av, cell.count, cfg.level);
            const double want = target == Target::mean ? truth.mean(node.level, node.column)
                                                       : truth.variance(node.level, node.column);
            s.estimate = point;
            s.lower = ci.lower;
            s.upper = ci.upper;
            s.covered = ci.lower <= want && want <= ci.upper;
            out.push_back(s);
        }
        return out;
    });

    CoverageResult res;
    for (auto& v : per_rep) {
        for (auto& s : v) {
            res.intervals += 1;
            res.covered += s.covered ? 1 : 0;
            res.replicates.push_back(s);
        }
    }
    res.coverage = res.intervals ? static_cast<double>(res.covered) / static_cast<double>(res.intervals) : 0.0;
    return res;
}

struct AnscombeResult {
    Node node;
    std::size_t replicates = 0;
    double asymptotic_variance = 0.0;
    double target_value = 0.0;
    // sqrt(|D|) (estimate - target), one per replicate.
    std::vector<double> errors;
    // errors / sqrt(asymptotic variance).
    std::vector<double> statistics;
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double ks_distance = 0.0;
    // Sample variance of `errors`, to compare with asymptotic_variance.
    double error_variance = 0.0;
    bool degenerate = false;
};

struct SampleSummary {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
};

inline SampleSummary summarize(const std::vector<double>& xs) {
    SampleSummary s;
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (double x : xs) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    s.variance = xs.size() > 1 ? m2 / (n - 1.0) : 0.0;
    m2 /= n;
    m3 /= n;
    s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    return s;
}

// Distribution of the normalized estimator error at one node against the
// closed-form asymptotic variance.
inline AnscombeResult anscombe_study(const ExperimentConfig& cfg, EstimatorKind kind, Target target,
                                     const Node& node) {
    if (cfg.replicates < 500) throw PreconditionError("anscombe study needs at least 500 replicates");
    const TransitionKernel& limit = limit_kernel(cfg, kind);
    const Regime regime = regime_of(kind);
    auto moments = oracle::exact_conditional_moments(limit, cfg.quality, node, 2);
    AnscombeResult res;
    res.node = node;
    res.replicates = cfg.replicates;
    res.target_value = target == Target::mean ? moments[0] : std::max(0.0, moments[1] - moments[0] * moments[0]);
    res.asymptotic_variance = asym_var(cfg.sampling, limit, cfg.quality, node, target, regime).value;
    const Estimator est = experiment_estimator(cfg, kind);

    res.errors = run_replicates(cfg, [&](std::size_t, const PathDataset& data) {
        auto cell = est.estimate(data, node);
        if (!cell.has_data) throw PreconditionError("anscombe study: replicate without data at " + to_string(node));
        const double point = target == Target::mean ? cell.mean : cell.variance;
        return std::sqrt(static_cast<double>(cell.count)) * (point - res.target_value);
    });

    res.error_variance = summarize(res.errors).variance;
    res.degenerate = !(res.asymptotic_variance > 1e-300);
    res.statistics.resize(res.errors.size(), 0.0);
    if (!res.degenerate) {
        const double sd = std::sqrt(res.asymptotic_variance);
        for (std::size_t k = 0; k < res.errors.size(); ++k) res.statistics[k] = res.errors[k] / sd;
    }
    auto s = summarize(res.statistics);
    res.mean = s.mean;
    res.variance = s.variance;
    res.skewness = s.skewness;
    res.ks_distance = ks_distance_normal(res.statistics);
    return res;
}

}  // namespace markovlm

#endif  // MARKOVLM_SIMULATION_HPP
