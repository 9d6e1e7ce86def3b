#ifndef MARKOVLM_ASYMPTOTICS_HPP
#define MARKOVLM_ASYMPTOTICS_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/matrix.hpp"
#include "markovlm/normal.hpp"
#include "markovlm/quality.hpp"

namespace markovlm {

// knownQ: the sampling kernel enters the estimator (weights C).
// unknownQ: the plug-in estimator with empirical weights C_hat.
enum class Regime { known_q, unknown_q };

inline const char* to_string(Regime r) { return r == Regime::known_q ? "knownQ" : "unknownQ"; }

// Asymptotic variance of sqrt(|D_ij|) * (estimate - limit), stored with the
// matrix and contraction vector it came from: value = w' Sigma w.
struct AsymptoticVariance {
    Node node;
    Target target = Target::mean;
    Regime regime = Regime::known_q;
    double value = 0.0;
    Matrix sigma;
    std::vector<double> contraction;
    // Distinct support paths q_1..q_m (unknownQ only).
    std::vector<Path> support;
};

struct ConfidenceInterval {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;
    std::size_t count = 0;
};

namespace detail {

// Per-path ingredients: conditional probability under the sampling law,
// measure-change weight, and raw moments of b.
struct PathTerm {
    Path path;
    double prob = 0.0;
    double weight = 0.0;
    RawMoments m{};
};

inline std::vector<PathTerm> exact_terms(const TransitionKernel& q, const TransitionKernel& target,
                                         const QualityModel& model, const Node& node, int order,
                                         std::uint64_t cap) {
    require_same_shape(q, target);
    MeasureChange change(q, target, node);
    const double marginal = node_marginal(q, node);
    std::vector<PathTerm> terms;
    for (auto& wp : enumerate_support_paths(q, node, cap)) {
        PathTerm t;
        t.prob = wp.probability / marginal;
        t.weight = change.ratio(wp.path);
        t.m = path_raw_moments(model, wp.path, order);
        t.path = std::move(wp.path);
        terms.push_back(std::move(t));
    }
    return terms;
}

// Clip round-off negatives; anything clearly negative means a broken matrix.
inline double checked_contraction(const Matrix& sigma, const std::vector<double>& w) {
    const double v = quadratic_form(sigma, w);
    double scale = 0.0;
    for (std::size_t r = 0; r < sigma.rows(); ++r) scale += std::abs(sigma(r, r)) * w[r] * w[r];
    if (v < -1e-9 * (1.0 + scale)) {
        throw Error("asymptotic variance contraction is negative (" + std::to_string(v) + ")");
    }
    return v < 0.0 ? 0.0 : v;
}

// Known-regime assembly from conditional expectations of
// X = b^2 C and Y = b C.
struct KnownMoments {
    double ey = 0.0;    // E[bC]
    double ey2 = 0.0;   // E[b^2 C^2]
    double ex = 0.0;    // E[b^2 C]
    double ex2 = 0.0;   // E[b^4 C^2]
    double exy = 0.0;   // E[b^3 C^2]
};

inline AsymptoticVariance assemble_known(const Node& node, Target target, const KnownMoments& k) {
    AsymptoticVariance av;
    av.node = node;
    av.target = target;
    av.regime = Regime::known_q;
    const double var_y = k.ey2 - k.ey * k.ey;
    if (target == Target::mean) {
        av.sigma = Matrix(1, 1, var_y);
        av.contraction = {1.0};
    } else {
        const double mu = k.ey;
        const double var_x = k.ex2 - k.ex * k.ex;
        const double cov = k.exy - k.ex * k.ey;
        av.sigma = Matrix{{var_x, 2.0 * mu * cov}, {2.0 * mu * cov, 4.0 * mu * mu * var_y}};
        av.contraction = {1.0, -1.0};
    }
    av.value = checked_contraction(av.sigma, av.contraction);
    return av;
}

struct UnknownTerm {
    Path path;
    double prob = 0.0;    // P[P = q | P[j]=i] under the sampling law
    double weight = 0.0;  // C(q)
    double var_b = 0.0;
    double var_b2 = 0.0;
    double cov = 0.0;     // Cov(b^2, b)
    double mean_b = 0.0;
};

inline AsymptoticVariance assemble_unknown(const Node& node, Target target,
                                           const std::vector<UnknownTerm>& terms, double mu) {
    AsymptoticVariance av;
    av.node = node;
    av.target = target;
    av.regime = Regime::unknown_q;
    const std::size_t m = terms.size();
    for (const auto& t : terms) av.support.push_back(t.path);
    if (target == Target::mean) {
        av.sigma = Matrix(m, m);
        av.contraction.resize(m);
        for (std::size_t l = 0; l < m; ++l) {
            av.sigma(l, l) = terms[l].prob * terms[l].var_b;
            av.contraction[l] = terms[l].weight;
        }
    } else {
        // b-block first, b^2-block second.
        av.sigma = Matrix(2 * m, 2 * m);
        av.contraction.resize(2 * m);
        for (std::size_t l = 0; l < m; ++l) {
            const double p = terms[l].prob;
            av.sigma(l, l) = p * terms[l].var_b;
            av.sigma(l + m, l + m) = p * terms[l].var_b2;
            av.sigma(l, l + m) = p * terms[l].cov;
            av.sigma(l + m, l) = p * terms[l].cov;
            av.contraction[l] = -2.0 * mu * terms[l].weight;
            av.contraction[l + m] = terms[l].weight;
        }
    }
    av.value = checked_contraction(av.sigma, av.contraction);
    return av;
}

inline UnknownTerm unknown_term(Path path, double prob, double weight, const RawMoments& m) {
    UnknownTerm t;
    t.path = std::move(path);
    t.prob = prob;
    t.weight = weight;
    t.mean_b = m[1];
    t.var_b = m[2] - m[1] * m[1];
    t.var_b2 = m[4] - m[2] * m[2];
    t.cov = m[3] - m[2] * m[1];
    return t;
}

inline KnownMoments known_from_terms(const std::vector<PathTerm>& terms) {
    KnownMoments k;
    for (const auto& t : terms) {
        const double c = t.weight, c2 = c * c;
        k.ey += t.prob * c * t.m[1];
        k.ey2 += t.prob * c2 * t.m[2];
        k.ex += t.prob * c * t.m[2];
        k.exy += t.prob * c2 * t.m[3];
        k.ex2 += t.prob * c2 * t.m[4];
    }
    return k;
}

}  // namespace detail

// Var^Q[b C | P[j]=i]: asymptotic variance of the weighted mean estimator.
inline AsymptoticVariance asym_var_mean_known(const TransitionKernel& q, const TransitionKernel& target,
                                              const QualityModel& model, const Node& node,
                                              std::uint64_t cap = kDefaultEnumerationCap) {
    auto terms = detail::exact_terms(q, target, model, node, 2, cap);
    return detail::assemble_known(node, Target::mean, detail::known_from_terms(terms));
}

// (1,-1) Sigma (1,-1)' with Sigma built from Var[b^2 C], 2 mu Cov[b^2 C, b C]
// and 4 mu^2 Var[b C].
inline AsymptoticVariance asym_var_variance_known(const TransitionKernel& q, const TransitionKernel& target,
                                                  const QualityModel& model, const Node& node,
                                                  std::uint64_t cap = kDefaultEnumerationCap) {
    auto terms = detail::exact_terms(q, target, model, node, 4, cap);
    return detail::assemble_known(node, Target::variance, detail::known_from_terms(terms));
}

inline AsymptoticVariance asym_var_mean_unknown(const TransitionKernel& q, const TransitionKernel& target,
                                                const QualityModel& model, const Node& node,
                                                std::uint64_t cap = kDefaultEnumerationCap) {
    auto terms = detail::exact_terms(q, target, model, node, 2, cap);
    std::vector<detail::UnknownTerm> ut;
    double mu = 0.0;
    for (auto& t : terms) {
        RawMoments m = t.m;
        m[3] = m[4] = 0.0;
        ut.push_back(detail::unknown_term(t.path, t.prob, t.weight, m));
        mu += t.prob * t.weight * t.m[1];
    }
    return detail::assemble_unknown(node, Target::mean, ut, mu);
}

inline AsymptoticVariance asym_var_variance_unknown(const TransitionKernel& q, const TransitionKernel& target,
                                                    const QualityModel& model, const Node& node,
                                                    std::uint64_t cap = kDefaultEnumerationCap) {
    auto terms = detail::exact_terms(q, target, model, node, 4, cap);
    std::vector<detail::UnknownTerm> ut;
    double mu = 0.0;
    for (auto& t : terms) {
        ut.push_back(detail::unknown_term(t.path, t.prob, t.weight, t.m));
        mu += t.prob * t.weight * t.m[1];
    }
    return detail::assemble_unknown(node, Target::variance, ut, mu);
}

inline AsymptoticVariance asym_var(const TransitionKernel& q, const TransitionKernel& target,
                                   const QualityModel& model, const Node& node, Target t, Regime r,
                                   std::uint64_t cap = kDefaultEnumerationCap) {
    if (r == Regime::known_q) {
        return t == Target::mean ? asym_var_mean_known(q, target, model, node, cap)
                                 : asym_var_variance_known(q, target, model, node, cap);
    }
    return t == Target::mean ? asym_var_mean_unknown(q, target, model, node, cap)
                             : asym_var_variance_unknown(q, target, model, node, cap);
}

// Data-driven version of the four closed forms. In the known regime the
// weights come from `sampling` when given, otherwise from C_hat. The
// unknown regime needs every distinct path through the node at least twice.
inline AsymptoticVariance plugin_asym_var(const PathDataset& data, const TransitionKernel& target,
                                          const Node& node, Target t, Regime regime,
                                          const std::optional<TransitionKernel>& sampling = std::nullopt) {
    if (!node_valid(node, data.spec())) throw ValidationError("node out of range: " + to_string(node));
    require_same_shape(target, data.spec());
    auto groups = detail::group_by_path(data, node);
    std::size_t n = 0;
    for (const auto& [p, g] : groups) n += g.count;
    if (n == 0) throw PreconditionError("no data at node " + to_string(node));
    const double nd = static_cast<double>(n);

    if (regime == Regime::unknown_q) {
        std::string thin;
        for (const auto& [p, g] : groups)
            if (g.count < 2) thin += (thin.empty() ? "" : ", ") + to_string(p);
        if (!thin.empty()) {
            throw PreconditionError("insufficient per-path replication at node " + to_string(node) +
                                    "; paths seen once: " + thin);
        }
        auto probs = detail::plugin_target_probabilities(groups, target, node);
        // Per-path raw moments m1..m4, in record order.
        std::map<Path, RawMoments> moments;
        for (const auto& rec : data.records()) {
            if (!rec.path.passes_through(node)) continue;
            auto& m = moments[rec.path];
            const double b = rec.response, b2 = b * b;
            m[1] += b;
            m[2] += b2;
            m[3] += b2 * b;
            m[4] += b2 * b2;
        }
        std::vector<detail::UnknownTerm> ut;
        double mu = 0.0;
        std::size_t k = 0;
        for (const auto& [path, g] : groups) {
            RawMoments m = moments[path];
            const double c = static_cast<double>(g.count);
            for (int r = 1; r <= 4; ++r) m[r] /= c;
            m[0] = 1.0;
            const double p_hat = c / nd;
            const double w = probs[k] / p_hat;
            mu += probs[k] * m[1];
            ut.push_back(detail::unknown_term(path, p_hat, w, m));
            ++k;
        }
        return detail::assemble_unknown(node, t, ut, mu);
    }

    std::optional<MeasureChange> change;
    std::vector<double> probs;
    std::map<Path, double> chat;
    if (sampling) {
        change.emplace(*sampling, target, node);
    } else {
        probs = detail::plugin_target_probabilities(groups, target, node);
        std::size_t k = 0;
        for (const auto& [path, g] : groups) chat[path] = probs[k++] * nd / static_cast<double>(g.count);
    }
    detail::KnownMoments km;
    for (const auto& rec : data.records()) {
        if (!rec.path.passes_through(node)) continue;
        const double c = change ? change->ratio(rec.path) : chat[rec.path];
        const double b = rec.response, c2 = c * c, b2 = b * b;
        km.ey += b * c;
        km.ey2 += b2 * c2;
        km.ex += b2 * c;
        km.exy += b2 * b * c2;
        km.ex2 += b2 * b2 * c2;
    }
    km.ey /= nd;
    km.ey2 /= nd;
    km.ex /= nd;
    km.exy /= nd;
    km.ex2 /= nd;
    return detail::assemble_known(node, t, km);
}

inline void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidArgument("confidence level must lie in (0,1), got " + std::to_string(level));
    }
}

// point +- z_{(1+level)/2} sqrt(av / count)
inline ConfidenceInterval confidence_interval(double point, double av, std::size_t count, double level) {
    check_level(level);
    if (count == 0) throw PreconditionError("confidence interval needs count > 0");
    if (!std::isfinite(av) || av < 0.0) throw PreconditionError("asymptotic variance must be finite and >= 0");
    const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(av / static_cast<double>(count));
    return ConfidenceInterval{point, point - half, point + half, level, count};
}

inline ConfidenceInterval confidence_interval(const CellEstimate& est, const AsymptoticVariance& av,
                                              double level) {
    if (!est.has_data) throw PreconditionError("no data at node " + to_string(est.node));
    const double point = av.target == Target::mean ? est.mean : est.variance;
    return confidence_interval(point, av.value, est.count, level);
}

// Interval for est_a - est_b on disjoint node subsets of one column; the two
// estimates are asymptotically independent so the variances add.
inline ConfidenceInterval difference_interval(double diff, double av_a, std::size_t count_a, double av_b,
                                              std::size_t count_b, double level) {
    check_level(level);
    if (count_a == 0 || count_b == 0) throw PreconditionError("difference interval needs data at both nodes");
    const double se = std::sqrt(av_a / static_cast<double>(count_a) + av_b / static_cast<double>(count_b));
    const double half = normal_quantile(0.5 * (1.0 + level)) * se;
    return ConfidenceInterval{diff, diff - half, diff + half, level, count_a + count_b};
}

}  // namespace markovlm

#endif  // MARKOVLM_ASYMPTOTICS_HPP
