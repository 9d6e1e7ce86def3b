#ifndef MARKOVLM_TESTS_SUPPORT_HPP
#define MARKOVLM_TESTS_SUPPORT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "markovlm/markovlm.hpp"

namespace testing_support {

using namespace markovlm;

inline DagSpec spec22() { return DagSpec{{2, 2}, {}}; }

// Two columns, two levels, persistent kernel, Gaussian nodes with
// E[S] = [[0,1],[-2,2]] and V[S] = [[2,1],[1,1]].
inline TransitionKernel example1_kernel() {
    return TransitionKernel({0.5, 0.5}, {Matrix{{0.75, 0.25}, {0.25, 0.75}}});
}

inline QualityModel example1_quality() {
    QualityModel m(spec22());
    m.set(Node{0, 0}, NodeDistribution::gaussian(0.0, 2.0));
    m.set(Node{1, 0}, NodeDistribution::gaussian(-2.0, 1.0));
    m.set(Node{0, 1}, NodeDistribution::gaussian(1.0, 1.0));
    m.set(Node{1, 1}, NodeDistribution::gaussian(2.0, 1.0));
    return m;
}

inline std::string data_file(const std::string& name) { return std::string(MARKOVLM_DATA_DIR) + "/" + name; }

// Random row-stochastic kernel; entries in `zeros` positions are forced to
// 0 where the row keeps at least one positive entry.
inline std::vector<double> random_distribution(Rng& rng, std::size_t r, double zero_prob) {
    std::vector<double> v(r);
    double total = 0.0;
    for (auto& x : v) {
        x = rng.uniform01() < zero_prob ? 0.0 : 0.05 + rng.uniform01();
        total += x;
    }
    if (total == 0.0) {
        v[static_cast<std::size_t>(rng() % r)] = 1.0;
        total = 1.0;
    }
    for (auto& x : v) x /= total;
    return v;
}

inline TransitionKernel random_kernel(Rng& rng, const std::vector<std::size_t>& levels, double zero_prob = 0.0) {
    std::vector<double> initial = random_distribution(rng, levels[0], zero_prob);
    std::vector<Matrix> steps;
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
        Matrix m(levels[k], levels[k + 1]);
        for (std::size_t r = 0; r < levels[k]; ++r) {
            auto row = random_distribution(rng, levels[k + 1], zero_prob);
            for (std::size_t c = 0; c < row.size(); ++c) m(r, c) = row[c];
        }
        steps.push_back(m);
    }
    return TransitionKernel(initial, steps);
}

// Kernel with the support pattern of `q` and fresh positive weights.
inline TransitionKernel equivalent_kernel(Rng& rng, const TransitionKernel& q) {
    auto refill = [&](std::vector<double> v) {
        double total = 0.0;
        for (auto& x : v) {
            x = x > kZeroThreshold ? 0.05 + rng.uniform01() : 0.0;
            total += x;
        }
        for (auto& x : v) x /= total;
        return v;
    };
    std::vector<double> initial = refill(q.initial());
    std::vector<Matrix> steps;
    for (const auto& s : q.steps()) {
        Matrix m(s.rows(), s.cols());
        for (std::size_t r = 0; r < s.rows(); ++r) {
            std::vector<double> row(s.row(r).begin(), s.row(r).end());
            row = refill(row);
            for (std::size_t c = 0; c < row.size(); ++c) m(r, c) = row[c];
        }
        steps.push_back(m);
    }
    return TransitionKernel(initial, steps);
}

inline std::vector<std::size_t> random_levels(Rng& rng, std::size_t max_c = 4, std::size_t max_r = 4) {
    std::vector<std::size_t> levels(1 + rng() % max_c);
    for (auto& r : levels) r = 1 + rng() % max_r;
    return levels;
}

inline QualityModel random_gaussian_quality(Rng& rng, const DagSpec& spec) {
    QualityModel m(spec);
    for (std::size_t j = 0; j < spec.columns(); ++j)
        for (std::size_t i = 0; i < spec.levels[j]; ++i)
            m.set(Node{i, j}, NodeDistribution::gaussian(4.0 * rng.uniform01() - 2.0, 0.2 + 2.0 * rng.uniform01()));
    return m;
}

}  // namespace testing_support

#endif  // MARKOVLM_TESTS_SUPPORT_HPP
