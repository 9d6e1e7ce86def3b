// Acceptance checks, one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "support.hpp"

using namespace markovlm;
using namespace testing_support;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

unsigned workers() { return resolve_workers(0); }

double max_measure_change_residual(const TransitionKernel& q, const TransitionKernel& t, const QualityModel& m) {
    double worst = 0.0;
    const DagSpec spec = q.spec();
    for (std::size_t j = 0; j < spec.columns(); ++j)
        for (std::size_t i = 0; i < spec.levels[j]; ++i) {
            if (!node_reachable(q, Node{i, j})) continue;
            for (int f = 1; f <= 2; ++f) worst = std::max(worst, oracle::verify_measure_change(q, t, m, Node{i, j}, f));
        }
    return worst;
}

Outcome criterion1() {
    const auto t0 = Clock::now();
    double worst = max_measure_change_residual(example1_kernel(), uniform_kernel(spec22()), example1_quality());
    Rng rng(20240101);
    for (int k = 0; k < 20; ++k) {
        auto levels = random_levels(rng, 4, 4);
        DagSpec spec{levels, {}};
        auto q = random_kernel(rng, levels, 0.2);
        auto t = equivalent_kernel(rng, q);
        worst = std::max(worst, max_measure_change_residual(q, t, random_gaussian_quality(rng, spec)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-10 && secs < 5.0,
            "max residual " + fmt("%.3g", worst) + " (<= 1e-10) over Example 1 + 20 random pairs, " +
                fmt("%.2f", secs) + " s (< 5 s)"};
}

Outcome criterion2() {
    Rng rng(7);
    std::size_t compared = 0, mismatched = 0;
    for (int k = 0; k < 100; ++k) {
        auto levels = random_levels(rng, 4, 4);
        DagSpec spec{levels, {}};
        auto q = random_kernel(rng, levels, 0.2);
        auto data = sample_dataset(q, random_gaussian_quality(rng, spec), 200 + rng() % 800, 1000 + k);
        auto w = Estimator::weighted(q, q);
        auto n = Estimator::naive();
        for (std::size_t j = 0; j < levels.size(); ++j)
            for (std::size_t i = 0; i < levels[j]; ++i) {
                auto a = w.estimate(data, Node{i, j});
                auto b = n.estimate(data, Node{i, j});
                if (!a.has_data && !b.has_data) continue;
                ++compared;
                if (a.has_data != b.has_data || a.mean != b.mean || a.variance != b.variance) ++mismatched;
            }
    }
    return {mismatched == 0 && compared > 0, std::to_string(compared) + " node estimates on 100 datasets, " +
                                                  std::to_string(mismatched) + " not bit-equal"};
}

Outcome criterion3() {
    const auto t0 = Clock::now();
    auto q = example1_kernel();
    auto data = sample_dataset(q, example1_quality(), 100000, 20240603, workers());
    auto w = Estimator::weighted(q, uniform_kernel(spec22()));
    auto n = Estimator::naive();
    const double m1 = pairwise_difference(data, w, 0, 0, 1, Target::mean);
    const double m2 = pairwise_difference(data, w, 1, 0, 1, Target::mean);
    const double nv = pairwise_difference(data, n, 1, 0, 1, Target::mean);
    const double v1 = pairwise_difference(data, w, 0, 0, 1, Target::variance);
    const double v2 = pairwise_difference(data, w, 1, 0, 1, Target::variance);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(m1 - 2.0) <= 0.05 && std::abs(m2 + 1.0) <= 0.05 && std::abs(nv) <= 0.05 &&
                    std::abs(v1 - 1.0) <= 0.15 && std::abs(v2) <= 0.15 && secs < 10.0;
    return {ok, "weighted mean diffs " + fmt("%.4f", m1) + ", " + fmt("%.4f", m2) + " (2, -1 +-0.05); naive col-2 " +
                    fmt("%.4f", nv) + " (0 +-0.05); weighted variance diffs " + fmt("%.4f", v1) + ", " +
                    fmt("%.4f", v2) + " (1, 0 +-0.15); " + fmt("%.2f", secs) + " s (< 10 s)"};
}

Outcome criterion4() {
    auto q = example1_kernel();
    auto u = uniform_kernel(spec22());
    auto m = example1_quality();
    const std::size_t n = 1000, seeds = 200;
    const double truth[2][2] = {{2.0, -1.0}, {1.0, 0.0}};  // [quantity][column]
    // reference single-draw values: [estimator][quantity][column]
    const double reference[2][2][2] = {{{2.15, -1.21}, {1.08, 0.13}}, {{2.01, -1.04}, {1.05, 0.21}}};
    const EstimatorKind kinds[2] = {EstimatorKind::weighted, EstimatorKind::plugin};
    const Target targets[2] = {Target::mean, Target::variance};

    double se[2][2][2];
    for (int e = 0; e < 2; ++e)
        for (int t = 0; t < 2; ++t)
            for (std::size_t j = 0; j < 2; ++j) {
                const Regime regime = kinds[e] == EstimatorKind::plugin ? Regime::unknown_q : Regime::known_q;
                double var = 0.0;
                for (std::size_t i = 0; i < 2; ++i) {
                    const Node node{i, j};
                    const double av = asym_var(q, u, m, node, targets[t], regime).value;
                    var += av / (static_cast<double>(n) * node_marginal(q, node));
                }
                se[e][t][j] = std::sqrt(var);
            }

    ExperimentConfig cfg{q, m, u, "uniform", n, 20240604, seeds, {}, 0.95, workers()};
    auto hits = run_replicates(cfg, [&](std::size_t, const PathDataset& data) {
        std::vector<int> inside;
        for (int e = 0; e < 2; ++e) {
            auto est = experiment_estimator(cfg, kinds[e]);
            for (int t = 0; t < 2; ++t)
                for (std::size_t j = 0; j < 2; ++j) {
                    const double d = pairwise_difference(data, est, j, 0, 1, targets[t]);
                    inside.push_back(std::abs(d - truth[t][j]) <= 3.0 * se[e][t][j] ? 1 : 0);
                }
        }
        return inside;
    });
    std::size_t total = 0, in = 0;
    for (const auto& v : hits)
        for (int x : v) {
            ++total;
            in += static_cast<std::size_t>(x);
        }
    const double frac = static_cast<double>(in) / static_cast<double>(total);
    int reference_in = 0;
    for (int e = 0; e < 2; ++e)
        for (int t = 0; t < 2; ++t)
            for (std::size_t j = 0; j < 2; ++j)
                reference_in += std::abs(reference[e][t][j] - truth[t][j]) <= 3.0 * se[e][t][j] ? 1 : 0;
    return {frac >= 0.95 && reference_in == 8, fmt("%.4f", frac) + " of " + std::to_string(total) +
                                               " difference estimates within 3 SE (>= 0.95); " +
                                               std::to_string(reference_in) + "/8 reference single-draw values inside the envelope"};
}

struct AnscombePair {
    AnscombeResult plugin, weighted;
    double seconds = 0.0;
};

const AnscombePair& anscombe_runs() {
    static const AnscombePair runs = [] {
        const auto t0 = Clock::now();
        ExperimentConfig cfg{example1_kernel(), example1_quality(), uniform_kernel(spec22()), "uniform", 2000,
                             20240605,          2000,               {},                       0.95,      workers()};
        AnscombePair p;
        p.plugin = anscombe_study(cfg, EstimatorKind::plugin, Target::mean, Node{0, 1});
        p.weighted = anscombe_study(cfg, EstimatorKind::weighted, Target::mean, Node{0, 1});
        p.seconds = seconds_since(t0);
        return p;
    }();
    return runs;
}

Outcome criterion5() {
    const auto& r = anscombe_runs();
    const double a = r.plugin.error_variance, b = r.weighted.error_variance;
    const bool ok = std::abs(a / 3.0 - 1.0) <= 0.10 && std::abs(b / (13.0 / 3.0) - 1.0) <= 0.10 && r.seconds < 60.0 &&
                    std::abs(r.plugin.asymptotic_variance - 3.0) < 1e-9 &&
                    std::abs(r.weighted.asymptotic_variance - 13.0 / 3.0) < 1e-9;
    return {ok, "node (1,2): plug-in empirical " + fmt("%.4f", a) + " vs closed form " +
                    fmt("%.4f", r.plugin.asymptotic_variance) + "; known-kernel empirical " + fmt("%.4f", b) +
                    " vs " + fmt("%.4f", r.weighted.asymptotic_variance) + " (+-10%); " + fmt("%.2f", r.seconds) +
                    " s (< 60 s)"};
}

Outcome criterion6() {
    std::vector<Node> nodes{Node{0, 0}, Node{1, 0}, Node{0, 1}, Node{1, 1}};
    ExperimentConfig cfg{example1_kernel(), example1_quality(), uniform_kernel(spec22()), "uniform", 2000,
                         20240606,          2000,               nodes,                    0.95,      workers()};
    auto res = coverage_study(cfg, EstimatorKind::plugin, Target::mean);
    std::string per_node;
    for (const auto& node : nodes) {
        std::size_t hit = 0, tot = 0;
        for (const auto& s : res.replicates)
            if (s.node == node) {
                ++tot;
                hit += s.covered ? 1 : 0;
            }
        per_node += " " + to_string(node) + "=" + fmt("%.4f", static_cast<double>(hit) / static_cast<double>(tot));
    }
    return {res.coverage >= 0.93 && res.coverage <= 0.97,
            "coverage " + fmt("%.4f", res.coverage) + " over " + std::to_string(res.intervals) +
                " intervals in [0.93, 0.97];" + per_node};
}

Outcome criterion7() {
    auto d = io::load_dataset(io::read_csv_file(data_file("toothgrowth.csv")), {"supp", "dose"}, "len");
    auto p = Estimator::plugin(uniform_kernel(d.spec));
    const double supp = pairwise_difference(d.data, p, 0, 0, 1, Target::mean);
    const double dose1 = pairwise_difference(d.data, p, 1, 1, 0, Target::mean);
    const double dose2 = pairwise_difference(d.data, p, 1, 2, 0, Target::mean);
    const bool ok = std::abs(supp - 3.70) <= 0.01 && std::abs(dose1 - 9.13) <= 0.01 && std::abs(dose2 - 15.49) <= 0.01;
    return {ok, "OJ-VC " + fmt("%.4f", supp) + " (3.70), dose 1.0-0.5 " + fmt("%.4f", dose1) + " (9.13), dose 2.0-0.5 " +
                    fmt("%.4f", dose2) + " (15.49), +-0.01"};
}

Outcome criterion8() {
    auto t = io::read_csv_file(data_file("caschools.csv"));
    auto str = io::quantile_discretize(io::numeric_column(t, "STR"), 5, "STR");
    auto eng = io::quantile_discretize(io::numeric_column(t, "english"), 5, "english");
    const double want_str[] = {14.00, 18.16, 19.27, 20.08, 21.08, 25.80};
    const double want_eng[] = {0.00, 1.16, 5.01, 13.14, 30.72, 85.54};
    double worst_break = 0.0;
    for (int k = 0; k < 6; ++k) {
        worst_break = std::max(worst_break, std::abs(str.breaks[k] - want_str[k]));
        worst_break = std::max(worst_break, std::abs(eng.breaks[k] - want_eng[k]));
    }
    io::apply_rule(t, eng, "englishCat");
    io::apply_rule(t, str, "STRCat");
    auto d = io::load_dataset(t, {"englishCat", "STRCat"}, "score");
    auto k = estimate_kernel(d.data).kernel;
    const double want[5][5] = {{0.32, 0.24, 0.19, 0.18, 0.07},
                               {0.25, 0.23, 0.24, 0.18, 0.11},
                               {0.20, 0.12, 0.20, 0.19, 0.29},
                               {0.11, 0.27, 0.23, 0.17, 0.23},
                               {0.12, 0.14, 0.14, 0.29, 0.31}};
    double worst_entry = 0.0, worst_row = 0.0;
    for (std::size_t a = 0; a < 5; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < 5; ++b) {
            worst_entry = std::max(worst_entry, std::abs(k.entry(1, a, b) - want[a][b]));
            s += k.entry(1, a, b);
        }
        worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
    const bool ok = worst_break <= 0.01 && worst_entry <= 0.01 && worst_row <= 1e-12;
    return {ok, "max break error " + fmt("%.4f", worst_break) + ", max kernel entry error " +
                    fmt("%.4f", worst_entry) + " (+-0.01), max row-sum error " + fmt("%.2g", worst_row)};
}

Outcome criterion9() {
    const auto& r = anscombe_runs();
    return {r.plugin.ks_distance < 0.05, "KS distance " + fmt("%.4f", r.plugin.ks_distance) +
                                             " (< 0.05) over 2000 standardized plug-in means at node (1,2)"};
}

Outcome criterion10() {
    auto q = example1_kernel();
    auto m = example1_quality();
    auto u = uniform_kernel(spec22());
    bool ok = true;
    std::string notes;
    auto a = sample_dataset(q, m, 50000, 99, 1);
    auto b = sample_dataset(q, m, 50000, 99, 4);
    auto c = sample_dataset(q, m, 50000, 99, 0);
    const bool datasets = a == b && a == c && a == sample_dataset(q, m, 50000, 99, 1);
    ok = ok && datasets;
    notes += std::string("datasets ") + (datasets ? "identical" : "differ");

    ExperimentConfig cfg{q, m, u, "uniform", 500, 11, 200, {Node{0, 1}, Node{1, 0}}, 0.95, 1};
    auto c1 = coverage_study(cfg, EstimatorKind::plugin, Target::mean);
    cfg.workers = 4;
    auto c4 = coverage_study(cfg, EstimatorKind::plugin, Target::mean);
    bool cov_same = c1.replicates.size() == c4.replicates.size() && c1.coverage == c4.coverage;
    for (std::size_t k = 0; cov_same && k < c1.replicates.size(); ++k)
        cov_same = c1.replicates[k].estimate == c4.replicates[k].estimate &&
                   c1.replicates[k].lower == c4.replicates[k].lower && c1.replicates[k].upper == c4.replicates[k].upper;
    ok = ok && cov_same;
    notes += std::string(", coverage study ") + (cov_same ? "identical" : "differs");

    cfg.replicates = 500;
    cfg.workers = 1;
    auto a1 = anscombe_study(cfg, EstimatorKind::weighted, Target::variance, Node{0, 1});
    cfg.workers = 3;
    auto a3 = anscombe_study(cfg, EstimatorKind::weighted, Target::variance, Node{0, 1});
    const bool ans_same = a1.errors == a3.errors;
    ok = ok && ans_same;
    notes += std::string(", anscombe study ") + (ans_same ? "identical" : "differs");
    return {ok, notes + " across worker counts 1/3/4/all and reruns"};
}

}  // namespace

int main() {
    std::printf("acceptance: %u worker thread(s)\n", workers());
    report(1, "measure-change identity", criterion1);
    report(2, "uniform identity", criterion2);
    report(3, "Example-1 unbiasing", criterion3);
    report(4, "Example-1 envelope", criterion4);
    report(5, "asymptotic variance match", criterion5);
    report(6, "CI coverage", criterion6);
    report(7, "ToothGrowth regression", criterion7);
    report(8, "CASchools discretization", criterion8);
    report(9, "Anscombe normality", criterion9);
    report(10, "reproducibility", criterion10);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
