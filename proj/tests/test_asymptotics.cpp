#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace markovlm;
using namespace testing_support;

TEST(AsymKnown, MeanExample1) {
    auto q = example1_kernel();
    auto u = uniform_kernel(spec22());
    auto m = example1_quality();
    EXPECT_NEAR(asym_var_mean_known(q, u, m, Node{0, 1}).value, 13.0 / 3.0, 1e-12);
    EXPECT_NEAR(asym_var_mean_known(q, q, m, Node{0, 1}).value, 3.5, 1e-12);
}

TEST(AsymKnown, PointMassIsZero) {
    QualityModel pm(spec22());
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 2; ++i) pm.set(Node{i, j}, NodeDistribution::point_mass(1.5));
    auto q = example1_kernel();
    // b is constant 3 but C varies, so only Q~=Q makes bC constant.
    EXPECT_NEAR(asym_var_mean_known(q, q, pm, Node{0, 1}).value, 0.0, 1e-12);
    EXPECT_NEAR(asym_var_variance_known(q, q, pm, Node{0, 1}).value, 0.0, 1e-12);
    EXPECT_NEAR(asym_var_mean_unknown(q, uniform_kernel(spec22()), pm, Node{0, 1}).value, 0.0, 1e-12);
    EXPECT_NEAR(asym_var_variance_unknown(q, uniform_kernel(spec22()), pm, Node{0, 1}).value, 0.0, 1e-12);
}

TEST(AsymKnown, VarianceMatchesClassicalFormulaForEqualGaussians) {
    // All nodes N(m, v): b ~ N(2m, 2v) on every path, Q~ = Q. The MLE
    // variance estimator has asymptotic variance mu4 - sigma^4 = 2 sigma^4.
    QualityModel g(spec22());
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 2; ++i) g.set(Node{i, j}, NodeDistribution::gaussian(0.7, 0.5));
    auto q = example1_kernel();
    const double s2 = 1.0;
    EXPECT_NEAR(asym_var_variance_known(q, q, g, Node{1, 0}).value, 2.0 * s2 * s2, 1e-10);
}

TEST(AsymKnown, SigmaHasStatedShape) {
    auto av = asym_var_variance_known(example1_kernel(), uniform_kernel(spec22()), example1_quality(), Node{0, 1});
    ASSERT_EQ(av.sigma.rows(), 2u);
    EXPECT_TRUE(is_symmetric(av.sigma, 1e-12));
    EXPECT_EQ(av.contraction, (std::vector<double>{1.0, -1.0}));
    EXPECT_NEAR(av.value, av.sigma(0, 0) - 2.0 * av.sigma(0, 1) + av.sigma(1, 1), 1e-12);
}

TEST(AsymUnknown, MeanExample1) {
    auto av = asym_var_mean_unknown(example1_kernel(), uniform_kernel(spec22()), example1_quality(), Node{0, 1});
    EXPECT_NEAR(av.value, 3.0, 1e-12);
    ASSERT_EQ(av.sigma.rows(), 2u);
    EXPECT_EQ(av.sigma(0, 1), 0.0);
    EXPECT_EQ(av.support.size(), 2u);
}

TEST(AsymUnknown, SinglePathReducesToPathVariance) {
    TransitionKernel q({1.0, 0.0}, {Matrix{{1.0, 0.0}, {0.5, 0.5}}});
    auto m = example1_quality();
    auto av = asym_var_mean_unknown(q, q, m, Node{0, 0});
    EXPECT_NEAR(av.value, 3.0, 1e-12);  // V[S(1,1)] + V[S(1,2)]
}

TEST(AsymUnknown, VarianceSingletonIsVarianceOfSquaredDeviation) {
    // m = 1: value = Var[(b - mu)^2]; for Gaussian b that is 2 sigma^4.
    TransitionKernel q({1.0, 0.0}, {Matrix{{1.0, 0.0}, {0.5, 0.5}}});
    QualityModel m(spec22());
    m.set(Node{0, 0}, NodeDistribution::gaussian(1.0, 0.5));
    m.set(Node{0, 1}, NodeDistribution::gaussian(2.0, 1.0));
    auto av = asym_var_variance_unknown(q, q, m, Node{0, 0});
    EXPECT_NEAR(av.value, 2.0 * 1.5 * 1.5, 1e-9);

    // Non-Gaussian check: Bernoulli(p) + point mass; (b - mu)^2 takes values
    // (1-p)^2 and p^2 with probs p and 1-p.
    QualityModel b(spec22());
    b.set(Node{0, 0}, NodeDistribution::bernoulli(0.3));
    b.set(Node{0, 1}, NodeDistribution::point_mass(5.0));
    const double p = 0.3, hi = (1 - p) * (1 - p), lo = p * p;
    const double mean = p * hi + (1 - p) * lo;
    const double var = p * hi * hi + (1 - p) * lo * lo - mean * mean;
    EXPECT_NEAR(asym_var_variance_unknown(q, q, b, Node{0, 0}).value, var, 1e-9);
}

TEST(AsymUnknown, NotLargerThanKnown) {
    EXPECT_LT(asym_var_mean_unknown(example1_kernel(), uniform_kernel(spec22()), example1_quality(), Node{0, 1}).value,
              asym_var_mean_known(example1_kernel(), uniform_kernel(spec22()), example1_quality(), Node{0, 1}).value);
    Rng rng(77);
    for (int t = 0; t < 20; ++t) {
        auto levels = random_levels(rng, 3, 3);
        DagSpec spec{levels, {}};
        auto q = random_kernel(rng, levels);
        auto qt = equivalent_kernel(rng, q);
        auto m = random_gaussian_quality(rng, spec);
        for (std::size_t j = 0; j < spec.columns(); ++j)
            for (std::size_t i = 0; i < spec.levels[j]; ++i) {
                const Node n{i, j};
                EXPECT_LE(asym_var_mean_unknown(q, qt, m, n).value, asym_var_mean_known(q, qt, m, n).value + 1e-9);
            }
    }
}

TEST(AsymMatrices, PositiveSemidefiniteAndSymmetric) {
    Rng rng(3);
    for (int t = 0; t < 10; ++t) {
        auto levels = random_levels(rng, 3, 3);
        DagSpec spec{levels, {}};
        auto q = random_kernel(rng, levels);
        auto qt = equivalent_kernel(rng, q);
        auto m = random_gaussian_quality(rng, spec);
        for (auto target : {Target::mean, Target::variance})
            for (auto regime : {Regime::known_q, Regime::unknown_q}) {
                auto av = asym_var(q, qt, m, Node{0, 0}, target, regime);
                EXPECT_GE(av.value, 0.0);
                EXPECT_TRUE(is_symmetric(av.sigma, 1e-9));
                if (regime == Regime::unknown_q && target == Target::mean) {
                    for (std::size_t r = 0; r < av.sigma.rows(); ++r)
                        for (std::size_t c = 0; c < av.sigma.cols(); ++c)
                            if (r != c) {
                                EXPECT_EQ(av.sigma(r, c), 0.0);
                            }
                }
            }
    }
}

TEST(AsymErrors, MissingHigherMoments) {
    QualityModel m(spec22());
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 2; ++i) m.set(Node{i, j}, NodeDistribution::from_moments({0.0, 1.0}));
    auto q = example1_kernel();
    EXPECT_NO_THROW(asym_var_mean_known(q, q, m, Node{0, 0}));
    EXPECT_THROW(asym_var_variance_known(q, q, m, Node{0, 0}), PreconditionError);
    EXPECT_THROW(asym_var_variance_unknown(q, q, m, Node{0, 0}), PreconditionError);
}

TEST(PluginAsym, ConvergesToExactValues) {
    auto q = example1_kernel();
    auto u = uniform_kernel(spec22());
    auto m = example1_quality();
    auto d = sample_dataset(q, m, 100000, 99);
    const Node n{0, 1};
    for (auto target : {Target::mean, Target::variance}) {
        const double unk = asym_var(q, u, m, n, target, Regime::unknown_q).value;
        const double kn = asym_var(q, u, m, n, target, Regime::known_q).value;
        EXPECT_NEAR(plugin_asym_var(d, u, n, target, Regime::unknown_q).value / unk, 1.0, 0.1);
        EXPECT_NEAR(plugin_asym_var(d, u, n, target, Regime::known_q, q).value / kn, 1.0, 0.1);
    }
}

TEST(PluginAsym, SinglePathCollapsesToEmpiricalVariance) {
    PathDataset d(spec22());
    d.add(Path{1, 1}, 1.0);
    d.add(Path{1, 1}, 2.0);
    d.add(Path{1, 1}, 6.0);
    d.add(Path{0, 0}, 0.0);
    d.add(Path{0, 0}, 0.0);
    TransitionKernel t({0.5, 0.5}, {Matrix{{1.0, 0.0}, {0.0, 1.0}}});
    auto av = plugin_asym_var(d, t, Node{1, 0}, Target::mean, Regime::unknown_q);
    const double mean = 3.0, var = (1 + 4 + 36) / 3.0 - mean * mean;
    EXPECT_NEAR(av.value, var, 1e-12);
}

TEST(PluginAsym, PathSeenOnceIsNamed) {
    PathDataset d(spec22());
    d.add(Path{0, 0}, 1.0);
    d.add(Path{0, 0}, 2.0);
    d.add(Path{0, 1}, 3.0);
    try {
        plugin_asym_var(d, uniform_kernel(spec22()), Node{0, 0}, Target::mean, Regime::unknown_q);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos);
    }
}

TEST(ConfidenceIntervals, HalfWidthAndScaling) {
    auto ci = confidence_interval(1.0, 3.0, 300, 0.95);
    EXPECT_NEAR(ci.upper - ci.point, 0.1960, 1e-4);
    EXPECT_LE(ci.lower, ci.point);
    auto a = confidence_interval(0.0, 2.0, 50, 0.9);
    auto b = confidence_interval(0.0, 2.0, 200, 0.9);
    EXPECT_NEAR((a.upper - a.lower) / (b.upper - b.lower), 2.0, 1e-12);
    auto z = confidence_interval(4.0, 0.0, 10, 0.95);
    EXPECT_EQ(z.lower, 4.0);
    EXPECT_EQ(z.upper, 4.0);
    EXPECT_THROW(confidence_interval(0.0, 1.0, 10, 1.0), InvalidArgument);
    EXPECT_THROW(confidence_interval(0.0, 1.0, 10, 0.0), InvalidArgument);
    EXPECT_THROW(confidence_interval(0.0, 1.0, 0, 0.5), PreconditionError);
}

TEST(Normal, QuantileAccuracy) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
    EXPECT_NEAR(normal_quantile(0.75), 0.6744897501960817, 1e-12);
    EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
    for (double p : {1e-8, 0.001, 0.02, 0.3, 0.6, 0.99, 0.9999})
        EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 * std::max(1.0, p / (1 - p)));
    EXPECT_THROW(normal_quantile(1.5), InvalidArgument);
}
