#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace stsgg;

namespace {

ThresholdState state_with(std::vector<double> tau, std::vector<double> inc, std::vector<double> dec) {
    MomentumCoefficients m;
    m.lambda_inc = std::move(inc);
    m.lambda_dec = std::move(dec);
    ThresholdState s = initial_state(m, 0.0);
    s.tau = std::move(tau);
    return s;
}

Prediction pred(std::vector<double> p) { return make_prediction(std::move(p)); }

PredicateCatalog random_catalog(Rng& rng) {
    std::vector<std::pair<std::string, std::int64_t>> v;
    const int k = 2 + static_cast<int>(rng.below(10));
    for (int i = 0; i < k; ++i) v.emplace_back("c" + std::to_string(i), 1 + static_cast<std::int64_t>(rng.below(1000)));
    return build_catalog(v);
}

} // namespace

TEST(Momentum, WorkedExampleIsExact) {
    const auto m = momentum_coefficients(fixtures::catalog_50_40_10(), 1.0, 1.0);
    EXPECT_EQ(m.lambda_inc, (std::vector<double>{1.0, 0.8, 0.2}));
    EXPECT_EQ(m.lambda_dec, (std::vector<double>{0.2, 0.8, 1.0}));
}

TEST(Momentum, ZeroRatesGiveOnes) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = momentum_coefficients(random_catalog(rng), 0.0, 0.0);
        for (double v : m.lambda_inc) EXPECT_EQ(v, 1.0);
        for (double v : m.lambda_dec) EXPECT_EQ(v, 1.0);
    }
}

TEST(Momentum, SquareRootRate) {
    const auto m = momentum_coefficients(fixtures::catalog_50_40_10(), 0.5, 0.5);
    EXPECT_NEAR(m.lambda_inc[0], 1.0, 1e-6);
    EXPECT_NEAR(m.lambda_inc[1], 0.894427, 1e-6);
    EXPECT_NEAR(m.lambda_inc[2], 0.447214, 1e-6);
    EXPECT_NEAR(m.lambda_inc[1], std::sqrt(0.8), 1e-15);
}

TEST(Momentum, MonotoneAndInUnitInterval) {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cat = random_catalog(rng);
        const auto m = momentum_coefficients(cat, rng.uniform(), rng.uniform());
        for (std::size_t i = 0; i < m.lambda_inc.size(); ++i) {
            EXPECT_GT(m.lambda_inc[i], 0.0);
            EXPECT_LE(m.lambda_inc[i], 1.0);
            EXPECT_GT(m.lambda_dec[i], 0.0);
            EXPECT_LE(m.lambda_dec[i], 1.0);
            if (i > 0) {
                EXPECT_LE(m.lambda_inc[i], m.lambda_inc[i - 1]);
                EXPECT_GE(m.lambda_dec[i], m.lambda_dec[i - 1]);
            }
        }
    }
}

TEST(Momentum, Errors) {
    EXPECT_THROW(momentum_coefficients(build_catalog({{"a", 0}, {"b", 0}}), 0.4, 0.4), ConfigError);
    EXPECT_THROW(momentum_coefficients(fixtures::catalog_50_40_10(), 1.5, 0.4), ConfigError);
    EXPECT_THROW(momentum_coefficients(fixtures::catalog_50_40_10(), 0.4, -0.1), ConfigError);
}

TEST(CatmUpdate, IncreaseBranch) {
    const auto s = state_with({0.5}, {0.5}, {0.1});
    const std::vector<Candidate> c{{1, 0.6}, {1, 0.8}};
    EXPECT_NEAR(catm_update(s, c).tau[0], 0.6, 1e-12);
}

TEST(CatmUpdate, DecreaseBranch) {
    const auto s = state_with({0.9}, {0.7}, {0.2});
    const std::vector<Candidate> c{{1, 0.5}};
    EXPECT_NEAR(catm_update(s, c).tau[0], 0.82, 1e-12);
}

TEST(CatmUpdate, EmptyClassUnchanged) {
    const auto s = state_with({0.3, 0.7}, {0.5, 0.5}, {0.5, 0.5});
    const std::vector<Candidate> c{{1, 0.9}, {0, 0.99}};
    const auto t = catm_update(s, c);
    EXPECT_EQ(t.tau[1], 0.7);
    EXPECT_EQ(t.iteration, 1);
}

TEST(CatmUpdate, BgPredictionsAreIgnored) {
    const auto s = state_with({0.3}, {0.5}, {0.5});
    const std::vector<Candidate> c{{0, 0.99}, {0, 0.1}};
    EXPECT_EQ(catm_update(s, c).tau, s.tau);
}

TEST(CatmUpdate, MeanRunsOverAllOfClassInIncreaseBranch) {
    // One candidate clears tau, the mean over all candidates lowers it.
    const auto s = state_with({0.5}, {1.0}, {1.0});
    const std::vector<Candidate> c{{1, 0.6}, {1, 0.1}, {1, 0.2}};
    EXPECT_NEAR(catm_update(s, c).tau[0], 0.3, 1e-15);
    auto strict = s;
    strict.strict_eligible_mean = true;
    EXPECT_NEAR(catm_update(strict, c).tau[0], 0.6, 1e-15);
}

TEST(CatmUpdate, RejectsInvalidConfidence) {
    const auto s = state_with({0.5}, {0.5}, {0.5});
    EXPECT_THROW(catm_update(s, std::vector<Candidate>{{1, 1.2}}), ValidationError);
    EXPECT_THROW(catm_update(s, std::vector<Candidate>{{1, -0.1}}), ValidationError);
}

TEST(CatmUpdate, ConvexCombinationBound) {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const auto cat = random_catalog(rng);
        auto s = initial_state(momentum_coefficients(cat, rng.uniform(), rng.uniform()), rng.uniform());
        for (int step = 0; step < 5; ++step) {
            std::vector<Candidate> c(rng.below(20));
            for (auto& x : c) x = {static_cast<int>(rng.below(static_cast<std::uint64_t>(cat.num_classes()))), rng.uniform()};
            const auto next = catm_update(s, c);
            for (int k = 1; k <= cat.num_foreground(); ++k) {
                double sum = 0.0;
                int n = 0;
                for (const auto& x : c)
                    if (x.predicted_class == k) {
                        sum += x.confidence;
                        ++n;
                    }
                const double prev = s.threshold(k), now = next.threshold(k);
                EXPECT_GE(now, 0.0);
                EXPECT_LE(now, 1.0);
                if (n == 0) {
                    EXPECT_EQ(now, prev);
                } else {
                    const double mean = sum / n;
                    EXPECT_GE(now, std::min(prev, mean) - 1e-15);
                    EXPECT_LE(now, std::max(prev, mean) + 1e-15);
                }
            }
            s = next;
        }
    }
}

TEST(CatmUpdate, UnitMomentumTracksBatchMean) {
    Rng rng(4);
    auto s = initial_state(momentum_coefficients(fixtures::catalog_50_40_10(), 0.0, 0.0));
    for (int step = 0; step < 50; ++step) {
        std::vector<Candidate> c(1 + rng.below(10));
        for (auto& x : c) x = {1 + static_cast<int>(rng.below(3)), rng.uniform()};
        s = catm_update(s, c);
        for (int k = 1; k <= 3; ++k) {
            double sum = 0.0;
            int n = 0;
            for (const auto& x : c)
                if (x.predicted_class == k) {
                    sum += x.confidence;
                    ++n;
                }
            if (n > 0) {
                EXPECT_NEAR(s.threshold(k), sum / n, 1e-15);
            }
        }
    }
}

TEST(CatmUpdate, BitReproducible) {
    Rng rng(5);
    const auto s = initial_state(momentum_coefficients(fixtures::catalog_50_40_10(), 0.4, 0.4));
    std::vector<Candidate> c(100);
    for (auto& x : c) x = {static_cast<int>(rng.below(4)), rng.uniform()};
    EXPECT_EQ(catm_update(s, c), catm_update(s, c));
}

TEST(InitialState, ZeroByDefaultAndValidated) {
    const auto s = initial_state(momentum_coefficients(fixtures::catalog_50_40_10(), 0.4, 0.4));
    EXPECT_EQ(s.tau, (std::vector<double>{0.0, 0.0, 0.0}));
    EXPECT_THROW(initial_state(s.coefficients, 1.5), ConfigError);
}

TEST(Decide, Examples) {
    auto s = state_with({0.0, 0.6}, {1, 1}, {1, 1});
    EXPECT_EQ(decide(s, pred({0.1, 0.2, 0.7})), 2);
    s.tau[1] = 0.8;
    EXPECT_EQ(decide(s, pred({0.1, 0.2, 0.7})), std::nullopt);
    s.tau = {0.0, 0.0};
    EXPECT_EQ(decide(s, pred({0.5, 0.3, 0.2})), std::nullopt);
}

TEST(Decide, ComparisonIsInclusive) {
    const auto s = state_with({0.0, 0.7}, {1, 1}, {1, 1});
    EXPECT_EQ(decide(catm_policy(s), pred({0.1, 0.2, 0.7})), 2);
}

TEST(Decide, NeverReturnsBg) {
    Rng rng(6);
    const auto policy = catm_policy(initial_state(momentum_coefficients(fixtures::catalog_50_40_10(), 0.4, 0.4)));
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> p(4);
        double s = 0.0;
        for (auto& v : p) s += (v = rng.uniform());
        for (auto& v : p) v /= s;
        const auto d = decide(policy, pred(p));
        if (d) {
            EXPECT_NE(*d, kBg);
        }
    }
}

TEST(Decide, NeverPolicyAcceptsNothing) {
    EXPECT_EQ(decide(never_policy(2), pred({0.0, 1.0, 0.0})), std::nullopt);
}

TEST(UpperQuantile, OrderStatistics) {
    std::vector<double> pool;
    for (int i = 1; i <= 10; ++i) pool.push_back(0.1 * i);
    EXPECT_DOUBLE_EQ(upper_quantile(pool, 0.1), 1.0);
    EXPECT_DOUBLE_EQ(upper_quantile(pool, 1.0), 0.1);
    EXPECT_DOUBLE_EQ(upper_quantile(std::vector<double>(7, 0.5), 0.3), 0.5);
    EXPECT_THROW(upper_quantile({}, 0.1), ValidationError);
}

TEST(ConstantThreshold, SameValueForEveryClass) {
    std::vector<double> pool;
    for (int i = 1; i <= 10; ++i) pool.push_back(0.1 * i);
    const auto p = constant_threshold(pool, 0.1, 3);
    EXPECT_EQ(p.kind, PolicyKind::constant);
    for (int c = 1; c <= 3; ++c) EXPECT_DOUBLE_EQ(p.threshold(c), 1.0);
}

TEST(FixedClassThreshold, PerClassOrderStatistics) {
    const std::map<int, std::vector<double>> pools{{1, {0.2, 0.9}}, {2, {0.4}}};
    const auto p = fixed_class_threshold(pools, 0.5, 3);
    EXPECT_EQ(p.threshold(1), 0.9);
    EXPECT_EQ(p.threshold(2), 0.4);
    EXPECT_EQ(p.threshold(3), 1.0);
}

TEST(FixedClassThreshold, IdenticalPoolsIdenticalThresholds) {
    const std::vector<double> pool{0.3, 0.6, 0.1, 0.8};
    const auto p = fixed_class_threshold({{1, pool}, {2, pool}, {3, pool}}, 0.25, 3);
    EXPECT_EQ(p.threshold(1), p.threshold(2));
    EXPECT_EQ(p.threshold(2), p.threshold(3));
}

TEST(FreqWeighted, Examples) {
    const auto cat = fixtures::catalog_50_40_10();
    const auto fixed = fixed_class_threshold({{1, {0.6}}, {2, {0.3}}, {3, {0.9}}}, 1.0, 3);
    EXPECT_EQ(freq_weighted_threshold(fixed, cat, 0.0).thresholds, fixed.thresholds);
    const auto all = freq_weighted_threshold(fixed, cat, 1.0);
    EXPECT_DOUBLE_EQ(all.threshold(1), 1.0);
    EXPECT_DOUBLE_EQ(all.threshold(2), 0.8);
    EXPECT_DOUBLE_EQ(all.threshold(3), 0.2);
    EXPECT_DOUBLE_EQ(freq_weighted_threshold(fixed, cat, 0.5).threshold(1), 0.8);
    EXPECT_THROW(freq_weighted_threshold(fixed, cat, 1.5), ConfigError);
}

TEST(Dash, GrowthSchedule) {
    const auto fixed = fixed_class_threshold({{1, {0.5}}, {2, {0.95}}}, 1.0, 2);
    const auto d = dash_policy(fixed, 1.1, 10);
    EXPECT_EQ(dash_adaptive_update(d, 0).thresholds, fixed.thresholds);
    EXPECT_NEAR(dash_adaptive_update(d, 1).threshold(1), 0.55, 1e-15);
    EXPECT_EQ(dash_adaptive_update(d, 1).threshold(2), 1.0);
    EXPECT_EQ(dash_adaptive_update(d, 100).threshold(1), 1.0);
    EXPECT_EQ(decide(dash_adaptive_update(d, 100), pred({0.0, 0.9999, 0.0001})), std::nullopt);
    EXPECT_THROW(dash_policy(fixed, 1.0, 10), ConfigError);
    EXPECT_THROW(dash_adaptive_update(fixed, 1), ConfigError);
}

TEST(Dash, MonotoneOverIntervals) {
    const auto d = dash_policy(fixed_class_threshold({{1, {0.2}}, {2, {0.7}}}, 1.0, 2), 1.05, 5);
    auto prev = d.thresholds;
    for (std::int64_t k = 1; k < 60; ++k) {
        const auto now = dash_adaptive_update(d, k).thresholds;
        for (std::size_t i = 0; i < now.size(); ++i) EXPECT_GE(now[i], prev[i]);
        prev = now;
    }
}

TEST(Observe, DashStepsOnIntervalBoundaries) {
    auto p = dash_policy(fixed_class_threshold({{1, {0.5}}}, 1.0, 1), 1.1, 3);
    for (std::int64_t t = 1; t <= 2; ++t) p = observe(p, {}, t);
    EXPECT_EQ(p.threshold(1), 0.5);
    p = observe(p, {}, 3);
    EXPECT_NEAR(p.threshold(1), 0.55, 1e-15);
}

TEST(Observe, StaticPoliciesNeverMove) {
    const auto p = fixed_class_threshold({{1, {0.5}}}, 1.0, 1);
    const std::vector<Candidate> c{{1, 0.9}};
    EXPECT_EQ(observe(p, c, 1), p);
}

TEST(ThresholdRow, FullPrecision) {
    const std::vector<double> tau{0.1, 1.0 / 3.0};
    EXPECT_EQ(threshold_row(4, tau), "4,0.10000000000000001,0.33333333333333331");
}

TEST(PolicyNames, RoundTrip) {
    for (auto k : {PolicyKind::catm, PolicyKind::constant, PolicyKind::fixed_class, PolicyKind::freq_weighted,
                   PolicyKind::dash_adaptive, PolicyKind::never})
        EXPECT_EQ(parse_policy(policy_name(k)), k);
    EXPECT_THROW(parse_policy("bogus"), ConfigError);
}
