#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "test_util.hpp"

using namespace stsgg;

namespace {

ModelParams bias_only(const std::vector<double>& logits, int input_dim = 2) {
    auto p = make_params(Architecture::linear, input_dim, 0, static_cast<int>(logits.size()));
    p.b_out = logits;
    return p;
}

/// Two foreground classes on opposite sides of a hyperplane, every pair annotated.
Dataset separable_set(int n_scenes, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    std::int64_t n1 = 0, n2 = 0;
    for (int s = 0; s < n_scenes; ++s) {
        Scene sc;
        sc.scene_id = s;
        for (int e = 0; e < 4; ++e) sc.entities.push_back({e, 0, {}});
        for (int pair = 0; pair < 2; ++pair) {
            const int label = 1 + static_cast<int>(rng.below(2));
            const double sign = label == 1 ? 1.0 : -1.0;
            for (int k = 0; k < 2; ++k) {
                auto& f = sc.entities[static_cast<std::size_t>(2 * pair + k)].features;
                f = {sign * (1.0 + rng.uniform()), rng.normal()};
            }
            TripletInstance t;
            t.subject = 2 * pair;
            t.object = 2 * pair + 1;
            t.observed_label = t.hidden_label = label;
            t.scene_id = s;
            sc.triplets.push_back(t);
            (label == 1 ? n1 : n2)++;
        }
        rebuild_triplet_features(sc);
        d.scenes.push_back(std::move(sc));
    }
    d.catalog.class_names = {kBgName, "x", "y"};
    d.catalog.counts = {n1, n2};
    if (n2 > n1) {
        d.catalog = build_catalog({{"x", n1}, {"y", n2}});
        for (auto& sc : d.scenes)
            for (auto& t : sc.triplets) t.observed_label = t.hidden_label = 3 - t.hidden_label;
    }
    return d;
}

} // namespace

TEST(Forward, ZeroModelIsUniform) {
    const auto p = make_params(Architecture::linear, 4, 0, 3);
    const auto pred = forward(p, std::vector<double>{1, 2, 3, 4});
    for (double v : pred.probs) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Forward, HandSoftmax) {
    const auto pred = forward(bias_only({0.0, std::log(2.0), std::log(4.0)}), std::vector<double>{0.3, -0.2});
    EXPECT_NEAR(pred.probs[0], 1.0 / 7.0, 1e-15);
    EXPECT_NEAR(pred.probs[1], 2.0 / 7.0, 1e-15);
    EXPECT_NEAR(pred.probs[2], 4.0 / 7.0, 1e-15);
    EXPECT_EQ(pred.argmax_class, 2);
}

TEST(Forward, ShiftInvariance) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> z(5);
        for (auto& v : z) v = 5.0 * rng.normal();
        auto shifted = z;
        const double c = 20.0 * rng.normal();
        for (auto& v : shifted) v += c;
        const auto a = softmax(z), b = softmax(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(Forward, OutputsAreDistributions) {
    Rng rng(6);
    for (auto arch : {Architecture::linear, Architecture::one_hidden}) {
        const auto p = init_params(arch, 6, 5, 4, 9, 3.0);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> x(6);
            for (auto& v : x) v = 10.0 * rng.normal();
            const auto probs = forward(p, x).probs;
            double s = 0.0;
            for (double v : probs) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
                s += v;
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(Forward, DimensionMismatchThrows) {
    const auto p = make_params(Architecture::linear, 3, 0, 3);
    EXPECT_THROW(forward(p, std::vector<double>{1.0, 2.0}), ValidationError);
}

TEST(SupervisedLoss, HalfProbabilityGivesLnTwo) {
    const auto p = make_params(Architecture::linear, 2, 0, 2);
    TripletInstance t;
    t.features = {0.5, -1.0};
    t.observed_label = t.hidden_label = 1;
    const std::vector<TripletInstance> batch{t};
    const std::vector<double> w{1.0, 1.0};
    EXPECT_NEAR(supervised_loss_grad(p, batch, w).loss, std::log(2.0), 1e-15);
}

TEST(SupervisedLoss, PerfectPredictionIsZero) {
    const auto p = bias_only({-1000.0, 1000.0});
    TripletInstance t;
    t.features = {0.0, 0.0};
    t.observed_label = t.hidden_label = 1;
    const std::vector<TripletInstance> batch{t};
    EXPECT_NEAR(supervised_loss_grad(p, batch, std::vector<double>{1.0, 1.0}).loss, 0.0, 1e-15);
}

TEST(SupervisedLoss, EmptyBatchIsZero) {
    const auto p = init_params(Architecture::linear, 2, 0, 3, 1);
    const auto r = supervised_loss_grad(p, {}, std::vector<double>{1, 1, 1});
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.grad, p.zeros_like());
}

TEST(SupervisedLoss, RejectsBgTargetsAndBadWeights) {
    const auto p = make_params(Architecture::linear, 2, 0, 3);
    TripletInstance t;
    t.features = {0.0, 0.0};
    const std::vector<TripletInstance> batch{t};
    EXPECT_THROW(supervised_loss_grad(p, batch, std::vector<double>{1, 1, 1}), ValidationError);
    EXPECT_THROW(supervised_loss_grad(p, {}, std::vector<double>{1, 1}), ValidationError);
}

TEST(SupervisedLoss, FloorGuardsLogZero) {
    const auto p = bias_only({0.0, -1e6});
    TripletInstance t;
    t.features = {0.0, 0.0};
    t.observed_label = t.hidden_label = 1;
    const std::vector<TripletInstance> batch{t};
    EXPECT_NEAR(supervised_loss_grad(p, batch, std::vector<double>{1, 1}).loss, -std::log(kProbFloor), 1e-9);
}

TEST(SupervisedLoss, GradientMatchesFiniteDifferences) {
    Rng rng(21);
    int trials = 0;
    for (auto arch : {Architecture::linear, Architecture::one_hidden}) {
        for (int trial = 0; trial < 100; ++trial, ++trials) {
            const int in = 2 + static_cast<int>(rng.below(4));
            const int out = 3 + static_cast<int>(rng.below(3));
            auto p = init_params(arch, in, 3, out, 1000 + static_cast<std::uint64_t>(trial));
            for (auto& b : p.b_out) b = rng.normal();
            std::vector<TripletInstance> batch(1 + rng.below(4));
            for (auto& t : batch) {
                t.features.resize(static_cast<std::size_t>(in));
                for (auto& v : t.features) v = rng.normal();
                t.observed_label = t.hidden_label = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(out - 1)));
            }
            std::vector<double> w(static_cast<std::size_t>(out));
            for (auto& v : w) v = 0.5 + rng.uniform();
            const auto g = supervised_loss_grad(p, batch, w).grad;
            const double err =
                fixtures::params_gradient_error(p, g, [&](const ModelParams& q) { return supervised_loss_grad(q, batch, w).loss; });
            EXPECT_LE(err, 1e-4) << architecture_name(arch) << " trial " << trial;
        }
    }
    EXPECT_EQ(trials, 200);
}

TEST(SgdStep, Arithmetic) {
    auto p = bias_only({1.0, 0.0});
    auto g = p.zeros_like();
    g.b_out[0] = 2.0;
    EXPECT_DOUBLE_EQ(sgd_step(p, g, 0.1).b_out[0], 0.8);
    EXPECT_EQ(sgd_step(p, g, 0.0), p);
}

TEST(SgdStep, TwoHalfStepsEqualOneStep) {
    auto p = init_params(Architecture::one_hidden, 3, 4, 3, 2);
    auto g = init_params(Architecture::one_hidden, 3, 4, 3, 8);
    const auto once = sgd_step(p, g, 0.25);
    const auto twice = sgd_step(sgd_step(p, g, 0.125), g, 0.125);
    const auto a = fixtures::flat_values(once), b = fixtures::flat_values(twice);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(SgdStep, NonFiniteGradientAborts) {
    auto p = bias_only({1.0, 0.0});
    auto g = p.zeros_like();
    g.b_out[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(sgd_step(p, g, 0.1), TrainingAbort);
}

TEST(ClassWeights, NoneIsAllOnes) {
    for (double w : class_weights(fixtures::catalog_50_40_10(), ReweightScheme::none)) EXPECT_EQ(w, 1.0);
}

TEST(ClassWeights, InverseFrequencyMatchesOracle) {
    const auto w = class_weights(fixtures::catalog_50_40_10(), ReweightScheme::inverse_frequency);
    const double raw[] = {1.0 / 50, 1.0 / 40, 1.0 / 10};
    const double mean = (raw[0] + raw[1] + raw[2]) / 3.0;
    EXPECT_EQ(w[0], 1.0);
    for (int c = 1; c <= 3; ++c) EXPECT_NEAR(w[static_cast<std::size_t>(c)], raw[c - 1] / mean, 1e-12);
    EXPECT_NEAR((w[1] + w[2] + w[3]) / 3.0, 1.0, 1e-12);
    // Proportions 0.24 : 0.30 : 1.20.
    EXPECT_NEAR(w[2] / w[1], 0.30 / 0.24, 1e-12);
    EXPECT_NEAR(w[3] / w[1], 1.20 / 0.24, 1e-12);
}

TEST(ClassWeights, EqualCountsGiveOnes) {
    const auto w = class_weights(build_catalog({{"a", 10}, {"b", 10}}), ReweightScheme::inverse_frequency);
    EXPECT_NEAR(w[1], 1.0, 1e-15);
    EXPECT_NEAR(w[2], 1.0, 1e-15);
}

TEST(ClassWeights, ZeroCountIsCapped) {
    const auto w = class_weights(build_catalog({{"a", 10}, {"b", 0}}), ReweightScheme::inverse_frequency);
    EXPECT_EQ(w[2], kMaxClassWeight);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    for (auto arch : {Architecture::linear, Architecture::one_hidden}) {
        const auto p = init_params(arch, 5, 4, 3, 77);
        std::stringstream ss;
        write_params(ss, p);
        EXPECT_EQ(read_params(ss), p);
    }
}

TEST(Checkpoint, MissingFileNamesExpectedPath) {
    const std::string path = (std::filesystem::temp_directory_path() / "stsgg_absent" / "pretrain.params").string();
    try {
        load_params(path);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
    }
}

TEST(Checkpoint, RejectsGarbage) {
    std::stringstream ss("hello world");
    EXPECT_THROW(read_params(ss), ValidationError);
}

TEST(Pretrain, SeparableToyReachesPerfectAccuracy) {
    const auto d = separable_set(40, 3);
    TrainConfig cfg;
    cfg.n_epochs = 50;
    cfg.ks = {1};
    const auto r = pretrain(d, nullptr, cfg);
    int correct = 0, total = 0;
    for (const auto& s : d.scenes)
        for (const auto& t : s.triplets) {
            correct += forward(r.params, t.features).argmax_class == t.observed_label;
            ++total;
        }
    EXPECT_EQ(correct, total);
}

TEST(Pretrain, SameSeedIsBitIdentical) {
    const auto b = fixtures::tiny_benchmark();
    TrainConfig cfg;
    cfg.n_epochs = 3;
    const auto a = pretrain(b.train, &b.val, cfg);
    const auto c = pretrain(b.train, &b.val, cfg);
    EXPECT_EQ(a.params, c.params);
    EXPECT_EQ(a.log, c.log);
    cfg.seed += 1;
    EXPECT_NE(pretrain(b.train, &b.val, cfg).params, a.params);
}

TEST(Pretrain, TreatsUnannotatedAsBgAndLogsEpochs) {
    const auto b = fixtures::tiny_benchmark();
    TrainConfig cfg;
    cfg.n_epochs = 2;
    const auto r = pretrain(b.train, &b.val, cfg);
    ASSERT_EQ(r.log.epochs.size(), 2u);
    EXPECT_EQ(r.log.epochs[0].mean_recall.size(), cfg.ks.size());
    for (const auto& it : r.log.iterations) {
        EXPECT_EQ(it.n_pseudo, 0);
        EXPECT_EQ(it.loss.pseudo, 0.0);
    }
    EXPECT_TRUE(r.log.assignments.empty());
    EXPECT_EQ(static_cast<std::int64_t>(r.log.iterations.size()), 2 * batches_per_epoch(b.train, cfg.batch_size));
}

TEST(Pretrain, ReweightingEmphasisesTail) {
    const auto b = fixtures::tiny_benchmark();
    TrainConfig cfg;
    cfg.n_epochs = 1;
    cfg.reweight = ReweightScheme::inverse_frequency;
    const auto w = class_weights(b.train.catalog, cfg.reweight);
    for (int c = 2; c <= b.train.catalog.num_foreground(); ++c)
        EXPECT_GE(w[static_cast<std::size_t>(c)], w[static_cast<std::size_t>(c - 1)]);
    EXPECT_NO_THROW(pretrain(b.train, &b.val, cfg));
}
