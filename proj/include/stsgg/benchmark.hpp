#ifndef STSGG_BENCHMARK_HPP
#define STSGG_BENCHMARK_HPP

#include <cstdint>
#include <vector>

#include "classifier.hpp"
#include "selftrain.hpp"
#include "synthgen.hpp"

namespace stsgg {

/// The committed benchmark: generator, pretraining and self-training settings
/// shared by the CLI defaults and the acceptance suite.
struct BenchmarkConfig {
    GeneratorConfig generator;
    SplitFractions fractions;
    TrainConfig pretrain;
    SelfTrainConfig selftrain;
};

inline BenchmarkConfig default_benchmark() {
    BenchmarkConfig b;
    auto& g = b.generator;
    g.n_scenes = 2000;
    g.entities_min = 20;
    g.entities_max = 40;
    g.n_fg_classes = 10;
    g.zipf_exponent = 1.5;
    g.feature_dim = 8;
    g.class_separation = 4.0;
    g.noise_sigma = 1.0;
    g.annotated_fraction = 0.045;
    g.true_bg_fraction = 0.4;
    g.bg_noise_scale = 3.0;
    g.sibling_parent = {0, 0, 0, 0, 0, 1, 1, 2, 2, 1};
    g.sibling_similarity = 0.95;
    g.sibling_scale = 1.5;
    g.seed = 7;

    b.pretrain.n_epochs = 20;
    b.pretrain.learning_rate = 0.1;
    b.pretrain.batch_size = 8;
    b.pretrain.oversample = true;
    b.pretrain.seed = 3;
    b.pretrain.ks = {5, 10, 20};

    b.selftrain.max_iterations = 1000;
    b.selftrain.learning_rate = 0.1;
    b.selftrain.batch_size = 8;
    b.selftrain.oversample = true;
    b.selftrain.seed = 11;
    b.selftrain.ks = b.pretrain.ks;
    return b;
}

/// Mask and split seeds derive from the generator seed.
inline std::uint64_t mask_seed(const GeneratorConfig& g) { return g.seed + 1; }
inline std::uint64_t split_seed(const GeneratorConfig& g) { return g.seed + 2; }

/// generate -> mask_annotations -> split.
inline SplitDatasets build_benchmark(const GeneratorConfig& g, const SplitFractions& f) {
    return split(mask_annotations(generate(g), g.annotated_fraction, mask_seed(g)), f, split_seed(g));
}

} // namespace stsgg

#endif // STSGG_BENCHMARK_HPP
