#ifndef STSGG_EVALUATE_HPP
#define STSGG_EVALUATE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catm.hpp"
#include "classifier.hpp"
#include "gsl.hpp"
#include "label_space.hpp"
#include "metrics.hpp"

namespace stsgg {

/// Which label counts as ground truth at evaluation time.
enum class TruthSource { hidden, observed };

inline TruthSource parse_truth_source(const std::string& s) {
    if (s == "hidden") return TruthSource::hidden;
    if (s == "observed") return TruthSource::observed;
    throw ConfigError("unknown truth source '" + s + "'");
}

/// Optional GSL refinement at inference: edges with score >= 0.5 carry one
/// message-passing round before classification.
struct InferenceOptions {
    const GslParams* gsl = nullptr;
    bool message_pass = false;
};

inline Scene refine_for_inference(const Scene& scene, const InferenceOptions& opt) {
    if (!opt.message_pass || opt.gsl == nullptr) return scene;
    std::vector<EdgeSample> samples;
    for (const auto& t : scene.triplets) {
        EdgeSample e;
        e.score = gsl_forward(*opt.gsl, t.features).score;
        e.hard = e.score >= 0.5;
        e.relaxed = e.hard ? 1.0 : 0.0;
        samples.push_back(e);
    }
    return message_pass(scene, samples);
}

/// Scores every pair: the best foreground class and its probability (bg is
/// excluded from the ranking).
inline std::vector<SceneRanking> rank_dataset(const ModelParams& params, const Dataset& data,
                                              TruthSource truth = TruthSource::hidden, const InferenceOptions& opt = {}) {
    std::vector<SceneRanking> out;
    out.reserve(data.scenes.size());
    for (const auto& raw : data.scenes) {
        const Scene scene = refine_for_inference(raw, opt);
        SceneRanking r;
        for (const auto& t : scene.triplets) {
            const auto p = forward_cache(params, t.features).probs;
            RankedTriplet rt;
            rt.predicted = 1;
            rt.score = p[1];
            for (std::size_t c = 2; c < p.size(); ++c)
                if (p[c] > rt.score) {
                    rt.score = p[c];
                    rt.predicted = static_cast<int>(c);
                }
            rt.truth = truth == TruthSource::hidden ? t.hidden_label : t.observed_label;
            r.push_back(rt);
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline EvalReport evaluate(const ModelParams& params, const Dataset& data, const std::vector<int>& ks,
                           TruthSource truth = TruthSource::hidden, const InferenceOptions& opt = {}) {
    const auto rankings = rank_dataset(params, data, truth, opt);
    return evaluate_rankings(rankings, ks, data.catalog.num_classes());
}

/// Validation confidences for the static baselines: the pooled confidences of
/// all foreground-argmax predictions, and the same grouped by predicted class.
struct ValidationPools {
    std::vector<double> pooled;
    std::map<int, std::vector<double>> per_class;
};

inline ValidationPools validation_pools(const ModelParams& params, const Dataset& val) {
    ValidationPools pools;
    for (const auto& s : val.scenes)
        for (const auto& t : s.triplets) {
            const auto p = forward(params, t.features);
            if (p.argmax_class == kBg) continue;
            pools.pooled.push_back(p.confidence);
            pools.per_class[p.argmax_class].push_back(p.confidence);
        }
    return pools;
}

} // namespace stsgg

#endif // STSGG_EVALUATE_HPP
