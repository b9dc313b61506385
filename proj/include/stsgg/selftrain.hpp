#ifndef STSGG_SELFTRAIN_HPP
#define STSGG_SELFTRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "catm.hpp"
#include "classifier.hpp"
#include "errors.hpp"
#include "evaluate.hpp"
#include "gsl.hpp"
#include "label_space.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace stsgg {

struct SelfTrainConfig {
    double beta = 1.0;
    double alpha_inc = 0.4;
    double alpha_dec = 0.4;
    bool class_specific_momentum = true;  // false: lambda = 0.5 everywhere
    double initial_tau = 0.0;
    bool strict_eligible_mean = false;
    int per_class_per_scene_cap = 3;
    std::int64_t max_iterations = 1000;
    PolicyKind policy = PolicyKind::catm;

    double quantile = 0.01;          // top fraction for constant / fixed-class
    double freq_mix = 0.5;           // m in the frequency-weighted baseline
    double dash_growth = 1.1;
    std::int64_t dash_interval = 100;
    std::int64_t val_refresh_interval = 0;  // fixed-class: recompute from val every N iterations

    bool use_gsl = false;
    bool gsl_message_pass = false;
    int gsl_hidden = 16;
    double gsl_learning_rate = 0.01;
    double gsl_temperature = 0.5;
    double gsl_gamma = 2.0;
    bool gsl_symmetric_focal = true;

    double learning_rate = 0.1;
    int batch_size = 8;
    ReweightScheme reweight = ReweightScheme::none;
    bool oversample = false;
    std::uint64_t seed = 11;
    std::vector<int> ks = {2, 5, 10};
    bool eval_each_epoch = true;

    void validate() const {
        if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
        if (per_class_per_scene_cap < 1) throw ConfigError("per_class_per_scene_cap must be >= 1");
        if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
        if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("quantile must lie in (0, 1]");
        if (!(alpha_inc >= 0.0 && alpha_inc <= 1.0) || !(alpha_dec >= 0.0 && alpha_dec <= 1.0))
            throw ConfigError("alpha_inc/alpha_dec must lie in [0, 1]");
        if (!(gsl_temperature > 0.0)) throw ConfigError("gsl_temperature must be > 0");
        if (!(gsl_gamma >= 0.0)) throw ConfigError("gsl_gamma must be >= 0");
        for (int k : ks)
            if (k <= 0) throw ConfigError("metric K values must be positive");
    }
};

/// Location of a triplet inside the current batch.
struct TripletRef {
    const TripletInstance* triplet = nullptr;
    int scene_id = 0;
    int index = 0;  // position within its scene
};

struct PseudoLabeled {
    TripletRef ref;
    int cls = 0;
    double confidence = 0.0;
};

/// Annotated, pseudo-labelled and background triplets of one batch; the
/// three sets partition the batch.
struct BatchPartition {
    std::vector<TripletRef> annotated;
    std::vector<PseudoLabeled> pseudo_labeled;
    std::vector<TripletRef> background;
};

struct AnnotationSplit {
    std::vector<TripletRef> annotated;
    std::vector<TripletRef> unannotated;
};

/// G^A (observed != bg) and G^U (observed == bg) of a batch.
inline AnnotationSplit partition_batch(std::span<const Scene* const> scenes) {
    AnnotationSplit out;
    for (const Scene* s : scenes)
        for (std::size_t i = 0; i < s->triplets.size(); ++i) {
            TripletRef r{&s->triplets[i], s->scene_id, static_cast<int>(i)};
            (s->triplets[i].annotated() ? out.annotated : out.unannotated).push_back(r);
        }
    return out;
}

struct PseudoAssignmentResult {
    std::vector<PseudoLabeled> pseudo_labeled;
    std::vector<TripletRef> background;
    std::vector<Candidate> candidates;  // every unannotated prediction, for the threshold update
};

/// Assigns pseudo-labels to G^U using the policy snapshot. A triplet is
/// labelled iff its argmax is foreground, its confidence reaches the class
/// threshold, its edge sample passes the gate (when given), and it survives the
/// per-scene per-class cap (highest confidence first, ties to the lower index).
/// `edge_gate[i]` refers to `unannotated[i]`.
inline PseudoAssignmentResult assign_pseudo_labels(std::span<const TripletRef> unannotated,
                                                   std::span<const Prediction> predictions,
                                                   const ThresholdPolicy& policy, int cap,
                                                   std::span<const char> edge_gate = {}) {
    if (predictions.size() != unannotated.size()) throw ValidationError("one prediction per unannotated triplet is required");
    if (!edge_gate.empty() && edge_gate.size() != unannotated.size())
        throw ValidationError("one gate decision per unannotated triplet is required");
    PseudoAssignmentResult out;
    std::map<std::pair<int, int>, std::vector<std::size_t>> groups;  // (scene, class) -> candidates
    for (std::size_t i = 0; i < unannotated.size(); ++i) {
        const auto& p = predictions[i];
        out.candidates.push_back({p.argmax_class, p.confidence});
        const auto label = decide(policy, p);
        if (label && (edge_gate.empty() || edge_gate[i])) groups[{unannotated[i].scene_id, *label}].push_back(i);
    }
    std::vector<char> accepted(unannotated.size(), 0);
    for (auto& [key, members] : groups) {
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            if (predictions[a].confidence != predictions[b].confidence)
                return predictions[a].confidence > predictions[b].confidence;
            return unannotated[a].index < unannotated[b].index;
        });
        for (std::size_t j = 0; j < members.size() && j < static_cast<std::size_t>(cap); ++j) accepted[members[j]] = 1;
    }
    for (std::size_t i = 0; i < unannotated.size(); ++i) {
        if (accepted[i])
            out.pseudo_labeled.push_back({unannotated[i], predictions[i].argmax_class, predictions[i].confidence});
        else
            out.background.push_back(unannotated[i]);
    }
    return out;
}

struct LossBreakdown {
    double annotated = 0.0;
    double background = 0.0;
    double pseudo = 0.0;
    double total = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

struct ThreeTermResult {
    LossBreakdown breakdown;
    ModelParams grad;
};

/// mean_A CE(observed) + mean_bg CE(bg) + beta * mean_pseudo CE(pseudo label).
/// Class weights apply by target class; empty sets contribute 0.
inline ThreeTermResult three_term_loss(const ModelParams& params, const BatchPartition& part,
                                       std::span<const double> class_weights, double beta) {
    if (static_cast<int>(class_weights.size()) != params.output_dim)
        throw ValidationError("class weight vector has the wrong length");
    ThreeTermResult out{{}, params.zeros_like()};
    auto w = [&](int c) { return class_weights[static_cast<std::size_t>(c)]; };
    if (!part.annotated.empty()) {
        const double s = 1.0 / static_cast<double>(part.annotated.size());
        for (const auto& r : part.annotated)
            out.breakdown.annotated += s * accumulate_ce(params, r.triplet->features, r.triplet->observed_label,
                                                         w(r.triplet->observed_label), s, out.grad);
    }
    if (!part.background.empty()) {
        const double s = 1.0 / static_cast<double>(part.background.size());
        for (const auto& r : part.background)
            out.breakdown.background += s * accumulate_ce(params, r.triplet->features, kBg, w(kBg), s, out.grad);
    }
    if (!part.pseudo_labeled.empty()) {
        const double s = 1.0 / static_cast<double>(part.pseudo_labeled.size());
        for (const auto& p : part.pseudo_labeled)
            out.breakdown.pseudo += s * accumulate_ce(params, p.ref.triplet->features, p.cls, w(p.cls), beta * s, out.grad);
    }
    out.breakdown.total = out.breakdown.annotated + out.breakdown.background + beta * out.breakdown.pseudo;
    if (!std::isfinite(out.breakdown.total)) throw TrainingAbort("non-finite loss");
    return out;
}

struct IterationRecord {
    std::int64_t iteration = 0;
    std::int64_t epoch = 0;
    LossBreakdown loss;
    double loss_gsl = 0.0;
    std::int64_t n_annotated = 0;
    std::int64_t n_background = 0;
    std::int64_t n_pseudo = 0;
    std::vector<double> tau;                   // thresholds after this iteration's update
    std::vector<std::int64_t> cumulative;      // per class (index 0 unused)

    bool operator==(const IterationRecord&) const = default;
};

struct EpochRecord {
    std::int64_t epoch = 0;
    std::int64_t iteration = 0;
    double mean_loss = 0.0;
    std::vector<int> ks;
    std::vector<double> recall, mean_recall, f;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
    std::vector<IterationRecord> iterations;
    std::vector<EpochRecord> epochs;
    std::vector<PseudoAssignment> assignments;

    bool operator==(const TrainLog&) const = default;
};

/// Everything needed to continue a run exactly where it stopped.
struct EngineState {
    ModelParams params;
    std::optional<GslParams> gsl;
    ThresholdPolicy policy;
    Rng rng;
    std::vector<std::size_t> order;  // scene order of the current epoch
    std::size_t cursor = 0;          // next position in `order`
    std::int64_t iteration = 0;
    std::int64_t epoch = 0;
    double epoch_loss_sum = 0.0;
    std::int64_t epoch_batches = 0;
    std::vector<std::int64_t> cumulative;

    bool operator==(const EngineState&) const = default;
};

/// Builds the thresholding policy selected in the config. Static baselines
/// are calibrated on the validation split with the given (pretrained) model.
inline ThresholdPolicy make_policy(const SelfTrainConfig& cfg, const PredicateCatalog& catalog, const ModelParams& params,
                                   const Dataset* val) {
    const int k = catalog.num_foreground();
    switch (cfg.policy) {
    case PolicyKind::catm: {
        auto coeffs = cfg.class_specific_momentum ? momentum_coefficients(catalog, cfg.alpha_inc, cfg.alpha_dec)
                                                  : uniform_momentum(k, 0.5);
        auto st = initial_state(std::move(coeffs), cfg.initial_tau);
        st.strict_eligible_mean = cfg.strict_eligible_mean;
        return catm_policy(std::move(st));
    }
    case PolicyKind::never: return never_policy(k);
    default: break;
    }
    if (val == nullptr) throw ConfigError(std::string("policy ") + policy_name(cfg.policy) + " needs a validation split");
    const auto pools = validation_pools(params, *val);
    if (cfg.policy == PolicyKind::constant) return constant_threshold(pools.pooled, cfg.quantile, k);
    const auto fixed = fixed_class_threshold(pools.per_class, cfg.quantile, k);
    if (cfg.policy == PolicyKind::fixed_class) return fixed;
    if (cfg.policy == PolicyKind::freq_weighted) return freq_weighted_threshold(fixed, catalog, cfg.freq_mix);
    return dash_policy(fixed, cfg.dash_growth, cfg.dash_interval);
}

/// Class-balanced resampling pool of annotated train triplets.
struct OversamplePool {
    std::vector<std::vector<TripletRef>> by_class;
    std::vector<int> classes;  // classes with at least one instance
};

inline OversamplePool build_oversample_pool(const Dataset& train) {
    OversamplePool pool;
    pool.by_class.resize(static_cast<std::size_t>(train.catalog.num_classes()));
    for (const auto& s : train.scenes)
        for (std::size_t i = 0; i < s.triplets.size(); ++i)
            if (s.triplets[i].annotated())
                pool.by_class[static_cast<std::size_t>(s.triplets[i].observed_label)].push_back(
                    {&s.triplets[i], s.scene_id, static_cast<int>(i)});
    for (std::size_t c = 1; c < pool.by_class.size(); ++c)
        if (!pool.by_class[c].empty()) pool.classes.push_back(static_cast<int>(c));
    return pool;
}

/// Self-training driver (one batch per iteration, epochs reshuffle scenes).
class SelfTrainer {
public:
    SelfTrainer(const Dataset& train, const Dataset* val, SelfTrainConfig cfg)
        : train_(train), val_(val), cfg_(std::move(cfg)), weights_(class_weights(train.catalog, cfg_.reweight)) {
        cfg_.validate();
        if (train.scenes.empty()) throw ConfigError("train split is empty");
        if (cfg_.oversample) pool_ = build_oversample_pool(train);
    }

    /// Fresh state from pretrained parameters.
    EngineState initial_state(const ModelParams& pretrained, std::optional<GslParams> gsl = std::nullopt) const {
        if (pretrained.input_dim != train_.feature_dim() || pretrained.output_dim != train_.catalog.num_classes())
            throw ConfigError("checkpoint shape does not match the dataset");
        EngineState st;
        st.params = pretrained;
        st.rng = Rng(cfg_.seed);
        st.policy = make_policy(cfg_, train_.catalog, pretrained, val_);
        st.cumulative.assign(static_cast<std::size_t>(train_.catalog.num_classes()), 0);
        if (cfg_.use_gsl) {
            if (!gsl) gsl = init_gsl(pretrained.input_dim, cfg_.gsl_hidden, cfg_.seed ^ 0x5851F42D4C957F2DULL);
            gsl->temperature = cfg_.gsl_temperature;
            gsl->gamma = cfg_.gsl_gamma;
            gsl->symmetric_focal = cfg_.gsl_symmetric_focal;
            st.gsl = std::move(gsl);
        }
        return st;
    }

    /// Runs until state.iteration == cfg.max_iterations, appending to `log`.
    void run(EngineState& st, TrainLog& log) const {
        while (st.iteration < cfg_.max_iterations) step(st, log);
    }

    /// One iteration: partition, assign with the previous thresholds, loss,
    /// threshold update, parameter step.
    void step(EngineState& st, TrainLog& log) const {
        if (st.order.empty() || st.cursor >= st.order.size()) {
            st.order.resize(train_.scenes.size());
            std::iota(st.order.begin(), st.order.end(), std::size_t{0});
            st.rng.shuffle(std::span<std::size_t>(st.order));
            st.cursor = 0;
        }
        const std::size_t end = std::min(st.order.size(), st.cursor + static_cast<std::size_t>(cfg_.batch_size));
        ++st.iteration;
        const std::int64_t t = st.iteration;

        std::vector<Scene> refined;
        std::vector<const Scene*> batch;
        std::vector<std::vector<EdgeSample>> samples;
        for (std::size_t i = st.cursor; i < end; ++i) {
            const Scene& s = train_.scenes[st.order[i]];
            if (st.gsl) samples.push_back(sample_scene_edges(*st.gsl, s, cfg_.seed, t));
            batch.push_back(&s);
        }
        if (st.gsl && cfg_.gsl_message_pass) {
            refined.reserve(batch.size());
            for (std::size_t b = 0; b < batch.size(); ++b) refined.push_back(message_pass(*batch[b], samples[b]));
            for (std::size_t b = 0; b < batch.size(); ++b) batch[b] = &refined[b];
        }
        st.cursor = end;

        auto split = partition_batch(batch);
        std::vector<Prediction> preds;
        preds.reserve(split.unannotated.size());
        for (const auto& r : split.unannotated) preds.push_back(forward(st.params, r.triplet->features));
        std::vector<char> gate_mask;
        if (st.gsl) {
            std::map<int, std::size_t> slot;
            for (std::size_t b = 0; b < batch.size(); ++b) slot[batch[b]->scene_id] = b;
            for (const auto& r : split.unannotated)
                gate_mask.push_back(gate(samples[slot[r.scene_id]][static_cast<std::size_t>(r.index)]) ? 1 : 0);
        }
        auto assigned = assign_pseudo_labels(split.unannotated, preds, st.policy, cfg_.per_class_per_scene_cap, gate_mask);

        BatchPartition part;
        part.annotated = cfg_.oversample ? resample_annotated(split.annotated.size(), st.rng) : split.annotated;
        part.pseudo_labeled = std::move(assigned.pseudo_labeled);
        part.background = std::move(assigned.background);
        auto loss = three_term_loss(st.params, part, weights_, cfg_.beta);

        st.policy = observe(std::move(st.policy), assigned.candidates, t);
        if (cfg_.val_refresh_interval > 0 && st.policy.kind == PolicyKind::fixed_class && val_ != nullptr &&
            t % cfg_.val_refresh_interval == 0)
            st.policy = fixed_class_threshold(validation_pools(st.params, *val_).per_class, cfg_.quantile,
                                              train_.catalog.num_foreground());

        IterationRecord rec;
        if (st.gsl) {
            std::vector<EdgeExample> edges;
            for (const Scene* s : batch)
                for (const auto& tr : s->triplets) edges.push_back({tr.features, tr.annotated() ? 1 : 0});
            auto g = focal_loss_grad(*st.gsl, edges);
            rec.loss_gsl = g.loss;
            st.gsl = gsl_sgd_step(std::move(*st.gsl), g.grad, cfg_.gsl_learning_rate);
        }
        st.params = sgd_step(std::move(st.params), loss.grad, cfg_.learning_rate);

        for (const auto& p : part.pseudo_labeled) {
            ++st.cumulative[static_cast<std::size_t>(p.cls)];
            log.assignments.push_back({t, p.ref.scene_id, p.ref.index, p.cls, p.confidence});
        }
        rec.iteration = t;
        rec.epoch = st.epoch;
        rec.loss = loss.breakdown;
        rec.n_annotated = static_cast<std::int64_t>(part.annotated.size());
        rec.n_background = static_cast<std::int64_t>(part.background.size());
        rec.n_pseudo = static_cast<std::int64_t>(part.pseudo_labeled.size());
        rec.tau = st.policy.thresholds;
        rec.cumulative = st.cumulative;
        log.iterations.push_back(std::move(rec));

        st.epoch_loss_sum += loss.breakdown.total;
        ++st.epoch_batches;
        if (st.cursor >= st.order.size()) finish_epoch(st, log);
    }

    const SelfTrainConfig& config() const { return cfg_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<TripletRef> resample_annotated(std::size_t n, Rng& rng) const {
        std::vector<TripletRef> out;
        if (pool_.classes.empty()) return out;
        for (std::size_t i = 0; i < n; ++i) {
            const int c = pool_.classes[static_cast<std::size_t>(rng.below(pool_.classes.size()))];
            const auto& members = pool_.by_class[static_cast<std::size_t>(c)];
            out.push_back(members[static_cast<std::size_t>(rng.below(members.size()))]);
        }
        return out;
    }

    void finish_epoch(EngineState& st, TrainLog& log) const {
        EpochRecord e;
        e.epoch = st.epoch;
        e.iteration = st.iteration;
        e.mean_loss = st.epoch_batches ? st.epoch_loss_sum / static_cast<double>(st.epoch_batches) : 0.0;
        e.ks = cfg_.ks;
        if (cfg_.eval_each_epoch && val_ != nullptr && !val_->scenes.empty()) {
            InferenceOptions opt;
            if (st.gsl && cfg_.gsl_message_pass) {
                opt.gsl = &*st.gsl;
                opt.message_pass = true;
            }
            const auto rep = evaluate(st.params, *val_, cfg_.ks, TruthSource::hidden, opt);
            e.recall = rep.recall;
            e.mean_recall = rep.mean_recall;
            e.f = rep.f;
        }
        log.epochs.push_back(std::move(e));
        ++st.epoch;
        st.epoch_loss_sum = 0.0;
        st.epoch_batches = 0;
    }

    const Dataset& train_;
    const Dataset* val_;
    SelfTrainConfig cfg_;
    std::vector<double> weights_;
    OversamplePool pool_;
};

struct SelfTrainResult {
    ModelParams params;
    std::optional<GslParams> gsl;
    TrainLog log;
    EngineState state;
};

/// Fine-tunes `pretrained` for cfg.max_iterations iterations.
inline SelfTrainResult run(const ModelParams& pretrained, const Dataset& train, const Dataset* val,
                           const SelfTrainConfig& cfg, std::optional<GslParams> gsl = std::nullopt) {
    SelfTrainer trainer(train, val, cfg);
    SelfTrainResult out;
    out.state = trainer.initial_state(pretrained, std::move(gsl));
    trainer.run(out.state, out.log);
    out.params = out.state.params;
    out.gsl = out.state.gsl;
    return out;
}

/// Continues a checkpointed run to cfg.max_iterations.
inline SelfTrainResult resume(EngineState state, const Dataset& train, const Dataset* val, const SelfTrainConfig& cfg) {
    SelfTrainer trainer(train, val, cfg);
    SelfTrainResult out;
    out.state = std::move(state);
    trainer.run(out.state, out.log);
    out.params = out.state.params;
    out.gsl = out.state.gsl;
    return out;
}

/// Supervised pretraining settings.
struct TrainConfig {
    Architecture arch = Architecture::linear;
    int hidden_dim = 32;
    double learning_rate = 0.1;
    int n_epochs = 30;
    int batch_size = 8;
    ReweightScheme reweight = ReweightScheme::none;
    bool oversample = false;
    std::uint64_t seed = 3;
    std::vector<int> ks = {2, 5, 10};
    bool eval_each_epoch = true;

    void validate() const {
        if (n_epochs < 0) throw ConfigError("n_epochs must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    }
};

struct PretrainResult {
    ModelParams params;
    TrainLog log;
};

inline std::int64_t batches_per_epoch(const Dataset& train, int batch_size) {
    const auto n = static_cast<std::int64_t>(train.scenes.size());
    return (n + batch_size - 1) / batch_size;
}

/// Conventional training: annotated triplets with their labels, every
/// unannotated triplet as bg. Shares the self-training loop with a policy that
/// never accepts a pseudo-label.
inline PretrainResult pretrain(const Dataset& train, const Dataset* val, const TrainConfig& cfg) {
    cfg.validate();
    if (train.scenes.empty()) throw ConfigError("train split is empty");
    const auto init =
        init_params(cfg.arch, train.feature_dim(), cfg.hidden_dim, train.catalog.num_classes(), cfg.seed ^ 0x2545F4914F6CDD1DULL);
    SelfTrainConfig st;
    st.policy = PolicyKind::never;
    st.max_iterations = static_cast<std::int64_t>(cfg.n_epochs) * batches_per_epoch(train, cfg.batch_size);
    st.learning_rate = cfg.learning_rate;
    st.batch_size = cfg.batch_size;
    st.reweight = cfg.reweight;
    st.oversample = cfg.oversample;
    st.seed = cfg.seed;
    st.ks = cfg.ks;
    st.eval_each_epoch = cfg.eval_each_epoch;
    auto r = run(init, train, val, st);
    for (const auto& e : r.log.epochs)
        if (!std::isfinite(e.mean_loss)) throw TrainingAbort("pretraining diverged at epoch " + std::to_string(e.epoch));
    return {std::move(r.params), std::move(r.log)};
}

} // namespace stsgg

#endif // STSGG_SELFTRAIN_HPP
