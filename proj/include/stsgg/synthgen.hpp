#ifndef STSGG_SYNTHGEN_HPP
#define STSGG_SYNTHGEN_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset_io.hpp"
#include "errors.hpp"
#include "label_space.hpp"
#include "rng.hpp"

namespace stsgg {

/// Settings of the synthetic long-tailed relation benchmark.
///
/// Every scene holds disjoint entity pairs. A pair is either a true
/// background pair (features around a dedicated bg prototype) or carries one
/// foreground predicate whose class is drawn from a Zipf law over ranks. The
/// relation feature [x_s; x_o] of a predicate-c pair is the class prototype
/// plus isotropic Gaussian noise.
///
/// Sibling groups model fine-grained predicates that specialise a general
/// one: a sibling's prototype points close to its parent's direction and lies
/// further out along it.
struct GeneratorConfig {
    int n_scenes = 2000;
    int entities_min = 8;
    int entities_max = 16;
    int n_fg_classes = 10;
    double zipf_exponent = 1.5;
    int feature_dim = 8;  // per entity; relation features have 2 * feature_dim entries
    double class_separation = 3.0;
    double noise_sigma = 1.0;
    double annotated_fraction = 0.045;
    double true_bg_fraction = 0.5;
    double bg_noise_scale = 1.0;  // noise of true-bg pairs relative to noise_sigma
    int n_entity_classes = 8;
    /// sibling_parent[r - 1] = parent rank of rank-r predicate, 0 if independent.
    std::vector<int> sibling_parent;
    double sibling_similarity = 0.8;  // cosine between sibling and parent direction
    double sibling_scale = 1.3;       // sibling prototype norm relative to parent
    std::uint64_t seed = 7;

    void validate() const {
        if (n_fg_classes < 2) throw ConfigError("n_fg_classes must be >= 2");
        if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
        if (n_scenes < 1) throw ConfigError("n_scenes must be >= 1");
        if (entities_min < 2 || entities_max < entities_min)
            throw ConfigError("entities range must satisfy 2 <= entities_min <= entities_max");
        if (!(zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be >= 0");
        if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
        if (!(bg_noise_scale > 0.0)) throw ConfigError("bg_noise_scale must be > 0");
        if (!(annotated_fraction > 0.0 && annotated_fraction <= 1.0))
            throw ConfigError("annotated_fraction must lie in (0, 1]");
        if (!(true_bg_fraction >= 0.0 && true_bg_fraction < 1.0))
            throw ConfigError("true_bg_fraction must lie in [0, 1)");
        if (n_entity_classes < 1) throw ConfigError("n_entity_classes must be >= 1");
        if (!(sibling_similarity >= -1.0 && sibling_similarity <= 1.0))
            throw ConfigError("sibling_similarity must lie in [-1, 1]");
        if (!(sibling_scale > 0.0)) throw ConfigError("sibling_scale must be > 0");
        if (!sibling_parent.empty()) {
            if (static_cast<int>(sibling_parent.size()) != n_fg_classes)
                throw ConfigError("sibling_parent must list one entry per foreground class");
            for (int r = 1; r <= n_fg_classes; ++r) {
                const int p = sibling_parent[static_cast<std::size_t>(r - 1)];
                if (p < 0 || p > n_fg_classes || p == r) throw ConfigError("sibling_parent has an invalid entry");
                if (p != 0 && sibling_parent[static_cast<std::size_t>(p - 1)] != 0)
                    throw ConfigError("sibling parents must themselves be independent classes");
            }
        }
    }
};

/// Normalised Zipf shares 1/k^s for k = 1..n.
inline std::vector<double> zipf_shares(int n, double exponent) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) w[static_cast<std::size_t>(k - 1)] = 1.0 / std::pow(static_cast<double>(k), exponent);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    return w;
}

inline std::string rank_class_name(int rank) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "pred_%02d", rank);
    return buf;
}

/// Class prototypes in relation-feature space: row 0 is bg, row r is rank r.
inline std::vector<std::vector<double>> make_prototypes(const GeneratorConfig& cfg, Rng& rng) {
    const auto dim = static_cast<std::size_t>(2 * cfg.feature_dim);
    auto random_unit = [&] {
        std::vector<double> v(dim);
        double norm = 0.0;
        while (norm < 1e-12) {
            norm = 0.0;
            for (auto& x : v) {
                x = rng.normal();
                norm += x * x;
            }
        }
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        return v;
    };
    std::vector<std::vector<double>> dirs;
    for (int r = 0; r <= cfg.n_fg_classes; ++r) dirs.push_back(random_unit());

    std::vector<std::vector<double>> protos(dirs.size(), std::vector<double>(dim));
    for (std::size_t r = 0; r < dirs.size(); ++r)
        for (std::size_t k = 0; k < dim; ++k) protos[r][k] = cfg.class_separation * dirs[r][k];

    if (!cfg.sibling_parent.empty()) {
        for (int r = 1; r <= cfg.n_fg_classes; ++r) {
            const int parent = cfg.sibling_parent[static_cast<std::size_t>(r - 1)];
            if (parent == 0) continue;
            const auto& head = dirs[static_cast<std::size_t>(parent)];
            auto orth = dirs[static_cast<std::size_t>(r)];
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += orth[k] * head[k];
            double norm = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                orth[k] -= dot * head[k];
                norm += orth[k] * orth[k];
            }
            norm = std::sqrt(norm);
            const double cosv = cfg.sibling_similarity;
            const double sinv = std::sqrt(std::max(0.0, 1.0 - cosv * cosv));
            for (std::size_t k = 0; k < dim; ++k)
                protos[static_cast<std::size_t>(r)][k] =
                    cfg.class_separation * cfg.sibling_scale * (cosv * head[k] + sinv * orth[k] / norm);
        }
    }
    return protos;
}

/// Generates a fully annotated dataset (observed == hidden everywhere).
/// Identical configs give bit-identical datasets.
inline Dataset generate(const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto protos = make_prototypes(cfg, rng);
    const auto shares = zipf_shares(cfg.n_fg_classes, cfg.zipf_exponent);
    std::vector<double> cdf(shares.size());
    std::partial_sum(shares.begin(), shares.end(), cdf.begin());

    const auto d = static_cast<std::size_t>(cfg.feature_dim);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(cfg.n_fg_classes), 0);

    Dataset data;
    for (int sid = 0; sid < cfg.n_scenes; ++sid) {
        Scene scene;
        scene.scene_id = sid;
        const int n_entities =
            cfg.entities_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.entities_max - cfg.entities_min + 1)));
        for (int e = 0; e < n_entities; ++e)
            scene.entities.push_back({e, static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_entity_classes))), {}});
        for (int pair = 0; pair < n_entities / 2; ++pair) {
            int rank = 0;
            if (rng.uniform() >= cfg.true_bg_fraction) {
                const double u = rng.uniform();
                rank = cfg.n_fg_classes;
                for (int k = 0; k < cfg.n_fg_classes; ++k)
                    if (u < cdf[static_cast<std::size_t>(k)]) {
                        rank = k + 1;
                        break;
                    }
                ++counts[static_cast<std::size_t>(rank - 1)];
            }
            const auto& mu = protos[static_cast<std::size_t>(rank)];
            const double sigma = rank == 0 ? cfg.noise_sigma * cfg.bg_noise_scale : cfg.noise_sigma;
            auto& subj = scene.entities[static_cast<std::size_t>(2 * pair)];
            auto& obj = scene.entities[static_cast<std::size_t>(2 * pair + 1)];
            subj.features.resize(d);
            obj.features.resize(d);
            for (std::size_t k = 0; k < d; ++k) subj.features[k] = round_sig9(mu[k] + sigma * rng.normal());
            for (std::size_t k = 0; k < d; ++k) obj.features[k] = round_sig9(mu[d + k] + sigma * rng.normal());
            TripletInstance t;
            t.subject = subj.id;
            t.object = obj.id;
            t.observed_label = rank;
            t.hidden_label = rank;
            scene.triplets.push_back(t);
        }
        // An odd leftover entity carries noise features but no triplet.
        for (auto& e : scene.entities)
            if (e.features.empty()) {
                e.features.resize(d);
                for (auto& x : e.features) x = round_sig9(cfg.noise_sigma * rng.normal());
            }
        rebuild_triplet_features(scene);
        data.scenes.push_back(std::move(scene));
    }

    // Labels so far are Zipf ranks; re-index by the realised counts.
    PredicateCatalog by_rank;
    by_rank.class_names.push_back(kBgName);
    std::vector<std::pair<std::string, std::int64_t>> named;
    for (int r = 1; r <= cfg.n_fg_classes; ++r) {
        by_rank.class_names.push_back(rank_class_name(r));
        by_rank.counts.push_back(counts[static_cast<std::size_t>(r - 1)]);
        named.emplace_back(rank_class_name(r), counts[static_cast<std::size_t>(r - 1)]);
    }
    data.catalog = by_rank;
    relabel(data, build_catalog(named));
    return data;
}

/// Keeps exactly ceil(fraction * R) of the R relation-bearing triplets
/// annotated, chosen uniformly at random; all others are observed as bg.
inline Dataset mask_annotations(Dataset data, double annotated_fraction, std::uint64_t seed) {
    if (!(annotated_fraction > 0.0 && annotated_fraction <= 1.0))
        throw ConfigError("annotated_fraction must lie in (0, 1]");
    std::vector<TripletInstance*> relations;
    for (auto& s : data.scenes)
        for (auto& t : s.triplets) {
            t.observed_label = kBg;
            if (t.hidden_label != kBg) relations.push_back(&t);
        }
    const auto total = relations.size();
    auto keep = static_cast<std::size_t>(std::ceil(annotated_fraction * static_cast<double>(total) - 1e-9));
    keep = std::min(keep, total);
    Rng rng(seed);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(total - i));
        std::swap(relations[i], relations[j]);
        relations[i]->observed_label = relations[i]->hidden_label;
    }
    return data;
}

struct SplitFractions {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct SplitDatasets {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Scene-level partition. The shared catalog is rebuilt from the annotated
/// triplets of the train split alone and every split is re-indexed to it.
inline SplitDatasets split(const Dataset& data, SplitFractions f, std::uint64_t seed) {
    if (!(f.train > 0.0 && f.val > 0.0 && f.test > 0.0)) throw ConfigError("split fractions must all be positive");
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    const auto n = data.scenes.size();
    const auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n) + 0.5));
    const auto n_val = static_cast<std::size_t>(std::floor(f.val * static_cast<double>(n) + 0.5));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) throw ConfigError("a split would be empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train),
              order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());

    SplitDatasets out;
    for (auto* d : {&out.train, &out.val, &out.test}) d->catalog = data.catalog;
    out.train.split = Split::train;
    out.val.split = Split::val;
    out.test.split = Split::test;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
        dst.scenes.push_back(data.scenes[order[i]]);
    }

    const auto annotated = count_annotated(out.train.scenes, data.catalog.num_classes());
    std::vector<std::pair<std::string, std::int64_t>> named;
    for (int c = 1; c < data.catalog.num_classes(); ++c)
        named.emplace_back(data.catalog.class_names[static_cast<std::size_t>(c)], annotated[static_cast<std::size_t>(c)]);
    const auto catalog = build_catalog(named);
    relabel(out.train, catalog);
    relabel(out.val, catalog);
    relabel(out.test, catalog);
    return out;
}

/// Per-class hidden and observed relation counts, indexed like the catalog.
struct ClassTally {
    std::vector<std::int64_t> hidden;
    std::vector<std::int64_t> observed;
};

inline ClassTally tally(const Dataset& d) {
    ClassTally t{std::vector<std::int64_t>(static_cast<std::size_t>(d.catalog.num_classes()), 0),
                 std::vector<std::int64_t>(static_cast<std::size_t>(d.catalog.num_classes()), 0)};
    for (const auto& s : d.scenes)
        for (const auto& tr : s.triplets) {
            ++t.hidden[static_cast<std::size_t>(tr.hidden_label)];
            ++t.observed[static_cast<std::size_t>(tr.observed_label)];
        }
    return t;
}

inline nlohmann::json generator_config_json(const GeneratorConfig& c) {
    return {{"n_scenes", c.n_scenes},
            {"entities_min", c.entities_min},
            {"entities_max", c.entities_max},
            {"n_fg_classes", c.n_fg_classes},
            {"zipf_exponent", c.zipf_exponent},
            {"feature_dim", c.feature_dim},
            {"class_separation", c.class_separation},
            {"noise_sigma", c.noise_sigma},
            {"annotated_fraction", c.annotated_fraction},
            {"true_bg_fraction", c.true_bg_fraction},
            {"bg_noise_scale", c.bg_noise_scale},
            {"n_entity_classes", c.n_entity_classes},
            {"sibling_parent", c.sibling_parent},
            {"sibling_similarity", c.sibling_similarity},
            {"sibling_scale", c.sibling_scale},
            {"seed", c.seed}};
}

/// Config echo, shared catalog and per-split class counts.
inline nlohmann::json generation_manifest(const GeneratorConfig& cfg, const SplitDatasets& s) {
    nlohmann::json splits = nlohmann::json::object();
    for (const auto* d : {&s.train, &s.val, &s.test}) {
        const auto t = tally(*d);
        splits[split_name(d->split)] = {{"scenes", d->scenes.size()},
                                        {"triplets", d->num_triplets()},
                                        {"hidden_counts", t.hidden},
                                        {"observed_counts", t.observed}};
    }
    return {{"generator", generator_config_json(cfg)}, {"catalog", catalog_to_json(s.train.catalog)}, {"splits", splits}};
}

} // namespace stsgg

#endif // STSGG_SYNTHGEN_HPP
