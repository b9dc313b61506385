#ifndef STSGG_LABEL_SPACE_HPP
#define STSGG_LABEL_SPACE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace stsgg {

/// Background ("no relation") always occupies class index 0.
inline constexpr int kBg = 0;

/// Predicate label space. Index 0 is bg; foreground class c (1-based) has rank
/// c in the descending training-count order, so counts[c - 1] is N_c.
struct PredicateCatalog {
    std::vector<std::string> class_names;
    std::vector<std::int64_t> counts;
    int bg_index = kBg;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    int num_foreground() const { return static_cast<int>(counts.size()); }

    std::int64_t count(int cls) const { return counts.at(static_cast<std::size_t>(cls - 1)); }

    int index_of(const std::string& name) const {
        for (int i = 0; i < num_classes(); ++i)
            if (class_names[static_cast<std::size_t>(i)] == name) return i;
        throw ValidationError("unknown predicate class '" + name + "'");
    }

    /// Foreground (name, count) pairs in rank order; feeding this back to
    /// build_catalog reproduces the catalog.
    std::vector<std::pair<std::string, std::int64_t>> foreground_counts() const {
        std::vector<std::pair<std::string, std::int64_t>> out;
        for (int c = 1; c < num_classes(); ++c)
            out.emplace_back(class_names[static_cast<std::size_t>(c)], count(c));
        return out;
    }

    bool operator==(const PredicateCatalog&) const = default;
};

inline constexpr const char* kBgName = "__background__";

/// Sorts foreground classes by descending count (stable: ties keep insertion
/// order) and prepends bg at index 0.
inline PredicateCatalog build_catalog(const std::vector<std::pair<std::string, std::int64_t>>& label_counts) {
    if (label_counts.size() < 2)
        throw ConfigError("catalog needs at least 2 foreground classes, got " +
                          std::to_string(label_counts.size()));
    for (const auto& [name, n] : label_counts) {
        if (n < 0) throw ConfigError("negative count for class '" + name + "'");
        if (name == kBgName) throw ConfigError("foreground class may not use the reserved bg name");
    }
    auto sorted = label_counts;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    PredicateCatalog cat;
    cat.class_names.push_back(kBgName);
    for (const auto& [name, n] : sorted) {
        cat.class_names.push_back(name);
        cat.counts.push_back(n);
    }
    return cat;
}

/// Model output for one triplet: q-hat is `confidence`, q-tilde is `argmax_class`.
struct Prediction {
    std::vector<double> probs;
    double confidence = 0.0;
    int argmax_class = 0;
};

/// Fills confidence/argmax from probs without validation (lowest index wins ties).
inline Prediction make_prediction(std::vector<double> probs) {
    Prediction p;
    p.probs = std::move(probs);
    const auto it = std::max_element(p.probs.begin(), p.probs.end());
    p.argmax_class = static_cast<int>(it - p.probs.begin());
    p.confidence = *it;
    return p;
}

inline Prediction argmax_confidence(std::span<const double> probs) {
    if (probs.empty()) throw ValidationError("empty probability vector");
    double sum = 0.0;
    for (double v : probs) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("probability entry is negative or non-finite");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("probabilities sum to " + std::to_string(sum));
    return make_prediction(std::vector<double>(probs.begin(), probs.end()));
}

struct Entity {
    int id = 0;
    int cls = 0;
    std::vector<double> features;

    bool operator==(const Entity&) const = default;
};

/// One subject-object pair. `features` is the relation representation, the
/// concatenation [x_subject; x_object] of the endpoint entity features.
struct TripletInstance {
    int subject = 0;  // entity id
    int object = 0;   // entity id
    int subject_class = 0;
    int object_class = 0;
    std::vector<double> features;
    int observed_label = kBg;
    int hidden_label = kBg;
    int scene_id = 0;

    bool annotated() const { return observed_label != kBg; }
    bool operator==(const TripletInstance&) const = default;
};

struct Scene {
    int scene_id = 0;
    std::vector<Entity> entities;
    std::vector<TripletInstance> triplets;

    const Entity& entity(int id) const {
        for (const auto& e : entities)
            if (e.id == id) return e;
        throw ValidationError("scene " + std::to_string(scene_id) + " has no entity " + std::to_string(id));
    }

    bool operator==(const Scene&) const = default;
};

enum class Split { train, val, test, all };

inline const char* split_name(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::all: return "all";
    }
    return "all";
}

struct Dataset {
    std::vector<Scene> scenes;
    PredicateCatalog catalog;
    Split split = Split::all;

    std::size_t num_triplets() const {
        std::size_t n = 0;
        for (const auto& s : scenes) n += s.triplets.size();
        return n;
    }
    int feature_dim() const {
        for (const auto& s : scenes)
            for (const auto& t : s.triplets) return static_cast<int>(t.features.size());
        return 0;
    }

    bool operator==(const Dataset&) const = default;
};

/// Concatenates endpoint features into each triplet's relation representation.
inline void rebuild_triplet_features(Scene& scene) {
    for (auto& t : scene.triplets) {
        const auto& s = scene.entity(t.subject);
        const auto& o = scene.entity(t.object);
        t.subject_class = s.cls;
        t.object_class = o.cls;
        t.scene_id = scene.scene_id;
        t.features.clear();
        t.features.reserve(s.features.size() + o.features.size());
        t.features.insert(t.features.end(), s.features.begin(), s.features.end());
        t.features.insert(t.features.end(), o.features.begin(), o.features.end());
    }
}

/// Checks the structural invariants of a scene; throws ValidationError.
inline void validate_scene(const Scene& scene, int num_classes) {
    for (const auto& t : scene.triplets) {
        if (t.subject == t.object)
            throw ValidationError("triplet in scene " + std::to_string(scene.scene_id) + " links an entity to itself");
        (void)scene.entity(t.subject);
        (void)scene.entity(t.object);
        if (t.observed_label < 0 || t.observed_label >= num_classes || t.hidden_label < 0 ||
            t.hidden_label >= num_classes)
            throw ValidationError("label out of range in scene " + std::to_string(scene.scene_id));
        if (t.observed_label != kBg && t.observed_label != t.hidden_label)
            throw ValidationError("observed label disagrees with hidden label in scene " +
                                  std::to_string(scene.scene_id));
    }
}

/// Counts annotated (observed != bg) triplets per class index.
inline std::vector<std::int64_t> count_annotated(const std::vector<Scene>& scenes, int num_classes) {
    std::vector<std::int64_t> n(static_cast<std::size_t>(num_classes), 0);
    for (const auto& s : scenes)
        for (const auto& t : s.triplets)
            if (t.annotated()) ++n[static_cast<std::size_t>(t.observed_label)];
    return n;
}

/// Re-expresses every label of `data` in `target`'s index space (matched by name).
inline void relabel(Dataset& data, const PredicateCatalog& target) {
    std::vector<int> map(static_cast<std::size_t>(data.catalog.num_classes()));
    for (int i = 0; i < data.catalog.num_classes(); ++i)
        map[static_cast<std::size_t>(i)] = target.index_of(data.catalog.class_names[static_cast<std::size_t>(i)]);
    for (auto& s : data.scenes)
        for (auto& t : s.triplets) {
            t.observed_label = map[static_cast<std::size_t>(t.observed_label)];
            t.hidden_label = map[static_cast<std::size_t>(t.hidden_label)];
        }
    data.catalog = target;
}

} // namespace stsgg

#endif // STSGG_LABEL_SPACE_HPP
