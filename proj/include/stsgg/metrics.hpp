#ifndef STSGG_METRICS_HPP
#define STSGG_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "label_space.hpp"

namespace stsgg {

/// A scored prediction for one ground-truth pair of a scene. `score` is the
/// best foreground probability and `predicted` its class; `truth` is bg for
/// pairs without a relation.
struct RankedTriplet {
    double score = 0.0;
    int predicted = 0;
    int truth = kBg;
};

using SceneRanking = std::vector<RankedTriplet>;

/// Indices of the top-K entries of a scene: descending score, ties by index.
inline std::vector<std::size_t> top_k(const SceneRanking& scene, int k) {
    std::vector<std::size_t> idx(scene.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scene[a].score > scene[b].score; });
    idx.resize(std::min(idx.size(), static_cast<std::size_t>(k)));
    return idx;
}

inline void check_k(int k) {
    if (k <= 0) throw ConfigError("K must be positive, got " + std::to_string(k));
}

/// R@K in percent: per scene |top-K hits| / |GT|, averaged over scenes with GT.
inline double recall_at_k(std::span<const SceneRanking> scenes, int k) {
    check_k(k);
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& s : scenes) {
        std::size_t gt = 0;
        for (const auto& t : s) gt += t.truth != kBg;
        if (gt == 0) continue;
        std::size_t hits = 0;
        for (auto i : top_k(s, k)) hits += s[i].truth != kBg && s[i].predicted == s[i].truth;
        sum += static_cast<double>(hits) / static_cast<double>(gt);
        ++used;
    }
    if (used == 0) throw ValidationError("recall is undefined without ground-truth relations");
    return 100.0 * sum / static_cast<double>(used);
}

/// Per-class recall@K in percent over the whole split; NaN for classes with
/// no ground truth. Index 0 (bg) is always NaN.
inline std::vector<double> per_class_recall_at_k(std::span<const SceneRanking> scenes, int k, int num_classes) {
    check_k(k);
    std::vector<std::int64_t> gt(static_cast<std::size_t>(num_classes), 0), hit(static_cast<std::size_t>(num_classes), 0);
    for (const auto& s : scenes) {
        for (const auto& t : s)
            if (t.truth != kBg) ++gt[static_cast<std::size_t>(t.truth)];
        for (auto i : top_k(s, k))
            if (s[i].truth != kBg && s[i].predicted == s[i].truth) ++hit[static_cast<std::size_t>(s[i].truth)];
    }
    std::vector<double> r(static_cast<std::size_t>(num_classes), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 1; c < r.size(); ++c)
        if (gt[c] > 0) r[c] = 100.0 * static_cast<double>(hit[c]) / static_cast<double>(gt[c]);
    return r;
}

/// Unweighted mean of the defined entries of a per-class recall vector.
inline double mean_defined(std::span<const double> per_class) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : per_class)
        if (!std::isnan(v)) {
            sum += v;
            ++n;
        }
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return sum / static_cast<double>(n);
}

/// mR@K in percent: mean per-class recall over classes with at least one GT instance.
inline double mean_recall_at_k(std::span<const SceneRanking> scenes, int k, int num_classes) {
    const auto r = per_class_recall_at_k(scenes, k, num_classes);
    const double m = mean_defined(r);
    if (std::isnan(m)) throw ValidationError("mean recall is undefined without ground-truth relations");
    return m;
}

/// Harmonic mean of R@K and mR@K; 0 when both are 0.
inline double f_at_k(double r, double mr) {
    if (r < 0.0 || mr < 0.0) throw ValidationError("recall values must be non-negative");
    if (r + mr == 0.0) return 0.0;
    return 2.0 * r * mr / (r + mr);
}

/// Rank-tercile group of foreground class `cls` among `num_foreground`: 0 head, 1 body, 2 tail.
inline int class_group(int cls, int num_foreground) { return (3 * (cls - 1)) / num_foreground; }

struct EvalReport {
    std::vector<int> ks;
    std::vector<double> recall;
    std::vector<double> mean_recall;
    std::vector<double> f;
    std::vector<std::vector<double>> per_class;           // [k][class]
    std::vector<std::array<double, 3>> group_mean_recall;  // [k][head, body, tail]

    std::size_t index_of(int k) const {
        for (std::size_t i = 0; i < ks.size(); ++i)
            if (ks[i] == k) return i;
        throw ConfigError("K=" + std::to_string(k) + " was not evaluated");
    }
};

inline EvalReport evaluate_rankings(std::span<const SceneRanking> scenes, const std::vector<int>& ks, int num_classes) {
    EvalReport rep;
    rep.ks = ks;
    const int k_fg = num_classes - 1;
    for (int k : ks) {
        const double r = recall_at_k(scenes, k);
        auto pc = per_class_recall_at_k(scenes, k, num_classes);
        const double mr = mean_defined(pc);
        if (std::isnan(mr)) throw ValidationError("mean recall is undefined without ground-truth relations");
        std::array<double, 3> groups{};
        for (int g = 0; g < 3; ++g) {
            std::vector<double> members;
            for (int c = 1; c <= k_fg; ++c)
                if (class_group(c, k_fg) == g) members.push_back(pc[static_cast<std::size_t>(c)]);
            groups[static_cast<std::size_t>(g)] = mean_defined(members);
        }
        rep.recall.push_back(r);
        rep.mean_recall.push_back(mr);
        rep.f.push_back(f_at_k(r, mr));
        rep.per_class.push_back(std::move(pc));
        rep.group_mean_recall.push_back(groups);
    }
    return rep;
}

/// One accepted pseudo-label: triplet `triplet` of scene `scene_id` got class `cls`.
struct PseudoAssignment {
    std::int64_t iteration = 0;
    int scene_id = 0;
    int triplet = 0;
    int cls = 0;
    double confidence = 0.0;

    bool operator==(const PseudoAssignment&) const = default;
};

/// Pseudo-label quality against generator truth. Precision counts assignment
/// events; recall counts distinct masked relations ever labelled correctly.
struct PseudoLabelAudit {
    std::vector<std::int64_t> assigned;        // per class, events
    std::vector<std::int64_t> correct;         // per class, events with cls == hidden
    std::vector<std::int64_t> masked_truth;    // per class, unannotated triplets whose hidden label is the class
    std::vector<std::int64_t> recovered;       // per class, distinct masked triplets labelled correctly
    std::vector<double> precision;             // NaN where nothing was assigned
    std::vector<double> recall;                // NaN where no masked truth exists
    std::int64_t total_assigned = 0;
    std::int64_t total_correct = 0;
    std::int64_t total_incorrect = 0;
    std::int64_t bg_violations = 0;            // assignments on true-bg triplets

    double overall_precision() const {
        return total_assigned == 0 ? std::numeric_limits<double>::quiet_NaN()
                                   : static_cast<double>(total_correct) / static_cast<double>(total_assigned);
    }
};

inline PseudoLabelAudit audit_pseudo_labels(std::span<const PseudoAssignment> log, const Dataset& data) {
    const auto nc = static_cast<std::size_t>(data.catalog.num_classes());
    PseudoLabelAudit a;
    a.assigned.assign(nc, 0);
    a.correct.assign(nc, 0);
    a.masked_truth.assign(nc, 0);
    a.recovered.assign(nc, 0);
    std::map<int, const Scene*> by_id;
    for (const auto& s : data.scenes) {
        by_id[s.scene_id] = &s;
        for (const auto& t : s.triplets)
            if (!t.annotated() && t.hidden_label != kBg) ++a.masked_truth[static_cast<std::size_t>(t.hidden_label)];
    }
    std::set<std::pair<int, int>> recovered;
    for (const auto& e : log) {
        const auto it = by_id.find(e.scene_id);
        if (it == by_id.end() || e.triplet < 0 || e.triplet >= static_cast<int>(it->second->triplets.size()))
            throw ValidationError("assignment references missing triplet " + std::to_string(e.scene_id) + "/" +
                                  std::to_string(e.triplet));
        if (e.cls <= kBg || e.cls >= static_cast<int>(nc)) throw ValidationError("assignment has an invalid class");
        const auto& t = it->second->triplets[static_cast<std::size_t>(e.triplet)];
        ++a.assigned[static_cast<std::size_t>(e.cls)];
        ++a.total_assigned;
        if (t.hidden_label == kBg) ++a.bg_violations;
        if (t.hidden_label == e.cls) {
            ++a.correct[static_cast<std::size_t>(e.cls)];
            ++a.total_correct;
            if (!t.annotated() && recovered.insert({e.scene_id, e.triplet}).second)
                ++a.recovered[static_cast<std::size_t>(e.cls)];
        } else {
            ++a.total_incorrect;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    a.precision.assign(nc, nan);
    a.recall.assign(nc, nan);
    for (std::size_t c = 1; c < nc; ++c) {
        if (a.assigned[c] > 0) a.precision[c] = static_cast<double>(a.correct[c]) / static_cast<double>(a.assigned[c]);
        if (a.masked_truth[c] > 0) a.recall[c] = static_cast<double>(a.recovered[c]) / static_cast<double>(a.masked_truth[c]);
    }
    return a;
}

} // namespace stsgg

#endif // STSGG_METRICS_HPP
