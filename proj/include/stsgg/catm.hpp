#ifndef STSGG_CATM_HPP
#define STSGG_CATM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "label_space.hpp"

namespace stsgg {

/// Class-specific EMA momentum. Vectors are indexed by foreground rank
/// (entry c - 1 belongs to class c).
struct MomentumCoefficients {
    std::vector<double> lambda_inc;
    std::vector<double> lambda_dec;
    double alpha_inc = 0.4;
    double alpha_dec = 0.4;

    bool operator==(const MomentumCoefficients&) const = default;
};

/// lambda_inc[c] = (N_c / N_1)^alpha_inc and lambda_dec[c] = (N_{K+1-c} / N_1)^alpha_dec.
/// A zero count is read as one instance so every coefficient stays in (0, 1].
inline MomentumCoefficients momentum_coefficients(const PredicateCatalog& catalog, double alpha_inc, double alpha_dec) {
    if (!(alpha_inc >= 0.0 && alpha_inc <= 1.0) || !(alpha_dec >= 0.0 && alpha_dec <= 1.0))
        throw ConfigError("momentum rates alpha_inc/alpha_dec must lie in [0, 1]");
    const int k = catalog.num_foreground();
    if (k < 1 || catalog.count(1) <= 0) throw ConfigError("momentum coefficients need N_1 > 0");
    const auto n1 = static_cast<double>(catalog.count(1));
    auto ratio = [&](int c) { return static_cast<double>(std::max<std::int64_t>(catalog.count(c), 1)) / n1; };
    MomentumCoefficients m;
    m.alpha_inc = alpha_inc;
    m.alpha_dec = alpha_dec;
    for (int c = 1; c <= k; ++c) {
        m.lambda_inc.push_back(std::pow(ratio(c), alpha_inc));
        m.lambda_dec.push_back(std::pow(ratio(k + 1 - c), alpha_dec));
    }
    return m;
}

/// Uniform momentum for the "without class-specific momentum" ablation.
inline MomentumCoefficients uniform_momentum(int num_foreground, double value = 0.5) {
    MomentumCoefficients m;
    m.alpha_inc = m.alpha_dec = 0.0;
    m.lambda_inc.assign(static_cast<std::size_t>(num_foreground), value);
    m.lambda_dec.assign(static_cast<std::size_t>(num_foreground), value);
    return m;
}

/// One unannotated triplet as seen by a threshold update: predicted class and
/// confidence.
struct Candidate {
    int predicted_class = 0;
    double confidence = 0.0;
};

/// Adaptive per-class thresholds tau_c^t.
struct ThresholdState {
    std::vector<double> tau;
    MomentumCoefficients coefficients;
    std::int64_t iteration = 0;
    /// Variant: average only the candidates at or above the
    /// previous threshold in the increase branch.
    bool strict_eligible_mean = false;

    double threshold(int cls) const { return tau.at(static_cast<std::size_t>(cls - 1)); }

    bool operator==(const ThresholdState&) const = default;
};

inline ThresholdState initial_state(MomentumCoefficients coefficients, double initial_tau = 0.0) {
    if (!(initial_tau >= 0.0 && initial_tau <= 1.0)) throw ConfigError("initial threshold must lie in [0, 1]");
    ThresholdState s;
    s.tau.assign(coefficients.lambda_inc.size(), initial_tau);
    s.coefficients = std::move(coefficients);
    return s;
}

/// EMA threshold update from the unannotated predictions of one batch.
///
/// Per class c with predicted set P_c:
///   some q >= tau_c  -> tau_c = (1 - l_inc) tau_c + l_inc mean(P_c)
///   all  q <  tau_c  -> tau_c = (1 - l_dec) tau_c + l_dec mean(P_c)
///   P_c empty        -> unchanged
/// Candidates predicted as bg are ignored.
inline ThresholdState catm_update(ThresholdState state, std::span<const Candidate> predictions) {
    const auto k = state.tau.size();
    std::vector<double> sum(k, 0.0), eligible_sum(k, 0.0);
    std::vector<std::int64_t> n(k, 0), eligible(k, 0);
    for (const auto& p : predictions) {
        if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
            throw ValidationError("confidence " + std::to_string(p.confidence) + " outside [0, 1]");
        if (p.predicted_class == kBg) continue;
        if (p.predicted_class < 0 || static_cast<std::size_t>(p.predicted_class) > k)
            throw ValidationError("predicted class out of range");
        const auto c = static_cast<std::size_t>(p.predicted_class - 1);
        sum[c] += p.confidence;
        ++n[c];
        if (p.confidence >= state.tau[c]) {
            eligible_sum[c] += p.confidence;
            ++eligible[c];
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (n[c] == 0) continue;
        const double prev = state.tau[c];
        if (eligible[c] > 0) {
            const double mean = state.strict_eligible_mean ? eligible_sum[c] / static_cast<double>(eligible[c])
                                                           : sum[c] / static_cast<double>(n[c]);
            const double l = state.coefficients.lambda_inc[c];
            state.tau[c] = (1.0 - l) * prev + l * mean;
        } else {
            const double l = state.coefficients.lambda_dec[c];
            state.tau[c] = (1.0 - l) * prev + l * (sum[c] / static_cast<double>(n[c]));
        }
    }
    ++state.iteration;
    return state;
}

enum class PolicyKind { catm, constant, fixed_class, freq_weighted, dash_adaptive, never };

inline const char* policy_name(PolicyKind k) {
    switch (k) {
    case PolicyKind::catm: return "catm";
    case PolicyKind::constant: return "constant";
    case PolicyKind::fixed_class: return "fixed-class";
    case PolicyKind::freq_weighted: return "freq-weighted";
    case PolicyKind::dash_adaptive: return "dash-adaptive";
    case PolicyKind::never: return "never";
    }
    return "?";
}

inline PolicyKind parse_policy(const std::string& s) {
    for (auto k : {PolicyKind::catm, PolicyKind::constant, PolicyKind::fixed_class, PolicyKind::freq_weighted,
                   PolicyKind::dash_adaptive, PolicyKind::never})
        if (s == policy_name(k)) return k;
    throw ConfigError("unknown policy '" + s + "'");
}

/// A thresholding scheme behind one interface. `thresholds` holds the
/// thresholds currently in force (per foreground rank); `base` holds the
/// static starting point of the dash schedule (tau^cls).
struct ThresholdPolicy {
    PolicyKind kind = PolicyKind::catm;
    std::vector<double> thresholds;
    std::vector<double> base;
    ThresholdState catm;
    double dash_growth = 1.1;
    std::int64_t dash_interval = 0;

    int num_foreground() const { return static_cast<int>(thresholds.size()); }

    double threshold(int cls) const {
        if (kind == PolicyKind::catm) return catm.threshold(cls);
        return thresholds.at(static_cast<std::size_t>(cls - 1));
    }

    bool operator==(const ThresholdPolicy&) const = default;
};

inline ThresholdPolicy catm_policy(ThresholdState state) {
    ThresholdPolicy p;
    p.kind = PolicyKind::catm;
    p.thresholds = state.tau;
    p.catm = std::move(state);
    return p;
}

/// Accepts nothing; self-training under it is plain supervised training with
/// every unannotated triplet treated as bg.
inline ThresholdPolicy never_policy(int num_foreground) {
    ThresholdPolicy p;
    p.kind = PolicyKind::never;
    p.thresholds.assign(static_cast<std::size_t>(num_foreground), 1.0);
    return p;
}

/// Pseudo-label decision: the argmax class if it is foreground and its
/// confidence reaches the class threshold, otherwise nothing (stays bg).
inline std::optional<int> decide(const ThresholdPolicy& policy, const Prediction& prediction) {
    if (prediction.argmax_class == kBg || policy.kind == PolicyKind::never) return std::nullopt;
    if (prediction.argmax_class > policy.num_foreground()) throw ValidationError("prediction has too many classes");
    if (prediction.confidence >= policy.threshold(prediction.argmax_class)) return prediction.argmax_class;
    return std::nullopt;
}

inline std::optional<int> decide(const ThresholdState& state, const Prediction& prediction) {
    if (prediction.argmax_class == kBg) return std::nullopt;
    if (prediction.confidence >= state.threshold(prediction.argmax_class)) return prediction.argmax_class;
    return std::nullopt;
}

/// Smallest value among the top ceil(fraction * n) entries of `pool`.
inline double upper_quantile(std::vector<double> pool, double fraction) {
    if (pool.empty()) throw ValidationError("threshold pool is empty");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("quantile fraction must lie in (0, 1]");
    std::sort(pool.begin(), pool.end(), std::greater<>());
    auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size()) - 1e-9));
    take = std::clamp<std::size_t>(take, 1, pool.size());
    return pool[take - 1];
}

/// tau^con: one threshold for every class, the top-`fraction` confidence of
/// the pooled validation predictions.
inline ThresholdPolicy constant_threshold(const std::vector<double>& pool, double fraction, int num_foreground) {
    ThresholdPolicy p;
    p.kind = PolicyKind::constant;
    p.thresholds.assign(static_cast<std::size_t>(num_foreground), upper_quantile(pool, fraction));
    p.base = p.thresholds;
    return p;
}

/// tau_c^cls: per predicted class top-`fraction` confidence. Classes without
/// validation predictions get 1.0.
inline ThresholdPolicy fixed_class_threshold(const std::map<int, std::vector<double>>& pools, double fraction,
                                             int num_foreground) {
    ThresholdPolicy p;
    p.kind = PolicyKind::fixed_class;
    p.thresholds.assign(static_cast<std::size_t>(num_foreground), 1.0);
    for (const auto& [cls, pool] : pools) {
        if (cls < 1 || cls > num_foreground) throw ValidationError("pool for class out of range");
        if (!pool.empty()) p.thresholds[static_cast<std::size_t>(cls - 1)] = upper_quantile(pool, fraction);
    }
    p.base = p.thresholds;
    return p;
}

/// tau_c^lt = (1 - m) tau_c^cls + m N_c / N_1, clipped to [0, 1].
inline ThresholdPolicy freq_weighted_threshold(const ThresholdPolicy& fixed, const PredicateCatalog& catalog, double mix) {
    if (!(mix >= 0.0 && mix <= 1.0)) throw ConfigError("frequency mix weight must lie in [0, 1]");
    if (fixed.num_foreground() != catalog.num_foreground()) throw ValidationError("policy/catalog class mismatch");
    ThresholdPolicy p = fixed;
    p.kind = PolicyKind::freq_weighted;
    const double n1 = static_cast<double>(std::max<std::int64_t>(catalog.count(1), 1));
    for (int c = 1; c <= catalog.num_foreground(); ++c) {
        const auto i = static_cast<std::size_t>(c - 1);
        const double freq = static_cast<double>(catalog.count(c)) / n1;
        p.thresholds[i] = std::clamp((1.0 - mix) * fixed.thresholds[i] + mix * freq, 0.0, 1.0);
    }
    p.base = p.thresholds;
    return p;
}

/// Dash-style growth: tau_c = min(1, tau_c^cls * growth^k) after k intervals.
inline ThresholdPolicy dash_policy(const ThresholdPolicy& fixed, double growth, std::int64_t interval) {
    if (!(growth > 1.0)) throw ConfigError("dash growth factor must be > 1");
    if (interval < 1) throw ConfigError("dash interval must be >= 1 iteration");
    ThresholdPolicy p = fixed;
    p.kind = PolicyKind::dash_adaptive;
    p.base = fixed.base.empty() ? fixed.thresholds : fixed.base;
    p.thresholds = p.base;
    p.dash_growth = growth;
    p.dash_interval = interval;
    return p;
}

inline ThresholdPolicy dash_adaptive_update(ThresholdPolicy policy, std::int64_t interval_counter) {
    if (policy.kind != PolicyKind::dash_adaptive) throw ConfigError("dash update applied to a non-dash policy");
    if (!(policy.dash_growth > 1.0)) throw ConfigError("dash growth factor must be > 1");
    const double factor = std::pow(policy.dash_growth, static_cast<double>(interval_counter));
    for (std::size_t i = 0; i < policy.thresholds.size(); ++i)
        policy.thresholds[i] = std::min(1.0, policy.base[i] * factor);
    return policy;
}

/// Advances a policy after iteration `iteration` (1-based) given the batch's
/// unannotated predictions. CATM runs its EMA; dash moves to the next growth
/// step at interval boundaries; static policies are unchanged.
inline ThresholdPolicy observe(ThresholdPolicy policy, std::span<const Candidate> predictions, std::int64_t iteration) {
    switch (policy.kind) {
    case PolicyKind::catm:
        policy.catm = catm_update(std::move(policy.catm), predictions);
        policy.thresholds = policy.catm.tau;
        break;
    case PolicyKind::dash_adaptive:
        if (iteration % policy.dash_interval == 0) policy = dash_adaptive_update(std::move(policy), iteration / policy.dash_interval);
        break;
    default: break;
    }
    return policy;
}

/// Renders one threshold-trajectory row: iteration followed by tau_1..tau_K at
/// full double precision.
inline std::string threshold_row(std::int64_t iteration, std::span<const double> tau) {
    std::string row = std::to_string(iteration);
    char buf[32];
    for (double t : tau) {
        std::snprintf(buf, sizeof buf, ",%.17g", t);
        row += buf;
    }
    return row;
}

} // namespace stsgg

#endif // STSGG_CATM_HPP
