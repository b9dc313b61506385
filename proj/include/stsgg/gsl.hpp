#ifndef STSGG_GSL_HPP
#define STSGG_GSL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "classifier.hpp"
#include "errors.hpp"
#include "label_space.hpp"
#include "rng.hpp"

namespace stsgg {

/// Edge scorer s = sigmoid(MLP([x_s; x_o])) with one tanh hidden layer.
struct GslParams {
    int input_dim = 0;  // length of [x_s; x_o]
    int hidden_dim = 0;
    std::vector<double> w_hidden;  // hidden_dim x input_dim
    std::vector<double> b_hidden;  // hidden_dim
    std::vector<double> w_out;     // hidden_dim
    double b_out = 0.0;
    double temperature = 0.5;
    double gamma = 2.0;
    /// false keeps only the positive focal term.
    bool symmetric_focal = true;

    GslParams zeros_like() const {
        GslParams z = *this;
        std::fill(z.w_hidden.begin(), z.w_hidden.end(), 0.0);
        std::fill(z.b_hidden.begin(), z.b_hidden.end(), 0.0);
        std::fill(z.w_out.begin(), z.w_out.end(), 0.0);
        z.b_out = 0.0;
        return z;
    }

    bool operator==(const GslParams&) const = default;
};

inline GslParams make_gsl(int input_dim, int hidden_dim) {
    if (input_dim < 2 || hidden_dim < 1) throw ConfigError("GSL needs input_dim >= 2 and hidden_dim >= 1");
    GslParams g;
    g.input_dim = input_dim;
    g.hidden_dim = hidden_dim;
    g.w_hidden.assign(static_cast<std::size_t>(input_dim * hidden_dim), 0.0);
    g.b_hidden.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    g.w_out.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    return g;
}

inline GslParams init_gsl(int input_dim, int hidden_dim, std::uint64_t seed) {
    auto g = make_gsl(input_dim, hidden_dim);
    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (auto& w : g.w_hidden) w = s1 * rng.normal();
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (auto& w : g.w_out) w = s2 * rng.normal();
    return g;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct GslForward {
    std::vector<double> hidden;
    double logit = 0.0;
    double score = 0.5;
};

inline GslForward gsl_forward(const GslParams& g, std::span<const double> pair_features) {
    if (static_cast<int>(pair_features.size()) != g.input_dim)
        throw ValidationError("edge feature dimension " + std::to_string(pair_features.size()) + " does not match GSL input " +
                              std::to_string(g.input_dim));
    GslForward f;
    const auto in = pair_features.size();
    f.hidden.resize(static_cast<std::size_t>(g.hidden_dim));
    f.logit = g.b_out;
    for (std::size_t j = 0; j < f.hidden.size(); ++j) {
        double a = g.b_hidden[j];
        for (std::size_t k = 0; k < in; ++k) a += g.w_hidden[j * in + k] * pair_features[k];
        f.hidden[j] = std::tanh(a);
        f.logit += g.w_out[j] * f.hidden[j];
    }
    f.score = sigmoid(f.logit);
    return f;
}

/// Link probability for an ordered pair; (x_s, x_o) and (x_o, x_s) generally differ.
inline double edge_score(const GslParams& g, std::span<const double> x_s, std::span<const double> x_o) {
    std::vector<double> cat(x_s.begin(), x_s.end());
    cat.insert(cat.end(), x_o.begin(), x_o.end());
    return gsl_forward(g, cat).score;
}

/// Relaxed Bernoulli draw. `relaxed` drives the backward pass, `hard` the
/// forward decision; `noise` is the Gumbel variate, kept for replay.
struct EdgeSample {
    double score = 0.5;
    double relaxed = 0.5;
    bool hard = false;
    double noise = 0.0;
    double temperature = 0.5;

    /// Straight-through derivative d hard / d score, i.e. d relaxed / d score.
    double grad_wrt_score() const { return relaxed * (1.0 - relaxed) / (temperature * score); }

    bool operator==(const EdgeSample&) const = default;
};

inline double clamp_score(double s) { return std::clamp(s, kProbFloor, 1.0 - kProbFloor); }

inline double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

/// relaxed = sigmoid((log s + eps) / temperature), hard = relaxed > 0.5.
inline EdgeSample gumbel_sample_with_noise(double score, double temperature, double noise) {
    if (!(temperature > 0.0)) throw ConfigError("Gumbel temperature must be > 0");
    EdgeSample e;
    e.score = clamp_score(score);
    e.noise = noise;
    e.temperature = temperature;
    e.relaxed = sigmoid((std::log(e.score) + noise) / temperature);
    e.hard = e.relaxed > 0.5;
    return e;
}

inline EdgeSample gumbel_sample(double score, double temperature, Rng& rng) {
    return gumbel_sample_with_noise(score, temperature, gumbel_from_uniform(rng.uniform()));
}

/// Noise for pair `pair` of scene `scene_id` at `iteration`; independent of
/// the order in which scenes are processed.
inline double pair_noise(std::uint64_t seed, std::int64_t iteration, int scene_id, int pair) {
    return gumbel_from_uniform(counter_uniform(seed ^ 0x6A09E667F3BCC908ULL, static_cast<std::uint64_t>(iteration),
                                               static_cast<std::uint64_t>(scene_id), static_cast<std::uint64_t>(pair)));
}

inline bool gate(const EdgeSample& sample) { return sample.hard; }

struct EdgeExample {
    std::span<const double> features;  // [x_s; x_o]
    int label = 0;                     // 1 iff a relation is observed
};

struct GslLossGrad {
    double loss = 0.0;
    GslParams grad;
};

/// Binary focal loss summed over pairs:
///   -y (1-s)^gamma log s  - (1-y) s^gamma log(1-s)   (negative term only when symmetric)
inline GslLossGrad focal_loss_grad(const GslParams& g, std::span<const EdgeExample> examples) {
    GslLossGrad out{0.0, g.zeros_like()};
    const double gamma = g.gamma;
    for (const auto& ex : examples) {
        if (ex.label != 0 && ex.label != 1) throw ValidationError("edge label must be 0 or 1");
        const auto f = gsl_forward(g, ex.features);
        const double s = clamp_score(f.score);
        double dz = 0.0;
        if (ex.label == 1) {
            const double q = 1.0 - s;
            out.loss += -std::pow(q, gamma) * std::log(s);
            dz = gamma * s * std::pow(q, gamma) * std::log(s) - std::pow(q, gamma + 1.0);
        } else if (g.symmetric_focal) {
            out.loss += -std::pow(s, gamma) * std::log(1.0 - s);
            dz = -gamma * std::pow(s, gamma) * (1.0 - s) * std::log(1.0 - s) + std::pow(s, gamma + 1.0);
        }
        if (dz == 0.0) continue;
        const auto in = ex.features.size();
        out.grad.b_out += dz;
        for (std::size_t j = 0; j < f.hidden.size(); ++j) {
            out.grad.w_out[j] += dz * f.hidden[j];
            const double da = dz * g.w_out[j] * (1.0 - f.hidden[j] * f.hidden[j]);
            out.grad.b_hidden[j] += da;
            for (std::size_t k = 0; k < in; ++k) out.grad.w_hidden[j * in + k] += da * ex.features[k];
        }
    }
    return out;
}

inline GslParams gsl_sgd_step(GslParams g, const GslParams& grad, double lr) {
    auto step = [lr](std::vector<double>& w, const std::vector<double>& d) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(d[i])) throw TrainingAbort("non-finite GSL gradient at entry " + std::to_string(i));
            w[i] -= lr * d[i];
        }
    };
    step(g.w_hidden, grad.w_hidden);
    step(g.b_hidden, grad.b_hidden);
    step(g.w_out, grad.w_out);
    if (!std::isfinite(grad.b_out)) throw TrainingAbort("non-finite GSL bias gradient");
    g.b_out -= lr * grad.b_out;
    return g;
}

/// Samples every triplet of a scene.
inline std::vector<EdgeSample> sample_scene_edges(const GslParams& g, const Scene& scene, std::uint64_t seed,
                                                  std::int64_t iteration) {
    std::vector<EdgeSample> out;
    out.reserve(scene.triplets.size());
    for (std::size_t i = 0; i < scene.triplets.size(); ++i) {
        const double s = gsl_forward(g, scene.triplets[i].features).score;
        out.push_back(gumbel_sample_with_noise(s, g.temperature, pair_noise(seed, iteration, scene.scene_id, static_cast<int>(i))));
    }
    return out;
}

/// One message-passing round: each entity becomes 0.5 * itself + 0.5 * the
/// mean of its neighbours over hard-sampled edges (edges taken as undirected);
/// triplet features are then rebuilt from the refined endpoints.
inline Scene message_pass(const Scene& scene, std::span<const EdgeSample> samples) {
    if (samples.size() != scene.triplets.size()) throw ValidationError("one edge sample per triplet is required");
    Scene out = scene;
    const auto n = scene.entities.size();
    auto slot = [&](int id) {
        for (std::size_t i = 0; i < n; ++i)
            if (scene.entities[i].id == id) return i;
        throw ValidationError("unknown entity id " + std::to_string(id));
    };
    std::vector<std::vector<double>> acc(n);
    std::vector<int> deg(n, 0);
    auto add = [&](std::size_t dst, std::size_t src) {
        const auto& f = scene.entities[src].features;
        if (acc[dst].empty()) acc[dst].assign(f.size(), 0.0);
        for (std::size_t k = 0; k < f.size(); ++k) acc[dst][k] += f[k];
        ++deg[dst];
    };
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].hard) continue;
        const auto a = slot(scene.triplets[i].subject);
        const auto b = slot(scene.triplets[i].object);
        add(a, b);
        add(b, a);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (deg[i] == 0) continue;
        auto& f = out.entities[i].features;
        for (std::size_t k = 0; k < f.size(); ++k) f[k] = 0.5 * f[k] + 0.5 * acc[i][k] / deg[i];
    }
    rebuild_triplet_features(out);
    return out;
}

inline void write_gsl(std::ostream& os, const GslParams& g) {
    os << "stsgg-gsl 1 " << g.input_dim << ' ' << g.hidden_dim << ' ' << hexfloat(g.temperature) << ' '
       << hexfloat(g.gamma) << ' ' << (g.symmetric_focal ? 1 : 0) << '\n';
    for (const auto* t : {&g.w_hidden, &g.b_hidden, &g.w_out}) {
        os << t->size();
        for (double v : *t) os << ' ' << hexfloat(v);
        os << '\n';
    }
    os << hexfloat(g.b_out) << '\n';
}

inline GslParams read_gsl(std::istream& is) {
    std::string magic, temp, gamma, tok;
    int version = 0, in = 0, hidden = 0, sym = 1;
    if (!(is >> magic >> version >> in >> hidden >> temp >> gamma >> sym) || magic != "stsgg-gsl" || version != 1)
        throw ValidationError("not a GSL checkpoint");
    auto g = make_gsl(in, hidden);
    g.temperature = std::strtod(temp.c_str(), nullptr);
    g.gamma = std::strtod(gamma.c_str(), nullptr);
    g.symmetric_focal = sym != 0;
    for (auto* t : {&g.w_hidden, &g.b_hidden, &g.w_out}) {
        std::size_t n = 0;
        if (!(is >> n) || n != t->size()) throw ValidationError("GSL checkpoint tensor size mismatch");
        for (auto& v : *t) {
            if (!(is >> tok)) throw ValidationError("truncated GSL checkpoint");
            v = std::strtod(tok.c_str(), nullptr);
        }
    }
    if (!(is >> tok)) throw ValidationError("truncated GSL checkpoint");
    g.b_out = std::strtod(tok.c_str(), nullptr);
    return g;
}

} // namespace stsgg

#endif // STSGG_GSL_HPP
