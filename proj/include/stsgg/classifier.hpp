#ifndef STSGG_CLASSIFIER_HPP
#define STSGG_CLASSIFIER_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "label_space.hpp"
#include "rng.hpp"

namespace stsgg {

/// Floor applied to probabilities inside log().
inline constexpr double kProbFloor = 1e-12;

enum class Architecture { linear, one_hidden };

inline const char* architecture_name(Architecture a) { return a == Architecture::linear ? "linear" : "one-hidden"; }

inline Architecture parse_architecture(const std::string& s) {
    if (s == "linear") return Architecture::linear;
    if (s == "one-hidden" || s == "one_hidden") return Architecture::one_hidden;
    throw ConfigError("unknown architecture '" + s + "'");
}

/// Weights of the predicate classifier. Row-major matrices; the hidden layer
/// (tanh) is present only for Architecture::one_hidden. The same struct
/// doubles as a gradient record.
struct ModelParams {
    Architecture arch = Architecture::linear;
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    std::vector<double> w_hidden;  // hidden_dim x input_dim
    std::vector<double> b_hidden;  // hidden_dim
    std::vector<double> w_out;     // output_dim x (hidden_dim or input_dim)
    std::vector<double> b_out;     // output_dim

    int out_fan_in() const { return arch == Architecture::linear ? input_dim : hidden_dim; }

    std::array<std::vector<double>*, 4> tensors() { return {&w_hidden, &b_hidden, &w_out, &b_out}; }
    std::array<const std::vector<double>*, 4> tensors() const { return {&w_hidden, &b_hidden, &w_out, &b_out}; }

    std::size_t size() const { return w_hidden.size() + b_hidden.size() + w_out.size() + b_out.size(); }

    ModelParams zeros_like() const {
        ModelParams z = *this;
        for (auto* t : z.tensors()) std::fill(t->begin(), t->end(), 0.0);
        return z;
    }

    bool operator==(const ModelParams&) const = default;
};

inline ModelParams make_params(Architecture arch, int input_dim, int hidden_dim, int output_dim) {
    if (input_dim < 1 || output_dim < 2) throw ConfigError("classifier needs input_dim >= 1 and output_dim >= 2");
    if (arch == Architecture::one_hidden && hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    ModelParams p;
    p.arch = arch;
    p.input_dim = input_dim;
    p.hidden_dim = arch == Architecture::linear ? 0 : hidden_dim;
    p.output_dim = output_dim;
    const auto in = static_cast<std::size_t>(input_dim);
    const auto h = static_cast<std::size_t>(p.hidden_dim);
    const auto out = static_cast<std::size_t>(output_dim);
    p.w_hidden.assign(h * in, 0.0);
    p.b_hidden.assign(h, 0.0);
    p.w_out.assign(out * (arch == Architecture::linear ? in : h), 0.0);
    p.b_out.assign(out, 0.0);
    return p;
}

/// Gaussian init scaled by 1/sqrt(fan_in); biases start at zero.
inline ModelParams init_params(Architecture arch, int input_dim, int hidden_dim, int output_dim, std::uint64_t seed,
                               double gain = 1.0) {
    auto p = make_params(arch, input_dim, hidden_dim, output_dim);
    Rng rng(seed);
    const double s_hidden = gain / std::sqrt(static_cast<double>(input_dim));
    for (auto& w : p.w_hidden) w = s_hidden * rng.normal();
    const double s_out = gain / std::sqrt(static_cast<double>(p.out_fan_in()));
    for (auto& w : p.w_out) w = s_out * rng.normal();
    return p;
}

/// Numerically stable softmax (max-subtracted).
inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

/// Intermediate values of one forward pass, kept for backprop.
struct ForwardCache {
    std::vector<double> hidden;  // tanh activations (one_hidden only)
    std::vector<double> logits;
    std::vector<double> probs;
};

inline ForwardCache forward_cache(const ModelParams& params, std::span<const double> x) {
    if (static_cast<int>(x.size()) != params.input_dim)
        throw ValidationError("feature dimension " + std::to_string(x.size()) + " does not match classifier input " +
                              std::to_string(params.input_dim));
    ForwardCache c;
    std::span<const double> top = x;
    if (params.arch == Architecture::one_hidden) {
        const auto in = static_cast<std::size_t>(params.input_dim);
        c.hidden.resize(static_cast<std::size_t>(params.hidden_dim));
        for (std::size_t j = 0; j < c.hidden.size(); ++j) {
            double a = params.b_hidden[j];
            for (std::size_t k = 0; k < in; ++k) a += params.w_hidden[j * in + k] * x[k];
            c.hidden[j] = std::tanh(a);
        }
        top = c.hidden;
    }
    const auto fan = top.size();
    c.logits.resize(static_cast<std::size_t>(params.output_dim));
    for (std::size_t i = 0; i < c.logits.size(); ++i) {
        double z = params.b_out[i];
        for (std::size_t k = 0; k < fan; ++k) z += params.w_out[i * fan + k] * top[k];
        c.logits[i] = z;
    }
    c.probs = softmax(c.logits);
    return c;
}

inline Prediction forward(const ModelParams& params, std::span<const double> features) {
    return make_prediction(forward_cache(params, features).probs);
}

/// Adds scale * d(-weight * log p[target])/dtheta to `grad` and returns the
/// unscaled weighted loss.
inline double accumulate_ce(const ModelParams& params, std::span<const double> x, int target, double weight,
                            double scale, ModelParams& grad) {
    const auto c = forward_cache(params, x);
    const auto t = static_cast<std::size_t>(target);
    const double loss = -weight * std::log(std::max(c.probs[t], kProbFloor));
    if (scale == 0.0 || weight == 0.0) return loss;

    // d loss / d logits = weight * (p - onehot); the floor is treated as
    // inactive for the gradient.
    std::vector<double> dz(c.probs.size());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = scale * weight * (c.probs[i] - (i == t ? 1.0 : 0.0));

    std::span<const double> top = params.arch == Architecture::one_hidden ? std::span<const double>(c.hidden) : x;
    const auto fan = top.size();
    for (std::size_t i = 0; i < dz.size(); ++i) {
        grad.b_out[i] += dz[i];
        for (std::size_t k = 0; k < fan; ++k) grad.w_out[i * fan + k] += dz[i] * top[k];
    }
    if (params.arch == Architecture::one_hidden) {
        const auto in = x.size();
        for (std::size_t j = 0; j < c.hidden.size(); ++j) {
            double dh = 0.0;
            for (std::size_t i = 0; i < dz.size(); ++i) dh += dz[i] * params.w_out[i * fan + j];
            const double da = dh * (1.0 - c.hidden[j] * c.hidden[j]);
            grad.b_hidden[j] += da;
            for (std::size_t k = 0; k < in; ++k) grad.w_hidden[j * in + k] += da * x[k];
        }
    }
    return loss;
}

struct LossGrad {
    double loss = 0.0;
    ModelParams grad;
};

/// Mean weighted cross-entropy over annotated triplets against their observed
/// labels. An empty batch gives loss 0 and zero gradients.
inline LossGrad supervised_loss_grad(const ModelParams& params, std::span<const TripletInstance> labeled,
                                     std::span<const double> class_weights) {
    if (static_cast<int>(class_weights.size()) != params.output_dim)
        throw ValidationError("class weight vector has the wrong length");
    LossGrad out{0.0, params.zeros_like()};
    if (labeled.empty()) return out;
    const double scale = 1.0 / static_cast<double>(labeled.size());
    for (const auto& t : labeled) {
        if (t.observed_label == kBg) throw ValidationError("supervised loss received an unannotated triplet");
        out.loss += scale * accumulate_ce(params, t.features, t.observed_label,
                                          class_weights[static_cast<std::size_t>(t.observed_label)], scale, out.grad);
    }
    return out;
}

/// theta <- theta - lr * grad. Throws TrainingAbort on a non-finite gradient.
inline ModelParams sgd_step(ModelParams params, const ModelParams& grads, double lr) {
    auto dst = params.tensors();
    const auto src = grads.tensors();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        if (dst[k]->size() != src[k]->size()) throw ValidationError("gradient shape does not match parameters");
        for (std::size_t i = 0; i < dst[k]->size(); ++i) {
            const double g = (*src[k])[i];
            if (!std::isfinite(g))
                throw TrainingAbort("non-finite gradient in tensor " + std::to_string(k) + " entry " + std::to_string(i) +
                                    " (value " + std::to_string(g) + ")");
            (*dst[k])[i] -= lr * g;
        }
    }
    return params;
}

enum class ReweightScheme { none, inverse_frequency };

inline ReweightScheme parse_reweight(const std::string& s) {
    if (s == "none") return ReweightScheme::none;
    if (s == "inverse-frequency" || s == "inverse_frequency") return ReweightScheme::inverse_frequency;
    throw ConfigError("unknown reweight scheme '" + s + "'");
}

inline constexpr double kMaxClassWeight = 100.0;

/// Per-class loss weights (bg fixed at 1). Inverse frequency: w_c proportional
/// to 1/N_c, normalised to mean 1 over foreground classes, capped at 100.
inline std::vector<double> class_weights(const PredicateCatalog& catalog, ReweightScheme scheme) {
    std::vector<double> w(static_cast<std::size_t>(catalog.num_classes()), 1.0);
    if (scheme == ReweightScheme::none) return w;
    const int k = catalog.num_foreground();
    std::vector<double> raw(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int c = 1; c <= k; ++c) {
        const auto n = catalog.count(c);
        if (n <= 0) continue;
        raw[static_cast<std::size_t>(c - 1)] = 1.0 / static_cast<double>(n);
        sum += raw[static_cast<std::size_t>(c - 1)];
    }
    if (sum == 0.0) return w;
    const double mean = sum / static_cast<double>(k);
    for (int c = 1; c <= k; ++c) {
        const auto n = catalog.count(c);
        w[static_cast<std::size_t>(c)] = n <= 0 ? kMaxClassWeight : std::min(kMaxClassWeight, raw[static_cast<std::size_t>(c - 1)] / mean);
    }
    return w;
}

// Checkpoint format: a text header line followed by one line per tensor,
// "<name> <length> v0 v1 ..." with values in C99 hexfloat so a round trip is
// bit-exact.

inline std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline void write_params(std::ostream& os, const ModelParams& p) {
    os << "stsgg-params 1 " << architecture_name(p.arch) << ' ' << p.input_dim << ' ' << p.hidden_dim << ' '
       << p.output_dim << '\n';
    const char* names[] = {"w_hidden", "b_hidden", "w_out", "b_out"};
    const auto ts = p.tensors();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        os << names[k] << ' ' << ts[k]->size();
        for (double v : *ts[k]) os << ' ' << hexfloat(v);
        os << '\n';
    }
}

inline ModelParams read_params(std::istream& is) {
    std::string magic, arch;
    int version = 0, in = 0, hidden = 0, out = 0;
    if (!(is >> magic >> version >> arch >> in >> hidden >> out) || magic != "stsgg-params" || version != 1)
        throw ValidationError("not a parameter checkpoint");
    auto p = make_params(parse_architecture(arch), in, hidden, out);
    const char* names[] = {"w_hidden", "b_hidden", "w_out", "b_out"};
    auto ts = p.tensors();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        std::string name;
        std::size_t n = 0;
        if (!(is >> name >> n) || name != names[k] || n != ts[k]->size())
            throw ValidationError("checkpoint tensor header mismatch at " + std::string(names[k]));
        for (auto& v : *ts[k]) {
            std::string tok;
            if (!(is >> tok)) throw ValidationError("truncated checkpoint");
            v = std::strtod(tok.c_str(), nullptr);
        }
    }
    return p;
}

inline void save_params(const std::string& path, const ModelParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write checkpoint " + path);
    write_params(os, p);
}

inline ModelParams load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("missing checkpoint: expected " + path);
    return read_params(is);
}

} // namespace stsgg

#endif // STSGG_CLASSIFIER_HPP
