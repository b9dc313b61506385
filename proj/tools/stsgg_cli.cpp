// stsgg: command-line driver for the synthetic self-training pipeline.
//
//   stsgg gen | pretrain | selftrain | eval | audit | sweep [--config FILE] [--key value ...]
//
// Every key of the configuration file is also a kebab-case flag.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <stsgg/stsgg.hpp>

namespace fs = std::filesystem;
using namespace stsgg;

namespace {

struct RunConfig {
    BenchmarkConfig bench = default_benchmark();
    std::optional<double> beta;  // unset: 1.0, or 0.1 when reweighting
    std::string data_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string log_dir = "logs";
    std::string run_name = "selftrain";
    std::string init_checkpoint;
    std::string checkpoint;
    std::string eval_split = "test";
    std::string truth = "hidden";
    std::string sweep_split = "val";
    std::vector<double> sweep_alpha_inc = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> sweep_alpha_dec = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::int64_t checkpoint_interval = 0;
    bool resume = false;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        if constexpr (std::is_floating_point_v<T>)
            os << fmt(v[i]);
        else
            os << v[i];
    }
    return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',' || ch == ':' || ch == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& t : split_list(v)) out.push_back(static_cast<int>(to_int(key, t)));
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& t : split_list(v)) out.push_back(to_double(key, t));
    return out;
}

struct Field {
    std::string key;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define STSGG_NUM(KEY, EXPR, HELP)                                                                          \
    Field {                                                                                                 \
        KEY, HELP, [](RunConfig& c, const std::string& v) { EXPR = static_cast<std::decay_t<decltype(EXPR)>>( \
                                                                  to_double(KEY, v)); },                     \
            [](const RunConfig& c) { return fmt(static_cast<double>(EXPR)); }                               \
    }
#define STSGG_INT(KEY, EXPR, HELP)                                                                          \
    Field {                                                                                                 \
        KEY, HELP, [](RunConfig& c, const std::string& v) { EXPR = static_cast<std::decay_t<decltype(EXPR)>>( \
                                                                  to_int(KEY, v)); },                        \
            [](const RunConfig& c) { return std::to_string(EXPR); }                                         \
    }
#define STSGG_BOOL(KEY, EXPR, HELP)                                                             \
    Field {                                                                                     \
        KEY, HELP, [](RunConfig& c, const std::string& v) { EXPR = to_bool(KEY, v); },          \
            [](const RunConfig& c) { return std::string(EXPR ? "true" : "false"); }             \
    }
#define STSGG_STR(KEY, EXPR, HELP)                                                              \
    Field {                                                                                     \
        KEY, HELP, [](RunConfig& c, const std::string& v) { EXPR = v; },                        \
            [](const RunConfig& c) { return EXPR; }                                             \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        // paths
        STSGG_STR("data_dir", c.data_dir, "dataset directory"),
        STSGG_STR("checkpoint_dir", c.checkpoint_dir, "checkpoint directory"),
        STSGG_STR("log_dir", c.log_dir, "log and report directory"),
        STSGG_STR("run_name", c.run_name, "prefix of self-training outputs"),
        STSGG_STR("init_checkpoint", c.init_checkpoint, "self-training start point (default: <checkpoint_dir>/pretrain.params)"),
        STSGG_STR("checkpoint", c.checkpoint, "checkpoint to evaluate (default: <checkpoint_dir>/<run_name>.params)"),
        // generator
        STSGG_INT("n_scenes", c.bench.generator.n_scenes, "number of scenes"),
        STSGG_INT("entities_min", c.bench.generator.entities_min, "minimum entities per scene"),
        STSGG_INT("entities_max", c.bench.generator.entities_max, "maximum entities per scene"),
        STSGG_INT("n_fg_classes", c.bench.generator.n_fg_classes, "number of foreground predicates"),
        STSGG_NUM("zipf_exponent", c.bench.generator.zipf_exponent, "long-tail exponent"),
        STSGG_INT("feature_dim", c.bench.generator.feature_dim, "entity feature dimension"),
        STSGG_NUM("class_separation", c.bench.generator.class_separation, "prototype norm"),
        STSGG_NUM("noise_sigma", c.bench.generator.noise_sigma, "feature noise"),
        STSGG_NUM("annotated_fraction", c.bench.generator.annotated_fraction, "fraction of relations kept annotated"),
        STSGG_NUM("true_bg_fraction", c.bench.generator.true_bg_fraction, "fraction of pairs without a relation"),
        STSGG_NUM("bg_noise_scale", c.bench.generator.bg_noise_scale, "noise of true-bg pairs relative to noise_sigma"),
        STSGG_INT("n_entity_classes", c.bench.generator.n_entity_classes, "number of entity classes"),
        Field{"sibling_parent", "parent rank per predicate rank, 0 = independent (comma list)",
              [](RunConfig& c, const std::string& v) { c.bench.generator.sibling_parent = to_ints("sibling_parent", v); },
              [](const RunConfig& c) { return join(c.bench.generator.sibling_parent); }},
        STSGG_NUM("sibling_similarity", c.bench.generator.sibling_similarity, "cosine between sibling and parent"),
        STSGG_NUM("sibling_scale", c.bench.generator.sibling_scale, "sibling prototype norm relative to parent"),
        STSGG_INT("seed", c.bench.generator.seed, "generator seed"),
        STSGG_NUM("split_train", c.bench.fractions.train, "train fraction"),
        STSGG_NUM("split_val", c.bench.fractions.val, "validation fraction"),
        STSGG_NUM("split_test", c.bench.fractions.test, "test fraction"),
        // pretraining
        Field{"arch", "linear | one-hidden",
              [](RunConfig& c, const std::string& v) { c.bench.pretrain.arch = parse_architecture(v); },
              [](const RunConfig& c) { return std::string(architecture_name(c.bench.pretrain.arch)); }},
        STSGG_INT("hidden_dim", c.bench.pretrain.hidden_dim, "hidden width of the one-hidden architecture"),
        STSGG_NUM("pretrain_learning_rate", c.bench.pretrain.learning_rate, "pretraining SGD step"),
        STSGG_INT("n_epochs", c.bench.pretrain.n_epochs, "pretraining epochs"),
        STSGG_INT("pretrain_seed", c.bench.pretrain.seed, "pretraining seed"),
        // shared by both phases
        Field{"ks", "metric K values (comma list)",
              [](RunConfig& c, const std::string& v) { c.bench.pretrain.ks = c.bench.selftrain.ks = to_ints("ks", v); },
              [](const RunConfig& c) { return join(c.bench.pretrain.ks); }},
        STSGG_INT("batch_size", c.bench.selftrain.batch_size, "scenes per batch (both phases)"),
        Field{"reweight", "none | inverse-frequency (both phases)",
              [](RunConfig& c, const std::string& v) { c.bench.pretrain.reweight = c.bench.selftrain.reweight = parse_reweight(v); },
              [](const RunConfig& c) {
                  return std::string(c.bench.selftrain.reweight == ReweightScheme::none ? "none" : "inverse-frequency");
              }},
        STSGG_BOOL("oversample", c.bench.selftrain.oversample, "class-balanced resampling of annotated triplets (both phases)"),
        STSGG_BOOL("eval_each_epoch", c.bench.selftrain.eval_each_epoch, "validation metrics at every epoch end"),
        // self-training
        Field{"policy", "catm | constant | fixed-class | freq-weighted | dash-adaptive | never",
              [](RunConfig& c, const std::string& v) { c.bench.selftrain.policy = parse_policy(v); },
              [](const RunConfig& c) { return std::string(policy_name(c.bench.selftrain.policy)); }},
        Field{"beta", "pseudo-label loss weight (default 1.0, 0.1 with reweighting)",
              [](RunConfig& c, const std::string& v) { c.beta = to_double("beta", v); },
              [](const RunConfig& c) { return c.beta ? fmt(*c.beta) : std::string("auto"); }},
        STSGG_NUM("alpha_inc", c.bench.selftrain.alpha_inc, "momentum rate for increasing thresholds"),
        STSGG_NUM("alpha_dec", c.bench.selftrain.alpha_dec, "momentum rate for decreasing thresholds"),
        STSGG_BOOL("class_specific_momentum", c.bench.selftrain.class_specific_momentum, "false: lambda = 0.5 for every class"),
        STSGG_NUM("initial_tau", c.bench.selftrain.initial_tau, "initial CATM threshold"),
        STSGG_BOOL("strict_eligible_mean", c.bench.selftrain.strict_eligible_mean, "increase branch averages only eligible candidates"),
        STSGG_INT("cap", c.bench.selftrain.per_class_per_scene_cap, "pseudo-labels per class per scene"),
        STSGG_INT("max_iterations", c.bench.selftrain.max_iterations, "self-training iterations"),
        STSGG_NUM("learning_rate", c.bench.selftrain.learning_rate, "self-training SGD step"),
        STSGG_INT("selftrain_seed", c.bench.selftrain.seed, "self-training seed"),
        STSGG_NUM("quantile", c.bench.selftrain.quantile, "top fraction for the static baselines"),
        STSGG_NUM("freq_mix", c.bench.selftrain.freq_mix, "frequency weight of the freq-weighted baseline"),
        STSGG_NUM("dash_growth", c.bench.selftrain.dash_growth, "growth factor of the dash-adaptive baseline"),
        STSGG_INT("dash_interval", c.bench.selftrain.dash_interval, "iterations per dash growth step"),
        STSGG_INT("val_refresh_interval", c.bench.selftrain.val_refresh_interval, "fixed-class: recompute from validation every N iterations"),
        STSGG_BOOL("use_gsl", c.bench.selftrain.use_gsl, "gate pseudo-labels with the graph structure learner"),
        STSGG_BOOL("gsl_message_pass", c.bench.selftrain.gsl_message_pass, "one message-passing round over sampled edges"),
        STSGG_INT("gsl_hidden", c.bench.selftrain.gsl_hidden, "GSL hidden width"),
        STSGG_NUM("gsl_learning_rate", c.bench.selftrain.gsl_learning_rate, "GSL SGD step"),
        STSGG_NUM("gsl_temperature", c.bench.selftrain.gsl_temperature, "Gumbel temperature"),
        STSGG_NUM("gsl_gamma", c.bench.selftrain.gsl_gamma, "focal exponent"),
        STSGG_BOOL("gsl_symmetric_focal", c.bench.selftrain.gsl_symmetric_focal, "add the negative focal term"),
        STSGG_INT("checkpoint_interval", c.checkpoint_interval, "save resumable state every N iterations (0: at the end only)"),
        STSGG_BOOL("resume", c.resume, "continue from <checkpoint_dir>/<run_name>.state.json when present"),
        // evaluation
        STSGG_STR("eval_split", c.eval_split, "train | val | test"),
        STSGG_STR("truth", c.truth, "hidden | observed"),
        STSGG_STR("sweep_split", c.sweep_split, "split scored by the sweep"),
        Field{"sweep_alpha_inc", "alpha_inc grid (comma list)",
              [](RunConfig& c, const std::string& v) { c.sweep_alpha_inc = to_doubles("sweep_alpha_inc", v); },
              [](const RunConfig& c) { return join(c.sweep_alpha_inc); }},
        Field{"sweep_alpha_dec", "alpha_dec grid (comma list)",
              [](RunConfig& c, const std::string& v) { c.sweep_alpha_dec = to_doubles("sweep_alpha_dec", v); },
              [](const RunConfig& c) { return join(c.sweep_alpha_dec); }},
    };
    return f;
}

std::string kebab(std::string s) {
    for (auto& ch : s)
        if (ch == '_') ch = '-';
    return s;
}

void apply(RunConfig& c, const std::string& key, const std::string& value) {
    for (const auto& f : fields())
        if (f.key == key) {
            f.set(c, value);
            return;
        }
    throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_file(RunConfig& c, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key = value");
        apply(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void finalize(RunConfig& c) {
    auto& st = c.bench.selftrain;
    c.bench.pretrain.batch_size = st.batch_size;
    c.bench.pretrain.oversample = st.oversample;
    c.bench.pretrain.eval_each_epoch = st.eval_each_epoch;
    st.beta = c.beta ? *c.beta : (st.reweight == ReweightScheme::none ? 1.0 : 0.1);
    c.bench.generator.validate();
    c.bench.pretrain.validate();
    st.validate();
    if (std::abs(c.bench.fractions.train + c.bench.fractions.val + c.bench.fractions.test - 1.0) > 1e-9)
        throw ConfigError("split_train + split_val + split_test must equal 1");
    for (double a : c.sweep_alpha_inc)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep_alpha_inc values must lie in [0, 1]");
    for (double a : c.sweep_alpha_dec)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep_alpha_dec values must lie in [0, 1]");
    parse_truth_source(c.truth);
    if (c.checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
}

ConfigEcho echo(const RunConfig& c, const std::string& command) {
    ConfigEcho e{{"command", command}};
    for (const auto& f : fields()) e.emplace_back(f.key, f.get(c));
    e.emplace_back("effective_beta", fmt(c.bench.selftrain.beta));
    return e;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create directory " + dir);
}

template <class F>
void write_file(const std::string& path, F&& body) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    body(os);
    if (!os) throw ConfigError("write failed for " + path);
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

PredicateCatalog load_catalog(const RunConfig& c) {
    const auto path = path_in(c.data_dir, "catalog.json");
    std::ifstream is(path);
    if (!is) throw ConfigError("missing catalog: expected " + path + " (run 'stsgg gen' first)");
    try {
        return catalog_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed catalog " + path + ": " + e.what());
    }
}

Dataset load_split(const RunConfig& c, const PredicateCatalog& cat, const std::string& name) {
    return load_scenes(path_in(c.data_dir, name + ".jsonl"), cat, parse_split(name));
}

int cmd_gen(const RunConfig& c) {
    ensure_dir(c.data_dir);
    const auto s = build_benchmark(c.bench.generator, c.bench.fractions);
    save_scenes(path_in(c.data_dir, "train.jsonl"), s.train);
    save_scenes(path_in(c.data_dir, "val.jsonl"), s.val);
    save_scenes(path_in(c.data_dir, "test.jsonl"), s.test);
    write_file(path_in(c.data_dir, "catalog.json"), [&](std::ostream& os) { os << catalog_to_json(s.train.catalog).dump(2) << '\n'; });
    auto manifest = generation_manifest(c.bench.generator, s);
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : echo(c, "gen")) cfg[k] = v;
    manifest["config"] = cfg;
    manifest["ks"] = c.bench.pretrain.ks;
    write_file(path_in(c.data_dir, "manifest.json"), [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });

    const auto tt = tally(s.train), tv = tally(s.val), te = tally(s.test);
    std::printf("%-16s %6s %13s %13s %13s\n", "class", "rank", "train_annot", "train_hidden", "test_hidden");
    for (int k = 1; k <= s.train.catalog.num_foreground(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        std::printf("%-16s %6d %13lld %13lld %13lld\n", s.train.catalog.class_names[i].c_str(), k,
                    static_cast<long long>(tt.observed[i]), static_cast<long long>(tt.hidden[i]),
                    static_cast<long long>(te.hidden[i]));
    }
    std::printf("scenes: train %zu, val %zu, test %zu\n", s.train.scenes.size(), s.val.scenes.size(), s.test.scenes.size());
    (void)tv;
    return 0;
}

void write_train_logs(const RunConfig& c, const std::string& prefix, const TrainLog& log, const PredicateCatalog& cat,
                      const ConfigEcho& e, bool thresholds) {
    write_file(path_in(c.log_dir, prefix + "_iterations.csv"), [&](std::ostream& os) { write_iteration_log(os, log, cat, e); });
    write_file(path_in(c.log_dir, prefix + "_epochs.csv"), [&](std::ostream& os) { write_epoch_log(os, log, e); });
    if (thresholds) {
        write_file(path_in(c.log_dir, prefix + "_thresholds.csv"), [&](std::ostream& os) { write_threshold_log(os, log, cat, e); });
        write_file(path_in(c.log_dir, prefix + "_assignments.csv"), [&](std::ostream& os) { write_assignments(os, log.assignments, e); });
    }
}

int cmd_pretrain(const RunConfig& c) {
    const auto cat = load_catalog(c);
    const auto train = load_split(c, cat, "train");
    const auto val = load_split(c, cat, "val");
    ensure_dir(c.checkpoint_dir);
    ensure_dir(c.log_dir);
    const auto r = pretrain(train, &val, c.bench.pretrain);
    save_params(path_in(c.checkpoint_dir, "pretrain.params"), r.params);
    write_train_logs(c, "pretrain", r.log, cat, echo(c, "pretrain"), false);
    for (const auto& e : r.log.epochs) {
        std::printf("epoch %3lld  loss %.6f", static_cast<long long>(e.epoch), e.mean_loss);
        for (std::size_t i = 0; i < e.ks.size() && i < e.mean_recall.size(); ++i) std::printf("  mR@%d %.2f", e.ks[i], e.mean_recall[i]);
        std::printf("\n");
    }
    std::printf("wrote %s\n", path_in(c.checkpoint_dir, "pretrain.params").c_str());
    return 0;
}

std::string init_checkpoint_path(const RunConfig& c) {
    return c.init_checkpoint.empty() ? path_in(c.checkpoint_dir, "pretrain.params") : c.init_checkpoint;
}

int cmd_selftrain(const RunConfig& c) {
    const auto cat = load_catalog(c);
    const auto train = load_split(c, cat, "train");
    const auto val = load_split(c, cat, "val");
    const auto init = load_params(init_checkpoint_path(c));
    ensure_dir(c.checkpoint_dir);
    ensure_dir(c.log_dir);
    const auto state_path = path_in(c.checkpoint_dir, c.run_name + ".state.json");

    SelfTrainer trainer(train, &val, c.bench.selftrain);
    EngineState st;
    TrainLog log;
    if (c.resume && fs::exists(state_path)) {
        load_state(state_path, st, log);
        std::printf("resuming %s at iteration %lld\n", state_path.c_str(), static_cast<long long>(st.iteration));
    } else {
        st = trainer.initial_state(init);
    }
    while (st.iteration < c.bench.selftrain.max_iterations) {
        trainer.step(st, log);
        if (c.checkpoint_interval > 0 && st.iteration % c.checkpoint_interval == 0) save_state(state_path, st, log);
    }
    save_state(state_path, st, log);
    save_params(path_in(c.checkpoint_dir, c.run_name + ".params"), st.params);
    if (st.gsl)
        write_file(path_in(c.checkpoint_dir, c.run_name + ".gsl"), [&](std::ostream& os) { write_gsl(os, *st.gsl); });
    write_train_logs(c, c.run_name, log, cat, echo(c, "selftrain"), true);

    const std::vector<std::int64_t> zero(static_cast<std::size_t>(cat.num_classes()), 0);
    const auto& cum = log.iterations.empty() ? zero : log.iterations.back().cumulative;
    std::printf("%-16s %10s %12s\n", "class", "tau", "pseudo");
    for (int k = 1; k <= cat.num_foreground(); ++k)
        std::printf("%-16s %10.4f %12lld\n", cat.class_names[static_cast<std::size_t>(k)].c_str(), st.policy.threshold(k),
                    static_cast<long long>(cum[static_cast<std::size_t>(k)]));
    std::printf("wrote %s\n", path_in(c.checkpoint_dir, c.run_name + ".params").c_str());
    return 0;
}

int cmd_eval(const RunConfig& c) {
    const auto cat = load_catalog(c);
    const auto data = load_split(c, cat, c.eval_split);
    const auto ckpt = c.checkpoint.empty() ? path_in(c.checkpoint_dir, c.run_name + ".params") : c.checkpoint;
    const auto params = load_params(ckpt);
    std::optional<GslParams> gsl;
    InferenceOptions opt;
    if (c.bench.selftrain.use_gsl && c.bench.selftrain.gsl_message_pass) {
        const auto gpath = fs::path(ckpt).replace_extension(".gsl").string();
        std::ifstream is(gpath);
        if (!is) throw ConfigError("missing GSL checkpoint: expected " + gpath);
        gsl = read_gsl(is);
        opt.gsl = &*gsl;
        opt.message_pass = true;
    }
    const auto rep = evaluate(params, data, c.bench.pretrain.ks, parse_truth_source(c.truth), opt);
    ensure_dir(c.log_dir);
    const auto stem = fs::path(ckpt).stem().string() + "_eval_" + c.eval_split;
    auto e = echo(c, "eval");
    e.emplace_back("evaluated_checkpoint", ckpt);
    write_file(path_in(c.log_dir, stem + ".csv"), [&](std::ostream& os) { write_eval_summary(os, rep, e); });
    write_file(path_in(c.log_dir, stem + "_per_class.csv"), [&](std::ostream& os) { write_eval_per_class(os, rep, cat, e); });
    print_eval_table(std::cout, fs::path(ckpt).stem().string(), rep);
    for (std::size_t i = 0; i < rep.ks.size(); ++i)
        std::printf("mR@%d head %.1f body %.1f tail %.1f\n", rep.ks[i], rep.group_mean_recall[i][0], rep.group_mean_recall[i][1],
                    rep.group_mean_recall[i][2]);
    return 0;
}

std::vector<PseudoAssignment> read_assignments(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("missing assignment log: expected " + path);
    std::vector<PseudoAssignment> out;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto cols = split_list(line);
        if (cols.size() != 5) throw ValidationError("malformed assignment row: " + line);
        out.push_back({to_int("iteration", cols[0]), static_cast<int>(to_int("scene_id", cols[1])),
                       static_cast<int>(to_int("triplet", cols[2])), static_cast<int>(to_int("class", cols[3])),
                       to_double("confidence", cols[4])});
    }
    return out;
}

int cmd_audit(const RunConfig& c) {
    const auto cat = load_catalog(c);
    const auto train = load_split(c, cat, "train");
    const auto log = read_assignments(path_in(c.log_dir, c.run_name + "_assignments.csv"));
    const auto a = audit_pseudo_labels(log, train);
    write_file(path_in(c.log_dir, c.run_name + "_audit.csv"), [&](std::ostream& os) { write_audit(os, a, cat, echo(c, "audit")); });
    std::printf("%-16s %10s %10s %10s %10s\n", "class", "assigned", "correct", "precision", "recall");
    for (int k = 1; k <= cat.num_foreground(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        std::printf("%-16s %10lld %10lld %10.4f %10.4f\n", cat.class_names[i].c_str(), static_cast<long long>(a.assigned[i]),
                    static_cast<long long>(a.correct[i]), a.precision[i], a.recall[i]);
    }
    std::printf("overall precision %.4f over %lld assignments, %lld on true-bg pairs\n", a.overall_precision(),
                static_cast<long long>(a.total_assigned), static_cast<long long>(a.bg_violations));
    return 0;
}

int cmd_sweep(const RunConfig& c) {
    const auto cat = load_catalog(c);
    const auto train = load_split(c, cat, "train");
    const auto val = load_split(c, cat, "val");
    const auto scored = c.sweep_split == "val" ? val : load_split(c, cat, c.sweep_split);
    const auto init = load_params(init_checkpoint_path(c));
    ensure_dir(c.log_dir);
    const auto& ks = c.bench.pretrain.ks;

    struct Cell {
        double ainc, adec;
        EvalReport rep;
    };
    std::vector<Cell> cells;
    for (double ainc : c.sweep_alpha_inc)
        for (double adec : c.sweep_alpha_dec) {
            auto cfg = c.bench.selftrain;
            cfg.policy = PolicyKind::catm;
            cfg.alpha_inc = ainc;
            cfg.alpha_dec = adec;
            cfg.eval_each_epoch = false;
            const auto r = run(init, train, &val, cfg);
            InferenceOptions opt;
            if (r.gsl && cfg.gsl_message_pass) {
                opt.gsl = &*r.gsl;
                opt.message_pass = true;
            }
            cells.push_back({ainc, adec, evaluate(r.params, scored, ks, parse_truth_source(c.truth), opt)});
        }
    write_file(path_in(c.log_dir, "sweep.csv"), [&](std::ostream& os) {
        write_echo(os, echo(c, "sweep"));
        os << "alpha_inc,alpha_dec";
        for (int k : ks) os << ",R@" << k << ",mR@" << k << ",F@" << k;
        os << '\n';
        for (const auto& cell : cells) {
            os << fmt(cell.ainc) << ',' << fmt(cell.adec);
            for (std::size_t i = 0; i < ks.size(); ++i)
                os << ',' << fmt(cell.rep.recall[i]) << ',' << fmt(cell.rep.mean_recall[i]) << ',' << fmt(cell.rep.f[i]);
            os << '\n';
        }
    });
    const std::size_t kk = ks.size() - 1;
    std::printf("F@%d  rows: alpha_inc, columns: alpha_dec\n%8s", ks[kk], "");
    for (double adec : c.sweep_alpha_dec) std::printf(" %7.2f", adec);
    std::printf("\n");
    std::size_t i = 0;
    for (double ainc : c.sweep_alpha_inc) {
        std::printf("%8.2f", ainc);
        for (std::size_t j = 0; j < c.sweep_alpha_dec.size(); ++j, ++i) std::printf(" %7.2f", cells[i].rep.f[kk]);
        std::printf("\n");
    }
    std::printf("wrote %s (%zu cells)\n", path_in(c.log_dir, "sweep.csv").c_str(), cells.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-training with class-specific adaptive thresholds on a synthetic long-tailed relation benchmark"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_file;
    app.add_option("--config", config_file, "key = value configuration file");
    std::map<std::string, std::string> overrides;
    for (const auto& f : fields()) app.add_option("--" + kebab(f.key), overrides[f.key], f.help);

    const std::map<std::string, std::function<int(const RunConfig&)>> commands = {
        {"gen", cmd_gen},           {"pretrain", cmd_pretrain}, {"selftrain", cmd_selftrain},
        {"eval", cmd_eval},         {"audit", cmd_audit},       {"sweep", cmd_sweep}};
    const std::map<std::string, std::string> descriptions = {
        {"gen", "generate, mask and split the benchmark"},
        {"pretrain", "supervised pretraining (unannotated pairs as bg)"},
        {"selftrain", "self-training from the pretrained checkpoint"},
        {"eval", "R@K / mR@K / F@K of a checkpoint"},
        {"audit", "pseudo-label precision against hidden truth"},
        {"sweep", "alpha_inc x alpha_dec grid"}};
    for (const auto& [name, desc] : descriptions) app.add_subcommand(name, desc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg;
        if (!config_file.empty()) apply_file(cfg, config_file);
        for (const auto& f : fields())
            if (app.count("--" + kebab(f.key)) > 0) apply(cfg, f.key, overrides[f.key]);
        finalize(cfg);
        const auto* sub = app.get_subcommands().front();
        return commands.at(sub->get_name())(cfg);
    } catch (const TrainingAbort& e) {
        std::fprintf(stderr, "stsgg: aborted: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "stsgg: error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "stsgg: aborted: %s\n", e.what());
        return 2;
    }
}
