#ifndef STSGG_CHECKPOINT_HPP
#define STSGG_CHECKPOINT_HPP

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "catm.hpp"
#include "classifier.hpp"
#include "errors.hpp"
#include "gsl.hpp"
#include "selftrain.hpp"

namespace stsgg {

// Doubles travel through JSON as hexfloat strings so a resumed run is
// bit-identical to an uninterrupted one.

inline nlohmann::json hex_array(const std::vector<double>& v) {
    auto a = nlohmann::json::array();
    for (double x : v) a.push_back(hexfloat(x));
    return a;
}

inline double parse_hex(const nlohmann::json& j) { return std::strtod(j.get<std::string>().c_str(), nullptr); }

inline std::vector<double> parse_hex_array(const nlohmann::json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(parse_hex(x));
    return v;
}

inline nlohmann::json policy_to_json(const ThresholdPolicy& p) {
    return {{"kind", policy_name(p.kind)},
            {"thresholds", hex_array(p.thresholds)},
            {"base", hex_array(p.base)},
            {"catm_tau", hex_array(p.catm.tau)},
            {"lambda_inc", hex_array(p.catm.coefficients.lambda_inc)},
            {"lambda_dec", hex_array(p.catm.coefficients.lambda_dec)},
            {"alpha_inc", hexfloat(p.catm.coefficients.alpha_inc)},
            {"alpha_dec", hexfloat(p.catm.coefficients.alpha_dec)},
            {"catm_iteration", p.catm.iteration},
            {"strict_eligible_mean", p.catm.strict_eligible_mean},
            {"dash_growth", hexfloat(p.dash_growth)},
            {"dash_interval", p.dash_interval}};
}

inline ThresholdPolicy policy_from_json(const nlohmann::json& j) {
    ThresholdPolicy p;
    p.kind = parse_policy(j.at("kind").get<std::string>());
    p.thresholds = parse_hex_array(j.at("thresholds"));
    p.base = parse_hex_array(j.at("base"));
    p.catm.tau = parse_hex_array(j.at("catm_tau"));
    p.catm.coefficients.lambda_inc = parse_hex_array(j.at("lambda_inc"));
    p.catm.coefficients.lambda_dec = parse_hex_array(j.at("lambda_dec"));
    p.catm.coefficients.alpha_inc = parse_hex(j.at("alpha_inc"));
    p.catm.coefficients.alpha_dec = parse_hex(j.at("alpha_dec"));
    p.catm.iteration = j.at("catm_iteration").get<std::int64_t>();
    p.catm.strict_eligible_mean = j.at("strict_eligible_mean").get<bool>();
    p.dash_growth = parse_hex(j.at("dash_growth"));
    p.dash_interval = j.at("dash_interval").get<std::int64_t>();
    return p;
}

inline nlohmann::json log_to_json(const TrainLog& log) {
    auto its = nlohmann::json::array();
    for (const auto& r : log.iterations)
        its.push_back({r.iteration, r.epoch, hexfloat(r.loss.annotated), hexfloat(r.loss.background), hexfloat(r.loss.pseudo),
                       hexfloat(r.loss.total), hexfloat(r.loss_gsl), r.n_annotated, r.n_background, r.n_pseudo,
                       hex_array(r.tau), r.cumulative});
    auto eps = nlohmann::json::array();
    for (const auto& e : log.epochs)
        eps.push_back({e.epoch, e.iteration, hexfloat(e.mean_loss), e.ks, hex_array(e.recall), hex_array(e.mean_recall),
                       hex_array(e.f)});
    auto as = nlohmann::json::array();
    for (const auto& a : log.assignments) as.push_back({a.iteration, a.scene_id, a.triplet, a.cls, hexfloat(a.confidence)});
    return {{"iterations", its}, {"epochs", eps}, {"assignments", as}};
}

inline TrainLog log_from_json(const nlohmann::json& j) {
    TrainLog log;
    for (const auto& r : j.at("iterations")) {
        IterationRecord rec;
        rec.iteration = r[0].get<std::int64_t>();
        rec.epoch = r[1].get<std::int64_t>();
        rec.loss = {parse_hex(r[2]), parse_hex(r[3]), parse_hex(r[4]), parse_hex(r[5])};
        rec.loss_gsl = parse_hex(r[6]);
        rec.n_annotated = r[7].get<std::int64_t>();
        rec.n_background = r[8].get<std::int64_t>();
        rec.n_pseudo = r[9].get<std::int64_t>();
        rec.tau = parse_hex_array(r[10]);
        rec.cumulative = r[11].get<std::vector<std::int64_t>>();
        log.iterations.push_back(std::move(rec));
    }
    for (const auto& e : j.at("epochs")) {
        EpochRecord rec;
        rec.epoch = e[0].get<std::int64_t>();
        rec.iteration = e[1].get<std::int64_t>();
        rec.mean_loss = parse_hex(e[2]);
        rec.ks = e[3].get<std::vector<int>>();
        rec.recall = parse_hex_array(e[4]);
        rec.mean_recall = parse_hex_array(e[5]);
        rec.f = parse_hex_array(e[6]);
        log.epochs.push_back(std::move(rec));
    }
    for (const auto& a : j.at("assignments"))
        log.assignments.push_back({a[0].get<std::int64_t>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>(), parse_hex(a[4])});
    return log;
}

inline nlohmann::json state_to_json(const EngineState& st, const TrainLog& log) {
    std::ostringstream params;
    write_params(params, st.params);
    nlohmann::json j = {{"format", "stsgg-state 1"},
                        {"params", params.str()},
                        {"policy", policy_to_json(st.policy)},
                        {"rng", st.rng.state()},
                        {"order", st.order},
                        {"cursor", st.cursor},
                        {"iteration", st.iteration},
                        {"epoch", st.epoch},
                        {"epoch_loss_sum", hexfloat(st.epoch_loss_sum)},
                        {"epoch_batches", st.epoch_batches},
                        {"cumulative", st.cumulative},
                        {"log", log_to_json(log)}};
    if (st.gsl) {
        std::ostringstream g;
        write_gsl(g, *st.gsl);
        j["gsl"] = g.str();
    }
    return j;
}

inline void state_from_json(const nlohmann::json& j, EngineState& st, TrainLog& log) {
    if (j.value("format", "") != "stsgg-state 1") throw ValidationError("not a self-training state file");
    std::istringstream params(j.at("params").get<std::string>());
    st.params = read_params(params);
    st.policy = policy_from_json(j.at("policy"));
    st.rng.restore(j.at("rng").get<std::string>());
    st.order = j.at("order").get<std::vector<std::size_t>>();
    st.cursor = j.at("cursor").get<std::size_t>();
    st.iteration = j.at("iteration").get<std::int64_t>();
    st.epoch = j.at("epoch").get<std::int64_t>();
    st.epoch_loss_sum = parse_hex(j.at("epoch_loss_sum"));
    st.epoch_batches = j.at("epoch_batches").get<std::int64_t>();
    st.cumulative = j.at("cumulative").get<std::vector<std::int64_t>>();
    st.gsl.reset();
    if (j.contains("gsl")) {
        std::istringstream g(j.at("gsl").get<std::string>());
        st.gsl = read_gsl(g);
    }
    log = log_from_json(j.at("log"));
}

inline void save_state(const std::string& path, const EngineState& st, const TrainLog& log) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write state file " + path);
    os << state_to_json(st, log).dump() << '\n';
    if (!os) throw ConfigError("write failed for " + path);
}

inline void load_state(const std::string& path, EngineState& st, TrainLog& log) {
    std::ifstream is(path);
    if (!is) throw ConfigError("missing state file: expected " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed state file " + path + ": " + e.what());
    }
    state_from_json(j, st, log);
}

} // namespace stsgg

#endif // STSGG_CHECKPOINT_HPP
