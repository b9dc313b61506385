#ifndef STSGG_DATASET_IO_HPP
#define STSGG_DATASET_IO_HPP

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "label_space.hpp"

namespace stsgg {

/// Formats with 9 significant digits, the precision used for features on disk.
inline std::string format_sig9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Rounds to the value that survives a write/read cycle at 9 significant digits.
inline double round_sig9(double v) { return std::strtod(format_sig9(v).c_str(), nullptr); }

/// One scene as a single JSON line:
/// {"scene_id":..,"entities":[{"id","class","features"}],"triplets":[{"subj","obj","observed","hidden"}]}
inline std::string scene_to_line(const Scene& scene) {
    std::string out = "{\"scene_id\":" + std::to_string(scene.scene_id) + ",\"entities\":[";
    for (std::size_t i = 0; i < scene.entities.size(); ++i) {
        const auto& e = scene.entities[i];
        if (i) out += ',';
        out += "{\"id\":" + std::to_string(e.id) + ",\"class\":" + std::to_string(e.cls) + ",\"features\":[";
        for (std::size_t k = 0; k < e.features.size(); ++k) {
            if (k) out += ',';
            out += format_sig9(e.features[k]);
        }
        out += "]}";
    }
    out += "],\"triplets\":[";
    for (std::size_t i = 0; i < scene.triplets.size(); ++i) {
        const auto& t = scene.triplets[i];
        if (i) out += ',';
        out += "{\"subj\":" + std::to_string(t.subject) + ",\"obj\":" + std::to_string(t.object) +
               ",\"observed\":" + std::to_string(t.observed_label) + ",\"hidden\":" + std::to_string(t.hidden_label) +
               "}";
    }
    out += "]}";
    return out;
}

inline Scene scene_from_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed scene line: ") + e.what());
    }
    Scene s;
    try {
        s.scene_id = j.at("scene_id").get<int>();
        for (const auto& je : j.at("entities")) {
            Entity e;
            e.id = je.at("id").get<int>();
            e.cls = je.at("class").get<int>();
            e.features = je.at("features").get<std::vector<double>>();
            s.entities.push_back(std::move(e));
        }
        for (const auto& jt : j.at("triplets")) {
            TripletInstance t;
            t.subject = jt.at("subj").get<int>();
            t.object = jt.at("obj").get<int>();
            t.observed_label = jt.at("observed").get<int>();
            t.hidden_label = jt.at("hidden").get<int>();
            s.triplets.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scene " + std::to_string(s.scene_id) + ": " + e.what());
    }
    rebuild_triplet_features(s);
    return s;
}

inline void write_scenes(std::ostream& os, const Dataset& data) {
    for (const auto& s : data.scenes) os << scene_to_line(s) << '\n';
}

inline std::vector<Scene> read_scenes(std::istream& is, int num_classes) {
    std::vector<Scene> scenes;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        scenes.push_back(scene_from_line(line));
        validate_scene(scenes.back(), num_classes);
    }
    return scenes;
}

inline nlohmann::json catalog_to_json(const PredicateCatalog& cat) {
    return {{"class_names", cat.class_names}, {"counts", cat.counts}, {"bg_index", cat.bg_index}};
}

inline PredicateCatalog catalog_from_json(const nlohmann::json& j) {
    PredicateCatalog cat;
    cat.class_names = j.at("class_names").get<std::vector<std::string>>();
    cat.counts = j.at("counts").get<std::vector<std::int64_t>>();
    cat.bg_index = j.value("bg_index", kBg);
    if (cat.class_names.size() != cat.counts.size() + 1 || cat.bg_index != kBg)
        throw ValidationError("catalog shape is inconsistent");
    for (std::size_t i = 1; i < cat.counts.size(); ++i)
        if (cat.counts[i] > cat.counts[i - 1]) throw ValidationError("catalog counts are not sorted descending");
    return cat;
}

inline void save_scenes(const std::string& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    write_scenes(os, data);
    if (!os) throw ConfigError("write failed for " + path);
}

inline Dataset load_scenes(const std::string& path, const PredicateCatalog& catalog, Split split) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read dataset file " + path);
    Dataset d;
    d.catalog = catalog;
    d.split = split;
    d.scenes = read_scenes(is, catalog.num_classes());
    return d;
}

} // namespace stsgg

#endif // STSGG_DATASET_IO_HPP
