#include "fruitmap/ground_truth.hpp"

#include "fruitmap/errors.hpp"
#include "fruitmap/json_io.hpp"

namespace fruitmap {

using nlohmann::json;

void to_json(json& j, const GroundTruth& truth) {
    j = json::object();
    j["format_version"] = "1";
    j["frame"] = "A";
    auto fruitlets = json::array();
    for (const auto& f : truth.fruitlets) {
        fruitlets.push_back({{"id", f.id}, {"center", vec3_to_json(f.center)}, {"diameter", f.diameter}});
    }
    j["fruitlets"] = std::move(fruitlets);
    auto vis = json::object();
    for (const auto& [side, counts] : truth.visibility) {
        vis[std::string(to_string(side))] = counts;
    }
    j["visibility"] = std::move(vis);
}

void from_json(const json& j, GroundTruth& truth) {
    try {
        truth = {};
        for (const auto& f : j.at("fruitlets")) {
            truth.fruitlets.push_back(
                {f.at("id").get<int>(), vec3_from_json(f.at("center")), f.at("diameter").get<double>()});
        }
        if (j.contains("visibility")) {
            for (const auto& [key, counts] : j.at("visibility").items()) {
                truth.visibility[parse_side(key)] = counts.get<std::vector<int>>();
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed ground truth: ") + e.what());
    }
}

GroundTruth load_ground_truth(const std::string& path) {
    try {
        return read_json_file(path).get<GroundTruth>();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void save_ground_truth(const std::string& path, const GroundTruth& truth) { write_json_file(path, truth); }

}  // namespace fruitmap
