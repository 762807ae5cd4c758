#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fruitmap/geometry.hpp"
#include "fruitmap/side.hpp"

namespace fruitmap {

struct TruthFruitlet {
    int id = 0;
    Vec3 center = Vec3::Zero();  // side-A frame, meters
    double diameter = 0.0;       // meters
};

/// Exact fruitlet inventory of a scene. Centers are expressed in the side-A frame,
/// the frame merged maps live in.
struct GroundTruth {
    std::vector<TruthFruitlet> fruitlets;
    /// Per side, per fruitlet (same order as `fruitlets`): number of frames in which
    /// at least min_points mask pixels of that fruitlet were rendered.
    std::map<Side, std::vector<int>> visibility;
};

void to_json(nlohmann::json& j, const GroundTruth& truth);
void from_json(const nlohmann::json& j, GroundTruth& truth);

GroundTruth load_ground_truth(const std::string& path);
void save_ground_truth(const std::string& path, const GroundTruth& truth);

}  // namespace fruitmap
