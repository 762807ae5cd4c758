#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fruitmap/geometry.hpp"
#include "fruitmap/scan_model.hpp"
#include "fruitmap/side.hpp"
#include "fruitmap/sphere_fit.hpp"

namespace fruitmap {

struct FruitletTrack {
    int id = 0;
    Vec3 center = Vec3::Zero();
    double diameter = 0.0;
    int observations = 1;
    std::set<Side> sides;
};

/// Frame labels: "A" and "B" are single-side maps in their own side frame,
/// "B_in_A" is a side-B map re-expressed in the side-A frame, "merged" is the
/// two-sided map (side-A frame).
namespace frame_labels {
inline constexpr std::string_view kSideA = "A";
inline constexpr std::string_view kSideB = "B";
inline constexpr std::string_view kBInA = "B_in_A";
inline constexpr std::string_view kMerged = "merged";
}  // namespace frame_labels

/// Side frame the coordinates of a map with this label are expressed in.
Side coordinate_frame(std::string_view frame_label);

struct BranchMap {
    std::string frame_label;
    std::vector<FruitletTrack> tracks;
    nlohmann::json provenance = nlohmann::json::object();

    int next_id() const;
    const FruitletTrack* find(int id) const;
};

enum class Averaging { Pairwise, Weighted };

std::string_view to_string(Averaging mode);
Averaging parse_averaging(std::string_view text);

struct MergeConfig {
    double merge_radius = 0.010;
    Averaging averaging = Averaging::Pairwise;

    static MergeConfig within_side() { return {}; }
    static MergeConfig cross_side() { return {0.020, Averaging::Pairwise}; }

    void validate() const;
};

/// Folds `other` into `into`. Pairwise: plain mean of the two values.
/// Weighted: means weighted by observation counts. Counts add, sides union.
void absorb_track(FruitletTrack& into, const FruitletTrack& other, Averaging mode);

/// Associates `obs` with the nearest track (ties to the smaller id). Within
/// merge_radius it is merged; otherwise a new track with the next id is appended.
/// A merged track that drifts within merge_radius of another track is fused with
/// it, so track centers stay pairwise farther apart than merge_radius.
void integrate_observation_in_place(BranchMap& map, const SphereModel& obs, const MergeConfig& cfg, Side side);

BranchMap integrate_observation(BranchMap map, const SphereModel& obs, const MergeConfig& cfg, Side side);

/// Renumbers ids 0..n-1 keeping track order.
void compact_ids(BranchMap& map);

struct BuildStats {
    int frames = 0;
    int instances = 0;
    int accepted = 0;
    int rejected = 0;
    int failed = 0;
};

/// Per-observation RNG seed from (base seed, frame index, instance id).
std::uint64_t observation_seed(std::uint64_t base_seed, int frame_index, int instance_id);

/// Extract -> downsample -> RANSAC -> integrate, frames in index order and instances in
/// id order. Extraction and fitting may run on `threads` workers (0 = hardware
/// concurrency); integration order, and therefore the result, does not depend on it.
BranchMap build_side_map(const ScanSource& source, Side side, const FitConfig& fit_cfg,
                         const MergeConfig& merge_cfg = MergeConfig::within_side(),
                         const ExtractionConfig& extract_cfg = {}, int threads = 0, BuildStats* stats = nullptr);

void to_json(nlohmann::json& j, const BranchMap& map);
void from_json(const nlohmann::json& j, BranchMap& map);

void to_json(nlohmann::json& j, const FitConfig& cfg);
void from_json(const nlohmann::json& j, FitConfig& cfg);
void to_json(nlohmann::json& j, const MergeConfig& cfg);
void from_json(const nlohmann::json& j, MergeConfig& cfg);
void to_json(nlohmann::json& j, const ExtractionConfig& cfg);
void from_json(const nlohmann::json& j, ExtractionConfig& cfg);

BranchMap load_branch_map(const std::string& path);
void save_branch_map(const std::string& path, const BranchMap& map);

}  // namespace fruitmap
