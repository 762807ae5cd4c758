#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fruitmap/geometry.hpp"
#include "fruitmap/ground_truth.hpp"
#include "fruitmap/scan_model.hpp"

namespace fruitmap {

// Scene frame: +x along the branch (base at x = 0), +y up, canopy plane z = 0.
// Side A scans from z > 0, side B from z < 0.

struct TrajectorySpec {
    int arcs = 4;
    int poses_per_arc = 10;
    double arc_spacing = 0.015;  // offset between arcs along the branch
    double standoff_min = 0.30;  // camera distance from the branch axis
    double standoff_max = 0.40;
    double target_margin = 0.1;  // look-at targets span [margin, 1 - margin] of the branch

    void validate() const;
};

struct OrchardSpec {
    double branch_length = 0.9;
    int cluster_count = 8;
    std::pair<int, int> fruitlets_per_cluster{2, 4};
    std::pair<double, double> diameter_range{0.008, 0.025};
    double cluster_spread = 0.025;
    double min_gap = 0.004;  // minimum surface gap between fruitlets
    int placement_retries = 200;
    int occluder_count = 0;
    double occluder_size = 0.06;  // nominal leaf length; width is 0.6 of it
    double depth_noise_sigma = 0.0011;
    /// Mask boundary perturbation in pixels: > 0 dilates fruitlet masks onto
    /// neighbouring surfaces, < 0 erodes them.
    int mask_dilation = 0;
    /// Distance of an opaque backdrop behind the canopy plane as seen from each side; 0 disables it.
    double background_distance = 0.0;
    int visibility_min_points = 30;
    std::uint64_t rng_seed = 1;
    CameraIntrinsics camera{724.0, 724.0, 616.0, 514.0, 1232, 1028};
    TrajectorySpec trajectory;

    void validate() const;
};

void to_json(nlohmann::json& j, const OrchardSpec& spec);
/// Missing keys keep their defaults; unknown keys raise ValidationError.
void from_json(const nlohmann::json& j, OrchardSpec& spec);

struct SceneFruitlet {
    int id = 0;
    Vec3 center = Vec3::Zero();  // scene frame
    double radius = 0.0;
};

/// Opaque rectangle: center + half_u * u_axis + half_v * v_axis spans it.
struct Occluder {
    Vec3 center = Vec3::Zero();
    Vec3 u_axis = Vec3::UnitX();
    Vec3 v_axis = Vec3::UnitY();
    double half_u = 0.0;
    double half_v = 0.0;
};

struct Scene {
    double branch_length = 0.0;
    std::vector<SceneFruitlet> fruitlets;
    std::vector<Occluder> occluders;
    double background_distance = 0.0;
    std::map<Side, RigidTransform> side_to_scene;
    RigidTransform fiducial_to_scene;
};

/// Fixed rig geometry: where each side's reference frame sits in the scene.
std::map<Side, RigidTransform> default_side_frames(double branch_length);

/// Ground-truth centers are expressed in the side-A frame; visibility is left empty.
/// Throws GenerationError when fruitlets cannot be placed without overlap.
std::pair<Scene, GroundTruth> generate_scene(const OrchardSpec& spec);

/// Camera-to-scene poses per side, in scan order (arc by arc).
std::map<Side, std::vector<RigidTransform>> plan_trajectory(const OrchardSpec& spec);

struct RenderedFrame {
    DepthRaster depth;
    InstanceMaskRaster masks;  // fruitlet id + 1; 0 = no fruitlet
    /// Visible pixel count per fruitlet id, before any mask perturbation.
    std::map<int, int> visible_pixels;
};

/// Mask value used for fruitlet `id`.
constexpr std::uint16_t mask_value(int id) { return static_cast<std::uint16_t>(id + 1); }

RenderedFrame render_frame(const Scene& scene, const RigidTransform& camera_to_scene, const CameraIntrinsics& intr,
                           double noise_sigma, std::uint64_t rng_seed, int mask_dilation = 0);

/// A generated scan served from memory; frames are rendered on request.
class SimulatedScan final : public ScanSource {
public:
    explicit SimulatedScan(const OrchardSpec& spec);

    std::vector<Side> sides() const override { return {Side::A, Side::B}; }
    int frame_count(Side side) const override;
    FrameRecord frame(Side side, int frame_index) const override;
    FiducialObservation fiducial(Side side) const override;
    std::string dataset_id() const override { return dataset_id_; }

    /// Renders one frame with its visibility counts.
    RenderedFrame render(Side side, int frame_index) const;
    /// Camera-to-side pose of a frame.
    RigidTransform camera_pose(Side side, int frame_index) const;

    const OrchardSpec& spec() const noexcept { return spec_; }
    const Scene& scene() const noexcept { return scene_; }
    const GroundTruth& truth() const noexcept { return truth_; }

private:
    OrchardSpec spec_;
    Scene scene_;
    GroundTruth truth_;
    std::map<Side, std::vector<RigidTransform>> trajectory_;
    std::string dataset_id_;
};

/// Frame visibility per side, per fruitlet (ground-truth order).
std::map<Side, std::vector<int>> compute_visibility(const SimulatedScan& scan);

/// Writes the dataset layout (manifest, fiducials, frames, ground_truth.json with
/// visibility) under `root` and returns the ground truth written.
GroundTruth export_dataset(const SimulatedScan& scan, const std::filesystem::path& root);

}  // namespace fruitmap
