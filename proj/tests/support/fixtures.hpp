#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>
#include <numbers>
#include <string>

#include <unistd.h>

#include "fruitmap/geometry.hpp"
#include "fruitmap/random.hpp"
#include "fruitmap/scan_sim.hpp"

namespace fruitmap::fixtures {

inline Vec3 random_unit(Rng& rng) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    return d.normalized();
}

/// Noiseless samples over the whole sphere surface.
inline PointCloud full_sphere_cloud(Rng& rng, const Vec3& c, double r, int n) {
    PointCloud out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(c + r * random_unit(rng));
    }
    return out;
}

/// Camera at the origin looking down +z: the near half (z < c.z), with Gaussian
/// depth noise applied along each viewing ray.
inline PointCloud hemisphere_cloud(Rng& rng, const Vec3& c, double r, int n, double sigma) {
    PointCloud out;
    out.reserve(static_cast<std::size_t>(n));
    while (static_cast<int>(out.size()) < n) {
        const Vec3 d = random_unit(rng);
        if (d.z() >= 0.0) {
            continue;
        }
        Vec3 p = c + r * d;
        if (sigma > 0.0) {
            const double z = p.z();
            p *= (z + rng.normal(0.0, sigma)) / z;
        }
        out.push_back(p);
    }
    return out;
}

/// Mask bleed: background surface `offset` behind the fruitlet center, seen through
/// a disc of 1.5 r around its silhouette.
inline void add_background_bleed(Rng& rng, PointCloud& cloud, const Vec3& c, double r, int n, double offset,
                                 double sigma) {
    const double z = c.z() + offset;
    for (int i = 0; i < n; ++i) {
        const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double q = 1.5 * r * std::sqrt(rng.uniform());
        cloud.emplace_back((c.x() + q * std::cos(a)) * z / c.z(), (c.y() + q * std::sin(a)) * z / c.z(),
                           z + rng.normal(0.0, sigma));
    }
}

inline RigidTransform random_pose(Rng& rng, double max_translation = 1.0) {
    const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const Vec3 t(rng.uniform(-max_translation, max_translation), rng.uniform(-max_translation, max_translation),
                 rng.uniform(-max_translation, max_translation));
    return RigidTransform::rotation_about(random_unit(rng), angle, t);
}

/// Quarter-resolution camera with the same field of view as the default one;
/// keeps simulator-driven tests fast.
inline CameraIntrinsics small_camera() { return {362.0, 362.0, 308.0, 257.0, 616, 514}; }

/// Scan source over a hand-built scene, using the simulator's rig and trajectory.
class ScriptedScan final : public ScanSource {
public:
    ScriptedScan(Scene scene, const OrchardSpec& spec) : scene_(std::move(scene)), spec_(spec) {
        scene_.side_to_scene = default_side_frames(scene_.branch_length);
        scene_.fiducial_to_scene = RigidTransform::translation(Vec3(-0.05, -0.30, 0.0));
        poses_ = plan_trajectory(spec_);
    }

    std::vector<Side> sides() const override { return {Side::A, Side::B}; }
    int frame_count(Side side) const override { return static_cast<int>(poses_.at(side).size()); }
    FrameRecord frame(Side side, int frame_index) const override {
        const auto& pose = poses_.at(side).at(static_cast<std::size_t>(frame_index));
        auto rendered = render_frame(scene_, pose, spec_.camera, spec_.depth_noise_sigma,
                                     derive_seed({spec_.rng_seed, static_cast<std::uint64_t>(side),
                                                  static_cast<std::uint64_t>(frame_index)}));
        FrameRecord rec;
        rec.frame_index = frame_index;
        rec.side = side;
        rec.pose = scene_.side_to_scene.at(side).inverse().compose(pose);
        rec.intrinsics = spec_.camera;
        rec.depth = std::move(rendered.depth);
        rec.masks = std::move(rendered.masks);
        return rec;
    }
    FiducialObservation fiducial(Side side) const override {
        return {side, scene_.side_to_scene.at(side).inverse().compose(scene_.fiducial_to_scene)};
    }
    std::string dataset_id() const override { return "scripted"; }

    void drop_frames(Side side) { poses_[side].clear(); }
    /// Fruitlet center in the given side frame.
    Vec3 center_in(Side side, int id) const {
        return scene_.side_to_scene.at(side).inverse().apply(scene_.fruitlets.at(static_cast<std::size_t>(id)).center);
    }
    const Scene& scene() const { return scene_; }

private:
    Scene scene_;
    OrchardSpec spec_;
    std::map<Side, std::vector<RigidTransform>> poses_;
};

/// Five isolated fruitlets spread along a 0.9 m branch, small camera.
inline std::pair<Scene, OrchardSpec> five_fruitlet_scene() {
    OrchardSpec spec;
    spec.camera = small_camera();
    Scene scene;
    scene.branch_length = spec.branch_length;
    const double radii[5] = {0.006, 0.008, 0.005, 0.010, 0.007};
    for (int i = 0; i < 5; ++i) {
        scene.fruitlets.push_back({i, Vec3(0.12 + 0.165 * i, -0.02, 0.0), radii[i]});
    }
    return {scene, spec};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("fruitmap-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace fruitmap::fixtures
