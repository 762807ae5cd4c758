#include "fruitmap/scan_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fruitmap/errors.hpp"
#include "fruitmap/json_io.hpp"
#include "fruitmap/provenance.hpp"
#include "fruitmap/random.hpp"
#include "fruitmap/sphere_fit.hpp"

namespace fruitmap {

using nlohmann::json;

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kFruitletStream = 1;
constexpr std::uint64_t kOccluderStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ValidationError(what);
    }
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void TrajectorySpec::validate() const {
    require(arcs > 0 && poses_per_arc > 0, "trajectory needs at least one arc and one pose per arc");
    require(arc_spacing >= 0.0 && std::isfinite(arc_spacing), "trajectory arc_spacing must be >= 0");
    require(positive(standoff_min) && standoff_max >= standoff_min && std::isfinite(standoff_max),
            fmt::format("trajectory standoff range [{}, {}] is invalid", standoff_min, standoff_max));
    require(target_margin >= 0.0 && target_margin < 0.5, "trajectory target_margin must be in [0, 0.5)");
}

void OrchardSpec::validate() const {
    require(positive(branch_length), "branch_length must be positive");
    require(cluster_count > 0, "cluster_count must be positive");
    require(fruitlets_per_cluster.first > 0 && fruitlets_per_cluster.second >= fruitlets_per_cluster.first,
            fmt::format("fruitlets_per_cluster [{}, {}] is invalid", fruitlets_per_cluster.first,
                        fruitlets_per_cluster.second));
    require(positive(diameter_range.first) && diameter_range.second >= diameter_range.first,
            "diameter_range is invalid");
    const FitConfig band;
    require(diameter_range.first >= band.d_min && diameter_range.second <= band.d_max,
            fmt::format("diameter_range [{}, {}] must lie within the plausibility band [{}, {}]",
                        diameter_range.first, diameter_range.second, band.d_min, band.d_max));
    require(cluster_spread >= 0.0 && std::isfinite(cluster_spread), "cluster_spread must be >= 0");
    require(min_gap >= 0.0 && std::isfinite(min_gap), "min_gap must be >= 0");
    require(placement_retries > 0, "placement_retries must be positive");
    require(occluder_count >= 0, "occluder_count must be >= 0");
    require(positive(occluder_size), "occluder_size must be positive");
    require(depth_noise_sigma >= 0.0 && std::isfinite(depth_noise_sigma), "depth_noise_sigma must be >= 0");
    require(background_distance >= 0.0 && std::isfinite(background_distance), "background_distance must be >= 0");
    require(visibility_min_points > 0, "visibility_min_points must be positive");
    const int max_fruitlets = cluster_count * fruitlets_per_cluster.second;
    require(max_fruitlets < 65535, "too many fruitlets for 16-bit masks");
    camera.validate();
    trajectory.validate();
}

void to_json(json& j, const OrchardSpec& s) {
    j = {{"branch_length", s.branch_length},
         {"cluster_count", s.cluster_count},
         {"fruitlets_per_cluster", {s.fruitlets_per_cluster.first, s.fruitlets_per_cluster.second}},
         {"diameter_range", {s.diameter_range.first, s.diameter_range.second}},
         {"cluster_spread", s.cluster_spread},
         {"min_gap", s.min_gap},
         {"placement_retries", s.placement_retries},
         {"occluder_count", s.occluder_count},
         {"occluder_size", s.occluder_size},
         {"depth_noise_sigma", s.depth_noise_sigma},
         {"mask_dilation", s.mask_dilation},
         {"background_distance", s.background_distance},
         {"visibility_min_points", s.visibility_min_points},
         {"rng_seed", s.rng_seed},
         {"camera",
          {{"fx", s.camera.fx},
           {"fy", s.camera.fy},
           {"cx", s.camera.cx},
           {"cy", s.camera.cy},
           {"width", s.camera.width},
           {"height", s.camera.height}}},
         {"trajectory",
          {{"arcs", s.trajectory.arcs},
           {"poses_per_arc", s.trajectory.poses_per_arc},
           {"arc_spacing", s.trajectory.arc_spacing},
           {"standoff_min", s.trajectory.standoff_min},
           {"standoff_max", s.trajectory.standoff_max},
           {"target_margin", s.trajectory.target_margin}}}};
}

void from_json(const json& j, OrchardSpec& s) {
    reject_unknown_keys(j,
                        {"branch_length", "cluster_count", "fruitlets_per_cluster", "diameter_range", "cluster_spread",
                         "min_gap", "placement_retries", "occluder_count", "occluder_size", "depth_noise_sigma",
                         "mask_dilation", "background_distance", "visibility_min_points", "rng_seed", "camera",
                         "trajectory"},
                        "simulation config");
    read_optional(j, "branch_length", s.branch_length);
    read_optional(j, "cluster_count", s.cluster_count);
    read_optional(j, "fruitlets_per_cluster", s.fruitlets_per_cluster);
    read_optional(j, "diameter_range", s.diameter_range);
    read_optional(j, "cluster_spread", s.cluster_spread);
    read_optional(j, "min_gap", s.min_gap);
    read_optional(j, "placement_retries", s.placement_retries);
    read_optional(j, "occluder_count", s.occluder_count);
    read_optional(j, "occluder_size", s.occluder_size);
    read_optional(j, "depth_noise_sigma", s.depth_noise_sigma);
    read_optional(j, "mask_dilation", s.mask_dilation);
    read_optional(j, "background_distance", s.background_distance);
    read_optional(j, "visibility_min_points", s.visibility_min_points);
    read_optional(j, "rng_seed", s.rng_seed);
    if (auto it = j.find("camera"); it != j.end()) {
        reject_unknown_keys(*it, {"fx", "fy", "cx", "cy", "width", "height"}, "simulation camera config");
        read_optional(*it, "fx", s.camera.fx);
        read_optional(*it, "fy", s.camera.fy);
        read_optional(*it, "cx", s.camera.cx);
        read_optional(*it, "cy", s.camera.cy);
        read_optional(*it, "width", s.camera.width);
        read_optional(*it, "height", s.camera.height);
    }
    if (auto it = j.find("trajectory"); it != j.end()) {
        reject_unknown_keys(*it,
                            {"arcs", "poses_per_arc", "arc_spacing", "standoff_min", "standoff_max", "target_margin"},
                            "simulation trajectory config");
        read_optional(*it, "arcs", s.trajectory.arcs);
        read_optional(*it, "poses_per_arc", s.trajectory.poses_per_arc);
        read_optional(*it, "arc_spacing", s.trajectory.arc_spacing);
        read_optional(*it, "standoff_min", s.trajectory.standoff_min);
        read_optional(*it, "standoff_max", s.trajectory.standoff_max);
        read_optional(*it, "target_margin", s.trajectory.target_margin);
    }
    s.validate();
}

std::map<Side, RigidTransform> default_side_frames(double branch_length) {
    // Each arm's base sits below and in front of its canopy face, slightly rotated.
    const double mid = 0.5 * branch_length;
    const RigidTransform a = RigidTransform::rotation_about(Vec3::UnitY(), 0.20, Vec3(mid - 0.05, -0.45, 0.55))
                                 .compose(RigidTransform::rotation_about(Vec3::UnitX(), 0.10));
    const RigidTransform b = RigidTransform::rotation_about(Vec3::UnitY(), std::numbers::pi + 0.15,
                                                            Vec3(mid + 0.04, -0.50, -0.60))
                                 .compose(RigidTransform::rotation_about(Vec3::UnitZ(), -0.05));
    return {{Side::A, a}, {Side::B, b}};
}

std::pair<Scene, GroundTruth> generate_scene(const OrchardSpec& spec) {
    spec.validate();
    Scene scene;
    scene.branch_length = spec.branch_length;
    scene.background_distance = spec.background_distance;
    scene.side_to_scene = default_side_frames(spec.branch_length);
    // Calibration board hanging at the base of the branch, facing side A.
    scene.fiducial_to_scene = RigidTransform::translation(Vec3(-0.05, -0.30, 0.0));

    Rng rng(derive_seed({spec.rng_seed, kFruitletStream}));
    const double slot = spec.branch_length / spec.cluster_count;
    int next_id = 0;
    for (int c = 0; c < spec.cluster_count; ++c) {
        const Vec3 anchor((c + 0.5) * slot + rng.uniform(-0.25, 0.25) * slot, -rng.uniform(0.015, 0.035), 0.0);
        const auto n = rng.between(spec.fruitlets_per_cluster.first, spec.fruitlets_per_cluster.second);
        for (std::int64_t k = 0; k < n; ++k) {
            const double radius = 0.5 * rng.uniform(spec.diameter_range.first, spec.diameter_range.second);
            bool placed = false;
            for (int attempt = 0; attempt < spec.placement_retries && !placed; ++attempt) {
                const Vec3 center = anchor + Vec3(rng.uniform(-1.0, 1.0) * spec.cluster_spread,
                                                  rng.uniform(-1.0, 1.0) * spec.cluster_spread,
                                                  rng.uniform(-0.5, 0.5) * spec.cluster_spread);
                placed = std::none_of(scene.fruitlets.begin(), scene.fruitlets.end(), [&](const SceneFruitlet& f) {
                    return (f.center - center).norm() < f.radius + radius + spec.min_gap;
                });
                if (placed) {
                    scene.fruitlets.push_back({next_id++, center, radius});
                }
            }
            if (!placed) {
                throw GenerationError(fmt::format(
                    "could not place fruitlet {} of cluster {} without overlap after {} attempts (cluster_spread {})",
                    k, c, spec.placement_retries, spec.cluster_spread));
            }
        }
    }

    // Each leaf has its own stream so adding leaves leaves earlier ones in place.
    for (int i = 0; i < spec.occluder_count; ++i) {
        Rng leaf(derive_seed({spec.rng_seed, kOccluderStream, static_cast<std::uint64_t>(i)}));
        const double face = leaf.uniform() < 0.5 ? 1.0 : -1.0;
        const Vec3 center(leaf.uniform(0.0, spec.branch_length), leaf.uniform(-0.07, 0.03),
                          face * leaf.uniform(0.02, 0.06));
        const double tilt = leaf.uniform(0.0, 0.5);
        const double tilt_dir = leaf.uniform(0.0, 2.0 * std::numbers::pi);
        const double spin = leaf.uniform(0.0, std::numbers::pi);
        const double length = spec.occluder_size * leaf.uniform(0.75, 1.25);
        const Mat3 r = (Eigen::AngleAxisd(tilt, Vec3(std::cos(tilt_dir), std::sin(tilt_dir), 0.0)) *
                        Eigen::AngleAxisd(spin, Vec3::UnitZ()))
                           .toRotationMatrix();
        scene.occluders.push_back({center, r.col(0), r.col(1), 0.5 * length, 0.3 * length});
    }

    GroundTruth truth;
    const RigidTransform scene_to_a = scene.side_to_scene.at(Side::A).inverse();
    for (const auto& f : scene.fruitlets) {
        truth.fruitlets.push_back({f.id, scene_to_a.apply(f.center), 2.0 * f.radius});
    }
    return {std::move(scene), std::move(truth)};
}

std::map<Side, std::vector<RigidTransform>> plan_trajectory(const OrchardSpec& spec) {
    spec.validate();
    const auto& t = spec.trajectory;
    const double radius = t.standoff_max;
    const double sweep = std::acos(t.standoff_min / t.standoff_max);
    const double mid = 0.5 * spec.branch_length;
    const Vec3 down = -Vec3::UnitY();
    const Mat3 mirror = Vec3(1.0, 1.0, -1.0).asDiagonal();
    const Mat3 flip_x = Vec3(-1.0, 1.0, 1.0).asDiagonal();

    std::map<Side, std::vector<RigidTransform>> out;
    for (int arc = 0; arc < t.arcs; ++arc) {
        const double offset = (arc - 0.5 * (t.arcs - 1)) * t.arc_spacing;
        for (int i = 0; i < t.poses_per_arc; ++i) {
            const double s = t.poses_per_arc > 1 ? static_cast<double>(i) / (t.poses_per_arc - 1) : 0.5;
            const double theta = -sweep + 2.0 * sweep * s;
            const Vec3 eye(mid + offset + radius * std::sin(theta), 0.0, radius * std::cos(theta));
            const double target_x =
                spec.branch_length * (t.target_margin + (1.0 - 2.0 * t.target_margin) * s) + offset;
            const RigidTransform pose_a = look_at(eye, Vec3(target_x, 0.0, 0.0), down);
            out[Side::A].push_back(pose_a);
            // Reflection through the canopy plane; the x flip keeps the frame right-handed.
            out[Side::B].emplace_back(mirror * pose_a.rotation() * flip_x, mirror * pose_a.translation());
        }
    }
    return out;
}

namespace {

struct Bounds {
    int u0, u1, v0, v1;  // inclusive pixel range; empty when u0 > u1
};

// Pixel bounds of the projection of points in the camera frame. Points at or behind
// the image plane make the whole image a candidate.
template <std::size_t N>
Bounds project_bounds(const std::array<Vec3, N>& pts, const CameraIntrinsics& intr) {
    const Bounds full{0, intr.width - 1, 0, intr.height - 1};
    const Bounds empty{1, 0, 1, 0};
    bool all_behind = true;
    bool any_behind = false;
    double umin = std::numeric_limits<double>::infinity();
    double umax = -umin;
    double vmin = umin;
    double vmax = -umin;
    for (const auto& p : pts) {
        if (p.z() <= 1e-6) {
            any_behind = true;
            continue;
        }
        all_behind = false;
        const double u = intr.fx * p.x() / p.z() + intr.cx;
        const double v = intr.fy * p.y() / p.z() + intr.cy;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (all_behind) {
        return empty;
    }
    if (any_behind) {
        return full;
    }
    Bounds b{static_cast<int>(std::floor(umin)) - 1, static_cast<int>(std::ceil(umax)) + 1,
             static_cast<int>(std::floor(vmin)) - 1, static_cast<int>(std::ceil(vmax)) + 1};
    b.u0 = std::max(b.u0, 0);
    b.v0 = std::max(b.v0, 0);
    b.u1 = std::min(b.u1, intr.width - 1);
    b.v1 = std::min(b.v1, intr.height - 1);
    return b;
}

Vec3 pixel_ray(const CameraIntrinsics& intr, int col, int row) {
    return {(col - intr.cx) / intr.fx, (row - intr.cy) / intr.fy, 1.0};
}

class ZBuffer {
public:
    explicit ZBuffer(const CameraIntrinsics& intr)
        : width_(intr.width),
          depth_(static_cast<std::size_t>(intr.width) * intr.height, std::numeric_limits<double>::infinity()),
          label_(depth_.size(), 0) {}

    // The rays have unit z component, so the ray parameter is the depth.
    void offer(int col, int row, double z, std::uint16_t label) {
        const auto i = static_cast<std::size_t>(row) * width_ + col;
        if (z > 0.0 && z < depth_[i]) {
            depth_[i] = z;
            label_[i] = label;
        }
    }

    const std::vector<double>& depth() const { return depth_; }
    const std::vector<std::uint16_t>& labels() const { return label_; }

private:
    int width_;
    std::vector<double> depth_;
    std::vector<std::uint16_t> label_;
};

void render_sphere(ZBuffer& zb, const CameraIntrinsics& intr, const Vec3& c, double r, std::uint16_t label) {
    std::array<Vec3, 8> corners;
    for (int k = 0; k < 8; ++k) {
        corners[k] = c + Vec3(k & 1 ? r : -r, k & 2 ? r : -r, k & 4 ? r : -r);
    }
    const Bounds b = project_bounds(corners, intr);
    const double cc = c.squaredNorm() - r * r;
    for (int row = b.v0; row <= b.v1; ++row) {
        for (int col = b.u0; col <= b.u1; ++col) {
            const Vec3 d = pixel_ray(intr, col, row);
            const double a = d.squaredNorm();
            const double half_b = d.dot(c);
            const double disc = half_b * half_b - a * cc;
            if (disc < 0.0) {
                continue;
            }
            const double root = std::sqrt(disc);
            double t = (half_b - root) / a;
            if (t <= 0.0) {
                t = (half_b + root) / a;
            }
            zb.offer(col, row, t, label);
        }
    }
}

void render_rectangle(ZBuffer& zb, const CameraIntrinsics& intr, const Occluder& o) {
    const Vec3 du = o.half_u * o.u_axis;
    const Vec3 dv = o.half_v * o.v_axis;
    const std::array<Vec3, 4> corners{o.center - du - dv, o.center + du - dv, o.center + du + dv, o.center - du + dv};
    const Bounds b = project_bounds(corners, intr);
    const Vec3 n = o.u_axis.cross(o.v_axis);
    const double nq = n.dot(o.center);
    for (int row = b.v0; row <= b.v1; ++row) {
        for (int col = b.u0; col <= b.u1; ++col) {
            const Vec3 d = pixel_ray(intr, col, row);
            const double denom = n.dot(d);
            if (std::abs(denom) < 1e-12) {
                continue;
            }
            const double t = nq / denom;
            if (t <= 0.0) {
                continue;
            }
            const Vec3 rel = t * d - o.center;
            if (std::abs(rel.dot(o.u_axis)) <= o.half_u && std::abs(rel.dot(o.v_axis)) <= o.half_v) {
                zb.offer(col, row, t, 0);
            }
        }
    }
}

// One-sided plane p.n = offset (camera frame); only hit from its front face.
void render_backdrop(ZBuffer& zb, const CameraIntrinsics& intr, const Vec3& n, double offset) {
    for (int row = 0; row < intr.height; ++row) {
        for (int col = 0; col < intr.width; ++col) {
            const Vec3 d = pixel_ray(intr, col, row);
            const double denom = n.dot(d);
            if (denom >= -1e-12) {
                continue;
            }
            zb.offer(col, row, offset / denom, 0);
        }
    }
}

// Grows (steps > 0) or shrinks (steps < 0) fruitlet labels by one 4-neighbour ring per step.
// Growth only covers pixels that carry depth, so mask pixels always have valid depth.
void perturb_masks(InstanceMaskRaster& masks, const DepthRaster& depth, int steps) {
    const int w = masks.width;
    const int h = masks.height;
    for (int s = 0; s < std::abs(steps); ++s) {
        const auto before = masks.values;
        for (int row = 0; row < h; ++row) {
            for (int col = 0; col < w; ++col) {
                const auto i = static_cast<std::size_t>(row) * w + col;
                std::uint16_t grow = 0;
                bool boundary = false;
                const std::array<std::pair<int, int>, 4> nbrs{{{col - 1, row}, {col + 1, row}, {col, row - 1}, {col, row + 1}}};
                for (const auto& [nc, nr] : nbrs) {
                    if (nc < 0 || nr < 0 || nc >= w || nr >= h) {
                        boundary = true;
                        continue;
                    }
                    const auto other = before[static_cast<std::size_t>(nr) * w + nc];
                    if (other != before[i]) {
                        boundary = true;
                        if (other != 0 && (grow == 0 || other < grow)) {
                            grow = other;
                        }
                    }
                }
                if (steps > 0 && before[i] == 0 && grow != 0 && DepthRaster::is_valid(depth.values[i])) {
                    masks.values[i] = grow;
                } else if (steps < 0 && before[i] != 0 && boundary) {
                    masks.values[i] = 0;
                }
            }
        }
    }
}

}  // namespace

RenderedFrame render_frame(const Scene& scene, const RigidTransform& camera_to_scene, const CameraIntrinsics& intr,
                           double noise_sigma, std::uint64_t rng_seed, int mask_dilation) {
    intr.validate();
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw DomainError(fmt::format("noise sigma must be >= 0, got {}", noise_sigma));
    }
    const RigidTransform to_cam = camera_to_scene.inverse();
    ZBuffer zb(intr);
    for (const auto& f : scene.fruitlets) {
        render_sphere(zb, intr, to_cam.apply(f.center), f.radius, mask_value(f.id));
    }
    for (const auto& o : scene.occluders) {
        render_rectangle(zb, intr, {to_cam.apply(o.center), to_cam.apply_direction(o.u_axis),
                                    to_cam.apply_direction(o.v_axis), o.half_u, o.half_v});
    }
    if (scene.background_distance > 0.0) {
        // Backdrop behind the canopy as seen from the camera's side: z = -D for z > 0 viewers.
        const double side = camera_to_scene.translation().z() >= 0.0 ? 1.0 : -1.0;
        const Vec3 n_scene(0.0, 0.0, side);
        const Vec3 n = to_cam.apply_direction(n_scene);
        const Vec3 q = to_cam.apply(Vec3(0.0, 0.0, -side * scene.background_distance));
        render_backdrop(zb, intr, n, n.dot(q));
    }

    RenderedFrame out;
    out.depth.width = out.masks.width = intr.width;
    out.depth.height = out.masks.height = intr.height;
    out.depth.values.assign(zb.depth().size(), std::numeric_limits<float>::quiet_NaN());
    out.masks.values = zb.labels();
    Rng rng(rng_seed);
    for (std::size_t i = 0; i < zb.depth().size(); ++i) {
        const double z = zb.depth()[i];
        if (!std::isfinite(z)) {
            continue;
        }
        const double noisy = noise_sigma > 0.0 ? z + noise_sigma * rng.normal() : z;
        out.depth.values[i] = static_cast<float>(noisy);
        if (const auto label = out.masks.values[i]; label != 0) {
            ++out.visible_pixels[label - 1];
        }
    }
    if (mask_dilation != 0) {
        perturb_masks(out.masks, out.depth, mask_dilation);
    }
    return out;
}

SimulatedScan::SimulatedScan(const OrchardSpec& spec) : spec_(spec) {
    auto [scene, truth] = generate_scene(spec_);
    scene_ = std::move(scene);
    truth_ = std::move(truth);
    trajectory_ = plan_trajectory(spec_);
    dataset_id_ = fmt::format("sim-{}-{}", spec_.rng_seed, config_digest(json(spec_)).substr(0, 12));
}

int SimulatedScan::frame_count(Side side) const { return static_cast<int>(trajectory_.at(side).size()); }

RigidTransform SimulatedScan::camera_pose(Side side, int frame_index) const {
    const auto& poses = trajectory_.at(side);
    if (frame_index < 0 || frame_index >= static_cast<int>(poses.size())) {
        throw DomainError(fmt::format("frame index {} out of range for side {}", frame_index, to_string(side)));
    }
    return scene_.side_to_scene.at(side).inverse().compose(poses[frame_index]);
}

RenderedFrame SimulatedScan::render(Side side, int frame_index) const {
    const auto pose = trajectory_.at(side).at(static_cast<std::size_t>(frame_index));
    const auto seed = derive_seed({spec_.rng_seed, kNoiseStream, static_cast<std::uint64_t>(side),
                                   static_cast<std::uint64_t>(frame_index)});
    return render_frame(scene_, pose, spec_.camera, spec_.depth_noise_sigma, seed, spec_.mask_dilation);
}

FrameRecord SimulatedScan::frame(Side side, int frame_index) const {
    FrameRecord rec;
    rec.frame_index = frame_index;
    rec.side = side;
    rec.pose = camera_pose(side, frame_index);
    rec.intrinsics = spec_.camera;
    auto rendered = render(side, frame_index);
    rec.depth = std::move(rendered.depth);
    rec.masks = std::move(rendered.masks);
    return rec;
}

FiducialObservation SimulatedScan::fiducial(Side side) const {
    return {side, scene_.side_to_scene.at(side).inverse().compose(scene_.fiducial_to_scene)};
}

namespace {

void tally(std::vector<int>& counts, const RenderedFrame& frame, int min_points) {
    for (const auto& [id, pixels] : frame.visible_pixels) {
        if (pixels >= min_points) {
            ++counts.at(static_cast<std::size_t>(id));
        }
    }
}

}  // namespace

std::map<Side, std::vector<int>> compute_visibility(const SimulatedScan& scan) {
    std::map<Side, std::vector<int>> out;
    for (Side side : scan.sides()) {
        auto& counts = out[side];
        counts.assign(scan.truth().fruitlets.size(), 0);
        for (int f = 0; f < scan.frame_count(side); ++f) {
            tally(counts, scan.render(side, f), scan.spec().visibility_min_points);
        }
    }
    return out;
}

GroundTruth export_dataset(const SimulatedScan& scan, const std::filesystem::path& root) {
    Manifest manifest;
    manifest.dataset_id = scan.dataset_id();
    manifest.sides = scan.sides();
    save_manifest(root, manifest);
    GroundTruth truth = scan.truth();
    for (Side side : scan.sides()) {
        save_fiducial(root, scan.fiducial(side));
        auto& counts = truth.visibility[side];
        counts.assign(truth.fruitlets.size(), 0);
        for (int f = 0; f < scan.frame_count(side); ++f) {
            auto rendered = scan.render(side, f);
            tally(counts, rendered, scan.spec().visibility_min_points);
            FrameRecord rec;
            rec.frame_index = f;
            rec.side = side;
            rec.pose = scan.camera_pose(side, f);
            rec.intrinsics = scan.spec().camera;
            rec.depth = std::move(rendered.depth);
            rec.masks = std::move(rendered.masks);
            save_frame(root, rec);
        }
        spdlog::debug("exported side {}: {} frames", to_string(side), scan.frame_count(side));
    }
    save_ground_truth((root / "ground_truth.json").string(), truth);
    return truth;
}

}  // namespace fruitmap
