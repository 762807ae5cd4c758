#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "fruitmap/geometry.hpp"

namespace fruitmap {

struct SphereModel {
    Vec3 center = Vec3::Zero();
    double diameter = 0.0;

    double radius() const { return 0.5 * diameter; }
};

/// How the depth-floor clause of the inlier test is read.
///
/// `literal`: a point is rejected when its depth is below the minimum depth of the
/// cloud, which never happens. `background_reject`: a point is rejected when it lies
/// deeper than the closest point of the cloud plus the hypothesised diameter (capped
/// at d_max), i.e. behind the fruitlet: mask bleed onto background surfaces.
enum class DepthRule { Literal, BackgroundReject };

std::string_view to_string(DepthRule rule);
DepthRule parse_depth_rule(std::string_view text);

/// Post-RANSAC refinement over the winning inliers. Each mode runs the previous ones
/// first: `linear` is the algebraic solve, `geometric` minimises orthogonal distances,
/// `ray` minimises depth residuals along the viewing rays. Depth noise acts along the
/// rays, so the first two shrink small spheres seen from one side; `ray` does not.
enum class RefineMode { None, Linear, Geometric, Ray };

std::string_view to_string(RefineMode mode);
RefineMode parse_refine_mode(std::string_view text);

struct FitConfig {
    int max_points = 500;
    int ransac_iterations = 200;
    double inlier_tolerance = 0.002;
    double min_inlier_fraction = 0.3;
    double d_min = 0.004;
    double d_max = 0.040;
    std::uint64_t rng_seed = 0;
    DepthRule z_rule = DepthRule::BackgroundReject;
    RefineMode refine = RefineMode::Ray;

    void validate() const;
};

/// Viewing geometry used to measure depth for the depth-floor rule:
/// depth(p) = dot(p - origin, axis). The default is a camera-frame cloud.
struct ViewAxis {
    Vec3 origin = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();

    double depth(const Vec3& p) const { return (p - origin).dot(axis); }
};

struct FitReport {
    SphereModel model;
    int inlier_count = 0;        // after refinement
    int hypothesis_inliers = 0;  // best hypothesis, before refinement
    int point_count = 0;
    int iterations_used = 0;
    int degenerate_samples = 0;
    bool refined = false;
    bool accepted = false;
};

/// Uniform sample without replacement down to max_points, preserving input order.
/// Clouds already within the limit are returned unchanged.
PointCloud downsample_points(std::span<const Vec3> cloud, int max_points, std::uint64_t rng_seed);

/// Centroid, and twice the mean distance of the points to it.
SphereModel initial_estimate(std::span<const Vec3> cloud);

/// Sphere through four points from |p|^2 = 2 c.p + (r^2 - |c|^2).
/// Throws DegenerateSampleError for coplanar (singular) samples.
SphereModel fit_sphere_exact(const std::array<Vec3, 4>& pts);

/// Algebraic least-squares sphere over >= 4 points. Throws DegenerateSampleError when singular.
SphereModel fit_sphere_least_squares(std::span<const Vec3> pts);

/// Gauss-Newton on sum (|p - c| - r)^2 starting from `init`. Returns `init` unchanged
/// if the normal equations become singular.
SphereModel fit_sphere_geometric(std::span<const Vec3> pts, const SphereModel& init, int max_iterations = 20);

/// Levenberg-Marquardt on the depth residuals of the rays from view.origin through
/// each point (the measured depth is view.depth(p)). Rays that miss the sphere are
/// pulled back by their distance outside it. Returns `init` if no progress is possible
/// or if the cloud wraps around the far side of `init` (not a single-view surface).
SphereModel fit_sphere_ray_depth(std::span<const Vec3> pts, const SphereModel& init, const ViewAxis& view = {},
                                 int max_iterations = 50);

/// The three-clause inlier test of the RANSAC fit.
class InlierPredicate {
public:
    InlierPredicate(const FitConfig& cfg, const ViewAxis& view, double min_depth)
        : tol_(cfg.inlier_tolerance), d_max_(cfg.d_max), rule_(cfg.z_rule), view_(view), min_depth_(min_depth) {}

    bool operator()(const SphereModel& s, const Vec3& p) const;
    /// Absolute surface residual | |p - c| - r |.
    static double residual(const SphereModel& s, const Vec3& p) { return std::abs((p - s.center).norm() - s.radius()); }

private:
    double tol_;
    double d_max_;
    DepthRule rule_;
    ViewAxis view_;
    double min_depth_;
};

/// RANSAC sphere fit seeded with initial_estimate, ranked by inlier count with
/// ties broken by mean absolute residual, then refined by least squares over the
/// winning inliers. The cloud is used as given (downsample beforehand).
FitReport ransac_sphere_fit(std::span<const Vec3> cloud, const FitConfig& cfg, const ViewAxis& view = {});

}  // namespace fruitmap
