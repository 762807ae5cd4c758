#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fruitmap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using PointCloud = std::vector<Vec3>;

/// Tolerance used when validating rotation matrices.
inline constexpr double kRotationTolerance = 1e-9;

/// Pinhole intrinsics in pixels. Camera frame: +z forward, +x right, +y down.
/// Pixel (col, row) has its center at (u, v) = (col, row).
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    /// Throws ValidationError unless fx, fy > 0 and the principal point lies in the image.
    void validate() const;

    bool operator==(const CameraIntrinsics&) const = default;
};

struct StereoRig {
    double baseline = 0.0;  // meters
    CameraIntrinsics intrinsics;

    void validate() const;
};

struct PixelCoord {
    double u = 0.0;
    double v = 0.0;
};

/// z = fx * baseline / disparity.
double disparity_to_depth(const StereoRig& rig, double disparity);

/// Depth change per pixel of disparity error: z^2 / (fx * baseline).
double depth_resolution(const StereoRig& rig, double depth);

Vec3 backproject(const CameraIntrinsics& intr, double u, double v, double depth);

/// Throws DomainError for points at or behind the camera plane.
PixelCoord project(const CameraIntrinsics& intr, const Vec3& p);

/// Proper rigid motion p -> R p + t. The rotation is validated on construction.
class RigidTransform {
public:
    RigidTransform() = default;
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform from_matrix(const Mat4& m);
    /// 16 values, row-major 4x4 with last row (0, 0, 0, 1).
    static RigidTransform from_row_major(std::span<const double> values);
    static RigidTransform translation(const Vec3& t) { return {Mat3::Identity(), t}; }
    static RigidTransform rotation_about(const Vec3& axis, double angle_rad,
                                         const Vec3& t = Vec3::Zero());

    const Mat3& rotation() const noexcept { return rotation_; }
    const Vec3& translation() const noexcept { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
    Vec3 apply_direction(const Vec3& d) const { return rotation_ * d; }

    /// (this ∘ rhs): apply rhs first, then this.
    RigidTransform compose(const RigidTransform& rhs) const;
    RigidTransform inverse() const;

    Mat4 matrix() const;
    std::array<double, 16> to_row_major() const;

private:
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
};

inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) { return t.apply(p); }
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a.compose(b); }
inline RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

/// Camera-to-world pose at `eye` looking at `target`. `down_hint` picks the image +y direction.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& down_hint);

bool is_finite(const Vec3& p);

}  // namespace fruitmap
