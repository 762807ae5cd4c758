#include "fruitmap/geometry.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fruitmap/errors.hpp"

namespace fruitmap {

namespace {

void check_rotation(const Mat3& r) {
    if (!r.allFinite()) {
        throw ValidationError("rotation has non-finite entries");
    }
    const double ortho = (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = r.determinant();
    if (ortho > kRotationTolerance || std::abs(det - 1.0) > kRotationTolerance) {
        throw ValidationError(fmt::format(
            "rotation is not orthonormal with det +1 (|RR^T - I| = {:.3g}, det = {:.12g})", ortho, det));
    }
}

}  // namespace

void CameraIntrinsics::validate() const {
    if (!(std::isfinite(fx) && fx > 0.0 && std::isfinite(fy) && fy > 0.0)) {
        throw ValidationError(fmt::format("focal lengths must be positive (fx={}, fy={})", fx, fy));
    }
    if (width <= 0 || height <= 0) {
        throw ValidationError(fmt::format("image size must be positive ({}x{})", width, height));
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw ValidationError(
            fmt::format("principal point ({}, {}) outside {}x{} image", cx, cy, width, height));
    }
}

void StereoRig::validate() const {
    if (!(std::isfinite(baseline) && baseline > 0.0)) {
        throw ValidationError(fmt::format("stereo baseline must be positive, got {}", baseline));
    }
    intrinsics.validate();
}

double disparity_to_depth(const StereoRig& rig, double disparity) {
    if (!std::isfinite(disparity) || disparity <= 0.0) {
        throw DomainError(fmt::format("disparity must be positive and finite, got {}", disparity));
    }
    return rig.intrinsics.fx * rig.baseline / disparity;
}

double depth_resolution(const StereoRig& rig, double depth) {
    if (!std::isfinite(depth) || depth <= 0.0) {
        throw DomainError(fmt::format("depth must be positive and finite, got {}", depth));
    }
    return depth * depth / (rig.intrinsics.fx * rig.baseline);
}

Vec3 backproject(const CameraIntrinsics& intr, double u, double v, double depth) {
    if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(depth)) {
        throw DomainError("backproject: non-finite input");
    }
    if (depth <= 0.0) {
        throw DomainError(fmt::format("backproject: depth must be positive, got {}", depth));
    }
    return {(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth};
}

PixelCoord project(const CameraIntrinsics& intr, const Vec3& p) {
    if (!is_finite(p)) {
        throw DomainError("project: non-finite point");
    }
    if (p.z() <= 0.0) {
        throw DomainError(fmt::format("project: point is behind the camera (z = {})", p.z()));
    }
    return {intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy};
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    check_rotation(rotation_);
    if (!translation_.allFinite()) {
        throw ValidationError("translation has non-finite entries");
    }
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
    const Eigen::RowVector4d last = m.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kRotationTolerance) {
        throw ValidationError("homogeneous transform must have last row (0, 0, 0, 1)");
    }
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

RigidTransform RigidTransform::from_row_major(std::span<const double> values) {
    if (values.size() != 16) {
        throw ValidationError(fmt::format("pose must have 16 values, got {}", values.size()));
    }
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            m(r, c) = values[static_cast<std::size_t>(r * 4 + c)];
        }
    }
    return from_matrix(m);
}

RigidTransform RigidTransform::rotation_about(const Vec3& axis, double angle_rad, const Vec3& t) {
    return {Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(), t};
}

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation_ = rotation_ * rhs.rotation_;
    out.translation_ = rotation_ * rhs.translation_ + translation_;
    return out;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
}

Mat4 RigidTransform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
}

std::array<double, 16> RigidTransform::to_row_major() const {
    const Mat4 m = matrix();
    std::array<double, 16> out{};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            out[static_cast<std::size_t>(r * 4 + c)] = m(r, c);
        }
    }
    return out;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& down_hint) {
    const Vec3 z = (target - eye).normalized();
    Vec3 y = down_hint - down_hint.dot(z) * z;
    if (y.norm() < 1e-12) {
        throw DomainError("look_at: down hint is parallel to the viewing direction");
    }
    y.normalize();
    const Vec3 x = y.cross(z);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {r, eye};
}

bool is_finite(const Vec3& p) { return p.allFinite(); }

}  // namespace fruitmap
