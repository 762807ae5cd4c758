#include "fruitmap/sphere_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "fruitmap/errors.hpp"
#include "fruitmap/random.hpp"

namespace fruitmap {

std::string_view to_string(DepthRule rule) {
    return rule == DepthRule::Literal ? "literal" : "background_reject";
}

DepthRule parse_depth_rule(std::string_view text) {
    if (text == "literal") {
        return DepthRule::Literal;
    }
    if (text == "background_reject") {
        return DepthRule::BackgroundReject;
    }
    throw ValidationError(fmt::format("z_rule must be literal|background_reject, got \"{}\"", text));
}

std::string_view to_string(RefineMode mode) {
    switch (mode) {
        case RefineMode::None:
            return "none";
        case RefineMode::Linear:
            return "linear";
        case RefineMode::Geometric:
            return "geometric";
        case RefineMode::Ray:
            return "ray";
    }
    return "ray";
}

RefineMode parse_refine_mode(std::string_view text) {
    if (text == "none") {
        return RefineMode::None;
    }
    if (text == "linear") {
        return RefineMode::Linear;
    }
    if (text == "geometric") {
        return RefineMode::Geometric;
    }
    if (text == "ray") {
        return RefineMode::Ray;
    }
    throw ValidationError(fmt::format("refine must be none|linear|geometric|ray, got \"{}\"", text));
}

void FitConfig::validate() const {
    if (max_points < 4) {
        throw ValidationError(fmt::format("max_points must be >= 4, got {}", max_points));
    }
    if (ransac_iterations <= 0) {
        throw ValidationError(fmt::format("ransac_iterations must be positive, got {}", ransac_iterations));
    }
    if (!(inlier_tolerance > 0.0)) {
        throw ValidationError(fmt::format("inlier_tolerance must be positive, got {}", inlier_tolerance));
    }
    if (!(min_inlier_fraction > 0.0 && min_inlier_fraction <= 1.0)) {
        throw ValidationError(fmt::format("min_inlier_fraction must be in (0, 1], got {}", min_inlier_fraction));
    }
    if (!(d_min > 0.0 && d_max > d_min)) {
        throw ValidationError(fmt::format("diameter band must satisfy 0 < d_min < d_max, got [{}, {}]", d_min, d_max));
    }
}

PointCloud downsample_points(std::span<const Vec3> cloud, int max_points, std::uint64_t rng_seed) {
    if (max_points <= 0) {
        throw DomainError(fmt::format("max_points must be positive, got {}", max_points));
    }
    const auto n = cloud.size();
    const auto k = static_cast<std::size_t>(max_points);
    if (n <= k) {
        return {cloud.begin(), cloud.end()};
    }
    // Partial Fisher-Yates over indices, then restore input order.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(rng_seed);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    PointCloud out;
    out.reserve(k);
    for (auto i : idx) {
        out.push_back(cloud[i]);
    }
    return out;
}

SphereModel initial_estimate(std::span<const Vec3> cloud) {
    if (cloud.size() < 4) {
        throw InsufficientSupportError(fmt::format("initial_estimate needs >= 4 points, got {}", cloud.size()));
    }
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cloud) {
        centroid += p;
    }
    centroid /= static_cast<double>(cloud.size());
    double mean_dist = 0.0;
    for (const auto& p : cloud) {
        mean_dist += (p - centroid).norm();
    }
    mean_dist /= static_cast<double>(cloud.size());
    return {centroid, 2.0 * mean_dist};
}

SphereModel fit_sphere_exact(const std::array<Vec3, 4>& pts) {
    // Relative to pts[0]: 2 q_i . c' = |q_i|^2, with c = pts[0] + c'.
    Mat3 q;
    Vec3 rhs;
    for (int i = 0; i < 3; ++i) {
        const Vec3 d = pts[static_cast<std::size_t>(i + 1)] - pts[0];
        q.row(i) = 2.0 * d.transpose();
        rhs(i) = d.squaredNorm();
    }
    const double scale = q.row(0).norm() * q.row(1).norm() * q.row(2).norm();
    const double det = q.determinant();
    if (!(scale > 0.0) || std::abs(det) <= 1e-10 * scale) {
        throw DegenerateSampleError("sphere sample is coplanar or has repeated points");
    }
    const Vec3 offset = q.partialPivLu().solve(rhs);
    const SphereModel s{pts[0] + offset, 2.0 * offset.norm()};
    if (!is_finite(s.center) || !std::isfinite(s.diameter)) {
        throw DegenerateSampleError("sphere sample produced a non-finite model");
    }
    return s;
}

SphereModel fit_sphere_least_squares(std::span<const Vec3> pts) {
    if (pts.size() < 4) {
        throw InsufficientSupportError(fmt::format("least-squares sphere needs >= 4 points, got {}", pts.size()));
    }
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) {
        mean += p;
    }
    mean /= static_cast<double>(pts.size());

    Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 4);
    Eigen::VectorXd b(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 d = pts[i] - mean;
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = 2.0 * d.x();
        a(r, 1) = 2.0 * d.y();
        a(r, 2) = 2.0 * d.z();
        a(r, 3) = 1.0;
        b(r) = d.squaredNorm();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) {
        throw DegenerateSampleError("least-squares sphere system is rank deficient");
    }
    const Eigen::Vector4d x = qr.solve(b);
    const Vec3 c = x.head<3>();
    const double r2 = x(3) + c.squaredNorm();
    if (!(r2 > 0.0) || !std::isfinite(r2)) {
        throw DegenerateSampleError("least-squares sphere has non-positive squared radius");
    }
    return {mean + c, 2.0 * std::sqrt(r2)};
}

SphereModel fit_sphere_geometric(std::span<const Vec3> pts, const SphereModel& init, int max_iterations) {
    if (pts.size() < 4) {
        throw InsufficientSupportError(fmt::format("geometric sphere fit needs >= 4 points, got {}", pts.size()));
    }
    Vec3 c = init.center;
    double r = init.radius();
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtf = Eigen::Vector4d::Zero();
        for (const auto& p : pts) {
            const Vec3 d = p - c;
            const double dist = d.norm();
            if (dist <= 0.0) {
                continue;
            }
            Eigen::Vector4d j;
            j.head<3>() = -d / dist;
            j(3) = -1.0;
            const double f = dist - r;
            jtj.noalias() += j * j.transpose();
            jtf.noalias() += j * f;
        }
        const Eigen::LDLT<Eigen::Matrix4d> ldlt(jtj);
        if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
            return init;
        }
        const Eigen::Vector4d step = ldlt.solve(-jtf);
        if (!step.allFinite()) {
            return init;
        }
        c += step.head<3>();
        r += step(3);
        if (step.norm() < 1e-12) {
            break;
        }
    }
    if (!(r > 0.0) || !is_finite(c)) {
        return init;
    }
    return {c, 2.0 * r};
}

SphereModel fit_sphere_ray_depth(std::span<const Vec3> pts, const SphereModel& init, const ViewAxis& view,
                                 int max_iterations) {
    if (pts.size() < 4) {
        throw InsufficientSupportError(fmt::format("ray-depth sphere fit needs >= 4 points, got {}", pts.size()));
    }
    struct Ray {
        Vec3 dir;  // scaled so that depth along the view axis equals the ray parameter
        double depth;
    };
    std::vector<Ray> rays;
    rays.reserve(pts.size());
    std::size_t behind = 0;
    for (const auto& p : pts) {
        const double z = view.depth(p);
        if (z > 0.0) {
            rays.push_back({(p - view.origin) / z, z});
            if ((p - init.center).dot((p - view.origin).normalized()) > 0.5 * init.radius()) {
                ++behind;
            }
        }
    }
    // A single view only sees the near surface; clouds that wrap around the sphere
    // are not depth images of it.
    if (behind > rays.size() / 10) {
        return init;
    }
    if (rays.size() < 4) {
        return init;
    }
    using Vec4 = Eigen::Vector4d;
    // Hits contribute the depth residual. Misses contribute the depth of the closest
    // approach plus how far the ray passes outside the sphere. Pixel rays are exact,
    // so the miss term is weighted as a near-hard silhouette constraint.
    constexpr double kSilhouetteWeight = 10.0;
    auto evaluate = [&](const Vec4& x, Eigen::Matrix4d* jtj, Vec4* jtf) {
        const Vec3 c = x.head<3>();
        const double r = x(3);
        double cost = 0.0;
        for (const auto& ray : rays) {
            const Vec3 w = c - view.origin;
            const double a = ray.dir.squaredNorm();
            const double b = ray.dir.dot(w);
            const double q = b * b - a * (w.squaredNorm() - r * r);
            if (q >= 0.0) {
                const double sq = std::max(std::sqrt(q), 1e-9);
                const double e = (b - std::sqrt(q)) / a - ray.depth;
                cost += e * e;
                if (jtj != nullptr) {
                    Vec4 j;
                    j.head<3>() = (ray.dir - (b * ray.dir - a * w) / sq) / a;
                    j(3) = -r / sq;
                    jtj->noalias() += j * j.transpose();
                    jtf->noalias() += j * e;
                }
            } else {
                const double e1 = b / a - ray.depth;
                const double s = std::sqrt(std::max(w.squaredNorm() - b * b / a, 1e-24));
                const double e2 = kSilhouetteWeight * (s - r);
                cost += e1 * e1 + e2 * e2;
                if (jtj != nullptr) {
                    Vec4 j1 = Vec4::Zero();
                    j1.head<3>() = ray.dir / a;
                    Vec4 j2;
                    j2.head<3>() = kSilhouetteWeight * (w - (b / a) * ray.dir) / s;
                    j2(3) = -kSilhouetteWeight;
                    jtj->noalias() += j1 * j1.transpose() + j2 * j2.transpose();
                    jtf->noalias() += j1 * e1 + j2 * e2;
                }
            }
        }
        return cost;
    };

    Vec4 x;
    x << init.center, init.radius();
    double cost = evaluate(x, nullptr, nullptr);
    double lambda = 1e-3;
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Vec4 jtf = Vec4::Zero();
        evaluate(x, &jtj, &jtf);
        bool improved = false;
        for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
            Eigen::Matrix4d damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            const Vec4 step = damped.ldlt().solve(-jtf);
            const Vec4 trial = x + step;
            if (!step.allFinite() || !(trial(3) > 0.0)) {
                lambda *= 10.0;
                continue;
            }
            const double trial_cost = evaluate(trial, nullptr, nullptr);
            if (trial_cost < cost) {
                const bool converged = step.norm() < 1e-12 || cost - trial_cost < 1e-15 * cost;
                x = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (converged) {
                    it = max_iterations;
                }
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) {
            break;
        }
    }
    if (!x.allFinite() || !(x(3) > 0.0)) {
        return init;
    }
    return {x.head<3>(), 2.0 * x(3)};
}

bool InlierPredicate::operator()(const SphereModel& s, const Vec3& p) const {
    const double r = s.radius();
    const double dist = (p - s.center).norm();
    if (std::abs(dist - r) > tol_) {
        return false;
    }
    if (dist > r + tol_) {
        return false;
    }
    const double depth = view_.depth(p);
    if (rule_ == DepthRule::Literal) {
        return depth >= min_depth_;
    }
    return depth <= min_depth_ + std::min(s.diameter, d_max_);
}

namespace {

struct Score {
    int count = 0;
    double residual_sum = 0.0;

    bool better_than(const Score& other) const {
        if (count != other.count) {
            return count > other.count;
        }
        if (count == 0) {
            return false;
        }
        return residual_sum / count < other.residual_sum / other.count;
    }
};

Score score(const SphereModel& s, std::span<const Vec3> cloud, const InlierPredicate& pred) {
    Score sc;
    for (const auto& p : cloud) {
        if (pred(s, p)) {
            ++sc.count;
            sc.residual_sum += InlierPredicate::residual(s, p);
        }
    }
    return sc;
}

PointCloud inliers_of(const SphereModel& s, std::span<const Vec3> cloud, const InlierPredicate& pred) {
    PointCloud out;
    for (const auto& p : cloud) {
        if (pred(s, p)) {
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace

FitReport ransac_sphere_fit(std::span<const Vec3> cloud, const FitConfig& cfg, const ViewAxis& view) {
    cfg.validate();
    if (cloud.size() < 4) {
        throw InsufficientSupportError(fmt::format("RANSAC sphere fit needs >= 4 points, got {}", cloud.size()));
    }
    double min_depth = view.depth(cloud[0]);
    for (const auto& p : cloud) {
        min_depth = std::min(min_depth, view.depth(p));
    }
    const InlierPredicate pred(cfg, view, min_depth);

    SphereModel best = initial_estimate(cloud);
    Score best_score = score(best, cloud, pred);

    FitReport report;
    report.point_count = static_cast<int>(cloud.size());
    Rng rng(cfg.rng_seed);
    const auto n = static_cast<std::uint64_t>(cloud.size());
    for (int it = 0; it < cfg.ransac_iterations; ++it) {
        std::array<std::uint64_t, 4> idx{};
        for (std::size_t k = 0; k < 4; ++k) {
            bool fresh = false;
            while (!fresh) {
                idx[k] = rng.below(n);
                fresh = std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx[k]) ==
                        idx.begin() + static_cast<std::ptrdiff_t>(k);
            }
        }
        SphereModel hyp;
        try {
            hyp = fit_sphere_exact({cloud[idx[0]], cloud[idx[1]], cloud[idx[2]], cloud[idx[3]]});
        } catch (const DegenerateSampleError&) {
            ++report.degenerate_samples;
            continue;
        }
        const Score sc = score(hyp, cloud, pred);
        if (sc.better_than(best_score)) {
            best = hyp;
            best_score = sc;
        }
    }
    report.iterations_used = cfg.ransac_iterations;
    if (report.degenerate_samples == cfg.ransac_iterations) {
        throw DegenerateSampleError(
            fmt::format("all {} RANSAC samples were degenerate", cfg.ransac_iterations));
    }

    report.hypothesis_inliers = best_score.count;
    report.model = best;
    report.inlier_count = best_score.count;
    if (cfg.refine != RefineMode::None && best_score.count >= 4) {
        try {
            const PointCloud support = inliers_of(best, cloud, pred);
            SphereModel refined = fit_sphere_least_squares(support);
            if (cfg.refine == RefineMode::Geometric || cfg.refine == RefineMode::Ray) {
                refined = fit_sphere_geometric(support, refined);
            }
            if (cfg.refine == RefineMode::Ray) {
                refined = fit_sphere_ray_depth(support, refined, view);
            }
            report.model = refined;
            report.inlier_count = score(refined, cloud, pred).count;
            report.refined = true;
        } catch (const DegenerateSampleError&) {
            // keep the best minimal-sample hypothesis
        }
    }

    const double fraction = static_cast<double>(report.inlier_count) / static_cast<double>(cloud.size());
    const double d = report.model.diameter;
    report.accepted = std::isfinite(d) && is_finite(report.model.center) && fraction >= cfg.min_inlier_fraction &&
                      d >= cfg.d_min && d <= cfg.d_max;
    return report;
}

}  // namespace fruitmap
