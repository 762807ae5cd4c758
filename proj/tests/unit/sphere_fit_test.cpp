#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "fruitmap/errors.hpp"
#include "fruitmap/sphere_fit.hpp"
#include "oracles/reference.hpp"

using namespace fruitmap;
using fixtures::full_sphere_cloud;
using fixtures::hemisphere_cloud;

TEST(Downsample, SmallCloudUnchanged) {
    Rng rng(1);
    const auto cloud = full_sphere_cloud(rng, Vec3::Zero(), 1.0, 100);
    EXPECT_EQ(downsample_points(cloud, 500, 9), cloud);
}

TEST(Downsample, FixedSizeReproducibleAndOrdered) {
    PointCloud cloud;
    for (int i = 0; i < 10000; ++i) {
        cloud.emplace_back(i, 0, 0);
    }
    const auto a = downsample_points(cloud, 500, 42);
    const auto b = downsample_points(cloud, 500, 42);
    const auto c = downsample_points(cloud, 500, 43);
    ASSERT_EQ(a.size(), 500u);
    EXPECT_EQ(a, b);
    EXPECT_EQ(c.size(), 500u);
    EXPECT_NE(a, c);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](const Vec3& l, const Vec3& r) { return l.x() < r.x(); }));
    EXPECT_TRUE(std::adjacent_find(a.begin(), a.end()) == a.end());
}

TEST(InitialEstimate, FullSphere) {
    // Fibonacci lattice: evenly spread samples, so the centroid error is O(1/n) rather than O(1/sqrt(n)).
    const Vec3 c(0.1, -0.2, 0.4);
    const double r = 0.012;
    const int n = 10000;
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
        const double rho = std::sqrt(1.0 - z * z);
        cloud.push_back(c + r * Vec3(rho * std::cos(phi), rho * std::sin(phi), z));
    }
    const auto est = initial_estimate(cloud);
    EXPECT_LT((est.center - c).norm(), 1e-3 * r);
    EXPECT_NEAR(est.diameter, 2 * r, 0.02 * 2 * r);
}

TEST(InitialEstimate, SymmetricFourPoints) {
    const double r = 0.01;
    const PointCloud pts{{r, 0, 0}, {-r, 0, 0}, {0, r, 0}, {0, -r, 0}};
    const auto est = initial_estimate(pts);
    EXPECT_LT(est.center.norm(), 1e-15);
    EXPECT_NEAR(est.diameter, 2 * r, 1e-15);
    EXPECT_THROW(initial_estimate(PointCloud(3, Vec3::Zero())), InsufficientSupportError);
}

TEST(InitialEstimate, HemisphereBias) {
    Rng rng(3);
    const Vec3 c(0, 0, 0.4);
    const double r = 0.01;
    const auto est = initial_estimate(hemisphere_cloud(rng, c, r, 5000, 0.0));
    EXPECT_LT(est.center.z(), c.z() - 0.3 * r);
    EXPECT_LT(est.diameter, 2 * r);
}

TEST(ExactFit, SymmetricPoints) {
    const auto s = fit_sphere_exact({Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)});
    EXPECT_LT(s.center.norm(), 1e-12);
    EXPECT_NEAR(s.diameter, 2.0, 1e-12);
}

TEST(ExactFit, AgreesWithDeterminantOracle) {
    Rng rng(4);
    const Vec3 c(0.1, 0.2, 0.4);
    const double r = 0.012;
    for (int i = 0; i < 100; ++i) {
        std::array<Vec3, 4> pts;
        for (auto& p : pts) {
            p = c + r * fixtures::random_unit(rng);
        }
        const auto s = fit_sphere_exact(pts);
        const auto ref = oracles::sphere_through(pts[0], pts[1], pts[2], pts[3]);
        if ((ref.center - c).norm() > 1e-9) {
            continue;  // nearly coplanar draw: oracle itself is ill-conditioned
        }
        EXPECT_LT((s.center - c).norm(), 1e-9);
        EXPECT_NEAR(s.radius(), r, 1e-9);
        EXPECT_LT((s.center - ref.center).norm(), 1e-9);
    }
}

TEST(ExactFit, CoplanarIsDegenerate) {
    EXPECT_THROW(fit_sphere_exact({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}), DegenerateSampleError);
}

TEST(LeastSquares, NoiselessCloud) {
    Rng rng(5);
    const Vec3 c(-0.02, 0.03, 0.35);
    const auto s = fit_sphere_least_squares(hemisphere_cloud(rng, c, 0.008, 300, 0.0));
    EXPECT_LT((s.center - c).norm(), 1e-10);
    EXPECT_NEAR(s.diameter, 0.016, 1e-10);
}

TEST(RayDepthRefine, NoisyCapUnbiased) {
    Rng rng(6);
    double sum = 0.0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        const double r = 0.005;
        const Vec3 c(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), 0.4);
        const auto cloud = hemisphere_cloud(rng, c, r, 400, 0.0011);
        const auto init = fit_sphere_geometric(cloud, fit_sphere_least_squares(cloud));
        sum += fit_sphere_ray_depth(cloud, init).diameter / (2 * r) - 1.0;
    }
    EXPECT_LT(std::abs(sum / trials), 0.01);
}

TEST(RayDepthRefine, WrappingCloudReturnsInit) {
    Rng rng(7);
    const auto cloud = full_sphere_cloud(rng, Vec3(0, 0, 0.4), 0.01, 500);
    const SphereModel init{Vec3(0.0001, 0, 0.4), 0.0199};
    const auto out = fit_sphere_ray_depth(cloud, init);
    EXPECT_EQ(out.center, init.center);
    EXPECT_EQ(out.diameter, init.diameter);
}

TEST(InlierPredicate, DepthRules) {
    FitConfig cfg;
    const SphereModel s{Vec3(0, 0, 0.4), 0.02};
    const InlierPredicate bg(cfg, {}, 0.3905);
    EXPECT_TRUE(bg(s, Vec3(0, 0, 0.39)));
    EXPECT_FALSE(bg(s, Vec3(0, 0, 0.387)));  // 3 mm off the surface
    EXPECT_TRUE(bg(s, Vec3(0, 0, 0.41)));    // far side, still within min depth + diameter
    cfg.z_rule = DepthRule::Literal;
    const InlierPredicate lit(cfg, {}, 0.395);
    EXPECT_FALSE(lit(s, Vec3(0, 0, 0.39)));
    EXPECT_TRUE(lit(s, Vec3(0, 0, 0.41)));
    EXPECT_NEAR(InlierPredicate::residual(s, Vec3(0, 0, 0.42)), 0.01, 1e-15);
}

TEST(InlierPredicate, BackgroundRejectCapsAtDMax) {
    FitConfig cfg;
    cfg.d_max = 0.03;
    const SphereModel huge{Vec3(0, 0, 0.45), 0.1};
    const InlierPredicate pred(cfg, {}, 0.40);
    EXPECT_TRUE(pred(huge, Vec3(0, 0, 0.40)));
    EXPECT_FALSE(pred(huge, Vec3(0, 0, 0.50)));
}

TEST(Ransac, NoiselessFullSphereExact) {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const double r = rng.uniform(0.004, 0.02);
        const Vec3 c(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.3, 0.4));
        FitConfig cfg;
        cfg.rng_seed = static_cast<std::uint64_t>(t);
        const auto cloud = downsample_points(full_sphere_cloud(rng, c, r, 2000), cfg.max_points, 1);
        const auto rep = ransac_sphere_fit(cloud, cfg);
        ASSERT_TRUE(rep.accepted);
        EXPECT_NEAR(rep.model.diameter / (2 * r), 1.0, 1e-6);
        EXPECT_LT((rep.model.center - c).norm(), 1e-6 * r);
        EXPECT_EQ(rep.inlier_count, rep.point_count);
    }
}

TEST(Ransac, HemisphereWithStereoNoise) {
    Rng rng(9);
    const Vec3 c(0.01, -0.02, 0.4);
    FitConfig cfg;
    cfg.rng_seed = 3;
    const auto rep = ransac_sphere_fit(hemisphere_cloud(rng, c, 0.01, 500, 0.0011), cfg);
    EXPECT_TRUE(rep.accepted);
    EXPECT_NEAR(rep.model.diameter, 0.02, 0.05 * 0.02);
}

TEST(Ransac, BackgroundBleedExcluded) {
    Rng rng(10);
    const Vec3 c(0.0, 0.01, 0.38);
    const double r = 0.01;
    auto cloud = hemisphere_cloud(rng, c, r, 350, 0.0011);
    fixtures::add_background_bleed(rng, cloud, c, r, 150, 0.06, 0.0011);
    FitConfig cfg;
    cfg.rng_seed = 5;
    const auto rep = ransac_sphere_fit(cloud, cfg);
    EXPECT_TRUE(rep.accepted);
    EXPECT_NEAR(rep.model.diameter, 2 * r, 0.05 * 2 * r);
    EXPECT_LE(rep.inlier_count, 350);
}

TEST(Ransac, Deterministic) {
    Rng rng(11);
    const auto cloud = hemisphere_cloud(rng, Vec3(0, 0, 0.4), 0.01, 500, 0.0011);
    FitConfig cfg;
    cfg.rng_seed = 77;
    const auto a = ransac_sphere_fit(cloud, cfg);
    const auto b = ransac_sphere_fit(cloud, cfg);
    EXPECT_EQ(a.model.center, b.model.center);
    EXPECT_EQ(a.model.diameter, b.model.diameter);
    EXPECT_EQ(a.inlier_count, b.inlier_count);
}

TEST(Ransac, RejectsImplausibleDiameter) {
    Rng rng(12);
    FitConfig cfg;
    const auto rep = ransac_sphere_fit(full_sphere_cloud(rng, Vec3(0, 0, 0.5), 0.03, 500), cfg);
    EXPECT_FALSE(rep.accepted);
    // Not a single-view surface (the far third is cut by the depth floor), so only roughly exact.
    EXPECT_NEAR(rep.model.diameter, 0.06, 0.01 * 0.06);
}

TEST(Ransac, InputErrors) {
    EXPECT_THROW(ransac_sphere_fit(PointCloud(3, Vec3(0, 0, 1)), FitConfig{}), InsufficientSupportError);
    PointCloud planar;
    for (int i = 0; i < 50; ++i) {
        planar.emplace_back(i * 0.001, (i % 7) * 0.001, 0.4);
    }
    EXPECT_THROW(ransac_sphere_fit(planar, FitConfig{}), DegenerateSampleError);
    FitConfig bad;
    bad.d_min = 0.05;
    EXPECT_THROW(ransac_sphere_fit(planar, bad), ValidationError);
}

TEST(FitConfigNames, RoundTrip) {
    for (auto m : {RefineMode::None, RefineMode::Linear, RefineMode::Geometric, RefineMode::Ray}) {
        EXPECT_EQ(parse_refine_mode(to_string(m)), m);
    }
    for (auto r : {DepthRule::Literal, DepthRule::BackgroundReject}) {
        EXPECT_EQ(parse_depth_rule(to_string(r)), r);
    }
    EXPECT_THROW(parse_depth_rule("floor"), ValidationError);
    EXPECT_THROW(parse_refine_mode("cubic"), ValidationError);
}
