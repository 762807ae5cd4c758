#include <benchmark/benchmark.h>
#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "fruitmap/fruitlet_map.hpp"
#include "fruitmap/scan_sim.hpp"
#include "fruitmap/sphere_fit.hpp"

using namespace fruitmap;

namespace {

void BM_RansacSphereFit(benchmark::State& state) {
    Rng rng(1);
    const auto cloud = fixtures::hemisphere_cloud(rng, Vec3(0, 0, 0.4), 0.01, static_cast<int>(state.range(0)), 0.0011);
    FitConfig cfg;
    cfg.rng_seed = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ransac_sphere_fit(cloud, cfg));
    }
}
BENCHMARK(BM_RansacSphereFit)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_RayDepthRefine(benchmark::State& state) {
    Rng rng(2);
    const auto cloud = fixtures::hemisphere_cloud(rng, Vec3(0, 0, 0.4), 0.008, 500, 0.0011);
    const auto init = fit_sphere_least_squares(cloud);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_sphere_ray_depth(cloud, init));
    }
}
BENCHMARK(BM_RayDepthRefine)->Unit(benchmark::kMicrosecond);

void BM_RenderFrame(benchmark::State& state) {
    OrchardSpec spec;
    spec.occluder_count = static_cast<int>(state.range(0));
    const SimulatedScan scan(spec);
    int frame = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(scan.render(Side::A, frame));
        frame = (frame + 1) % scan.frame_count(Side::A);
    }
}
BENCHMARK(BM_RenderFrame)->Arg(0)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_IntegrateObservations(benchmark::State& state) {
    Rng rng(3);
    std::vector<SphereModel> obs;
    for (int i = 0; i < 2000; ++i) {
        obs.push_back({Vec3(rng.uniform(0, 0.9), rng.uniform(-0.04, 0.0), rng.uniform(-0.01, 0.01)),
                       rng.uniform(0.008, 0.025)});
    }
    for (auto _ : state) {
        BranchMap map{"A", {}, {}};
        for (const auto& o : obs) {
            integrate_observation_in_place(map, o, {}, Side::A);
        }
        benchmark::DoNotOptimize(map.tracks.size());
    }
}
BENCHMARK(BM_IntegrateObservations)->Unit(benchmark::kMillisecond);

void BM_BuildSideMap(benchmark::State& state) {
    OrchardSpec spec;
    spec.camera = fixtures::small_camera();
    const SimulatedScan scan(spec);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_side_map(scan, Side::A, FitConfig{}, MergeConfig{}, {}, 1));
    }
}
BENCHMARK(BM_BuildSideMap)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) {
        return 1;
    }
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
