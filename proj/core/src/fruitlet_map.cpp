#include "fruitmap/fruitlet_map.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fruitmap/errors.hpp"
#include "fruitmap/json_io.hpp"
#include "fruitmap/provenance.hpp"
#include "fruitmap/random.hpp"

namespace fruitmap {

using nlohmann::json;

Side coordinate_frame(std::string_view label) {
    if (label == frame_labels::kSideA || label == frame_labels::kBInA || label == frame_labels::kMerged) {
        return Side::A;
    }
    if (label == frame_labels::kSideB) {
        return Side::B;
    }
    throw ValidationError(fmt::format("unknown frame label '{}'", label));
}

int BranchMap::next_id() const {
    int next = 0;
    for (const auto& t : tracks) {
        next = std::max(next, t.id + 1);
    }
    return next;
}

const FruitletTrack* BranchMap::find(int id) const {
    for (const auto& t : tracks) {
        if (t.id == id) {
            return &t;
        }
    }
    return nullptr;
}

std::string_view to_string(Averaging mode) { return mode == Averaging::Pairwise ? "pairwise" : "weighted"; }

Averaging parse_averaging(std::string_view text) {
    if (text == "pairwise") {
        return Averaging::Pairwise;
    }
    if (text == "weighted") {
        return Averaging::Weighted;
    }
    throw ValidationError(fmt::format("unknown averaging mode '{}' (expected pairwise or weighted)", text));
}

void MergeConfig::validate() const {
    if (!(merge_radius > 0.0) || !std::isfinite(merge_radius)) {
        throw ValidationError(fmt::format("merge_radius must be positive, got {}", merge_radius));
    }
}

void absorb_track(FruitletTrack& into, const FruitletTrack& other, Averaging mode) {
    if (mode == Averaging::Pairwise) {
        into.center = 0.5 * (into.center + other.center);
        into.diameter = 0.5 * (into.diameter + other.diameter);
    } else {
        const double wa = into.observations;
        const double wb = other.observations;
        into.center = (wa * into.center + wb * other.center) / (wa + wb);
        into.diameter = (wa * into.diameter + wb * other.diameter) / (wa + wb);
    }
    into.observations += other.observations;
    into.sides.insert(other.sides.begin(), other.sides.end());
}

namespace {

// Index of the track nearest to `p`, skipping `skip`; ties go to the smaller id.
std::ptrdiff_t nearest_track(const std::vector<FruitletTrack>& tracks, const Vec3& p, std::ptrdiff_t skip,
                             double& distance) {
    std::ptrdiff_t best = -1;
    distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        if (static_cast<std::ptrdiff_t>(i) == skip) {
            continue;
        }
        const double d = (tracks[i].center - p).norm();
        if (d < distance || (d == distance && best >= 0 && tracks[i].id < tracks[best].id)) {
            distance = d;
            best = static_cast<std::ptrdiff_t>(i);
        }
    }
    return best;
}

// Fuses the track at `idx` with any track that is now within the merge radius.
// The survivor keeps the smaller id.
void consolidate(std::vector<FruitletTrack>& tracks, std::ptrdiff_t idx, const MergeConfig& cfg) {
    for (;;) {
        double d = 0.0;
        const auto other = nearest_track(tracks, tracks[idx].center, idx, d);
        if (other < 0 || d > cfg.merge_radius) {
            return;
        }
        auto keep = idx;
        auto drop = other;
        if (tracks[drop].id < tracks[keep].id) {
            std::swap(keep, drop);
        }
        absorb_track(tracks[keep], tracks[drop], cfg.averaging);
        tracks.erase(tracks.begin() + drop);
        idx = keep > drop ? keep - 1 : keep;
    }
}

}  // namespace

void integrate_observation_in_place(BranchMap& map, const SphereModel& obs, const MergeConfig& cfg, Side side) {
    FruitletTrack incoming{map.next_id(), obs.center, obs.diameter, 1, {side}};
    double d = 0.0;
    const auto idx = nearest_track(map.tracks, obs.center, -1, d);
    if (idx >= 0 && d <= cfg.merge_radius) {
        absorb_track(map.tracks[idx], incoming, cfg.averaging);
        consolidate(map.tracks, idx, cfg);
    } else {
        map.tracks.push_back(std::move(incoming));
    }
}

BranchMap integrate_observation(BranchMap map, const SphereModel& obs, const MergeConfig& cfg, Side side) {
    integrate_observation_in_place(map, obs, cfg, side);
    return map;
}

void compact_ids(BranchMap& map) {
    int id = 0;
    for (auto& t : map.tracks) {
        t.id = id++;
    }
}

std::uint64_t observation_seed(std::uint64_t base_seed, int frame_index, int instance_id) {
    return derive_seed({base_seed, static_cast<std::uint64_t>(frame_index), static_cast<std::uint64_t>(instance_id)});
}

namespace {

enum class Outcome { Accepted, Rejected, Failed };

struct Observation {
    int instance_id = 0;
    Outcome outcome = Outcome::Failed;
    SphereModel model;
};

std::vector<Observation> process_frame(const ScanSource& source, Side side, int frame_index, const FitConfig& fit_cfg,
                                       const ExtractionConfig& extract_cfg) {
    const FrameRecord frame = source.frame(side, frame_index);
    const ViewAxis view{frame.pose.translation(), frame.pose.rotation().col(2)};
    std::vector<Observation> out;
    for (const auto& inst : extract_instance_clouds(frame, extract_cfg, CloudFrame::SideFrame)) {
        Observation o;
        o.instance_id = inst.instance_id;
        const auto seed = observation_seed(fit_cfg.rng_seed, frame_index, inst.instance_id);
        FitConfig cfg = fit_cfg;
        cfg.rng_seed = derive_seed({seed, 1});
        try {
            const auto pts = downsample_points(inst.points, fit_cfg.max_points, derive_seed({seed, 0}));
            const auto report = ransac_sphere_fit(pts, cfg, view);
            o.model = report.model;
            o.outcome = report.accepted ? Outcome::Accepted : Outcome::Rejected;
        } catch (const DomainError& e) {
            spdlog::debug("side {} frame {} instance {}: fit failed: {}", to_string(side), frame_index,
                          inst.instance_id, e.what());
            o.outcome = Outcome::Failed;
        }
        out.push_back(o);
    }
    return out;
}

json build_config_json(const FitConfig& fit_cfg, const MergeConfig& merge_cfg, const ExtractionConfig& extract_cfg) {
    return {{"fit", fit_cfg}, {"merge", merge_cfg}, {"extraction", extract_cfg}};
}

}  // namespace

BranchMap build_side_map(const ScanSource& source, Side side, const FitConfig& fit_cfg, const MergeConfig& merge_cfg,
                         const ExtractionConfig& extract_cfg, int threads, BuildStats* stats) {
    fit_cfg.validate();
    merge_cfg.validate();
    if (!source.has_side(side)) {
        throw ValidationError(fmt::format("dataset '{}' has no side {}", source.dataset_id(), to_string(side)));
    }
    const int frames = source.frame_count(side);
    std::vector<std::vector<Observation>> per_frame(static_cast<std::size_t>(frames));

    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, std::max(frames, 1));
    if (workers == 1) {
        for (int f = 0; f < frames; ++f) {
            per_frame[f] = process_frame(source, side, f, fit_cfg, extract_cfg);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int f = next++; f < frames; f = next++) {
                        per_frame[f] = process_frame(source, side, f, fit_cfg, extract_cfg);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    BranchMap map;
    map.frame_label = std::string(to_string(side));
    BuildStats local;
    local.frames = frames;
    for (const auto& observations : per_frame) {
        for (const auto& o : observations) {
            ++local.instances;
            switch (o.outcome) {
                case Outcome::Accepted:
                    ++local.accepted;
                    integrate_observation_in_place(map, o.model, merge_cfg, side);
                    break;
                case Outcome::Rejected:
                    ++local.rejected;
                    break;
                case Outcome::Failed:
                    ++local.failed;
                    break;
            }
        }
    }
    compact_ids(map);
    map.provenance = make_provenance(source.dataset_id(), build_config_json(fit_cfg, merge_cfg, extract_cfg),
                                     fit_cfg.rng_seed);
    spdlog::info("side {}: {} frames, {} instances, {} accepted, {} rejected, {} failed, {} tracks", to_string(side),
                 local.frames, local.instances, local.accepted, local.rejected, local.failed, map.tracks.size());
    if (stats != nullptr) {
        *stats = local;
    }
    return map;
}

void to_json(json& j, const BranchMap& map) {
    auto tracks = json::array();
    for (const auto& t : map.tracks) {
        auto sides = json::array();
        for (Side s : t.sides) {
            sides.push_back(std::string(to_string(s)));
        }
        tracks.push_back({{"id", t.id},
                          {"center", vec3_to_json(t.center)},
                          {"diameter", t.diameter},
                          {"observations", t.observations},
                          {"sides", std::move(sides)}});
    }
    j = {{"format_version", "1"},
         {"frame_label", map.frame_label},
         {"provenance", map.provenance},
         {"tracks", std::move(tracks)}};
}

void from_json(const json& j, BranchMap& map) {
    try {
        if (j.at("format_version").get<std::string>() != "1") {
            throw ValidationError("unsupported map format_version");
        }
        map = {};
        map.frame_label = j.at("frame_label").get<std::string>();
        coordinate_frame(map.frame_label);
        map.provenance = j.value("provenance", json::object());
        for (const auto& t : j.at("tracks")) {
            FruitletTrack track;
            track.id = t.at("id").get<int>();
            track.center = vec3_from_json(t.at("center"));
            track.diameter = t.at("diameter").get<double>();
            track.observations = t.at("observations").get<int>();
            for (const auto& s : t.at("sides")) {
                track.sides.insert(parse_side(s.get<std::string>()));
            }
            map.tracks.push_back(std::move(track));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed branch map: ") + e.what());
    }
}

void to_json(json& j, const FitConfig& cfg) {
    j = {{"max_points", cfg.max_points},
         {"ransac_iterations", cfg.ransac_iterations},
         {"inlier_tolerance", cfg.inlier_tolerance},
         {"min_inlier_fraction", cfg.min_inlier_fraction},
         {"d_min", cfg.d_min},
         {"d_max", cfg.d_max},
         {"rng_seed", cfg.rng_seed},
         {"z_rule", std::string(to_string(cfg.z_rule))},
         {"refine", std::string(to_string(cfg.refine))}};
}

void from_json(const json& j, FitConfig& cfg) {
    reject_unknown_keys(j,
                        {"max_points", "ransac_iterations", "inlier_tolerance", "min_inlier_fraction", "d_min",
                         "d_max", "rng_seed", "z_rule", "refine"},
                        "fit config");
    read_optional(j, "max_points", cfg.max_points);
    read_optional(j, "ransac_iterations", cfg.ransac_iterations);
    read_optional(j, "inlier_tolerance", cfg.inlier_tolerance);
    read_optional(j, "min_inlier_fraction", cfg.min_inlier_fraction);
    read_optional(j, "d_min", cfg.d_min);
    read_optional(j, "d_max", cfg.d_max);
    read_optional(j, "rng_seed", cfg.rng_seed);
    std::string rule;
    read_optional(j, "z_rule", rule);
    if (!rule.empty()) {
        cfg.z_rule = parse_depth_rule(rule);
    }
    std::string refine;
    read_optional(j, "refine", refine);
    if (!refine.empty()) {
        cfg.refine = parse_refine_mode(refine);
    }
    cfg.validate();
}

void to_json(json& j, const MergeConfig& cfg) {
    j = {{"merge_radius", cfg.merge_radius}, {"averaging", std::string(to_string(cfg.averaging))}};
}

void from_json(const json& j, MergeConfig& cfg) {
    reject_unknown_keys(j, {"merge_radius", "averaging"}, "merge config");
    read_optional(j, "merge_radius", cfg.merge_radius);
    std::string text;
    read_optional(j, "averaging", text);
    if (!text.empty()) {
        cfg.averaging = parse_averaging(text);
    }
    cfg.validate();
}

void to_json(json& j, const ExtractionConfig& cfg) { j = {{"min_points", cfg.min_points}}; }

void from_json(const json& j, ExtractionConfig& cfg) {
    reject_unknown_keys(j, {"min_points"}, "extraction config");
    read_optional(j, "min_points", cfg.min_points);
    if (cfg.min_points < 4) {
        throw ValidationError(fmt::format("extraction min_points must be >= 4, got {}", cfg.min_points));
    }
}

BranchMap load_branch_map(const std::string& path) {
    try {
        return read_json_file(path).get<BranchMap>();
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{} ('{}')", e.what(), path));
    }
}

void save_branch_map(const std::string& path, const BranchMap& map) { write_json_file(path, json(map)); }

}  // namespace fruitmap
