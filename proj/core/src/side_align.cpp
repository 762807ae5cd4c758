#include "fruitmap/side_align.hpp"

#include <limits>

#include <fmt/format.h>

#include "fruitmap/errors.hpp"

namespace fruitmap {

RigidTransform cross_side_transform(const FiducialObservation& fiducial_a, const FiducialObservation& fiducial_b) {
    if (fiducial_a.side != Side::A || fiducial_b.side != Side::B) {
        throw ValidationError(fmt::format("cross-side transform needs fiducials from sides A and B, got {} and {}",
                                          to_string(fiducial_a.side), to_string(fiducial_b.side)));
    }
    return fiducial_a.pose.compose(fiducial_b.pose.inverse());
}

BranchMap transform_map(const BranchMap& map, const RigidTransform& t, std::string frame_label) {
    BranchMap out = map;
    out.frame_label = std::move(frame_label);
    for (auto& track : out.tracks) {
        track.center = t.apply(track.center);
    }
    return out;
}

BranchMap align_side_b(const BranchMap& map_b, const FiducialObservation& fiducial_a,
                       const FiducialObservation& fiducial_b) {
    if (map_b.frame_label != frame_labels::kSideB) {
        throw ValidationError(fmt::format("expected a side-B map, got frame label '{}'", map_b.frame_label));
    }
    auto out = transform_map(map_b, cross_side_transform(fiducial_a, fiducial_b), std::string(frame_labels::kBInA));
    out.provenance["fiducial_alignment"] = true;
    return out;
}

BranchMap merge_maps(const BranchMap& map_a, const BranchMap& map_b_in_a, const MergeConfig& cfg) {
    cfg.validate();
    if (map_a.frame_label != frame_labels::kSideA) {
        throw ValidationError(fmt::format("first map must have frame label 'A', got '{}'", map_a.frame_label));
    }
    if (map_b_in_a.frame_label != frame_labels::kBInA) {
        throw ValidationError(fmt::format("second map must be aligned to side A (frame label 'B_in_A'), got '{}'",
                                          map_b_in_a.frame_label));
    }
    BranchMap out;
    out.frame_label = std::string(frame_labels::kMerged);
    out.provenance = {{"side_a", map_a.provenance}, {"side_b", map_b_in_a.provenance}};
    out.tracks = map_a.tracks;
    for (const auto& b : map_b_in_a.tracks) {
        std::size_t best = out.tracks.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < out.tracks.size(); ++i) {
            const double d = (out.tracks[i].center - b.center).norm();
            if (d < best_d || (d == best_d && out.tracks[i].id < out.tracks[best].id)) {
                best_d = d;
                best = i;
            }
        }
        if (best < out.tracks.size() && best_d <= cfg.merge_radius) {
            absorb_track(out.tracks[best], b, cfg.averaging);
        } else {
            auto appended = b;
            appended.id = out.next_id();
            out.tracks.push_back(std::move(appended));
        }
    }
    return out;
}

}  // namespace fruitmap
