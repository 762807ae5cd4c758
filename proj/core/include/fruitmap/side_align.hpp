#pragma once

#include <string>

#include "fruitmap/fruitlet_map.hpp"
#include "fruitmap/scan_model.hpp"

namespace fruitmap {

/// Rigid map from side-B to side-A coordinates given the fiducial pose seen from
/// each side (fiducial-to-side): pose_a * inverse(pose_b).
RigidTransform cross_side_transform(const FiducialObservation& fiducial_a, const FiducialObservation& fiducial_b);

/// Applies `t` to every track center; diameters, ids and counts are unchanged.
BranchMap transform_map(const BranchMap& map, const RigidTransform& t, std::string frame_label);

/// Re-expresses a side-B map in the side-A frame (label "B_in_A").
BranchMap align_side_b(const BranchMap& map_b, const FiducialObservation& fiducial_a,
                       const FiducialObservation& fiducial_b);

/// Two-sided map: starts from the side-A tracks and integrates each side-B track in
/// order, merging it into the nearest track within the cross-side radius or appending
/// it. Observation counts add and side labels union. No consolidation pass follows,
/// so tracks may end up closer than the radius. Side-A ids are kept; appended tracks
/// take fresh ids above the largest one, so ids still rise in order of first appearance.
/// Both maps must be in the side-A frame ("A" and "B_in_A"); otherwise ValidationError.
BranchMap merge_maps(const BranchMap& map_a, const BranchMap& map_b_in_a,
                     const MergeConfig& cfg = MergeConfig::cross_side());

}  // namespace fruitmap
