#pragma once

#include <map>
#include <optional>
#include <vector>

#include "semray/frontiers.hpp"
#include "semray/geometry.hpp"
#include "semray/occupancy_grid.hpp"
#include "semray/ray_frontiers.hpp"

namespace semray {

/// One globally-encoded ray per frame at the robot position.
struct SemPoseEntry {
  Vec3 origin;
  Vec3 dir;  // camera optical axis in world frame
  std::vector<float> feature;
};

struct SemPosesState {
  std::vector<SemPoseEntry> entries;
};

/// Appends the frame's spatial mean feature along the camera's forward axis.
void sem_poses_update(SemPosesState& state, const Pose& pose, const FeatureImage& features);

/// Single fused feature per frontier.
struct SemFrontierEntry {
  Vec3 origin;
  std::vector<float> feature;
  double weight = 0.0;
  std::optional<Vec3> dir;  // unidirectional variant only
};

enum class SemFrontVariant { Spherical, Unidirectional };

struct SemFrontsState {
  SemFrontVariant variant = SemFrontVariant::Spherical;
  std::map<VoxelKey, SemFrontierEntry> entries;  // keyed by coarse frontier key
};

/// Associates rays exactly like the ray-frontier map, then fuses every ray landing on a frontier
/// into one feature with weight ray.weight * (1 - d_cost), ignoring direction. For the
/// unidirectional variant, every entry's direction is re-inferred from `grid`.
void sem_fronts_update(SemFrontsState& state, const std::vector<LocalRay>& rays, const FrontierSet& frontiers,
                       const AssociationParams& params, const OccupancyGrid& grid);

/// Drops entries whose frontier vanished.
void sem_fronts_prune(SemFrontsState& state, const std::vector<VoxelKey>& removed);

/// Recomputes directions of unidirectional entries against the current grid.
void sem_fronts_refresh_directions(SemFrontsState& state, const OccupancyGrid& grid);

/// Sum over the 26 neighbors (fine cells around the cell containing `frontier_origin`) of
/// w * offset / |offset|, with w = +1 for Unobserved and -1 for Free or Occupied. Returns +z when
/// the sum vanishes.
Vec3 infer_frontier_direction(const OccupancyGrid& grid, const Vec3& frontier_origin);

}  // namespace semray
