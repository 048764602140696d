#pragma once

#include <cstdint>
#include <vector>

#include "semray/geometry.hpp"
#include "semray/occupancy_grid.hpp"

namespace semray {

struct FrontierThresholds {
  int radius = 1;          // fronti_neighborhood_r
  int min_unobserved = 9;  // fronti_min_unobserved
  int min_occupied = 0;    // fronti_min_occupied
  int min_free = 4;        // fronti_min_empty
};

/// Free cells whose (2r+1)^3 - 1 neighborhood holds at least the given number of Unobserved,
/// Occupied and Free cells. Super-voxels count as their fine cells. Sorted by key.
std::vector<VoxelKey> compute_fine_frontiers(const OccupancyGrid& grid, const FrontierThresholds& t);

/// Coarse frontier cells of side beta = resolution * factor.
struct FrontierSet {
  double fine_resolution = 1.0;
  int factor = 1;
  std::uint64_t generation = 0;
  std::vector<VoxelKey> keys;  // coarse keys, sorted and unique

  double beta() const { return fine_resolution * factor; }
  std::size_t size() const { return keys.size(); }
  bool empty() const { return keys.empty(); }
  Vec3 origin(std::size_t i) const { return voxel_center(keys[i], beta()); }
  std::vector<Vec3> origins() const;
  bool contains(const VoxelKey& coarse) const;
  /// Index of a coarse key, or -1.
  std::ptrdiff_t indexOf(const VoxelKey& coarse) const;
};

/// Keeps coarse cells covering at least `min_fronti` fine frontiers.
FrontierSet subsample_frontiers(const std::vector<VoxelKey>& fine, double fine_resolution, int factor,
                                int min_fronti, std::uint64_t generation = 0);

struct FrontierDiff {
  std::vector<VoxelKey> removed;  // old \ new
  std::vector<VoxelKey> added;    // new \ old
};

/// Throws std::invalid_argument when the two sets use different coarse cell sizes.
FrontierDiff diff_frontiers(const FrontierSet& old_set, const FrontierSet& new_set);

}  // namespace semray
