#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "semray/geometry.hpp"
#include "semray/sampling.hpp"

namespace semray {

enum class OccupancyClass : std::uint8_t { Unobserved = 0, Free = 1, Occupied = 2 };

const char* to_string(OccupancyClass c);

struct LogOddsLimits {
  int min_log_odds = -10;  // max_empty_cnt
  int max_log_odds = 100;  // max_occ_cnt
};

/// Sparse signed-byte log-odds grid with 2x2x2-recursive super-voxels.
///
/// Fine cells live in one hash map; a super-voxel at level L covers a (2^L)^3 block of fine
/// cells and is keyed by the block's coarse key. A fine key is never stored both as a cell and
/// under a covering super-voxel. Writes into a super-voxel expand it back to fine cells first.
///
/// Not internally synchronized: one writer, readers only between write batches.
class OccupancyGrid {
 public:
  static constexpr int kMaxLevel = 16;

  explicit OccupancyGrid(double resolution, LogOddsLimits limits = {});

  double resolution() const { return resolution_; }
  const LogOddsLimits& limits() const { return limits_; }

  /// Log-odds of the cell or super-voxel covering a fine key, if observed.
  std::optional<std::int8_t> logOdds(const VoxelKey& fine) const;
  /// Covering super-voxel level (0 for a fine cell), if observed.
  std::optional<int> levelOf(const VoxelKey& fine) const;

  OccupancyClass classify(const VoxelKey& fine) const {
    if (cells_.empty() && max_level_ == 0) return OccupancyClass::Unobserved;
    const auto o = logOdds(fine);
    if (!o) return OccupancyClass::Unobserved;
    return classOf(*o);
  }
  OccupancyClass query(const Vec3& p) const { return classify(voxel_key(p, resolution_)); }

  static OccupancyClass classOf(std::int8_t log_odds) {
    return log_odds >= 0 ? OccupancyClass::Occupied : OccupancyClass::Free;
  }
  /// Occupancy probability with unit log-odds scale; 0.5 exactly at log-odds 0.
  static double probability(std::int8_t log_odds);

  /// Adds `delta` to the cell's log-odds (absent cells start at 0) and clamps to the limits.
  void update(const VoxelKey& fine, int delta);
  void markOccupied(const VoxelKey& fine, int weight) { update(fine, weight); }
  void markFree(const VoxelKey& fine) { update(fine, -1); }

  /// Collapses homogeneous 2x2x2 blocks bottom-up. A block merges when all 8 children are
  /// present, their spread is within `tolerance`, and they all share a class. The super-voxel
  /// holds the rounded mean. Returns the number of blocks merged.
  std::size_t pruneMerge(int tolerance);

  /// Calls `fn(fine_key, level)` for every Free fine cell, expanding Free super-voxels.
  void forEachFree(const std::function<void(const VoxelKey&, int)>& fn) const;
  std::vector<VoxelKey> freeCells() const;

  /// Calls `fn(key, level, log_odds)` for every stored cell and super-voxel (unordered).
  void forEachStored(const std::function<void(const VoxelKey&, int, std::int8_t)>& fn) const;

  std::size_t cellCount() const { return cells_.size(); }
  std::size_t regionCount() const;
  int maxLevel() const { return max_level_; }
  bool empty() const { return cells_.empty() && regionCount() == 0; }

  /// `ix iy iz level log_odds` per line, lexicographically sorted. Super-voxels use their
  /// coarse key at their level.
  void dump(std::ostream& os) const;

 private:
  void expandRegion(int level, const VoxelKey& coarse, std::int8_t value);
  bool splitCovering(const VoxelKey& fine);
  std::int8_t clamp(int v) const;

  double resolution_;
  LogOddsLimits limits_;
  std::unordered_map<VoxelKey, std::int8_t> cells_;
  // regions_[L - 1] holds level-L super-voxels.
  std::vector<std::unordered_map<VoxelKey, std::int8_t>> regions_;
  int max_level_ = 0;
};

struct FrustumCell {
  VoxelKey key;
  std::size_t pixel;  // row * width + col of the projected pixel
  double z;           // camera-frame depth of the cell center
};

struct FrustumClassification {
  std::vector<FrustumCell> occupied;
  std::vector<FrustumCell> free;
};

/// Classifies every voxel whose center lies in the camera frustum and projects onto a pixel
/// with finite depth d. With band = occ_thickness * resolution, a center at depth z is Occupied
/// if |z - d| <= band / 2 and Free if z < d - band; other cells are left out. Cells are
/// enumerated in increasing key order.
FrustumClassification classify_frustum(const Pose& pose, const CameraIntrinsics& intr,
                                       const DepthImage& depth, double resolution,
                                       double occ_thickness);

struct OccupancyIntegrationParams {
  double occ_thickness = 2.0;
  int occ_observ_weight = 100;
  std::uint64_t max_pts = kUnlimited;
  std::uint64_t max_empty_pts = kUnlimited;
};

struct IntegrationStats {
  std::size_t occupied = 0;
  std::size_t free = 0;
};

/// Projects the frame onto the grid: Occupied cells gain `occ_observ_weight`, Free cells lose 1.
/// Candidates are uniformly subsampled to the point caps first.
IntegrationStats integrate_depth_frame(OccupancyGrid& grid, const Pose& pose,
                                       const CameraIntrinsics& intr, const DepthImage& depth,
                                       const OccupancyIntegrationParams& params, std::mt19937_64& rng);

/// Visits the fine cells pierced by a ray in order (Amanatides-Woo), starting with the origin
/// cell at t = 0. Stops when `visit(key, t_entry)` returns false or the next entry lies beyond
/// `max_dist`. `dir` must be unit length.
void traverse_cells(double resolution, const Vec3& origin, const Vec3& dir, double max_dist,
                    const std::function<bool(const VoxelKey&, double)>& visit);

struct RaycastResult {
  OccupancyClass hit_class = OccupancyClass::Free;  // Free when nothing but Free space was crossed
  std::optional<Vec3> hit_point;                    // entry point of the hit cell
  std::optional<VoxelKey> hit_key;
  double distance = 0.0;                            // distance to the entry point
};

/// Walks the fine cells pierced by the ray (Amanatides-Woo) and stops at the first cell that is
/// not Free. The origin cell is tested too, with entry point = origin.
RaycastResult raycast(const OccupancyGrid& grid, const Vec3& origin, const Vec3& dir, double max_dist);

}  // namespace semray
