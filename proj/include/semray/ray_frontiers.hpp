#pragma once

#include <map>
#include <optional>
#include <random>
#include <vector>

#include "semray/frontiers.hpp"
#include "semray/geometry.hpp"
#include "semray/occupancy_grid.hpp"

namespace semray {

/// A semantic ray observed this frame, or re-cast from a removed frontier.
struct LocalRay {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();
  std::vector<float> feature;
  double weight = 1.0;  // 1 for fresh observations; accumulated weight for re-cast rays
};

/// Builds rays from out-of-range pixels.
///
/// A pixel is out of range when its depth is +inf or exceeds `max_range`. The mask is eroded with
/// a (2h+1)^2 square window (pixels outside the image count as out of range), and each surviving
/// pixel becomes a world-frame ray from the camera center through the pixel center. The result
/// is uniformly subsampled to `max_dirs_per_frame`.
std::vector<LocalRay> observe_out_of_range(const Pose& pose, const CameraIntrinsics& intr,
                                           const DepthImage& depth, const FeatureImage& features,
                                           int erosion_half_window, std::uint64_t max_dirs_per_frame,
                                           std::mt19937_64& rng,
                                           double max_range = std::numeric_limits<double>::infinity());

/// Out-of-range mask after erosion, row-major, 1 = keep.
std::vector<std::uint8_t> eroded_out_of_range_mask(const DepthImage& depth, int erosion_half_window,
                                                   double max_range = std::numeric_limits<double>::infinity());

struct AssociationResult {
  std::size_t ray_index = 0;
  bool assigned = false;
  std::size_t frontier_index = 0;  // into FrontierSet::keys
  VoxelKey frontier_key;
  Vec3 frontier_origin = Vec3::Zero();
  double d_ortho = 0.0;
  double d_orig = 0.0;
  double d_cost = 0.0;
};

struct AssociationParams {
  /// Frontiers farther than 4x this from the ray origin are dropped. <= 0 disables the filter.
  double depth_range = std::numeric_limits<double>::infinity();
  bool ray_tracing = false;
  int threads = 1;
};

/// Candidate metrics for one ray against one frontier origin, or nullopt if the frontier fails
/// the in-front, orthogonal-distance or origin-distance filters.
struct FrontierCandidate {
  double d_ortho;
  double d_orig;
};
std::optional<FrontierCandidate> frontier_candidate(const LocalRay& ray, const Vec3& frontier_origin,
                                                    double beta, double depth_range);

/// Selects, per ray, the frontier minimizing
///   d_cost = (d_ortho / max d_ortho + d_orig / max d_orig) / 2
/// over the candidates that pass the filters. Ties go to the smaller d_orig, then the lower
/// frontier index. With ray tracing and a grid, a ray that meets an Occupied or Unobserved cell
/// before reaching its frontier's coarse cell is left unassigned. Output is indexed like `rays`.
std::vector<AssociationResult> associate_rays(const std::vector<LocalRay>& rays, const FrontierSet& frontiers,
                                              const AssociationParams& params,
                                              const OccupancyGrid* grid = nullptr);

/// True when the ray reaches the frontier's coarse cell (or its projection onto the ray) through
/// Free space only. The ray's own starting cell is not tested.
bool ray_reaches_frontier(const OccupancyGrid& grid, const LocalRay& ray, const VoxelKey& frontier_key,
                          const FrontierSet& frontiers);

struct RayKey {
  VoxelKey anchor;  // coarse frontier key, or coarse camera cell in pose-anchored mode
  AngleBin bin;

  auto operator<=>(const RayKey&) const = default;
};

struct RayFrontierEntry {
  Vec3 origin = Vec3::Zero();
  AngleBin bin;
  std::vector<float> feature;
  double weight = 0.0;
};

/// Semantic rays merged per (anchor cell, angle bin).
class RayFrontierMap {
 public:
  RayFrontierMap(double psi_deg, int dim);

  double psi() const { return psi_; }
  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<RayKey, RayFrontierEntry>& entries() const { return entries_; }

  /// Weighted-mean merge of a batch of (key, origin, feature, weight) contributions; zero or
  /// negative weights are ignored. Sums are formed in double precision per batch.
  struct Contribution {
    RayKey key;
    Vec3 origin;
    const std::vector<float>* feature;
    double weight;
  };
  void merge(const std::vector<Contribution>& batch);

  /// Removes every entry anchored at one of `anchors` (sorted) and returns them in key order.
  std::vector<RayFrontierEntry> removeAnchors(const std::vector<VoxelKey>& anchors);

  /// `fx fy fz theta_bin phi_bin weight` per entry, in key order (f = anchor origin).
  void dump(std::ostream& os) const;

 private:
  double psi_;
  int dim_;
  std::map<RayKey, RayFrontierEntry> entries_;
};

/// Re-anchors assigned rays on their frontier origins, bins their directions and merges them
/// with per-ray weight ray.weight * (1 - d_cost).
void bin_and_accumulate(RayFrontierMap& map, const std::vector<LocalRay>& rays,
                        const std::vector<AssociationResult>& results, const FrontierSet& frontiers);

/// Pose-anchored accumulation used without depth sensing: rays stay on the coarse cell (side
/// `cell_size`) containing their origin, with weight ray.weight.
void accumulate_pose_anchored(RayFrontierMap& map, const std::vector<LocalRay>& rays, double cell_size);

/// Pending rays plus the flush schedule.
struct RayAccumulationBuffer {
  int period = 1;  // ray_accum_period
  int phase = 0;   // ray_accum_phase
  std::vector<LocalRay> pending;

  /// Whether rays should be cast after processing zero-based frame `frame_index`.
  bool flushDue(std::size_t frame_index) const {
    return static_cast<int>((frame_index + 1) % period) == phase % period;
  }
};

/// Removes entries on vanished frontiers. With ray tracing they are re-cast from the old
/// frontier origin along the bin-center direction, keeping feature and weight; otherwise they
/// are discarded. Returns the number of entries removed.
std::size_t propagate_fronts(RayFrontierMap& map, const std::vector<VoxelKey>& removed,
                             RayAccumulationBuffer& buffer, bool ray_tracing);

}  // namespace semray
