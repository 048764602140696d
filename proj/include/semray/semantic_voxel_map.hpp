#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "semray/geometry.hpp"
#include "semray/occupancy_grid.hpp"

namespace semray {

/// Points gathered from the last few frames, waiting to be fused into the global map.
/// Struct-of-arrays; features are stored row-major with `dim` columns.
struct LocalUpdateBuffer {
  int dim = 0;
  int capacity_frames = 1;  // vox_accum_period
  int frames_accumulated = 0;
  std::vector<Vec3> positions;
  std::vector<Eigen::Vector3f> rgb;
  std::vector<float> features;
  std::vector<double> hit_counts;

  LocalUpdateBuffer() = default;
  LocalUpdateBuffer(int feature_dim, int period) : dim(feature_dim), capacity_frames(period) {}

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool ready() const { return frames_accumulated >= capacity_frames; }
  std::span<const float> feature(std::size_t i) const {
    return {features.data() + i * dim, static_cast<std::size_t>(dim)};
  }

  void push(const Vec3& p, const Eigen::Vector3f& color, std::span<const float> f, double hits = 1.0);
  void clear();
};

/// Unprojects the frame's Occupied frustum cells (same classification as the occupancy grid),
/// attaching the feature and color of the pixel each cell projects to. `rgb` is either empty or
/// H*W*3 values in [0,1]. Points are uniformly subsampled to `max_pts_per_frame`.
void accumulate_frame(LocalUpdateBuffer& buf, const Pose& pose, const CameraIntrinsics& intr,
                      const DepthImage& depth, const FeatureImage& features, double resolution,
                      double occ_thickness, std::uint64_t max_pts_per_frame, std::mt19937_64& rng,
                      std::span<const float> rgb = {});

struct SemanticVoxel {
  Eigen::Vector3f rgb = Eigen::Vector3f::Zero();
  std::vector<float> feature;
  double hit_count = 0.0;
};

class SemanticVoxelMap {
 public:
  SemanticVoxelMap(double resolution, int dim);

  double resolution() const { return resolution_; }
  int dim() const { return dim_; }
  std::size_t size() const { return voxels_.size(); }
  bool empty() const { return voxels_.empty(); }

  const SemanticVoxel* find(const VoxelKey& k) const;
  const std::unordered_map<VoxelKey, SemanticVoxel>& voxels() const { return voxels_; }
  /// Keys in increasing order.
  std::vector<VoxelKey> sortedKeys() const;

  double totalHitCount() const;

  /// Hit-count weighted fusion of every buffered point and existing voxel that share a key.
  /// Means are accumulated in double precision.
  void fuse(const LocalUpdateBuffer& buf);

  /// Drops voxels whose center lies in a Free cell. Returns how many were removed.
  std::size_t pruneWithOccupancy(const OccupancyGrid& grid);

  /// Direct insertion (tests, baselines that bypass the buffer).
  void insert(const VoxelKey& k, SemanticVoxel v);

 private:
  double resolution_;
  int dim_;
  std::unordered_map<VoxelKey, SemanticVoxel> voxels_;
};

inline void fuse_into_global(SemanticVoxelMap& map, const LocalUpdateBuffer& buf) { map.fuse(buf); }
inline std::size_t prune_with_occupancy(SemanticVoxelMap& map, const OccupancyGrid& grid) {
  return map.pruneWithOccupancy(grid);
}

struct PointRecord {
  Vec3 position;
  Eigen::Vector3f rgb;
  double hit_count;
  int class_id;  // -1 when unlabeled
};

/// ASCII PLY with one vertex per voxel: x y z red green blue hit_count class_id.
/// `labels`, when given, is indexed like `map.sortedKeys()`.
void export_point_cloud(const SemanticVoxelMap& map, const std::filesystem::path& path,
                        std::span<const int> labels = {});
std::vector<PointRecord> read_point_cloud(const std::filesystem::path& path);

}  // namespace semray
