#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semray/frontiers.hpp"
#include "semray/geometry.hpp"

namespace semray {

/// Dense axis-aligned block of evaluation cells.
struct EvalGrid {
  double resolution = 1.0;
  VoxelKey lo;  // key of the first cell
  int nx = 0, ny = 0, nz = 0;

  /// Smallest block of cells covering the box [min, max).
  static EvalGrid fromBounds(const Vec3& min, const Vec3& max, double resolution);

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
  std::size_t index(const VoxelKey& k) const {
    return (static_cast<std::size_t>(k.ix - lo.ix) * ny + (k.iy - lo.iy)) * nz + (k.iz - lo.iz);
  }
  VoxelKey key(std::size_t index) const {
    const int iz = static_cast<int>(index % nz);
    const int iy = static_cast<int>((index / nz) % ny);
    const int ix = static_cast<int>(index / (static_cast<std::size_t>(nz) * ny));
    return {lo.ix + ix, lo.iy + iy, lo.iz + iz};
  }
  bool contains(const VoxelKey& k) const {
    return k.ix >= lo.ix && k.iy >= lo.iy && k.iz >= lo.iz && k.ix < lo.ix + nx && k.iy < lo.iy + ny &&
           k.iz < lo.iz + nz;
  }
  Vec3 center(std::size_t index) const { return voxel_center(key(index), resolution); }

  bool operator==(const EvalGrid&) const = default;
};

/// 1 where the cell has been observed by the map.
using MappedMask = std::vector<std::uint8_t>;

struct QueryLabel {
  std::string name;
  std::vector<float> embedding;  // unit norm
};

struct QuerySet {
  std::vector<QueryLabel> labels;

  std::size_t size() const { return labels.size(); }
  int dim() const { return labels.empty() ? 0 : static_cast<int>(labels.front().embedding.size()); }
  /// Throws unless there is at least one label and all embeddings are unit norm within 1e-6.
  void validate() const;
  /// Normalizes every embedding in place.
  void normalize();
};

struct ClassifyParams {
  double prediction_thresh = 0.1;
  double denoise_thresh = 0.5;
  /// Cosine similarities are multiplied by this before the softmax.
  double logit_scale = 100.0;
};

/// Per-item label, or -1 for no prediction.
///
/// 1. cosine similarity between each feature and each label embedding;
/// 2. labels whose best softmax probability over the whole batch is below `denoise_thresh`
///    are suppressed everywhere;
/// 3. softmax over the surviving labels; predict the argmax (lowest index on ties) when its
///    probability exceeds `prediction_thresh`.
std::vector<int> classify(std::span<const std::vector<float>> features, const QuerySet& queries,
                          const ClassifyParams& params);

/// Per-class candidate region on an evaluation grid.
struct SearchVolumeGrid {
  EvalGrid grid;
  std::vector<float> counts;
  std::vector<std::uint8_t> selected;

  std::size_t volume() const;
};

/// Divides counts by their maximum in place and selects nonzero cells at or above `thresh`.
void finalize_search_volume(SearchVolumeGrid& v, double thresh);

struct RayEvidence {
  Vec3 origin;
  Vec3 dir;  // unit
};

/// Each ray stamps +1 into every unmapped cell whose center lies inside its infinite cone
/// (apex = origin, half-angle given); then normalized and thresholded.
SearchVolumeGrid build_search_volume_rays(std::span<const RayEvidence> rays, double cone_half_angle_deg,
                                          const EvalGrid& grid, const MappedMask& mapped, double thresh);

/// Each matched frontier stamps a ball at its origin, radius = distance to the nearest other
/// frontier (beta when alone); then normalized and thresholded.
SearchVolumeGrid build_search_volume_spherical(std::span<const std::size_t> matched, const FrontierSet& frontiers,
                                               const EvalGrid& grid, const MappedMask& mapped, double thresh);

/// The whole unmapped region.
SearchVolumeGrid search_volume_unconstrained(const EvalGrid& grid, const MappedMask& mapped);

}  // namespace semray
