#pragma once

#include <map>
#include <span>
#include <vector>

#include "semray/geometry.hpp"
#include "semray/occupancy_grid.hpp"
#include "semray/query_engine.hpp"

namespace semray {

/// Labeled occupied cells of a scene on a dense evaluation grid.
class GroundTruth {
 public:
  GroundTruth() = default;
  /// `cells` maps occupied keys (at `resolution`) to class ids >= 0. Cells outside the bounds
  /// are rejected.
  GroundTruth(double resolution, const Vec3& bounds_min, const Vec3& bounds_max, std::map<VoxelKey, int> cells);

  double resolution() const { return grid_.resolution; }
  const EvalGrid& grid() const { return grid_; }
  const Vec3& boundsMin() const { return bounds_min_; }
  const Vec3& boundsMax() const { return bounds_max_; }
  const std::map<VoxelKey, int>& cells() const { return cells_; }
  /// Sorted distinct class ids.
  const std::vector<int>& classes() const { return classes_; }
  /// Dense label per grid cell, -1 where free.
  const std::vector<int>& labels() const { return dense_; }

 private:
  EvalGrid grid_;
  Vec3 bounds_min_ = Vec3::Zero();
  Vec3 bounds_max_ = Vec3::Zero();
  std::map<VoxelKey, int> cells_;
  std::vector<int> classes_;
  std::vector<int> dense_;
};

/// 1 for every grid cell whose center is not Unobserved in `occ`.
MappedMask compute_mapped_mask(const OccupancyGrid& occ, const EvalGrid& grid);

/// Fraction of the class's GT cells that are mapped (1 when the class has no cells).
double mapped_fraction(const GroundTruth& gt, int cls, const MappedMask& mapped);

struct SearchScores {
  double scv = 1.0;
  double recall = 1.0;
  double scvr = 1.0;
};

/// 1 - FP_unmapped / vol_unmapped; 1 when nothing is unmapped.
double scv(const SearchVolumeGrid& volume, const GroundTruth& gt, int cls, const MappedMask& mapped);
/// SCV times unmapped recall (recall 1 when the class has no unmapped cells).
double scvr(const SearchVolumeGrid& volume, const GroundTruth& gt, int cls, const MappedMask& mapped);
SearchScores search_scores(const SearchVolumeGrid& volume, const GroundTruth& gt, int cls, const MappedMask& mapped);

/// Per-class time series.
struct ClassSeries {
  int cls = 0;
  std::vector<double> t;
  std::vector<double> scv;
  std::vector<double> recall;
  std::vector<double> scvr;
  std::vector<double> mapped_fraction;
};

struct MetricSeries {
  std::map<int, ClassSeries> classes;
  std::vector<double> t;     // mIoU timestamps
  std::vector<double> miou;  // within-range mIoU per timestamp
};

/// Trapezoidal area under SCVR(t) divided by elapsed time, stopping at the first timestep whose
/// mapped fraction reaches 0.5. A single sample returns its value.
double scvr_auc(const ClassSeries& series);

/// Trapezoidal area under v(t) divided by elapsed time.
double miou_time_auc(std::span<const double> t, std::span<const double> miou);

/// Normalized trapezoid over samples [0, last]; throws unless `t` is strictly increasing.
double normalized_trapezoid(std::span<const double> t, std::span<const double> v, std::size_t last);

struct LabeledPoint {
  Vec3 position;
  int label = -1;  // -1 = no prediction
};

struct SegmentationScores {
  double miou = 0.0;
  double fmiou = 0.0;
  double acc = 0.0;
};

/// k nearest predictions of each query, ordered by distance then index.
std::vector<std::vector<std::size_t>> k_nearest(std::span<const LabeledPoint> points, std::span<const Vec3> queries,
                                                int k);

/// Majority label among neighbor indices ordered nearest first; count ties go to the label
/// seen first.
int majority_label(std::span<const LabeledPoint> points, std::span<const std::size_t> neighbors);

/// Each GT cell takes the majority label of its k nearest predictions; IoU per GT class.
/// Empty predictions score zero.
SegmentationScores segmentation_metrics(std::span<const LabeledPoint> predictions, const GroundTruth& gt, int k);

}  // namespace semray
