#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "semray/baselines.hpp"
#include "semray/config.hpp"
#include "semray/dataset_io.hpp"
#include "semray/evaluation.hpp"
#include "semray/frontiers.hpp"
#include "semray/occupancy_grid.hpp"
#include "semray/query_engine.hpp"
#include "semray/ray_frontiers.hpp"
#include "semray/semantic_voxel_map.hpp"

namespace semray {

enum class Representation { RayFronts, SemPoses, SemVoxels, SphericalFronts, UnidirectionalFronts };

Representation parse_representation(const std::string& name);
const char* to_string(Representation r);
const std::vector<Representation>& all_representations();

/// Wall-clock milliseconds per stage for one frame.
struct StageTimings {
  double semantic = 0.0;
  double occupancy = 0.0;
  double frontiers = 0.0;
  double rays = 0.0;
  double pruning = 0.0;
  double total = 0.0;

  double stageSum() const { return semantic + occupancy + frontiers + rays + pruning; }
};

/// Error raised while processing a frame, tagged with the frame index and stage.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::size_t frame, std::string stage, const std::string& what)
      : std::runtime_error("frame " + std::to_string(frame) + ", stage " + stage + ": " + what),
        frame_(frame),
        stage_(std::move(stage)) {}
  std::size_t frame() const { return frame_; }
  const std::string& stage() const { return stage_; }

 private:
  std::size_t frame_;
  std::string stage_;
};

/// Online mapper for one representation. Frames must be fed in order.
///
/// Per frame: semantic accumulation (fused every vox_accum_period frames), occupancy
/// integration, frontier update with ray propagation, ray observation (cast every
/// ray_accum_period frames at ray_accum_phase), semantic pruning every sem_pruning_period
/// frames and occupancy merging every occ_pruning_period frames.
class Mapper {
 public:
  Mapper(const PipelineConfig& cfg, Representation rep);

  /// `step` counts processed frames from zero and drives the periodic schedules.
  StageTimings process(const FrameRecord& frame, std::size_t step);

  /// Fuses buffered points and casts pending rays regardless of the schedules.
  void flush();

  Representation representation() const { return rep_; }
  const PipelineConfig& config() const { return cfg_; }
  const OccupancyGrid& occupancy() const { return occ_; }
  const SemanticVoxelMap* voxels() const { return voxels_ ? &*voxels_ : nullptr; }
  const RayFrontierMap* rays() const { return rays_ ? &*rays_ : nullptr; }
  const FrontierSet& frontiers() const { return frontiers_; }
  const SemPosesState& semPoses() const { return poses_; }
  const SemFrontsState& semFronts() const { return fronts_; }
  const FeatureCompressor* compressor() const { return compressor_ ? &*compressor_ : nullptr; }
  std::size_t pendingRays() const { return ray_buffer_.pending.size(); }

  /// Applies the feature compression fitted on the first frame, if any.
  QuerySet projectQueries(const QuerySet& q) const;

  bool depthSensing() const { return cfg_.depth_range > 0.0; }

 private:
  bool usesVoxels() const;
  bool usesRays() const;
  bool usesFronts() const;
  void castPending();

  PipelineConfig cfg_;
  Representation rep_;
  std::mt19937_64 rng_;
  OccupancyGrid occ_;
  std::optional<SemanticVoxelMap> voxels_;
  std::optional<LocalUpdateBuffer> voxel_buffer_;
  std::optional<RayFrontierMap> rays_;
  RayAccumulationBuffer ray_buffer_;
  FrontierSet frontiers_;
  SemPosesState poses_;
  SemFrontsState fronts_;
  std::optional<FeatureCompressor> compressor_;
  int dim_ = 0;
  std::uint64_t generation_ = 0;
};

/// Classified voxel cloud of a mapper (empty when it keeps no voxels).
std::vector<LabeledPoint> labeled_voxels(const Mapper& mapper, const QuerySet& queries, const ClassifyParams& params);

struct ClassScores {
  int cls = 0;
  SearchScores search;
  double mapped_fraction = 0.0;
};

/// Search-volume scores of every GT class for the mapper's current state.
std::vector<ClassScores> evaluate_search(const Mapper& mapper, const GroundTruth& gt, const QuerySet& queries);

ClassifyParams classify_params(const PipelineConfig& cfg);

struct RunReport {
  std::vector<StageTimings> frames;
  std::size_t semantic_voxels = 0;
  std::size_t ray_entries = 0;
  std::size_t occupancy_cells = 0;
  std::size_t occupancy_regions = 0;
  std::size_t frontiers = 0;
  std::vector<std::filesystem::path> outputs;

  double totalMs() const;
};

/// Maps a scene directory and writes voxels.ply, rays.txt, occupancy.txt and timings.csv.
RunReport run_mapping(const std::filesystem::path& scene, const PipelineConfig& cfg,
                      const std::filesystem::path& out_dir);

struct RepresentationResult {
  Representation rep;
  MetricSeries series;
  std::map<int, double> scvr_auc;  // per class
  double mean_scvr_auc = 0.0;
  double miou_auc = 0.0;
};

/// Runs each representation on its own mapper over the same frames and scores it every
/// evalPeriod() frames and after the last frame.
std::vector<RepresentationResult> online_benchmark(const std::vector<FrameRecord>& frames, const GroundTruth& gt,
                                                   const QuerySet& queries, const PipelineConfig& cfg,
                                                   const std::vector<Representation>& reps);

/// `<rep>_metrics.csv` per representation plus summary.csv.
std::vector<std::filesystem::path> write_online_csv(const std::vector<RepresentationResult>& results,
                                                    const std::filesystem::path& out_dir);

std::vector<RepresentationResult> run_online_benchmark(const std::filesystem::path& scene, const PipelineConfig& cfg,
                                                       const std::vector<Representation>& reps,
                                                       const std::filesystem::path& out_dir);

struct OfflineResult {
  SegmentationScores scores;
  int k = 5;
  int frame_skip = 1;
  std::size_t frames_used = 0;
  std::size_t voxels = 0;
};

OfflineResult offline_eval(const std::vector<FrameRecord>& frames, const GroundTruth& gt, const QuerySet& queries,
                           const PipelineConfig& cfg);

/// Writes offline_metrics.csv.
OfflineResult run_offline_eval(const std::filesystem::path& scene, const PipelineConfig& cfg,
                               const std::filesystem::path& out_dir);

}  // namespace semray
