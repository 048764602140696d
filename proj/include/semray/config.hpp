#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "semray/sampling.hpp"

namespace semray {

// X(type, name, default) for every pipeline parameter.
#define SEMRAY_CONFIG_FIELDS(X)                                               \
  X(double, vox_size, 1.0)                                                    \
  X(int, fronti_neighborhood_r, 1)                                            \
  X(int, fronti_min_unobserved, 9)                                            \
  X(int, fronti_min_occupied, 0)                                              \
  X(int, fronti_min_empty, 4)                                                 \
  X(int, fronti_subsampling, 4)                                               \
  X(int, fronti_subsampling_min_fronti, 5)                                    \
  X(int, ray_erosion, 32)                                                     \
  X(bool, ray_tracing, true)                                                  \
  X(double, angle_bin_size, 30.0)                                             \
  X(int, max_occ_cnt, 100)                                                    \
  X(int, max_empty_cnt, -10)                                                  \
  X(int, occ_observ_weight, 100)                                              \
  X(double, occ_thickness, 2.0)                                               \
  X(int, occ_pruning_tolerance, 2)                                            \
  X(std::uint64_t, max_dirs_per_frame, 10000)                                 \
  X(std::uint64_t, max_pts_per_frame, kUnlimited)                             \
  X(std::uint64_t, max_empty_pts_per_frame, kUnlimited)                       \
  X(int, vox_accum_period, 8)                                                 \
  X(int, ray_accum_period, 8)                                                 \
  X(int, ray_accum_phase, 4)                                                  \
  X(int, stored_feat_dim, 768)                                                \
  X(int, sem_pruning_period, 32)                                              \
  X(int, occ_pruning_period, 32)                                              \
  X(double, prompt_denoising_thresh, 0.5)                                     \
  X(double, prediction_thresh, 0.1)                                           \
  X(double, searchvol_thresh, 0.05)                                           \
  X(double, depth_range, std::numeric_limits<double>::infinity())             \
  X(std::string, representation, "rayfronts")                                 \
  X(std::uint64_t, seed, 0)                                                   \
  X(int, eval_period, 0)                                                      \
  X(int, threads, 1)                                                          \
  X(double, cone_half_angle, 0.0)                                             \
  X(double, logit_scale, 100.0)                                               \
  X(int, knn_k, 5)                                                            \
  X(int, frame_skip, 1)

struct PipelineConfig {
#define SEMRAY_DECLARE_FIELD(type, name, def) type name = def;
  SEMRAY_CONFIG_FIELDS(SEMRAY_DECLARE_FIELD)
#undef SEMRAY_DECLARE_FIELD

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;

  /// eval_period, or vox_accum_period when unset.
  int evalPeriod() const { return eval_period > 0 ? eval_period : vox_accum_period; }
  /// cone_half_angle, or half the angle bin when unset.
  double coneHalfAngle() const { return cone_half_angle > 0.0 ? cone_half_angle : angle_bin_size / 2.0; }

  /// Sets one field from its text form. Throws std::invalid_argument for unknown keys or
  /// unparsable values. "inf" is accepted for floating and count fields.
  void set(const std::string& key, const std::string& value);
  /// Text form of one field.
  std::string get(const std::string& key) const;
  /// All field names in declaration order.
  static const std::vector<std::string>& keys();

  bool operator==(const PipelineConfig&) const = default;
};

/// Reads `key = value` lines; `#` starts a comment. Unknown keys are errors.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
void load_config(std::istream& in, PipelineConfig& cfg);
void save_config(std::ostream& out, const PipelineConfig& cfg);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace semray
