#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semray/evaluation.hpp"
#include "semray/geometry.hpp"
#include "semray/query_engine.hpp"

namespace semray {

struct FrameRecord {
  std::size_t index = 0;
  Pose pose;
  CameraIntrinsics intrinsics;
  DepthImage depth;
  FeatureImage features;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, BadMagic, DimensionMismatch, Truncated, Malformed };

  DatasetError(Kind kind, const std::string& what, std::optional<std::size_t> frame = std::nullopt)
      : std::runtime_error(what), kind_(kind), frame_(frame) {}

  Kind kind() const { return kind_; }
  std::optional<std::size_t> frame() const { return frame_; }

 private:
  Kind kind_;
  std::optional<std::size_t> frame_;
};

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& intr);
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);

/// 16 ASCII floats, row-major world-from-camera.
void write_pose(const std::filesystem::path& path, const Pose& pose);
Pose read_pose(const std::filesystem::path& path);

void write_depth(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth(const std::filesystem::path& path);

void write_features(const std::filesystem::path& path, const FeatureImage& features);
FeatureImage read_features(const std::filesystem::path& path);

void write_queries(const std::filesystem::path& path, const QuerySet& queries);
QuerySet read_queries(const std::filesystem::path& path);

/// gt.bin plus a bounds.txt (6 ASCII floats: min then max) in the same directory.
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
/// Uses bounds.txt next to `path` when present, otherwise the labeled cells' bounding box.
GroundTruth read_ground_truth(const std::filesystem::path& path);

/// `NNNNNN` zero-padded frame stem.
std::string frame_stem(std::size_t index);

void write_frame(const std::filesystem::path& dir, const FrameRecord& frame);

/// Lazily reads frames from a scene directory in index order.
class FrameStream {
 public:
  /// An empty or frame-less directory yields an empty stream; a missing directory throws.
  explicit FrameStream(const std::filesystem::path& dir);

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const std::vector<std::size_t>& indices() const { return indices_; }

  /// Reads the i-th frame of the stream. Errors carry the frame index.
  FrameRecord read(std::size_t i) const;

 private:
  std::filesystem::path dir_;
  CameraIntrinsics intrinsics_;
  std::vector<std::size_t> indices_;
};

std::vector<FrameRecord> read_frame_stream(const std::filesystem::path& dir);

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  int class_id = 1;

  bool containsClosed(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool containsOpen(const Vec3& p) const {
    return (p.array() > min.array()).all() && (p.array() < max.array()).all();
  }
};

/// Entry parameter t > 0 of o + t d into the box, if the ray hits it from outside.
std::optional<double> ray_box_entry(const Vec3& origin, const Vec3& dir, const Box& box);

struct SceneSpec {
  Vec3 bounds_min = Vec3::Zero();
  Vec3 bounds_max = Vec3::Zero();
  std::vector<Box> objects;
  std::vector<Pose> trajectory;
  CameraIntrinsics intrinsics;
  double depth_range = std::numeric_limits<double>::infinity();
  int feature_dim = 8;
  std::uint64_t seed = 0;
  double gt_resolution = 1.0;
  int num_classes = 0;         // background (0) plus objects; 0 = derive from objects
  double feature_noise = 0.0;  // stddev of Gaussian noise added to one-hot features

  /// Throws on empty bounds, objects outside bounds, D < class count or poses inside objects.
  void validate() const;
  int classCount() const;
};

struct SyntheticScene {
  std::vector<FrameRecord> frames;
  GroundTruth gt;
  QuerySet queries;  // one unit one-hot label per class, background included
};

/// Renders each pose by exact ray-box intersection. Hits farther than depth_range (Euclidean)
/// get infinite depth but keep their class feature; misses carry the background class 0.
SyntheticScene generate_synthetic_scene(const SceneSpec& spec);

void write_scene(const std::filesystem::path& dir, const SyntheticScene& scene);

/// Ceilinged hall open at its far end with an out-of-range beacon visible off-axis through the
/// opening. Classes: 1 = walls, 2 = beacon.
SceneSpec beacon_hall_scene(double depth_range, int width = 80, int height = 60, int feature_dim = 8,
                            std::size_t frames = 48);

/// Five separated boxes of classes 1..5 observed by a camera orbiting the scene center.
SceneSpec five_box_scene(int width = 96, int height = 72, int feature_dim = 8, std::size_t frames = 60,
                         double resolution = 0.25);

/// Principal-component feature compression.
struct FeatureCompressor {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;  // D x K, orthonormal columns, decreasing variance
  Eigen::VectorXd variances;  // eigenvalues of the retained components
  double total_variance = 0.0;
  bool degenerate = false;  // fewer than K non-negligible components

  int inputDim() const { return static_cast<int>(mean.size()); }
  int outputDim() const { return static_cast<int>(basis.cols()); }
  double retainedVarianceRatio() const;
};

/// Requires more samples than `k` and 1 <= k <= D.
FeatureCompressor fit_compressor(const std::vector<std::vector<float>>& samples, int k);
std::vector<float> compress(const FeatureCompressor& c, std::span<const float> f);
std::vector<float> reconstruct(const FeatureCompressor& c, std::span<const float> z);

/// Compresses every pixel of a feature image.
FeatureImage compress_image(const FeatureCompressor& c, const FeatureImage& image);

}  // namespace semray
