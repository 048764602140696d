#include "semray/semantic_voxel_map.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace semray {

void LocalUpdateBuffer::push(const Vec3& p, const Eigen::Vector3f& color, std::span<const float> f,
                             double hits) {
  if (static_cast<int>(f.size()) != dim) throw std::invalid_argument("LocalUpdateBuffer: feature dimension mismatch");
  positions.push_back(p);
  rgb.push_back(color);
  features.insert(features.end(), f.begin(), f.end());
  hit_counts.push_back(hits);
}

void LocalUpdateBuffer::clear() {
  positions.clear();
  rgb.clear();
  features.clear();
  hit_counts.clear();
  frames_accumulated = 0;
}

void accumulate_frame(LocalUpdateBuffer& buf, const Pose& pose, const CameraIntrinsics& intr,
                      const DepthImage& depth, const FeatureImage& features, double resolution,
                      double occ_thickness, std::uint64_t max_pts_per_frame, std::mt19937_64& rng,
                      std::span<const float> rgb) {
  if (depth.height != features.height || depth.width != features.width) {
    throw std::invalid_argument("accumulate_frame: depth and feature images differ in size");
  }
  if (depth.height != intr.height || depth.width != intr.width) {
    throw std::invalid_argument("accumulate_frame: depth size does not match intrinsics");
  }
  if (features.dim != buf.dim) throw std::invalid_argument("accumulate_frame: feature dimension mismatch");
  if (!rgb.empty() && rgb.size() != depth.size() * 3) {
    throw std::invalid_argument("accumulate_frame: rgb image size mismatch");
  }

  auto cls = classify_frustum(pose, intr, depth, resolution, occ_thickness);
  subsample_in_place(cls.occupied, max_pts_per_frame, rng);
  for (const auto& cell : cls.occupied) {
    Eigen::Vector3f color = Eigen::Vector3f::Zero();
    if (!rgb.empty()) color = Eigen::Vector3f(rgb[cell.pixel * 3], rgb[cell.pixel * 3 + 1], rgb[cell.pixel * 3 + 2]);
    buf.push(voxel_center(cell.key, resolution), color, features.pixel(cell.pixel));
  }
  ++buf.frames_accumulated;
}

SemanticVoxelMap::SemanticVoxelMap(double resolution, int dim) : resolution_(resolution), dim_(dim) {
  if (!(resolution > 0.0)) throw std::invalid_argument("SemanticVoxelMap: resolution must be > 0");
  if (dim < 1) throw std::invalid_argument("SemanticVoxelMap: feature dimension must be >= 1");
}

const SemanticVoxel* SemanticVoxelMap::find(const VoxelKey& k) const {
  auto it = voxels_.find(k);
  return it == voxels_.end() ? nullptr : &it->second;
}

std::vector<VoxelKey> SemanticVoxelMap::sortedKeys() const {
  std::vector<VoxelKey> keys;
  keys.reserve(voxels_.size());
  for (const auto& [k, v] : voxels_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

double SemanticVoxelMap::totalHitCount() const {
  double total = 0.0;
  for (const auto& [k, v] : voxels_) total += v.hit_count;
  return total;
}

void SemanticVoxelMap::insert(const VoxelKey& k, SemanticVoxel v) {
  if (static_cast<int>(v.feature.size()) != dim_) throw std::invalid_argument("SemanticVoxelMap: feature dimension mismatch");
  if (!(v.hit_count > 0.0)) throw std::invalid_argument("SemanticVoxelMap: hit count must be > 0");
  voxels_[k] = std::move(v);
}

namespace {

struct WeightedSum {
  std::vector<double> feature;
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  double weight = 0.0;
};

}  // namespace

void SemanticVoxelMap::fuse(const LocalUpdateBuffer& buf) {
  if (buf.empty()) return;
  if (buf.dim != dim_) throw std::invalid_argument("fuse: buffer feature dimension mismatch");

  std::unordered_map<VoxelKey, WeightedSum> sums;
  sums.reserve(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const VoxelKey key = voxel_key(buf.positions[i], resolution_);
    auto [it, inserted] = sums.try_emplace(key);
    WeightedSum& s = it->second;
    if (inserted) {
      s.feature.assign(dim_, 0.0);
      if (const auto* existing = find(key)) {
        const double w = existing->hit_count;
        for (int d = 0; d < dim_; ++d) s.feature[d] = w * existing->feature[d];
        s.rgb = w * existing->rgb.cast<double>();
        s.weight = w;
      }
    }
    const double w = buf.hit_counts[i];
    const auto f = buf.feature(i);
    for (int d = 0; d < dim_; ++d) s.feature[d] += w * f[d];
    s.rgb += w * buf.rgb[i].cast<double>();
    s.weight += w;
  }

  for (auto& [key, s] : sums) {
    SemanticVoxel& v = voxels_[key];
    v.feature.resize(dim_);
    for (int d = 0; d < dim_; ++d) v.feature[d] = static_cast<float>(s.feature[d] / s.weight);
    v.rgb = (s.rgb / s.weight).cast<float>();
    v.hit_count = s.weight;
  }
}

std::size_t SemanticVoxelMap::pruneWithOccupancy(const OccupancyGrid& grid) {
  return std::erase_if(voxels_, [&](const auto& kv) {
    return grid.query(voxel_center(kv.first, resolution_)) == OccupancyClass::Free;
  });
}

void export_point_cloud(const SemanticVoxelMap& map, const std::filesystem::path& path,
                        std::span<const int> labels) {
  const auto keys = map.sortedKeys();
  if (!labels.empty() && labels.size() != keys.size()) {
    throw std::invalid_argument("export_point_cloud: label count does not match voxel count");
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("export_point_cloud: cannot open " + path.string());
  os << "ply\nformat ascii 1.0\n"
     << "element vertex " << keys.size() << '\n'
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "property float hit_count\nproperty int class_id\nend_header\n";
  os << std::setprecision(9);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const Vec3 c = voxel_center(keys[i], map.resolution());
    const SemanticVoxel& v = *map.find(keys[i]);
    auto to_byte = [](float x) { return static_cast<int>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f)); };
    os << c.x() << ' ' << c.y() << ' ' << c.z() << ' ' << to_byte(v.rgb.x()) << ' ' << to_byte(v.rgb.y()) << ' '
       << to_byte(v.rgb.z()) << ' ' << v.hit_count << ' ' << (labels.empty() ? -1 : labels[i]) << '\n';
  }
  if (!os) throw std::runtime_error("export_point_cloud: write failed for " + path.string());
}

std::vector<PointRecord> read_point_cloud(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_point_cloud: cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(is, line)) {
    if (line.rfind("element vertex", 0) == 0) count = std::stoull(line.substr(15));
    if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw std::runtime_error("read_point_cloud: missing PLY header in " + path.string());
  std::vector<PointRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double x, y, z, hits;
    int r, g, b, cls;
    if (!(is >> x >> y >> z >> r >> g >> b >> hits >> cls)) {
      throw std::runtime_error("read_point_cloud: truncated vertex list in " + path.string());
    }
    out.push_back({Vec3(x, y, z), Eigen::Vector3f(r / 255.0f, g / 255.0f, b / 255.0f), hits, cls});
  }
  return out;
}

}  // namespace semray
