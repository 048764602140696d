#include "semray/dataset_io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace semray {

namespace fs = std::filesystem;

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw DatasetError(DatasetError::Kind::MissingFile, "cannot open " + path.string() + " for writing");
  }
  void magic(const char (&m)[5]) { out_.write(m, 4); }
  template <typename T>
  void put(T v) {
    const T le = to_little(v);
    out_.write(reinterpret_cast<const char*>(&le), sizeof(T));
  }
  void floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    } else {
      for (float f : values) put(f);
    }
  }
  void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError(DatasetError::Kind::MissingFile, "missing file " + path.string());
    data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void expectMagic(const char (&m)[5]) {
    need(4);
    if (std::memcmp(data_.data() + pos_, m, 4) != 0) {
      throw DatasetError(DatasetError::Kind::BadMagic,
                         "bad magic in " + path_.string() + " (expected " + std::string(m, 4) + ")");
    }
    pos_ += 4;
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  void floats(std::span<float> out) {
    need(out.size_bytes());
    std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
    if constexpr (std::endian::native != std::endian::little) {
      for (float& f : out) f = to_little(f);
    }
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  const fs::path& path() const { return path_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DatasetError(DatasetError::Kind::Truncated, "truncated file " + path_.string());
  }

  fs::path path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

std::vector<double> read_ascii_doubles(const fs::path& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw DatasetError(DatasetError::Kind::MissingFile, "missing file " + path.string());
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw DatasetError(DatasetError::Kind::Malformed, "non-numeric content in " + path.string());
  if (values.size() != expected) {
    throw DatasetError(values.size() < expected ? DatasetError::Kind::Truncated : DatasetError::Kind::Malformed,
                       path.string() + ": expected " + std::to_string(expected) + " values, found " +
                           std::to_string(values.size()));
  }
  return values;
}

void write_ascii_doubles(const fs::path& path, std::span<const double> values, std::size_t per_line) {
  std::ofstream out(path);
  if (!out) throw DatasetError(DatasetError::Kind::MissingFile, "cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << values[i] << (((i + 1) % per_line == 0) ? '\n' : ' ');
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::uint32_t checked_dim(std::uint32_t v, const char* what, const fs::path& path) {
  if (v == 0 || v > (1u << 20)) {
    throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": implausible " + what + " " + std::to_string(v));
  }
  return v;
}

}  // namespace

void write_intrinsics(const fs::path& path, const CameraIntrinsics& intr) {
  const double v[6] = {intr.fx, intr.fy, intr.cx, intr.cy, static_cast<double>(intr.width),
                       static_cast<double>(intr.height)};
  write_ascii_doubles(path, v, 6);
}

CameraIntrinsics read_intrinsics(const fs::path& path) {
  const auto v = read_ascii_doubles(path, 6);
  CameraIntrinsics intr{v[0], v[1], v[2], v[3], static_cast<int>(v[4]), static_cast<int>(v[5])};
  try {
    intr.validate();
  } catch (const std::exception& e) {
    throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": " + e.what());
  }
  return intr;
}

void write_pose(const fs::path& path, const Pose& pose) {
  const auto m = pose.toMatrix();
  write_ascii_doubles(path, m, 4);
}

Pose read_pose(const fs::path& path) {
  const auto v = read_ascii_doubles(path, 16);
  try {
    return Pose::fromMatrix(std::span<const double, 16>(v.data(), 16));
  } catch (const std::exception& e) {
    throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": " + e.what());
  }
}

void write_depth(const fs::path& path, const DepthImage& depth) {
  BinaryWriter w(path);
  w.magic("RFD1");
  w.put(static_cast<std::uint32_t>(depth.height));
  w.put(static_cast<std::uint32_t>(depth.width));
  w.floats(depth.values);
  w.close();
}

DepthImage read_depth(const fs::path& path) {
  BinaryReader r(path);
  r.expectMagic("RFD1");
  const auto h = checked_dim(r.get<std::uint32_t>(), "height", path);
  const auto w = checked_dim(r.get<std::uint32_t>(), "width", path);
  DepthImage depth(static_cast<int>(h), static_cast<int>(w));
  r.floats(depth.values);
  if (r.remaining() != 0) throw DatasetError(DatasetError::Kind::Malformed, "trailing bytes in " + path.string());
  return depth;
}

void write_features(const fs::path& path, const FeatureImage& features) {
  BinaryWriter w(path);
  w.magic("RFF1");
  w.put(static_cast<std::uint32_t>(features.height));
  w.put(static_cast<std::uint32_t>(features.width));
  w.put(static_cast<std::uint32_t>(features.dim));
  w.floats(features.values);
  w.close();
}

FeatureImage read_features(const fs::path& path) {
  BinaryReader r(path);
  r.expectMagic("RFF1");
  const auto h = checked_dim(r.get<std::uint32_t>(), "height", path);
  const auto w = checked_dim(r.get<std::uint32_t>(), "width", path);
  const auto d = checked_dim(r.get<std::uint32_t>(), "feature dimension", path);
  FeatureImage features(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
  r.floats(features.values);
  if (r.remaining() != 0) throw DatasetError(DatasetError::Kind::Malformed, "trailing bytes in " + path.string());
  return features;
}

void write_queries(const fs::path& path, const QuerySet& queries) {
  queries.validate();
  BinaryWriter w(path);
  w.magic("RFQ1");
  w.put(static_cast<std::uint32_t>(queries.size()));
  w.put(static_cast<std::uint32_t>(queries.dim()));
  for (const auto& l : queries.labels) {
    w.put(static_cast<std::uint32_t>(l.name.size()));
    w.bytes(l.name);
    w.floats(l.embedding);
  }
  w.close();
}

QuerySet read_queries(const fs::path& path) {
  BinaryReader r(path);
  r.expectMagic("RFQ1");
  const auto count = checked_dim(r.get<std::uint32_t>(), "label count", path);
  const auto dim = checked_dim(r.get<std::uint32_t>(), "embedding dimension", path);
  QuerySet q;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    QueryLabel label;
    label.name = r.bytes(len);
    label.embedding.resize(dim);
    r.floats(label.embedding);
    q.labels.push_back(std::move(label));
  }
  try {
    q.validate();
  } catch (const std::exception& e) {
    throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": " + e.what());
  }
  return q;
}

void write_ground_truth(const fs::path& path, const GroundTruth& gt) {
  BinaryWriter w(path);
  w.magic("RFG1");
  w.put(static_cast<float>(gt.resolution()));
  w.put(static_cast<std::uint32_t>(gt.cells().size()));
  for (const auto& [k, c] : gt.cells()) {
    w.put(static_cast<std::int32_t>(k.ix));
    w.put(static_cast<std::int32_t>(k.iy));
    w.put(static_cast<std::int32_t>(k.iz));
    w.put(static_cast<std::uint32_t>(c));
  }
  w.close();
  const double b[6] = {gt.boundsMin().x(), gt.boundsMin().y(), gt.boundsMin().z(),
                       gt.boundsMax().x(), gt.boundsMax().y(), gt.boundsMax().z()};
  write_ascii_doubles(path.parent_path() / "bounds.txt", b, 6);
}

GroundTruth read_ground_truth(const fs::path& path) {
  BinaryReader r(path);
  r.expectMagic("RFG1");
  const double res = r.get<float>();
  if (!(res > 0.0)) throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": resolution must be > 0");
  const auto n = r.get<std::uint32_t>();
  std::map<VoxelKey, int> cells;
  for (std::uint32_t i = 0; i < n; ++i) {
    VoxelKey k;
    k.ix = r.get<std::int32_t>();
    k.iy = r.get<std::int32_t>();
    k.iz = r.get<std::int32_t>();
    cells[k] = static_cast<int>(r.get<std::uint32_t>());
  }
  if (r.remaining() != 0) throw DatasetError(DatasetError::Kind::Malformed, "trailing bytes in " + path.string());

  Vec3 lo, hi;
  const fs::path bounds = path.parent_path() / "bounds.txt";
  if (fs::exists(bounds)) {
    const auto b = read_ascii_doubles(bounds, 6);
    lo = Vec3(b[0], b[1], b[2]);
    hi = Vec3(b[3], b[4], b[5]);
  } else {
    if (cells.empty()) throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": no cells and no bounds");
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& [k, c] : cells) {
      lo = lo.cwiseMin(voxel_center(k, res) - Vec3::Constant(res / 2));
      hi = hi.cwiseMax(voxel_center(k, res) + Vec3::Constant(res / 2));
    }
  }
  try {
    return GroundTruth(res, lo, hi, std::move(cells));
  } catch (const std::invalid_argument& e) {
    throw DatasetError(DatasetError::Kind::Malformed, path.string() + ": " + e.what());
  }
}

std::string frame_stem(std::size_t index) {
  std::ostringstream s;
  s << std::setw(6) << std::setfill('0') << index;
  return s.str();
}

void write_frame(const fs::path& dir, const FrameRecord& frame) {
  const std::string stem = frame_stem(frame.index);
  write_pose(dir / (stem + ".pose"), frame.pose);
  write_depth(dir / (stem + ".depth"), frame.depth);
  write_features(dir / (stem + ".feat"), frame.features);
}

FrameStream::FrameStream(const fs::path& dir) : dir_(dir) {
  if (!fs::is_directory(dir)) throw DatasetError(DatasetError::Kind::MissingFile, "missing scene directory " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".pose") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    indices_.push_back(static_cast<std::size_t>(std::stoull(stem)));
  }
  std::sort(indices_.begin(), indices_.end());
  if (!indices_.empty()) intrinsics_ = read_intrinsics(dir / "intrinsics.txt");
}

FrameRecord FrameStream::read(std::size_t i) const {
  const std::size_t index = indices_.at(i);
  const std::string stem = frame_stem(index);
  try {
    FrameRecord f;
    f.index = index;
    f.intrinsics = intrinsics_;
    f.pose = read_pose(dir_ / (stem + ".pose"));
    f.depth = read_depth(dir_ / (stem + ".depth"));
    f.features = read_features(dir_ / (stem + ".feat"));
    if (f.depth.height != f.features.height || f.depth.width != f.features.width) {
      throw DatasetError(DatasetError::Kind::DimensionMismatch, "depth and feature sizes differ");
    }
    if (f.depth.height != intrinsics_.height || f.depth.width != intrinsics_.width) {
      throw DatasetError(DatasetError::Kind::DimensionMismatch, "image size does not match intrinsics");
    }
    return f;
  } catch (const DatasetError& e) {
    throw DatasetError(e.kind(), "frame " + std::to_string(index) + ": " + e.what(), index);
  }
}

std::vector<FrameRecord> read_frame_stream(const fs::path& dir) {
  FrameStream stream(dir);
  std::vector<FrameRecord> frames;
  frames.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) frames.push_back(stream.read(i));
  return frames;
}

std::optional<double> ray_box_entry(const Vec3& origin, const Vec3& dir, const Box& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t1 = (box.min[a] - origin[a]) / dir[a];
    double t2 = (box.max[a] - origin[a]) / dir[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || !(t_near > 0.0)) return std::nullopt;
  return t_near;
}

int SceneSpec::classCount() const {
  int n = num_classes;
  for (const auto& o : objects) n = std::max(n, o.class_id + 1);
  return std::max(n, 1);
}

void SceneSpec::validate() const {
  if (!((bounds_max - bounds_min).minCoeff() > 0.0)) throw std::invalid_argument("scene: empty bounds");
  if (!(gt_resolution > 0.0)) throw std::invalid_argument("scene: GT resolution must be > 0");
  if (!(depth_range >= 0.0)) throw std::invalid_argument("scene: depth_range must be >= 0");
  intrinsics.validate();
  if (feature_dim < classCount()) throw std::invalid_argument("scene: feature dimension smaller than class count");
  for (const auto& o : objects) {
    if (o.class_id < 1) throw std::invalid_argument("scene: object class ids start at 1");
    if ((o.min.array() < bounds_min.array()).any() || (o.max.array() > bounds_max.array()).any() ||
        (o.max.array() <= o.min.array()).any()) {
      throw std::invalid_argument("scene: object box outside bounds or empty");
    }
  }
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    for (const auto& o : objects) {
      if (o.containsOpen(trajectory[i].translation())) {
        throw std::invalid_argument("scene: trajectory pose " + std::to_string(i) + " lies inside an object");
      }
    }
  }
}

SyntheticScene generate_synthetic_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  const int classes = spec.classCount();
  const auto& intr = spec.intrinsics;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(spec.feature_noise));

  for (std::size_t f = 0; f < spec.trajectory.size(); ++f) {
    const Pose& pose = spec.trajectory[f];
    FrameRecord rec;
    rec.index = f;
    rec.pose = pose;
    rec.intrinsics = intr;
    rec.depth = DepthImage(intr.height, intr.width);
    rec.features = FeatureImage(intr.height, intr.width, spec.feature_dim);
    for (int row = 0; row < intr.height; ++row) {
      for (int col = 0; col < intr.width; ++col) {
        const Vec3 ray_cam = intr.pixelRay(col, row);  // z = 1, so t is camera-frame depth
        const Vec3 dir = pose.rotate(ray_cam);
        double best_t = std::numeric_limits<double>::infinity();
        int cls = 0;
        for (const auto& o : spec.objects) {
          if (auto t = ray_box_entry(pose.translation(), dir, o); t && *t < best_t) {
            best_t = *t;
            cls = o.class_id;
          }
        }
        if (std::isfinite(best_t) && best_t * ray_cam.norm() <= spec.depth_range) {
          rec.depth.at(row, col) = static_cast<float>(best_t);
        }
        auto px = rec.features.pixel(row, col);
        px[cls] = 1.0f;
        if (spec.feature_noise > 0.0) {
          for (float& v : px) v += noise(rng);
        }
      }
    }
    scene.frames.push_back(std::move(rec));
  }

  std::map<VoxelKey, int> cells;
  const double res = spec.gt_resolution;
  const VoxelKey lo = voxel_key(spec.bounds_min, res);
  const VoxelKey hi = voxel_key(spec.bounds_max, res);
  for (const auto& o : spec.objects) {
    const VoxelKey a = voxel_key(o.min, res);
    const VoxelKey b = voxel_key(o.max, res);
    for (int ix = std::max(a.ix, lo.ix); ix <= std::min(b.ix, hi.ix); ++ix)
      for (int iy = std::max(a.iy, lo.iy); iy <= std::min(b.iy, hi.iy); ++iy)
        for (int iz = std::max(a.iz, lo.iz); iz <= std::min(b.iz, hi.iz); ++iz) {
          const VoxelKey k{ix, iy, iz};
          const Vec3 c = voxel_center(k, res);
          if (o.containsClosed(c) && (c.array() < spec.bounds_max.array()).all()) cells.try_emplace(k, o.class_id);
        }
  }
  scene.gt = GroundTruth(res, spec.bounds_min, spec.bounds_max, std::move(cells));

  for (int c = 0; c < classes; ++c) {
    QueryLabel label;
    label.name = c == 0 ? "background" : "class_" + std::to_string(c);
    label.embedding.assign(spec.feature_dim, 0.0f);
    label.embedding[c] = 1.0f;
    scene.queries.labels.push_back(std::move(label));
  }
  return scene;
}

void write_scene(const fs::path& dir, const SyntheticScene& scene) {
  fs::create_directories(dir);
  if (!scene.frames.empty()) write_intrinsics(dir / "intrinsics.txt", scene.frames.front().intrinsics);
  for (const auto& f : scene.frames) write_frame(dir, f);
  write_queries(dir / "queries.bin", scene.queries);
  write_ground_truth(dir / "gt.bin", scene.gt);
}

SceneSpec beacon_hall_scene(double depth_range, int width, int height, int feature_dim, std::size_t frames) {
  SceneSpec s;
  s.bounds_min = Vec3(-2, -8, -2);
  s.bounds_max = Vec3(40, 8, 6);
  s.depth_range = depth_range;
  s.feature_dim = feature_dim;
  s.gt_resolution = 1.0;
  s.intrinsics = {width / 2.0, width / 2.0, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  // Hall interior x in [0, 20], y in [-3, 3], z in [0, 4]; open at x = 20.
  s.objects = {
      {{-1, -4, -1}, {20, 4, 0}, 1},   // floor
      {{-1, -4, 4}, {20, 4, 5}, 1},    // ceiling
      {{-1, 3, 0}, {20, 4, 4}, 1},     // left wall
      {{-1, -4, 0}, {20, -3, 4}, 1},   // right wall
      {{-1, -3, 0}, {0, 3, 4}, 1},     // back wall
      {{30, -6, -1}, {34, 6, 5}, 2},   // beacon beyond the opening
  };
  s.num_classes = 3;
  for (std::size_t i = 0; i < frames; ++i) {
    const double u = frames > 1 ? static_cast<double>(i) / static_cast<double>(frames - 1) : 0.0;
    const double x = 1.5 + 14.0 * u;
    const double y = 2.0 * std::sin(2.0 * kPi * 3.0 * u);
    const double z = 2.0 + 1.0 * std::sin(2.0 * kPi * 2.0 * u + 0.5);
    const Vec3 eye(x, y, z);
    s.trajectory.push_back(Pose::lookAt(eye, eye + Vec3(1.0, -0.3 * y / 2.0, 0.0)));
  }
  return s;
}

SceneSpec five_box_scene(int width, int height, int feature_dim, std::size_t frames, double resolution) {
  SceneSpec s;
  s.bounds_min = Vec3(-8, -8, -2);
  s.bounds_max = Vec3(8, 8, 6);
  s.depth_range = std::numeric_limits<double>::infinity();
  s.feature_dim = feature_dim;
  s.gt_resolution = resolution;
  s.intrinsics = {width / 2.0, width / 2.0, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  s.objects = {
      {{-4.0, -4.0, 0.0}, {-2.0, -2.0, 2.0}, 1},
      {{2.0, -4.0, 0.0}, {4.0, -2.5, 1.5}, 2},
      {{2.0, 2.0, 0.0}, {4.0, 4.0, 2.5}, 3},
      {{-4.0, 2.0, 0.0}, {-2.5, 4.0, 1.5}, 4},
      {{-1.0, -1.0, 1.0}, {1.0, 1.0, 3.0}, 5},
  };
  s.num_classes = 6;
  for (std::size_t i = 0; i < frames; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(frames);
    const double z = 3.5 + 1.0 * std::sin(3.0 * a);
    const Vec3 eye(6.5 * std::cos(a), 6.5 * std::sin(a), z);
    s.trajectory.push_back(Pose::lookAt(eye, Vec3(0, 0, 1.0)));
  }
  return s;
}

double FeatureCompressor::retainedVarianceRatio() const {
  return total_variance > 0.0 ? variances.sum() / total_variance : 1.0;
}

FeatureCompressor fit_compressor(const std::vector<std::vector<float>>& samples, int k) {
  if (samples.empty()) throw std::invalid_argument("fit_compressor: no samples");
  const int d = static_cast<int>(samples.front().size());
  if (k < 1 || k > d) throw std::invalid_argument("fit_compressor: K must lie in [1, D]");
  if (samples.size() <= static_cast<std::size_t>(k)) throw std::invalid_argument("fit_compressor: need more samples than K");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<int>(samples[i].size()) != d) throw std::invalid_argument("fit_compressor: inconsistent dimension");
    for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = samples[i][j];
  }
  FeatureCompressor c;
  c.mean = x.colwise().mean().transpose();
  x.rowwise() -= c.mean.transpose();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(samples.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_compressor: eigen decomposition failed");

  // Eigenvalues come out ascending; keep the last K reversed.
  c.basis.resize(d, k);
  c.variances.resize(k);
  const Eigen::VectorXd& ev = solver.eigenvalues();
  for (int i = 0; i < k; ++i) {
    c.basis.col(i) = solver.eigenvectors().col(d - 1 - i);
    c.variances(i) = std::max(0.0, ev(d - 1 - i));
  }
  c.total_variance = std::max(0.0, ev.sum());
  const double tiny = 1e-12 * std::max(1.0, ev(d - 1));
  c.degenerate = c.variances(k - 1) <= tiny;
  return c;
}

std::vector<float> compress(const FeatureCompressor& c, std::span<const float> f) {
  if (static_cast<int>(f.size()) != c.inputDim()) throw std::invalid_argument("compress: dimension mismatch");
  Eigen::VectorXd v(c.inputDim());
  for (int i = 0; i < c.inputDim(); ++i) v(i) = f[i] - c.mean(i);
  const Eigen::VectorXd z = c.basis.transpose() * v;
  std::vector<float> out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = static_cast<float>(z(i));
  return out;
}

std::vector<float> reconstruct(const FeatureCompressor& c, std::span<const float> z) {
  if (static_cast<int>(z.size()) != c.outputDim()) throw std::invalid_argument("reconstruct: dimension mismatch");
  Eigen::VectorXd zv(c.outputDim());
  for (int i = 0; i < c.outputDim(); ++i) zv(i) = z[i];
  const Eigen::VectorXd v = c.basis * zv + c.mean;
  std::vector<float> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v(i));
  return out;
}

FeatureImage compress_image(const FeatureCompressor& c, const FeatureImage& image) {
  if (image.dim != c.inputDim()) throw std::invalid_argument("compress_image: dimension mismatch");
  FeatureImage out(image.height, image.width, c.outputDim());
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  const Eigen::MatrixXf bt = c.basis.transpose().cast<float>();
  const Eigen::VectorXf mean = c.mean.cast<float>();
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = image.pixel(i);
    const Eigen::Map<const Eigen::VectorXf> fv(f.data(), image.dim);
    Eigen::Map<Eigen::VectorXf> z(out.values.data() + i * c.outputDim(), c.outputDim());
    z = bt * (fv - mean);
  }
  return out;
}

}  // namespace semray
