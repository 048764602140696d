#include "semray/occupancy_grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <tuple>

namespace semray {

const char* to_string(OccupancyClass c) {
  switch (c) {
    case OccupancyClass::Unobserved: return "unobserved";
    case OccupancyClass::Free: return "free";
    case OccupancyClass::Occupied: return "occupied";
  }
  return "?";
}

OccupancyGrid::OccupancyGrid(double resolution, LogOddsLimits limits)
    : resolution_(resolution), limits_(limits) {
  if (!(resolution > 0.0)) throw std::invalid_argument("OccupancyGrid: resolution must be > 0");
  if (limits.min_log_odds >= 0 || limits.max_log_odds < 0 || limits.min_log_odds < -128 ||
      limits.max_log_odds > 127) {
    throw std::invalid_argument("OccupancyGrid: log-odds limits must satisfy -128 <= min < 0 <= max <= 127");
  }
}

std::optional<std::int8_t> OccupancyGrid::logOdds(const VoxelKey& fine) const {
  if (auto it = cells_.find(fine); it != cells_.end()) return it->second;
  for (int level = 1; level <= max_level_; ++level) {
    const auto& regions = regions_[level - 1];
    if (regions.empty()) continue;
    if (auto it = regions.find(coarsen(fine, 1 << level)); it != regions.end()) return it->second;
  }
  return std::nullopt;
}

std::optional<int> OccupancyGrid::levelOf(const VoxelKey& fine) const {
  if (cells_.contains(fine)) return 0;
  for (int level = 1; level <= max_level_; ++level) {
    const auto& regions = regions_[level - 1];
    if (!regions.empty() && regions.contains(coarsen(fine, 1 << level))) return level;
  }
  return std::nullopt;
}

double OccupancyGrid::probability(std::int8_t log_odds) {
  return 1.0 / (1.0 + std::exp(-static_cast<double>(log_odds)));
}

std::int8_t OccupancyGrid::clamp(int v) const {
  return static_cast<std::int8_t>(std::clamp(v, limits_.min_log_odds, limits_.max_log_odds));
}

void OccupancyGrid::expandRegion(int level, const VoxelKey& coarse, std::int8_t value) {
  const std::int32_t side = 1 << level;
  const VoxelKey base{coarse.ix * side, coarse.iy * side, coarse.iz * side};
  for (std::int32_t dx = 0; dx < side; ++dx)
    for (std::int32_t dy = 0; dy < side; ++dy)
      for (std::int32_t dz = 0; dz < side; ++dz) cells_[base + VoxelKey{dx, dy, dz}] = value;
}

bool OccupancyGrid::splitCovering(const VoxelKey& fine) {
  for (int level = 1; level <= max_level_; ++level) {
    auto& regions = regions_[level - 1];
    if (regions.empty()) continue;
    const VoxelKey coarse = coarsen(fine, 1 << level);
    if (auto it = regions.find(coarse); it != regions.end()) {
      const std::int8_t value = it->second;
      regions.erase(it);
      expandRegion(level, coarse, value);
      return true;
    }
  }
  return false;
}

void OccupancyGrid::update(const VoxelKey& fine, int delta) {
  auto it = cells_.find(fine);
  if (it == cells_.end()) {
    splitCovering(fine);
    it = cells_.try_emplace(fine, std::int8_t{0}).first;
  }
  it->second = clamp(static_cast<int>(it->second) + delta);
}

std::size_t OccupancyGrid::regionCount() const {
  std::size_t n = 0;
  for (const auto& r : regions_) n += r.size();
  return n;
}

namespace {

struct BlockStats {
  int count = 0;
  int min = 127;
  int max = -128;
  int sum = 0;
};

}  // namespace

std::size_t OccupancyGrid::pruneMerge(int tolerance) {
  std::size_t merged_total = 0;
  for (int level = 1; level <= kMaxLevel; ++level) {
    if (static_cast<int>(regions_.size()) < level) regions_.resize(level);
    auto& child_map = level == 1 ? cells_ : regions_[level - 2];
    const auto& children = child_map;
    if (children.size() < 8) break;

    std::unordered_map<VoxelKey, BlockStats> blocks;
    blocks.reserve(children.size() / 4);
    for (const auto& [key, value] : children) {
      auto& b = blocks[coarsen(key, 2)];
      ++b.count;
      b.min = std::min<int>(b.min, value);
      b.max = std::max<int>(b.max, value);
      b.sum += value;
    }

    std::vector<std::pair<VoxelKey, std::int8_t>> merges;
    for (const auto& [parent, b] : blocks) {
      if (b.count != 8 || b.max - b.min > tolerance) continue;
      const bool same_class = b.min >= 0 || b.max < 0;
      if (!same_class) continue;
      merges.emplace_back(parent, clamp(static_cast<int>(std::lround(b.sum / 8.0))));
    }
    if (merges.empty()) break;

    for (const auto& [parent, value] : merges) {
      for (std::int32_t dx = 0; dx < 2; ++dx)
        for (std::int32_t dy = 0; dy < 2; ++dy)
          for (std::int32_t dz = 0; dz < 2; ++dz)
            child_map.erase(VoxelKey{parent.ix * 2 + dx, parent.iy * 2 + dy, parent.iz * 2 + dz});
      regions_[level - 1].emplace(parent, value);
    }
    max_level_ = std::max(max_level_, level);
    merged_total += merges.size();
  }
  return merged_total;
}

void OccupancyGrid::forEachFree(const std::function<void(const VoxelKey&, int)>& fn) const {
  for (const auto& [key, value] : cells_) {
    if (value < 0) fn(key, 0);
  }
  for (int level = 1; level <= max_level_; ++level) {
    const std::int32_t side = 1 << level;
    for (const auto& [coarse, value] : regions_[level - 1]) {
      if (value >= 0) continue;
      const VoxelKey base{coarse.ix * side, coarse.iy * side, coarse.iz * side};
      for (std::int32_t dx = 0; dx < side; ++dx)
        for (std::int32_t dy = 0; dy < side; ++dy)
          for (std::int32_t dz = 0; dz < side; ++dz) fn(base + VoxelKey{dx, dy, dz}, level);
    }
  }
}

std::vector<VoxelKey> OccupancyGrid::freeCells() const {
  std::vector<VoxelKey> out;
  forEachFree([&](const VoxelKey& k, int) { out.push_back(k); });
  std::sort(out.begin(), out.end());
  return out;
}

void OccupancyGrid::forEachStored(const std::function<void(const VoxelKey&, int, std::int8_t)>& fn) const {
  for (const auto& [key, value] : cells_) fn(key, 0, value);
  for (int level = 1; level <= max_level_; ++level) {
    for (const auto& [key, value] : regions_[level - 1]) fn(key, level, value);
  }
}

void OccupancyGrid::dump(std::ostream& os) const {
  std::vector<std::tuple<std::int32_t, std::int32_t, std::int32_t, int, int>> rows;
  rows.reserve(cells_.size() + regionCount());
  forEachStored([&](const VoxelKey& k, int level, std::int8_t v) {
    rows.emplace_back(k.ix, k.iy, k.iz, level, static_cast<int>(v));
  });
  std::sort(rows.begin(), rows.end());
  for (const auto& [x, y, z, level, v] : rows) {
    os << x << ' ' << y << ' ' << z << ' ' << level << ' ' << v << '\n';
  }
}

FrustumClassification classify_frustum(const Pose& pose, const CameraIntrinsics& intr,
                                       const DepthImage& depth, double resolution,
                                       double occ_thickness) {
  FrustumClassification out;
  float max_depth = 0.0f;
  for (float d : depth.values) {
    if (std::isfinite(d)) max_depth = std::max(max_depth, d);
  }
  if (max_depth <= 0.0f) return out;

  const double band = occ_thickness * resolution;
  const double far = max_depth + band;

  // Bounding box of the frustum pyramid: camera center plus the four far image corners.
  Vec3 lo = pose.translation();
  Vec3 hi = pose.translation();
  const double us[2] = {-0.5, intr.width - 0.5};
  const double vs[2] = {-0.5, intr.height - 0.5};
  for (double u : us) {
    for (double v : vs) {
      const Vec3 corner = pose.transform(intr.pixelRay(u, v) * far);
      lo = lo.cwiseMin(corner);
      hi = hi.cwiseMax(corner);
    }
  }
  const VoxelKey klo = voxel_key(lo, resolution);
  const VoxelKey khi = voxel_key(hi, resolution);

  for (std::int32_t ix = klo.ix; ix <= khi.ix; ++ix) {
    for (std::int32_t iy = klo.iy; iy <= khi.iy; ++iy) {
      for (std::int32_t iz = klo.iz; iz <= khi.iz; ++iz) {
        const VoxelKey key{ix, iy, iz};
        const Vec3 p_cam = pose.inverseTransform(voxel_center(key, resolution));
        const double z = p_cam.z();
        if (!(z > 0.0)) continue;
        const double u = intr.fx * p_cam.x() / z + intr.cx;
        const double v = intr.fy * p_cam.y() / z + intr.cy;
        const double col = std::floor(u + 0.5);
        const double row = std::floor(v + 0.5);
        if (col < 0.0 || row < 0.0 || col >= intr.width || row >= intr.height) continue;
        const std::size_t pixel = static_cast<std::size_t>(row) * intr.width + static_cast<std::size_t>(col);
        const double d = depth.values[pixel];
        if (!std::isfinite(d)) continue;
        if (std::abs(z - d) <= band / 2.0) {
          out.occupied.push_back({key, pixel, z});
        } else if (z < d - band) {
          out.free.push_back({key, pixel, z});
        }
      }
    }
  }
  return out;
}

IntegrationStats integrate_depth_frame(OccupancyGrid& grid, const Pose& pose,
                                       const CameraIntrinsics& intr, const DepthImage& depth,
                                       const OccupancyIntegrationParams& params, std::mt19937_64& rng) {
  if (depth.height != intr.height || depth.width != intr.width) {
    throw std::invalid_argument("integrate_depth_frame: depth size does not match intrinsics");
  }
  auto cls = classify_frustum(pose, intr, depth, grid.resolution(), params.occ_thickness);
  subsample_in_place(cls.occupied, params.max_pts, rng);
  subsample_in_place(cls.free, params.max_empty_pts, rng);
  for (const auto& c : cls.occupied) grid.markOccupied(c.key, params.occ_observ_weight);
  for (const auto& c : cls.free) grid.markFree(c.key);
  return {cls.occupied.size(), cls.free.size()};
}

void traverse_cells(double resolution, const Vec3& origin, const Vec3& dir, double max_dist,
                    const std::function<bool(const VoxelKey&, double)>& visit) {
  const VoxelKey start = voxel_key(origin, resolution);
  std::array<std::int32_t, 3> cell{start.ix, start.iy, start.iz};
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  const double inf = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((cell[a] + 1) * resolution - origin[a]) / dir[a];
      t_delta[a] = resolution / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (cell[a] * resolution - origin[a]) / dir[a];
      t_delta[a] = -resolution / dir[a];
    } else {
      t_max[a] = inf;
      t_delta[a] = inf;
    }
  }

  double t_entry = 0.0;
  while (visit(VoxelKey{cell[0], cell[1], cell[2]}, t_entry)) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    t_entry = t_max[axis];
    if (!(t_entry <= max_dist)) return;
    cell[axis] += step[axis];
    t_max[axis] += t_delta[axis];
  }
}

RaycastResult raycast(const OccupancyGrid& grid, const Vec3& origin, const Vec3& dir, double max_dist) {
  if (!(max_dist > 0.0)) throw std::invalid_argument("raycast: max_dist must be > 0");
  if (std::abs(dir.norm() - 1.0) > 1e-6) throw std::invalid_argument("raycast: direction must be unit length");
  RaycastResult result;
  traverse_cells(grid.resolution(), origin, dir, max_dist, [&](const VoxelKey& k, double t) {
    const OccupancyClass c = grid.classify(k);
    if (c == OccupancyClass::Free) return true;
    result = {c, origin + t * dir, k, t};
    return false;
  });
  return result;
}

}  // namespace semray
