#include "semray/baselines.hpp"

namespace semray {

void sem_poses_update(SemPosesState& state, const Pose& pose, const FeatureImage& features) {
  SemPoseEntry e;
  e.origin = pose.translation();
  e.dir = pose.rotate(Vec3::UnitZ()).normalized();
  std::vector<double> sum(features.dim, 0.0);
  const std::size_t n = static_cast<std::size_t>(features.height) * features.width;
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = features.pixel(i);
    for (int d = 0; d < features.dim; ++d) sum[d] += f[d];
  }
  e.feature.resize(features.dim);
  for (int d = 0; d < features.dim; ++d) e.feature[d] = n ? static_cast<float>(sum[d] / n) : 0.0f;
  state.entries.push_back(std::move(e));
}

void sem_fronts_update(SemFrontsState& state, const std::vector<LocalRay>& rays, const FrontierSet& frontiers,
                       const AssociationParams& params, const OccupancyGrid& grid) {
  if (!rays.empty() && !frontiers.empty()) {
    const auto results = associate_rays(rays, frontiers, params, &grid);
    struct Sum {
      std::vector<double> feature;
      double weight = 0.0;
    };
    std::map<VoxelKey, Sum> sums;
    for (const auto& r : results) {
      if (!r.assigned) continue;
      const LocalRay& ray = rays[r.ray_index];
      const double w = ray.weight * (1.0 - r.d_cost);
      if (!(w > 0.0)) continue;
      Sum& s = sums[r.frontier_key];
      if (s.feature.empty()) s.feature.assign(ray.feature.size(), 0.0);
      for (std::size_t d = 0; d < ray.feature.size(); ++d) s.feature[d] += w * ray.feature[d];
      s.weight += w;
    }
    for (auto& [key, s] : sums) {
      auto [it, inserted] = state.entries.try_emplace(key);
      SemFrontierEntry& e = it->second;
      if (inserted) {
        e.origin = voxel_center(key, frontiers.beta());
        e.feature.assign(s.feature.size(), 0.0f);
      }
      const double total = e.weight + s.weight;
      for (std::size_t d = 0; d < s.feature.size(); ++d) {
        e.feature[d] = static_cast<float>((e.weight * e.feature[d] + s.feature[d]) / total);
      }
      e.weight = total;
    }
  }
  if (state.variant == SemFrontVariant::Unidirectional) sem_fronts_refresh_directions(state, grid);
}

void sem_fronts_prune(SemFrontsState& state, const std::vector<VoxelKey>& removed) {
  for (const auto& k : removed) state.entries.erase(k);
}

void sem_fronts_refresh_directions(SemFrontsState& state, const OccupancyGrid& grid) {
  if (state.variant != SemFrontVariant::Unidirectional) return;
  for (auto& [key, e] : state.entries) e.dir = infer_frontier_direction(grid, e.origin);
}

Vec3 infer_frontier_direction(const OccupancyGrid& grid, const Vec3& frontier_origin) {
  const VoxelKey center = voxel_key(frontier_origin, grid.resolution());
  Vec3 sum = Vec3::Zero();
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dz = -1; dz <= 1; ++dz) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Vec3 offset = Vec3(dx, dy, dz).normalized();
        const double w = grid.classify(center + VoxelKey{dx, dy, dz}) == OccupancyClass::Unobserved ? 1.0 : -1.0;
        sum += w * offset;
      }
    }
  }
  if (sum.norm() < 1e-9) return Vec3::UnitZ();
  return sum.normalized();
}

}  // namespace semray
