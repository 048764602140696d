#include "semray/ray_frontiers.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace semray {

std::vector<std::uint8_t> eroded_out_of_range_mask(const DepthImage& depth, int erosion_half_window,
                                                   double max_range) {
  const int h = depth.height;
  const int w = depth.width;
  std::vector<std::uint8_t> mask(depth.size(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const float d = depth.values[i];
    mask[i] = (!std::isfinite(d) || d > max_range) ? 1 : 0;
  }
  if (erosion_half_window <= 0) return mask;

  // Integral image of in-range pixels; a pixel survives when its clipped window has none.
  std::vector<std::int32_t> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0);
  auto at = [&](int r, int c) -> std::int32_t& { return integral[static_cast<std::size_t>(r) * (w + 1) + c]; };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int in_range = mask[static_cast<std::size_t>(r) * w + c] ? 0 : 1;
      at(r + 1, c + 1) = in_range + at(r, c + 1) + at(r + 1, c) - at(r, c);
    }
  }
  std::vector<std::uint8_t> out(mask.size(), 0);
  const int k = erosion_half_window;
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(0, r - k), r1 = std::min(h, r + k + 1);
    for (int c = 0; c < w; ++c) {
      if (!mask[static_cast<std::size_t>(r) * w + c]) continue;
      const int c0 = std::max(0, c - k), c1 = std::min(w, c + k + 1);
      const int in_range = at(r1, c1) - at(r0, c1) - at(r1, c0) + at(r0, c0);
      out[static_cast<std::size_t>(r) * w + c] = in_range == 0 ? 1 : 0;
    }
  }
  return out;
}

std::vector<LocalRay> observe_out_of_range(const Pose& pose, const CameraIntrinsics& intr,
                                           const DepthImage& depth, const FeatureImage& features,
                                           int erosion_half_window, std::uint64_t max_dirs_per_frame,
                                           std::mt19937_64& rng, double max_range) {
  if (depth.height != features.height || depth.width != features.width) {
    throw std::invalid_argument("observe_out_of_range: depth and feature images differ in size");
  }
  if (depth.height != intr.height || depth.width != intr.width) {
    throw std::invalid_argument("observe_out_of_range: depth size does not match intrinsics");
  }
  const auto mask = eroded_out_of_range_mask(depth, erosion_half_window, max_range);
  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) pixels.push_back(i);
  }
  subsample_in_place(pixels, max_dirs_per_frame, rng);

  std::vector<LocalRay> rays;
  rays.reserve(pixels.size());
  for (std::size_t pixel : pixels) {
    const int row = static_cast<int>(pixel / depth.width);
    const int col = static_cast<int>(pixel % depth.width);
    LocalRay ray;
    ray.origin = pose.translation();
    ray.dir = pose.rotate(intr.pixelRay(col, row)).normalized();
    const auto f = features.pixel(pixel);
    ray.feature.assign(f.begin(), f.end());
    rays.push_back(std::move(ray));
  }
  return rays;
}

std::optional<FrontierCandidate> frontier_candidate(const LocalRay& ray, const Vec3& frontier_origin,
                                                    double beta, double depth_range) {
  const Vec3 v = frontier_origin - ray.origin;
  const double along = v.dot(ray.dir);
  if (!(along > 0.0)) return std::nullopt;
  const double d_ortho = (v - along * ray.dir).norm();
  if (d_ortho > beta) return std::nullopt;
  const double d_orig = v.norm();
  if (depth_range > 0.0 && d_orig > 4.0 * depth_range) return std::nullopt;
  return FrontierCandidate{d_ortho, d_orig};
}

bool ray_reaches_frontier(const OccupancyGrid& grid, const LocalRay& ray, const VoxelKey& frontier_key,
                          const FrontierSet& frontiers) {
  const std::ptrdiff_t idx = frontiers.indexOf(frontier_key);
  const Vec3 target = idx >= 0 ? frontiers.origin(static_cast<std::size_t>(idx))
                               : voxel_center(frontier_key, frontiers.beta());
  const double along = (target - ray.origin).dot(ray.dir);
  if (!(along > 0.0)) return false;
  bool reached = true;
  bool first = true;
  traverse_cells(grid.resolution(), ray.origin, ray.dir, along, [&](const VoxelKey& k, double) {
    if (first) {
      first = false;
      return true;
    }
    if (coarsen(k, frontiers.factor) == frontier_key) return false;
    if (grid.classify(k) != OccupancyClass::Free) {
      reached = false;
      return false;
    }
    return true;
  });
  return reached;
}

namespace {

struct Scored {
  std::size_t index;
  double d_ortho;
  double d_orig;
};

AssociationResult associate_one(std::size_t ray_index, const LocalRay& ray, const FrontierSet& frontiers,
                                const std::vector<Vec3>& origins, const AssociationParams& params,
                                const OccupancyGrid* grid, std::vector<Scored>& scratch) {
  AssociationResult result;
  result.ray_index = ray_index;
  scratch.clear();
  double max_ortho = 0.0, max_orig = 0.0;
  const double beta = frontiers.beta();
  for (std::size_t i = 0; i < origins.size(); ++i) {
    if (auto c = frontier_candidate(ray, origins[i], beta, params.depth_range)) {
      scratch.push_back({i, c->d_ortho, c->d_orig});
      max_ortho = std::max(max_ortho, c->d_ortho);
      max_orig = std::max(max_orig, c->d_orig);
    }
  }
  if (scratch.empty()) return result;

  auto cost = [&](const Scored& s) {
    const double a = max_ortho > 0.0 ? s.d_ortho / max_ortho : 0.0;
    const double b = max_orig > 0.0 ? s.d_orig / max_orig : 0.0;
    return (a + b) / 2.0;
  };
  const Scored* best = &scratch.front();
  double best_cost = cost(*best);
  for (std::size_t i = 1; i < scratch.size(); ++i) {
    const double c = cost(scratch[i]);
    if (c < best_cost || (c == best_cost && scratch[i].d_orig < best->d_orig)) {
      best = &scratch[i];
      best_cost = c;
    }
  }

  result.frontier_index = best->index;
  result.frontier_key = frontiers.keys[best->index];
  result.frontier_origin = origins[best->index];
  result.d_ortho = best->d_ortho;
  result.d_orig = best->d_orig;
  result.d_cost = best_cost;
  result.assigned = true;
  if (params.ray_tracing && grid != nullptr &&
      !ray_reaches_frontier(*grid, ray, result.frontier_key, frontiers)) {
    result.assigned = false;
  }
  return result;
}

}  // namespace

std::vector<AssociationResult> associate_rays(const std::vector<LocalRay>& rays, const FrontierSet& frontiers,
                                              const AssociationParams& params, const OccupancyGrid* grid) {
  if (!(params.depth_range >= 0.0)) throw std::invalid_argument("associate_rays: depth_range must be >= 0");
  std::vector<AssociationResult> results(rays.size());
  const auto origins = frontiers.origins();

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<Scored> scratch;
    for (std::size_t i = begin; i < end; ++i) {
      results[i] = associate_one(i, rays[i], frontiers, origins, params, grid, scratch);
    }
  };

  const std::size_t threads = std::max(1, params.threads);
  if (threads == 1 || rays.size() < 256) {
    work(0, rays.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (rays.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(rays.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  return results;
}

RayFrontierMap::RayFrontierMap(double psi_deg, int dim) : psi_(psi_deg), dim_(dim) {
  if (!(psi_deg > 0.0)) throw std::invalid_argument("RayFrontierMap: angle bin size must be > 0");
  if (dim < 1) throw std::invalid_argument("RayFrontierMap: feature dimension must be >= 1");
}

void RayFrontierMap::merge(const std::vector<Contribution>& batch) {
  struct Sum {
    std::vector<double> feature;
    double weight = 0.0;
    Vec3 origin;
  };
  std::map<RayKey, Sum> sums;
  for (const auto& c : batch) {
    if (!(c.weight > 0.0)) continue;
    if (static_cast<int>(c.feature->size()) != dim_) throw std::invalid_argument("RayFrontierMap: feature dimension mismatch");
    auto [it, inserted] = sums.try_emplace(c.key);
    Sum& s = it->second;
    if (inserted) {
      s.feature.assign(dim_, 0.0);
      s.origin = c.origin;
    }
    for (int d = 0; d < dim_; ++d) s.feature[d] += c.weight * (*c.feature)[d];
    s.weight += c.weight;
  }
  for (auto& [key, s] : sums) {
    auto [it, inserted] = entries_.try_emplace(key);
    RayFrontierEntry& e = it->second;
    if (inserted) {
      e.origin = s.origin;
      e.bin = key.bin;
      e.feature.assign(dim_, 0.0f);
      e.weight = 0.0;
    }
    const double total = e.weight + s.weight;
    for (int d = 0; d < dim_; ++d) {
      e.feature[d] = static_cast<float>((e.weight * e.feature[d] + s.feature[d]) / total);
    }
    e.weight = total;
  }
}

std::vector<RayFrontierEntry> RayFrontierMap::removeAnchors(const std::vector<VoxelKey>& anchors) {
  std::vector<RayFrontierEntry> removed;
  if (anchors.empty()) return removed;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (std::binary_search(anchors.begin(), anchors.end(), it->first.anchor)) {
      removed.push_back(std::move(it->second));
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

void RayFrontierMap::dump(std::ostream& os) const {
  for (const auto& [key, e] : entries_) {
    os << e.origin.x() << ' ' << e.origin.y() << ' ' << e.origin.z() << ' ' << e.bin.theta_bin << ' '
       << e.bin.phi_bin << ' ' << e.weight << '\n';
  }
}

void bin_and_accumulate(RayFrontierMap& map, const std::vector<LocalRay>& rays,
                        const std::vector<AssociationResult>& results, const FrontierSet& frontiers) {
  std::vector<RayFrontierMap::Contribution> batch;
  batch.reserve(results.size());
  for (const auto& r : results) {
    if (!r.assigned) continue;
    const LocalRay& ray = rays[r.ray_index];
    const double w = ray.weight * (1.0 - r.d_cost);
    if (!(w > 0.0)) continue;
    const auto angles = direction_to_angles(ray.dir.normalized());
    const AngleBin bin = angle_bin(angles.theta, angles.phi, map.psi());
    batch.push_back({{r.frontier_key, bin}, frontiers.origin(r.frontier_index), &ray.feature, w});
  }
  map.merge(batch);
}

void accumulate_pose_anchored(RayFrontierMap& map, const std::vector<LocalRay>& rays, double cell_size) {
  std::vector<RayFrontierMap::Contribution> batch;
  batch.reserve(rays.size());
  for (const auto& ray : rays) {
    const VoxelKey anchor = voxel_key(ray.origin, cell_size);
    const auto angles = direction_to_angles(ray.dir.normalized());
    const AngleBin bin = angle_bin(angles.theta, angles.phi, map.psi());
    batch.push_back({{anchor, bin}, voxel_center(anchor, cell_size), &ray.feature, ray.weight});
  }
  map.merge(batch);
}

std::size_t propagate_fronts(RayFrontierMap& map, const std::vector<VoxelKey>& removed,
                             RayAccumulationBuffer& buffer, bool ray_tracing) {
  auto gone = map.removeAnchors(removed);
  if (ray_tracing) {
    for (auto& e : gone) {
      LocalRay ray;
      ray.origin = e.origin;
      ray.dir = bin_center_direction(e.bin, map.psi());
      ray.feature = std::move(e.feature);
      ray.weight = e.weight;
      buffer.pending.push_back(std::move(ray));
    }
  }
  return gone.size();
}

}  // namespace semray
