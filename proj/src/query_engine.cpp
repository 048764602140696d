#include "semray/query_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semray {

EvalGrid EvalGrid::fromBounds(const Vec3& min, const Vec3& max, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("EvalGrid: resolution must be > 0");
  if (!min.allFinite() || !max.allFinite() || (max - min).minCoeff() <= 0.0) {
    throw std::invalid_argument("EvalGrid: bounds must be finite with max > min");
  }
  EvalGrid g;
  g.resolution = resolution;
  g.lo = voxel_key(min, resolution);
  const Vec3 hi_cells = (max / resolution).array().ceil();
  g.nx = static_cast<int>(hi_cells.x()) - g.lo.ix;
  g.ny = static_cast<int>(hi_cells.y()) - g.lo.iy;
  g.nz = static_cast<int>(hi_cells.z()) - g.lo.iz;
  return g;
}

void QuerySet::validate() const {
  if (labels.empty()) throw std::invalid_argument("query set is empty");
  const std::size_t d = labels.front().embedding.size();
  for (const auto& l : labels) {
    if (l.embedding.size() != d || d == 0) throw std::invalid_argument("query set: inconsistent embedding dimension");
    double n2 = 0.0;
    for (float x : l.embedding) n2 += static_cast<double>(x) * x;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) throw std::invalid_argument("query set: embedding '" + l.name + "' is not unit norm");
  }
}

void QuerySet::normalize() {
  for (auto& l : labels) {
    double n2 = 0.0;
    for (float x : l.embedding) n2 += static_cast<double>(x) * x;
    const double n = std::sqrt(n2);
    if (n > 0.0) {
      for (float& x : l.embedding) x = static_cast<float>(x / n);
    }
  }
}

namespace {

void softmax_in_place(std::vector<double>& logits, const std::vector<std::uint8_t>& active) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (active[i]) mx = std::max(mx, logits[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = active[i] ? std::exp(logits[i] - mx) : 0.0;
    sum += logits[i];
  }
  for (double& x : logits) x /= sum;
}

}  // namespace

std::vector<int> classify(std::span<const std::vector<float>> features, const QuerySet& queries,
                          const ClassifyParams& params) {
  if (queries.size() == 0) throw std::invalid_argument("classify: empty query set");
  if (params.prediction_thresh < 0.0 || params.prediction_thresh > 1.0 || params.denoise_thresh < 0.0 ||
      params.denoise_thresh > 1.0) {
    throw std::invalid_argument("classify: thresholds must lie in [0, 1]");
  }
  const std::size_t k = queries.size();
  const std::size_t dim = queries.labels.front().embedding.size();

  std::vector<std::vector<double>> logits(features.size(), std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (f.size() != dim) throw std::invalid_argument("classify: feature dimension does not match queries");
    double n2 = 0.0;
    for (float x : f) n2 += static_cast<double>(x) * x;
    const double norm = std::sqrt(n2);
    for (std::size_t l = 0; l < k; ++l) {
      double dot = 0.0;
      const auto& q = queries.labels[l].embedding;
      for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(f[d]) * q[d];
      const double cosine = norm > 0.0 ? dot / norm : 0.0;
      logits[i][l] = params.logit_scale * cosine;
    }
  }

  // Prompt denoising over the whole batch.
  const std::vector<std::uint8_t> all(k, 1);
  std::vector<double> best(k, 0.0);
  for (const auto& row : logits) {
    std::vector<double> p = row;
    softmax_in_place(p, all);
    for (std::size_t l = 0; l < k; ++l) best[l] = std::max(best[l], p[l]);
  }
  std::vector<std::uint8_t> active(k, 0);
  bool any_active = false;
  for (std::size_t l = 0; l < k; ++l) {
    active[l] = best[l] >= params.denoise_thresh ? 1 : 0;
    any_active = any_active || active[l];
  }

  std::vector<int> out(features.size(), -1);
  if (!any_active) return out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    std::vector<double> p = logits[i];
    softmax_in_place(p, active);
    int arg = -1;
    double best_p = -1.0;
    for (std::size_t l = 0; l < k; ++l) {
      if (active[l] && p[l] > best_p) {
        best_p = p[l];
        arg = static_cast<int>(l);
      }
    }
    if (best_p > params.prediction_thresh) out[i] = arg;
  }
  return out;
}

std::size_t SearchVolumeGrid::volume() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

void finalize_search_volume(SearchVolumeGrid& v, double thresh) {
  const float mx = v.counts.empty() ? 0.0f : *std::max_element(v.counts.begin(), v.counts.end());
  v.selected.assign(v.counts.size(), 0);
  if (!(mx > 0.0f)) return;
  for (std::size_t i = 0; i < v.counts.size(); ++i) {
    v.counts[i] /= mx;
    v.selected[i] = (v.counts[i] > 0.0f && v.counts[i] >= thresh) ? 1 : 0;
  }
}

namespace {

void check_mask(const EvalGrid& grid, const MappedMask& mapped) {
  if (mapped.size() != grid.size()) throw std::invalid_argument("search volume: mapped mask size mismatch");
}

}  // namespace

SearchVolumeGrid build_search_volume_rays(std::span<const RayEvidence> rays, double cone_half_angle_deg,
                                          const EvalGrid& grid, const MappedMask& mapped, double thresh) {
  check_mask(grid, mapped);
  SearchVolumeGrid v{grid, std::vector<float>(grid.size(), 0.0f), {}};
  const double cos_half = std::cos(deg2rad(cone_half_angle_deg));
  std::vector<Vec3> centers;
  std::vector<std::size_t> unmapped;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mapped[i]) {
      unmapped.push_back(i);
      centers.push_back(grid.center(i));
    }
  }
  for (const auto& ray : rays) {
    for (std::size_t j = 0; j < unmapped.size(); ++j) {
      const Vec3 w = centers[j] - ray.origin;
      const double n = w.norm();
      if (n == 0.0) continue;
      if (w.dot(ray.dir) >= n * cos_half) v.counts[unmapped[j]] += 1.0f;
    }
  }
  finalize_search_volume(v, thresh);
  return v;
}

SearchVolumeGrid build_search_volume_spherical(std::span<const std::size_t> matched, const FrontierSet& frontiers,
                                               const EvalGrid& grid, const MappedMask& mapped, double thresh) {
  check_mask(grid, mapped);
  SearchVolumeGrid v{grid, std::vector<float>(grid.size(), 0.0f), {}};
  const auto origins = frontiers.origins();
  for (std::size_t m : matched) {
    if (m >= origins.size()) throw std::out_of_range("build_search_volume_spherical: frontier index out of range");
    const Vec3& c = origins[m];
    double radius = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < origins.size(); ++j) {
      if (j != m) radius = std::min(radius, (origins[j] - c).norm());
    }
    if (!std::isfinite(radius)) radius = frontiers.beta();

    const VoxelKey a = voxel_key(c - Vec3::Constant(radius), grid.resolution);
    const VoxelKey b = voxel_key(c + Vec3::Constant(radius), grid.resolution);
    for (int ix = std::max(a.ix, grid.lo.ix); ix <= std::min(b.ix, grid.lo.ix + grid.nx - 1); ++ix)
      for (int iy = std::max(a.iy, grid.lo.iy); iy <= std::min(b.iy, grid.lo.iy + grid.ny - 1); ++iy)
        for (int iz = std::max(a.iz, grid.lo.iz); iz <= std::min(b.iz, grid.lo.iz + grid.nz - 1); ++iz) {
          const VoxelKey k{ix, iy, iz};
          const std::size_t idx = grid.index(k);
          if (mapped[idx]) continue;
          if ((voxel_center(k, grid.resolution) - c).norm() <= radius) v.counts[idx] += 1.0f;
        }
  }
  finalize_search_volume(v, thresh);
  return v;
}

SearchVolumeGrid search_volume_unconstrained(const EvalGrid& grid, const MappedMask& mapped) {
  check_mask(grid, mapped);
  SearchVolumeGrid v{grid, std::vector<float>(grid.size(), 0.0f), std::vector<std::uint8_t>(grid.size(), 0)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mapped[i]) {
      v.counts[i] = 1.0f;
      v.selected[i] = 1;
    }
  }
  return v;
}

}  // namespace semray
