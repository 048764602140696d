#include "semray/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace semray {

GroundTruth::GroundTruth(double resolution, const Vec3& bounds_min, const Vec3& bounds_max,
                         std::map<VoxelKey, int> cells)
    : grid_(EvalGrid::fromBounds(bounds_min, bounds_max, resolution)),
      bounds_min_(bounds_min),
      bounds_max_(bounds_max),
      cells_(std::move(cells)),
      dense_(grid_.size(), -1) {
  std::set<int> classes;
  for (const auto& [k, c] : cells_) {
    if (c < 0) throw std::invalid_argument("GroundTruth: negative class id");
    if (!grid_.contains(k)) throw std::invalid_argument("GroundTruth: labeled cell outside bounds");
    dense_[grid_.index(k)] = c;
    classes.insert(c);
  }
  classes_.assign(classes.begin(), classes.end());
}

MappedMask compute_mapped_mask(const OccupancyGrid& occ, const EvalGrid& grid) {
  MappedMask mask(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    mask[i] = occ.query(grid.center(i)) != OccupancyClass::Unobserved ? 1 : 0;
  }
  return mask;
}

double mapped_fraction(const GroundTruth& gt, int cls, const MappedMask& mapped) {
  if (mapped.size() != gt.grid().size()) throw std::invalid_argument("mapped_fraction: mask size mismatch");
  std::size_t total = 0, seen = 0;
  const auto& labels = gt.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != cls) continue;
    ++total;
    seen += mapped[i];
  }
  return total == 0 ? 1.0 : static_cast<double>(seen) / static_cast<double>(total);
}

SearchScores search_scores(const SearchVolumeGrid& volume, const GroundTruth& gt, int cls, const MappedMask& mapped) {
  if (!(volume.grid == gt.grid())) throw std::invalid_argument("search_scores: volume and ground truth grids differ");
  if (mapped.size() != gt.grid().size() || volume.selected.size() != gt.grid().size()) {
    throw std::invalid_argument("search_scores: mask size mismatch");
  }
  const auto& labels = gt.labels();
  std::size_t vol_unmapped = 0, fp = 0, tp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mapped[i]) continue;
    ++vol_unmapped;
    const bool in_class = labels[i] == cls;
    const bool selected = volume.selected[i] != 0;
    if (selected && !in_class) ++fp;
    if (selected && in_class) ++tp;
    if (!selected && in_class) ++fn;
  }
  SearchScores s;
  s.scv = vol_unmapped == 0 ? 1.0 : 1.0 - static_cast<double>(fp) / static_cast<double>(vol_unmapped);
  s.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.scvr = s.scv * s.recall;
  return s;
}

double scv(const SearchVolumeGrid& volume, const GroundTruth& gt, int cls, const MappedMask& mapped) {
  return search_scores(volume, gt, cls, mapped).scv;
}

double scvr(const SearchVolumeGrid& volume, const GroundTruth& gt, int cls, const MappedMask& mapped) {
  return search_scores(volume, gt, cls, mapped).scvr;
}

double normalized_trapezoid(std::span<const double> t, std::span<const double> v, std::size_t last) {
  if (t.size() != v.size()) throw std::invalid_argument("normalized_trapezoid: size mismatch");
  if (t.empty()) throw std::invalid_argument("normalized_trapezoid: empty series");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("normalized_trapezoid: timestamps must increase strictly");
  }
  last = std::min(last, t.size() - 1);
  if (last == 0) return v[0];
  double area = 0.0;
  for (std::size_t i = 1; i <= last; ++i) area += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
  return area / (t[last] - t[0]);
}

double scvr_auc(const ClassSeries& series) {
  std::size_t last = series.t.empty() ? 0 : series.t.size() - 1;
  for (std::size_t i = 0; i < series.mapped_fraction.size(); ++i) {
    if (series.mapped_fraction[i] >= 0.5) {
      last = i;
      break;
    }
  }
  return normalized_trapezoid(series.t, series.scvr, last);
}

double miou_time_auc(std::span<const double> t, std::span<const double> miou) {
  return normalized_trapezoid(t, miou, t.empty() ? 0 : t.size() - 1);
}

std::vector<std::vector<std::size_t>> k_nearest(std::span<const LabeledPoint> points, std::span<const Vec3> queries,
                                                int k) {
  if (k < 1) throw std::invalid_argument("k_nearest: k must be >= 1");
  std::vector<std::vector<std::size_t>> out(queries.size());
  if (points.empty()) return out;

  // Bucket side from the point cloud extent so buckets hold a handful of points on average.
  Vec3 lo = points.front().position, hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-9);
  const double cell = std::max(extent / std::cbrt(static_cast<double>(points.size())), 1e-9);
  std::unordered_map<VoxelKey, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < points.size(); ++i) buckets[voxel_key(points[i].position, cell)].push_back(i);
  const VoxelKey plo = voxel_key(lo, cell), phi = voxel_key(hi, cell);
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), points.size());

  std::vector<std::pair<double, std::size_t>> found;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Vec3& x = queries[q];
    const VoxelKey c = voxel_key(x, cell);
    const int r_max = std::max({std::abs(c.ix - plo.ix), std::abs(c.ix - phi.ix), std::abs(c.iy - plo.iy),
                                std::abs(c.iy - phi.iy), std::abs(c.iz - plo.iz), std::abs(c.iz - phi.iz)});
    found.clear();
    // Shell search costs up to (2 r_max + 1)^3 lookups; a linear scan is cheaper for far queries.
    const double shells = 2.0 * r_max + 1.0;
    if (points.size() <= 64 || shells * shells * shells > 64.0 * static_cast<double>(points.size())) {
      for (std::size_t i = 0; i < points.size(); ++i) found.emplace_back((points[i].position - x).squaredNorm(), i);
      std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(want), found.end());
      found.resize(want);
      out[q].reserve(want);
      for (const auto& f : found) out[q].push_back(f.second);
      continue;
    }
    auto visit = [&](const VoxelKey& key) {
      const auto it = buckets.find(key);
      if (it == buckets.end()) return;
      for (std::size_t i : it->second) found.emplace_back((points[i].position - x).squaredNorm(), i);
    };
    for (int r = 0; r <= r_max; ++r) {
      for (int dx = -r; dx <= r; ++dx) {
        for (int dy = -r; dy <= r; ++dy) {
          const bool edge = std::abs(dx) == r || std::abs(dy) == r;
          if (edge) {
            for (int dz = -r; dz <= r; ++dz) visit(c + VoxelKey{dx, dy, dz});
          } else {
            visit(c + VoxelKey{dx, dy, -r});
            if (r > 0) visit(c + VoxelKey{dx, dy, r});
          }
        }
      }
      if (found.size() >= want) {
        std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(want - 1), found.end());
        const double kth = std::sqrt(found[want - 1].first);
        // Anything outside the searched cube is at least r * cell away.
        if (kth < r * cell) break;
      }
    }
    std::sort(found.begin(), found.end());
    found.resize(std::min(found.size(), want));
    out[q].reserve(found.size());
    for (const auto& f : found) out[q].push_back(f.second);
  }
  return out;
}

int majority_label(std::span<const LabeledPoint> points, std::span<const std::size_t> neighbors) {
  std::vector<std::pair<int, int>> counts;  // (label, count) in first-seen order
  for (std::size_t i : neighbors) {
    const int label = points[i].label;
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == label; });
    if (it == counts.end()) {
      counts.emplace_back(label, 1);
    } else {
      ++it->second;
    }
  }
  int best = -1, best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

SegmentationScores segmentation_metrics(std::span<const LabeledPoint> predictions, const GroundTruth& gt, int k) {
  if (k < 1) throw std::invalid_argument("segmentation_metrics: k must be >= 1");
  SegmentationScores scores;
  if (predictions.empty() || gt.cells().empty()) return scores;

  std::vector<Vec3> queries;
  std::vector<int> truth;
  queries.reserve(gt.cells().size());
  for (const auto& [key, cls] : gt.cells()) {
    queries.push_back(voxel_center(key, gt.resolution()));
    truth.push_back(cls);
  }
  const auto neighbors = k_nearest(predictions, queries, k);

  std::map<int, std::size_t> tp, fp, fn, support;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const int pred = majority_label(predictions, neighbors[i]);
    const int gt_cls = truth[i];
    ++support[gt_cls];
    if (pred == gt_cls) {
      ++tp[gt_cls];
      ++correct;
    } else {
      ++fn[gt_cls];
      if (pred >= 0) ++fp[pred];
    }
  }

  double sum_iou = 0.0, weighted = 0.0;
  for (const auto& [cls, n] : support) {
    const double denom = static_cast<double>(tp[cls] + fp[cls] + fn[cls]);
    const double iou = denom > 0.0 ? static_cast<double>(tp[cls]) / denom : 0.0;
    sum_iou += iou;
    weighted += iou * static_cast<double>(n);
  }
  const double total = static_cast<double>(queries.size());
  scores.miou = sum_iou / static_cast<double>(support.size());
  scores.fmiou = weighted / total;
  scores.acc = static_cast<double>(correct) / total;
  return scores;
}

}  // namespace semray
