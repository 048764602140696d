#include "semray/frontiers.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <cstdint>
#include <map>

namespace semray {

namespace {

// Dense summed-area tables of Unobserved and Occupied cells over a key box.
class NeighborCounter {
 public:
  NeighborCounter(const OccupancyGrid& grid, const VoxelKey& lo, const VoxelKey& hi)
      : lo_(lo), nx_(hi.ix - lo.ix + 1), ny_(hi.iy - lo.iy + 1), nz_(hi.iz - lo.iz + 1) {
    const std::size_t n = static_cast<std::size_t>(nx_ + 1) * (ny_ + 1) * (nz_ + 1);
    unobserved_.assign(n, 0);
    occupied_.assign(n, 0);
    for (int x = 1; x <= nx_; ++x)
      for (int y = 1; y <= ny_; ++y)
        for (int z = 1; z <= nz_; ++z) {
          const auto c = grid.classify({lo.ix + x - 1, lo.iy + y - 1, lo.iz + z - 1});
          integrate(unobserved_, x, y, z, c == OccupancyClass::Unobserved ? 1 : 0);
          integrate(occupied_, x, y, z, c == OccupancyClass::Occupied ? 1 : 0);
        }
  }

  /// Counts over the cube of half-width r around `k`, which must lie r cells inside the box.
  int unobserved(const VoxelKey& k, int r) const { return box(unobserved_, k, r); }
  int occupied(const VoxelKey& k, int r) const { return box(occupied_, k, r); }

 private:
  std::size_t at(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * (ny_ + 1) + y) * (nz_ + 1) + z;
  }
  void integrate(std::vector<std::int32_t>& s, int x, int y, int z, int v) const {
    s[at(x, y, z)] = v + s[at(x - 1, y, z)] + s[at(x, y - 1, z)] + s[at(x, y, z - 1)] - s[at(x - 1, y - 1, z)] -
                     s[at(x - 1, y, z - 1)] - s[at(x, y - 1, z - 1)] + s[at(x - 1, y - 1, z - 1)];
  }
  int box(const std::vector<std::int32_t>& s, const VoxelKey& k, int r) const {
    const int x0 = k.ix - lo_.ix - r, x1 = k.ix - lo_.ix + r + 1;
    const int y0 = k.iy - lo_.iy - r, y1 = k.iy - lo_.iy + r + 1;
    const int z0 = k.iz - lo_.iz - r, z1 = k.iz - lo_.iz + r + 1;
    return s[at(x1, y1, z1)] - s[at(x0, y1, z1)] - s[at(x1, y0, z1)] - s[at(x1, y1, z0)] + s[at(x0, y0, z1)] +
           s[at(x0, y1, z0)] + s[at(x1, y0, z0)] - s[at(x0, y0, z0)];
  }

  VoxelKey lo_;
  int nx_, ny_, nz_;
  std::vector<std::int32_t> unobserved_, occupied_;
};

constexpr std::size_t kMaxDenseCells = std::size_t{1} << 22;

}  // namespace

std::vector<VoxelKey> compute_fine_frontiers(const OccupancyGrid& grid, const FrontierThresholds& t) {
  if (t.radius < 1) throw std::invalid_argument("compute_fine_frontiers: radius must be >= 1");
  const int side = 2 * t.radius + 1;
  const int neighborhood = side * side * side - 1;

  std::vector<VoxelKey> free_cells;
  grid.forEachFree([&](const VoxelKey& k, int) { free_cells.push_back(k); });
  std::vector<VoxelKey> out;
  if (free_cells.empty()) return out;

  VoxelKey lo = free_cells.front(), hi = lo;
  for (const auto& k : free_cells) {
    lo = {std::min(lo.ix, k.ix), std::min(lo.iy, k.iy), std::min(lo.iz, k.iz)};
    hi = {std::max(hi.ix, k.ix), std::max(hi.iy, k.iy), std::max(hi.iz, k.iz)};
  }
  lo = lo + VoxelKey{-t.radius, -t.radius, -t.radius};
  hi = hi + VoxelKey{t.radius, t.radius, t.radius};
  const double volume = (hi.ix - lo.ix + 1.0) * (hi.iy - lo.iy + 1.0) * (hi.iz - lo.iz + 1.0);

  if (volume <= static_cast<double>(kMaxDenseCells)) {
    const NeighborCounter counter(grid, lo, hi);
    for (const auto& k : free_cells) {
      const int unobserved = counter.unobserved(k, t.radius);
      const int occupied = counter.occupied(k, t.radius);
      const int free = neighborhood - unobserved - occupied;
      if (unobserved >= t.min_unobserved && occupied >= t.min_occupied && free >= t.min_free) out.push_back(k);
    }
  } else {
    std::vector<VoxelKey> offsets;
    offsets.reserve(neighborhood);
    for (int dx = -t.radius; dx <= t.radius; ++dx)
      for (int dy = -t.radius; dy <= t.radius; ++dy)
        for (int dz = -t.radius; dz <= t.radius; ++dz)
          if (dx != 0 || dy != 0 || dz != 0) offsets.push_back({dx, dy, dz});
    for (const auto& k : free_cells) {
      int unobserved = 0, occupied = 0, free = 0;
      bool hopeless = false;
      for (std::size_t i = 0; i < offsets.size() && !hopeless; ++i) {
        switch (grid.classify(k + offsets[i])) {
          case OccupancyClass::Unobserved: ++unobserved; break;
          case OccupancyClass::Occupied: ++occupied; break;
          case OccupancyClass::Free: ++free; break;
        }
        hopeless = unobserved + static_cast<int>(offsets.size() - i - 1) < t.min_unobserved;
      }
      if (!hopeless && unobserved >= t.min_unobserved && occupied >= t.min_occupied && free >= t.min_free) {
        out.push_back(k);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Vec3> FrontierSet::origins() const {
  std::vector<Vec3> out;
  out.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(origin(i));
  return out;
}

bool FrontierSet::contains(const VoxelKey& coarse) const {
  return std::binary_search(keys.begin(), keys.end(), coarse);
}

std::ptrdiff_t FrontierSet::indexOf(const VoxelKey& coarse) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), coarse);
  if (it == keys.end() || *it != coarse) return -1;
  return it - keys.begin();
}

FrontierSet subsample_frontiers(const std::vector<VoxelKey>& fine, double fine_resolution, int factor,
                                int min_fronti, std::uint64_t generation) {
  if (factor < 1) throw std::invalid_argument("subsample_frontiers: factor must be >= 1");
  std::map<VoxelKey, int> counts;
  for (const auto& k : fine) ++counts[coarsen(k, factor)];
  FrontierSet out;
  out.fine_resolution = fine_resolution;
  out.factor = factor;
  out.generation = generation;
  for (const auto& [k, n] : counts) {
    if (n >= min_fronti) out.keys.push_back(k);
  }
  return out;
}

FrontierDiff diff_frontiers(const FrontierSet& old_set, const FrontierSet& new_set) {
  if (old_set.factor != new_set.factor || std::abs(old_set.beta() - new_set.beta()) > 1e-12) {
    throw std::invalid_argument("diff_frontiers: frontier sets use different coarse resolutions");
  }
  FrontierDiff d;
  std::set_difference(old_set.keys.begin(), old_set.keys.end(), new_set.keys.begin(), new_set.keys.end(),
                      std::back_inserter(d.removed));
  std::set_difference(new_set.keys.begin(), new_set.keys.end(), old_set.keys.begin(), old_set.keys.end(),
                      std::back_inserter(d.added));
  return d;
}

}  // namespace semray
