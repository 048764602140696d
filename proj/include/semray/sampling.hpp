#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace semray {

/// Sentinel for "no cap" on per-frame point and ray budgets.
inline constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

/// Indices of a uniform random subset of size min(n, cap), in increasing order.
inline std::vector<std::size_t> uniform_subsample(std::size_t n, std::uint64_t cap, std::mt19937_64& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (cap >= n) return all;
  std::vector<std::size_t> picked;
  picked.reserve(static_cast<std::size_t>(cap));
  std::sample(all.begin(), all.end(), std::back_inserter(picked), static_cast<std::size_t>(cap), rng);
  return picked;
}

/// Keeps a uniform random subset of `items` of size at most `cap`, preserving order.
template <typename T>
void subsample_in_place(std::vector<T>& items, std::uint64_t cap, std::mt19937_64& rng) {
  if (cap >= items.size()) return;
  const auto idx = uniform_subsample(items.size(), cap, rng);
  std::vector<T> kept;
  kept.reserve(idx.size());
  for (std::size_t i : idx) kept.push_back(std::move(items[i]));
  items = std::move(kept);
}

}  // namespace semray
