#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "semray/semantic_voxel_map.hpp"

using namespace semray;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "semray_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

LocalUpdateBuffer random_buffer(std::mt19937_64& rng, int n, int dim, int cells) {
  std::uniform_int_distribution<int> cell(0, cells - 1);
  std::uniform_real_distribution<float> f(-1.0f, 1.0f);
  std::uniform_real_distribution<double> hits(0.5, 4.0);
  LocalUpdateBuffer buf(dim, 1);
  std::vector<float> feat(dim);
  for (int i = 0; i < n; ++i) {
    for (auto& x : feat) x = f(rng);
    buf.push(Vec3(cell(rng) + 0.5, cell(rng) + 0.5, 0.5), Eigen::Vector3f(f(rng), f(rng), f(rng)).cwiseAbs(), feat,
             hits(rng));
  }
  return buf;
}

}  // namespace

TEST(Accumulate, AllInfiniteDepthLeavesBufferUnchanged) {
  const CameraIntrinsics intr{4, 4, 1.5, 1.5, 4, 4};
  DepthImage depth(4, 4);
  FeatureImage feats(4, 4, 3, 0.5f);
  LocalUpdateBuffer buf(3, 8);
  std::mt19937_64 rng(0);
  accumulate_frame(buf, Pose::identity(), intr, depth, feats, 0.5, 2.0, kUnlimited, rng);
  EXPECT_TRUE(buf.empty());
}

TEST(Accumulate, SinglePixelCarriesExactFeature) {
  const CameraIntrinsics intr{1000, 1000, 0, 0, 1, 1};
  DepthImage depth(1, 1, 2.0f);
  FeatureImage feats(1, 1, 4);
  feats.values = {0, 0, 1, 0};
  LocalUpdateBuffer buf(4, 8);
  std::mt19937_64 rng(0);
  accumulate_frame(buf, Pose::fromTranslation(Vec3(0.5, 0.5, -0.5)), intr, depth, feats, 1.0, 1.0, kUnlimited, rng);
  ASSERT_EQ(buf.size(), 1u);
  EXPECT_EQ(voxel_key(buf.positions[0], 1.0), (VoxelKey{0, 0, 1}));
  const auto f = buf.feature(0);
  EXPECT_EQ(std::vector<float>(f.begin(), f.end()), (std::vector<float>{0, 0, 1, 0}));
  EXPECT_EQ(buf.hit_counts[0], 1.0);
  EXPECT_EQ(buf.frames_accumulated, 1);
}

TEST(Accumulate, CapRetainsExactly) {
  const CameraIntrinsics intr{5, 5, 4.5, 4.5, 10, 10};
  DepthImage depth(10, 10, 3.0f);
  FeatureImage feats(10, 10, 2, 1.0f);
  std::mt19937_64 rng(3);
  LocalUpdateBuffer all(2, 8), capped(2, 8);
  accumulate_frame(all, Pose::identity(), intr, depth, feats, 0.1, 2.0, kUnlimited, rng);
  ASSERT_GE(all.size(), 100u);
  accumulate_frame(capped, Pose::identity(), intr, depth, feats, 0.1, 2.0, 10, rng);
  EXPECT_EQ(capped.size(), 10u);
}

TEST(Accumulate, RejectsMismatchedFeatures) {
  const CameraIntrinsics intr{4, 4, 1.5, 1.5, 4, 4};
  DepthImage depth(4, 4, 1.0f);
  FeatureImage feats(3, 4, 2);
  LocalUpdateBuffer buf(2, 8);
  std::mt19937_64 rng(0);
  EXPECT_THROW(accumulate_frame(buf, Pose::identity(), intr, depth, feats, 0.5, 2.0, kUnlimited, rng),
               std::invalid_argument);
  FeatureImage wrong_dim(4, 4, 3);
  EXPECT_THROW(accumulate_frame(buf, Pose::identity(), intr, depth, wrong_dim, 0.5, 2.0, kUnlimited, rng),
               std::invalid_argument);
}

TEST(Fuse, WeightedMeanExample) {
  SemanticVoxelMap map(1.0, 1);
  SemanticVoxel v;
  v.feature = {0.0f};
  v.hit_count = 3;
  map.insert({0, 0, 0}, v);
  LocalUpdateBuffer buf(1, 1);
  const float one = 1.0f;
  buf.push(Vec3(0.5, 0.5, 0.5), Eigen::Vector3f::Zero(), {&one, 1});
  map.fuse(buf);
  const auto* out = map.find({0, 0, 0});
  ASSERT_NE(out, nullptr);
  EXPECT_FLOAT_EQ(out->feature[0], 0.25f);
  EXPECT_EQ(out->hit_count, 4.0);
}

TEST(Fuse, SymmetricPair) {
  SemanticVoxelMap map(1.0, 2);
  LocalUpdateBuffer buf(2, 1);
  const float a[2] = {0.2f, -1.0f}, b[2] = {0.6f, 3.0f};
  buf.push(Vec3(0.1, 0.1, 0.1), Eigen::Vector3f::Zero(), a);
  buf.push(Vec3(0.9, 0.9, 0.9), Eigen::Vector3f::Zero(), b);
  map.fuse(buf);
  ASSERT_EQ(map.size(), 1u);
  EXPECT_FLOAT_EQ(map.find({0, 0, 0})->feature[0], 0.4f);
  EXPECT_FLOAT_EQ(map.find({0, 0, 0})->feature[1], 1.0f);
}

// Sequential-fold oracle: fusing one point at a time equals fusing the batch.
TEST(Fuse, SequentialFoldMatchesBatch) {
  std::mt19937_64 rng(10);
  const auto buf = random_buffer(rng, 1000, 8, 6);
  SemanticVoxelMap batch(1.0, 8), seq(1.0, 8);
  batch.fuse(buf);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    LocalUpdateBuffer one(8, 1);
    one.push(buf.positions[i], buf.rgb[i], buf.feature(i), buf.hit_counts[i]);
    seq.fuse(one);
  }
  ASSERT_EQ(batch.size(), seq.size());
  for (const auto& [k, v] : batch.voxels()) {
    const auto* s = seq.find(k);
    ASSERT_NE(s, nullptr);
    EXPECT_NEAR(s->hit_count, v.hit_count, 1e-9);
    for (int d = 0; d < 8; ++d) EXPECT_NEAR(s->feature[d], v.feature[d], 1e-5 * std::max(1.0f, std::abs(v.feature[d])));
  }
}

TEST(Fuse, ConservationBoundsAndPermutation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto buf = random_buffer(rng, 200, 4, 4);
    SemanticVoxelMap map(1.0, 4);
    auto seed_buf = random_buffer(rng, 20, 4, 4);
    map.fuse(seed_buf);
    const double before = map.totalHitCount() + std::accumulate(buf.hit_counts.begin(), buf.hit_counts.end(), 0.0);

    // Contributor bounds per key, including the existing voxels.
    std::map<VoxelKey, std::pair<std::vector<float>, std::vector<float>>> bounds;
    auto extend = [&](const VoxelKey& k, std::span<const float> f) {
      auto& [lo, hi] = bounds[k];
      if (lo.empty()) {
        lo.assign(f.begin(), f.end());
        hi.assign(f.begin(), f.end());
      }
      for (int d = 0; d < 4; ++d) {
        lo[d] = std::min(lo[d], f[d]);
        hi[d] = std::max(hi[d], f[d]);
      }
    };
    for (const auto& [k, v] : map.voxels()) extend(k, v.feature);
    for (std::size_t i = 0; i < buf.size(); ++i) extend(voxel_key(buf.positions[i], 1.0), buf.feature(i));

    SemanticVoxelMap shuffled = map;
    map.fuse(buf);
    EXPECT_NEAR(map.totalHitCount(), before, 1e-9 * before);
    for (const auto& [k, v] : map.voxels()) {
      for (int d = 0; d < 4; ++d) {
        EXPECT_GE(v.feature[d], bounds[k].first[d] - 1e-6f);
        EXPECT_LE(v.feature[d], bounds[k].second[d] + 1e-6f);
      }
    }

    std::vector<std::size_t> order(buf.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LocalUpdateBuffer perm(4, 1);
    for (auto i : order) perm.push(buf.positions[i], buf.rgb[i], buf.feature(i), buf.hit_counts[i]);
    shuffled.fuse(perm);
    for (const auto& [k, v] : map.voxels()) {
      const auto* s = shuffled.find(k);
      ASSERT_NE(s, nullptr);
      for (int d = 0; d < 4; ++d) EXPECT_NEAR(s->feature[d], v.feature[d], 1e-5 * std::max(1.0f, std::abs(v.feature[d])));
    }
  }
}

TEST(Fuse, RgbFusesLikeFeatures) {
  SemanticVoxelMap map(1.0, 1);
  LocalUpdateBuffer buf(1, 1);
  const float f = 0;
  buf.push(Vec3(0.5, 0.5, 0.5), Eigen::Vector3f(1, 0, 0), {&f, 1}, 1.0);
  buf.push(Vec3(0.5, 0.5, 0.5), Eigen::Vector3f(0, 0, 1), {&f, 1}, 3.0);
  map.fuse(buf);
  EXPECT_TRUE(map.find({0, 0, 0})->rgb.isApprox(Eigen::Vector3f(0.25f, 0, 0.75f)));
}

TEST(Prune, Examples) {
  SemanticVoxelMap map(1.0, 1);
  SemanticVoxel v;
  v.feature = {1.0f};
  v.hit_count = 1;
  map.insert({0, 0, 0}, v);
  map.insert({1, 0, 0}, v);
  map.insert({2, 0, 0}, v);
  OccupancyGrid grid(1.0);
  grid.markOccupied({0, 0, 0}, 100);
  for (int i = 0; i < 20; ++i) grid.markFree({1, 0, 0});
  EXPECT_EQ(map.pruneWithOccupancy(grid), 1u);
  EXPECT_NE(map.find({0, 0, 0}), nullptr);
  EXPECT_EQ(map.find({1, 0, 0}), nullptr);
  EXPECT_NE(map.find({2, 0, 0}), nullptr);  // unobserved is kept
}

TEST(Prune, MixedMapRemovesExactlyFreeHalfAndIsIdempotent) {
  std::mt19937_64 rng(12);
  SemanticVoxelMap map(0.5, 2);
  OccupancyGrid grid(0.5);
  std::set<VoxelKey> free_keys, all_keys;
  for (int ix = 0; ix < 10; ++ix)
    for (int iy = 0; iy < 10; ++iy) {
      const VoxelKey k{ix, iy, 0};
      SemanticVoxel v;
      v.feature = {1.0f, 0.0f};
      v.hit_count = 2;
      map.insert(k, v);
      all_keys.insert(k);
      if (rng() % 2) {
        grid.update(k, -10);
        free_keys.insert(k);
      } else {
        grid.update(k, 50);
      }
    }
  map.pruneWithOccupancy(grid);
  std::set<VoxelKey> expected;
  std::set_difference(all_keys.begin(), all_keys.end(), free_keys.begin(), free_keys.end(),
                      std::inserter(expected, expected.begin()));
  const auto keys = map.sortedKeys();
  EXPECT_EQ(std::set<VoxelKey>(keys.begin(), keys.end()), expected);
  EXPECT_EQ(map.pruneWithOccupancy(grid), 0u);
  EXPECT_EQ(map.sortedKeys(), keys);
}

TEST(PointCloud, EmptyMapWritesHeaderOnly) {
  SemanticVoxelMap map(1.0, 2);
  const auto path = temp_file("empty.ply");
  export_point_cloud(map, path);
  EXPECT_TRUE(read_point_cloud(path).empty());
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "ply");
}

TEST(PointCloud, RoundTripWithinHalfCell) {
  SemanticVoxelMap map(0.25, 1);
  std::mt19937_64 rng(13);
  auto buf = random_buffer(rng, 3, 1, 50);
  buf.positions = {Vec3(0.3, 1.1, -2.6), Vec3(5.0, 0.0, 0.0), Vec3(-1.0, -1.0, 9.9)};
  map.fuse(buf);
  ASSERT_EQ(map.size(), 3u);
  const auto path = temp_file("three.ply");
  const std::vector<int> labels = {2, -1, 7};
  export_point_cloud(map, path, labels);
  const auto pts = read_point_cloud(path);
  ASSERT_EQ(pts.size(), 3u);
  const auto keys = map.sortedKeys();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LE((pts[i].position - voxel_center(keys[i], 0.25)).cwiseAbs().maxCoeff(), 0.125);
    EXPECT_EQ(pts[i].class_id, labels[i]);
    EXPECT_NEAR(pts[i].hit_count, map.find(keys[i])->hit_count, 1e-6);
  }
}

TEST(PointCloud, UnwritablePathThrows) {
  SemanticVoxelMap map(1.0, 1);
  EXPECT_ANY_THROW(export_point_cloud(map, "/nonexistent_dir_semray/x.ply"));
}
