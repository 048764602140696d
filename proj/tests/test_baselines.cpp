#include <gtest/gtest.h>

#include <array>
#include <functional>
#include <random>

#include "semray/baselines.hpp"

using namespace semray;

namespace {

FrontierSet frontier_set(std::vector<VoxelKey> keys) {
  FrontierSet s;
  s.fine_resolution = 0.5;
  s.factor = 4;
  std::sort(keys.begin(), keys.end());
  s.keys = std::move(keys);
  return s;
}

LocalRay ray(const Vec3& o, const Vec3& d, std::vector<float> f) {
  LocalRay r;
  r.origin = o;
  r.dir = d.normalized();
  r.feature = std::move(f);
  return r;
}

// Neighborhood of the fine cell containing the origin, labelled by a predicate on the offset.
OccupancyGrid neighborhood(const VoxelKey& c, const std::function<int(int, int, int)>& label) {
  OccupancyGrid g(1.0);
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const int l = label(dx, dy, dz);
        if (l < 0) g.markFree({c.ix + dx, c.iy + dy, c.iz + dz});
        else if (l > 0) g.markOccupied({c.ix + dx, c.iy + dy, c.iz + dz}, 100);
      }
  return g;
}

}  // namespace

TEST(SemPoses, Examples) {
  SemPosesState s;
  FeatureImage uniform(3, 4, 2, 0.0f);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      uniform.pixel(r, c)[0] = 0.3f;
      uniform.pixel(r, c)[1] = -2.0f;
    }
  const Pose pose = Pose::lookAt(Vec3(1, 1, 1), Vec3(1, 5, 1));
  sem_poses_update(s, pose, uniform);
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_FLOAT_EQ(s.entries[0].feature[0], 0.3f);
  EXPECT_FLOAT_EQ(s.entries[0].feature[1], -2.0f);
  EXPECT_TRUE(s.entries[0].origin.isApprox(Vec3(1, 1, 1)));
  EXPECT_TRUE(s.entries[0].dir.isApprox(Vec3(0, 1, 0), 1e-12));

  FeatureImage half(2, 2, 2, 0.0f);
  half.pixel(0, 0)[0] = half.pixel(0, 1)[0] = 1.0f;
  half.pixel(1, 0)[1] = half.pixel(1, 1)[1] = 1.0f;
  sem_poses_update(s, pose, half);
  EXPECT_FLOAT_EQ(s.entries[1].feature[0], 0.5f);
  EXPECT_FLOAT_EQ(s.entries[1].feature[1], 0.5f);

  for (int i = 0; i < 5; ++i) sem_poses_update(s, pose, half);
  EXPECT_EQ(s.entries.size(), 7u);
}

TEST(SemFronts, OrthogonalFeaturesCollide) {
  // Two frontiers in a row; both rays pick the nearer one with cost 1/3.
  const auto f = frontier_set({{0, 0, 0}, {1, 0, 0}});
  OccupancyGrid grid(0.5);
  SemFrontsState s;
  const std::vector<LocalRay> rays = {ray(Vec3(-3, 1, 1), Vec3::UnitX(), {1, 0}), ray(Vec3(-3, 1, 1), Vec3::UnitX(), {0, 1})};
  sem_fronts_update(s, rays, f, {}, grid);
  ASSERT_EQ(s.entries.size(), 1u);
  const auto& e = s.entries.at({0, 0, 0});
  EXPECT_FLOAT_EQ(e.feature[0], 0.5f);
  EXPECT_FLOAT_EQ(e.feature[1], 0.5f);
  EXPECT_NEAR(e.weight, 2.0 * (1.0 - 1.0 / 3.0), 1e-12);
  EXPECT_FALSE(e.dir.has_value());
}

TEST(SemFronts, RaysOnTwoFrontiers) {
  const auto f = frontier_set({{0, 0, 0}, {0, 1, 0}});
  OccupancyGrid grid(0.5);
  SemFrontsState s;
  const std::vector<LocalRay> rays = {ray(Vec3(-3, 1.2, 1), Vec3::UnitX(), {1, 0}),
                                      ray(Vec3(-3, 2.8, 1), Vec3::UnitX(), {0, 1})};
  sem_fronts_update(s, rays, f, {}, grid);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_FLOAT_EQ(s.entries.at({0, 0, 0}).feature[0], 1.0f);
  EXPECT_FLOAT_EQ(s.entries.at({0, 1, 0}).feature[1], 1.0f);
}

TEST(SemFronts, NoSurvivingRaysLeavesStateUnchanged) {
  const auto f = frontier_set({{0, 0, 0}, {1, 0, 0}});
  OccupancyGrid grid(0.5);
  SemFrontsState s;
  sem_fronts_update(s, {ray(Vec3(-3, 1, 1), Vec3::UnitX(), {1, 0})}, f, {}, grid);
  const auto before = s.entries.size();
  sem_fronts_update(s, {ray(Vec3(-3, 1, 1), -Vec3::UnitX(), {0, 1})}, f, {}, grid);
  sem_fronts_update(s, {}, f, {}, grid);
  EXPECT_EQ(s.entries.size(), before);
  EXPECT_FLOAT_EQ(s.entries.at({0, 0, 0}).feature[0], 1.0f);
}

TEST(SemFronts, UnidirectionalStoresDirectionAndPrune) {
  const auto f = frontier_set({{0, 0, 0}, {1, 0, 0}});
  // Fine cell of origin (1,1,1) is (2,2,2); map everything below it.
  OccupancyGrid grid(0.5);
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy) grid.markFree({2 + dx, 2 + dy, 1});
  SemFrontsState s;
  s.variant = SemFrontVariant::Unidirectional;
  sem_fronts_update(s, {ray(Vec3(-3, 1, 1), Vec3::UnitX(), {1, 0})}, f, {}, grid);
  ASSERT_TRUE(s.entries.at({0, 0, 0}).dir.has_value());
  EXPECT_TRUE(s.entries.at({0, 0, 0}).dir->isApprox(Vec3::UnitZ(), 1e-12));
  sem_fronts_prune(s, {{0, 0, 0}});
  EXPECT_TRUE(s.entries.empty());
}

TEST(FrontierDirection, MappedBelowPointsUp) {
  const auto g = neighborhood({0, 0, 0}, [](int, int, int dz) { return dz < 0 ? -1 : 0; });
  EXPECT_TRUE(infer_frontier_direction(g, Vec3(0.5, 0.5, 0.5)).isApprox(Vec3::UnitZ(), 1e-12));
  const auto h = neighborhood({0, 0, 0}, [](int, int, int dz) { return dz > 0 ? 1 : 0; });
  EXPECT_TRUE(infer_frontier_direction(h, Vec3(0.5, 0.5, 0.5)).isApprox(-Vec3::UnitZ(), 1e-12));
}

TEST(FrontierDirection, AllUnobservedFallsBackToUp) {
  OccupancyGrid g(1.0);
  EXPECT_EQ(infer_frontier_direction(g, Vec3(3.5, 0.5, -2.5)), Vec3::UnitZ());
}

TEST(FrontierDirection, SingleUnobservedNeighborHandSum) {
  const auto g = neighborhood({0, 0, 0}, [](int dx, int dy, int dz) { return dx == 1 && dy == 0 && dz == 0 ? 0 : -1; });
  // 26-term sum: +e_x for the unobserved neighbor, minus the other 25 unit offsets.
  Vec3 sum = Vec3::Zero();
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Vec3 o = Vec3(dx, dy, dz).normalized();
        sum += (dx == 1 && dy == 0 && dz == 0) ? o : -o;
      }
  EXPECT_NEAR(sum.x(), 2.0, 1e-12);
  EXPECT_NEAR(sum.y(), 0.0, 1e-12);
  const Vec3 d = infer_frontier_direction(g, Vec3(0.5, 0.5, 0.5));
  EXPECT_TRUE(d.isApprox(sum.normalized(), 1e-12));
}

TEST(FrontierDirection, UnitNormAndSignFlipUnderLabelSwap) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    std::array<int, 27> labels{};
    for (auto& l : labels) l = static_cast<int>(rng() % 3) - 1;  // -1 free, 0 unobserved, 1 occupied
    auto at = [&](int dx, int dy, int dz) { return labels[(dx + 1) * 9 + (dy + 1) * 3 + (dz + 1)]; };
    const auto g = neighborhood({4, -2, 7}, at);
    const auto swapped = neighborhood({4, -2, 7}, [&](int dx, int dy, int dz) { return at(dx, dy, dz) == 0 ? -1 : 0; });
    const Vec3 c = voxel_center({4, -2, 7}, 1.0);
    Vec3 raw = Vec3::Zero();
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz)
          if (dx || dy || dz) raw += (at(dx, dy, dz) == 0 ? 1.0 : -1.0) * Vec3(dx, dy, dz).normalized();
    if (raw.norm() < 1e-6) continue;
    const Vec3 a = infer_frontier_direction(g, c), b = infer_frontier_direction(swapped, c);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
    EXPECT_TRUE(a.isApprox(-b, 1e-9));
  }
}
