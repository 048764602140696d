#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <unistd.h>

#include "semray/dataset_io.hpp"

using namespace semray;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("semray_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

DatasetError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DatasetError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no DatasetError thrown";
  return DatasetError::Kind::Malformed;
}

void truncate_file(const fs::path& p, std::uintmax_t drop) { fs::resize_file(p, fs::file_size(p) - drop); }

SceneSpec tiny_scene(double depth_range = std::numeric_limits<double>::infinity()) {
  SceneSpec s;
  s.bounds_min = Vec3(-5, -5, -5);
  s.bounds_max = Vec3(5, 5, 5);
  s.objects = {{{2, -1, -1}, {3, 1, 1}, 1}, {{-1, 2, -1}, {1, 4, 1}, 2}};
  s.intrinsics = {4.0, 4.0, 3.5, 2.5, 8, 6};
  s.feature_dim = 4;
  s.depth_range = depth_range;
  s.trajectory = {Pose::lookAt(Vec3(-2, 0, 0), Vec3(2.5, 0, 0)), Pose::lookAt(Vec3(0, -2, 0.2), Vec3(0, 3, 0))};
  return s;
}

// Fixed-step march along the ray; independent of the slab intersection.
double marched_depth(const SceneSpec& s, const Pose& pose, const Vec3& ray_cam, int* cls) {
  const Vec3 dir = pose.rotate(ray_cam);
  constexpr double step = 1e-3;
  for (double t = step; t < 40.0; t += step) {
    const Vec3 p = pose.translation() + t * dir;
    for (const auto& o : s.objects) {
      if (o.containsClosed(p)) {
        *cls = o.class_id;
        return t;
      }
    }
  }
  *cls = 0;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

TEST(DatasetIo, IntrinsicsAndPoseRoundTrip) {
  TempDir d;
  const CameraIntrinsics intr{525.5, 524.25, 319.5, 239.5, 640, 480};
  write_intrinsics(d.path() / "i.txt", intr);
  const auto back = read_intrinsics(d.path() / "i.txt");
  EXPECT_EQ(back.fx, intr.fx);
  EXPECT_EQ(back.fy, intr.fy);
  EXPECT_EQ(back.cx, intr.cx);
  EXPECT_EQ(back.cy, intr.cy);
  EXPECT_EQ(back.width, 640);
  EXPECT_EQ(back.height, 480);

  const Pose p = Pose::lookAt(Vec3(1.25, -3, 0.5), Vec3(4, 2, -1));
  write_pose(d.path() / "p.pose", p);
  const Pose q = read_pose(d.path() / "p.pose");
  EXPECT_EQ(q.toMatrix(), p.toMatrix());
}

TEST(DatasetIo, DepthFeatureQueryRoundTrip) {
  TempDir d;
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(0.1f, 10.0f);
  DepthImage depth(5, 7);
  for (auto& v : depth.values) v = u(rng);
  depth.at(2, 3) = std::numeric_limits<float>::infinity();
  write_depth(d.path() / "a.depth", depth);
  EXPECT_EQ(read_depth(d.path() / "a.depth").values, depth.values);

  FeatureImage feat(5, 7, 3);
  for (auto& v : feat.values) v = u(rng) - 5.0f;
  write_features(d.path() / "a.feat", feat);
  const auto fb = read_features(d.path() / "a.feat");
  EXPECT_EQ(fb.dim, 3);
  EXPECT_EQ(fb.values, feat.values);

  QuerySet qs;
  qs.labels = {{"chair", {0.6f, 0.8f, 0.0f}}, {"", {0.0f, 0.0f, 1.0f}}};
  write_queries(d.path() / "q.bin", qs);
  const auto qb = read_queries(d.path() / "q.bin");
  ASSERT_EQ(qb.size(), 2u);
  EXPECT_EQ(qb.labels[0].name, "chair");
  EXPECT_EQ(qb.labels[1].name, "");
  EXPECT_EQ(qb.labels[0].embedding, qs.labels[0].embedding);
}

TEST(DatasetIo, GroundTruthRoundTripAndBoundsFallback) {
  TempDir d;
  std::map<VoxelKey, int> cells = {{{0, 0, 0}, 1}, {{1, 2, 3}, 4}, {{-2, 0, 1}, 0}};
  const GroundTruth gt(0.5, Vec3(-2, -1, -1), Vec3(3, 3, 3), cells);
  write_ground_truth(d.path() / "gt.bin", gt);
  const auto back = read_ground_truth(d.path() / "gt.bin");
  EXPECT_EQ(back.cells(), gt.cells());
  EXPECT_EQ(back.resolution(), 0.5);
  EXPECT_EQ(back.boundsMin(), gt.boundsMin());
  EXPECT_EQ(back.boundsMax(), gt.boundsMax());

  fs::remove(d.path() / "bounds.txt");
  const auto tight = read_ground_truth(d.path() / "gt.bin");
  EXPECT_EQ(tight.cells(), gt.cells());
  EXPECT_TRUE(tight.boundsMin().isApprox(Vec3(-1.0, 0.0, 0.0)));
  EXPECT_TRUE(tight.boundsMax().isApprox(Vec3(1.0, 1.5, 2.0)));
}

TEST(DatasetIo, DistinctErrorKinds) {
  TempDir d;
  EXPECT_EQ(kind_of([&] { read_depth(d.path() / "missing.depth"); }), DatasetError::Kind::MissingFile);

  write_depth(d.path() / "a.depth", DepthImage(3, 3, 1.0f));
  fs::copy_file(d.path() / "a.depth", d.path() / "b.depth");
  EXPECT_EQ(kind_of([&] { read_features(d.path() / "b.depth"); }), DatasetError::Kind::BadMagic);

  truncate_file(d.path() / "a.depth", 5);
  EXPECT_EQ(kind_of([&] { read_depth(d.path() / "a.depth"); }), DatasetError::Kind::Truncated);

  {
    std::ofstream out(d.path() / "x.pose");
    out << "1 0 0 0\n0 1 0 0\n0 0 1 zero\n";
  }
  EXPECT_EQ(kind_of([&] { read_pose(d.path() / "x.pose"); }), DatasetError::Kind::Malformed);
  {
    std::ofstream out(d.path() / "y.pose");
    out << "1 0 0 0 0 1 0 0 0 0 1 0\n";
  }
  EXPECT_EQ(kind_of([&] { read_pose(d.path() / "y.pose"); }), DatasetError::Kind::Truncated);
}

TEST(DatasetIo, EmptyAndMissingDirectories) {
  TempDir d;
  const FrameStream empty(d.path());
  EXPECT_TRUE(empty.empty());
  EXPECT_TRUE(read_frame_stream(d.path()).empty());
  EXPECT_EQ(kind_of([&] { FrameStream s(d.path() / "nope"); }), DatasetError::Kind::MissingFile);
}

TEST(DatasetIo, SceneRoundTripAndTruncatedFrameNamed) {
  TempDir d;
  const auto scene = generate_synthetic_scene(tiny_scene());
  write_scene(d.path(), scene);
  const auto frames = read_frame_stream(d.path());
  ASSERT_EQ(frames.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(frames[i].index, i);
    EXPECT_EQ(frames[i].depth.values, scene.frames[i].depth.values);
    EXPECT_EQ(frames[i].features.values, scene.frames[i].features.values);
  }

  truncate_file(d.path() / (frame_stem(1) + ".feat"), 4);
  const FrameStream stream(d.path());
  EXPECT_NO_THROW(stream.read(0));
  try {
    stream.read(1);
    FAIL() << "expected a truncation error";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::Truncated);
    ASSERT_TRUE(e.frame().has_value());
    EXPECT_EQ(*e.frame(), 1u);
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
  }
}

TEST(DatasetIo, DimensionMismatchAcrossFiles) {
  TempDir d;
  auto scene = generate_synthetic_scene(tiny_scene());
  write_scene(d.path(), scene);
  write_features(d.path() / (frame_stem(0) + ".feat"), FeatureImage(5, 8, 4));
  const FrameStream stream(d.path());
  EXPECT_EQ(kind_of([&] { stream.read(0); }), DatasetError::Kind::DimensionMismatch);
}

TEST(SyntheticScene, DepthAndClassesMatchMarchingOracle) {
  const auto spec = tiny_scene();
  const auto scene = generate_synthetic_scene(spec);
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const auto& fr = scene.frames[f];
    for (int r = 0; r < spec.intrinsics.height; ++r) {
      for (int c = 0; c < spec.intrinsics.width; ++c) {
        int cls = -1;
        const double t = marched_depth(spec, fr.pose, spec.intrinsics.pixelRay(c, r), &cls);
        const float d = fr.depth.at(r, c);
        if (std::isinf(t)) {
          EXPECT_TRUE(std::isinf(d)) << f << " " << r << " " << c;
        } else {
          EXPECT_NEAR(d, t, 2e-3) << f << " " << r << " " << c;
        }
        const auto px = fr.features.pixel(r, c);
        EXPECT_EQ(px[cls], 1.0f);
        EXPECT_NEAR(std::accumulate(px.begin(), px.end(), 0.0f), 1.0f, 0.0f);
      }
    }
  }
}

TEST(SyntheticScene, RangeCutoffKeepsClassDropsDepth) {
  const auto full = generate_synthetic_scene(tiny_scene());
  const double range = 3.5;
  const auto cut = generate_synthetic_scene(tiny_scene(range));
  const auto& intr = full.frames[0].intrinsics;
  int dropped = 0, kept = 0;
  for (std::size_t f = 0; f < full.frames.size(); ++f) {
    for (int r = 0; r < intr.height; ++r) {
      for (int c = 0; c < intr.width; ++c) {
        const float d = full.frames[f].depth.at(r, c);
        const double euclid = d * intr.pixelRay(c, r).norm();
        if (std::isfinite(d) && euclid <= range) {
          EXPECT_EQ(cut.frames[f].depth.at(r, c), d);
          ++kept;
        } else {
          EXPECT_TRUE(std::isinf(cut.frames[f].depth.at(r, c)));
          dropped += std::isfinite(d) ? 1 : 0;
        }
      }
    }
    EXPECT_EQ(cut.frames[f].features.values, full.frames[f].features.values);
  }
  EXPECT_GT(kept, 0);
  EXPECT_GT(dropped, 0);
}

TEST(SyntheticScene, GroundTruthCellsAreBoxCenters) {
  auto spec = tiny_scene();
  spec.gt_resolution = 0.5;
  const auto scene = generate_synthetic_scene(spec);
  const double res = 0.5;
  std::size_t expected = 0;
  for (int ix = -10; ix < 10; ++ix)
    for (int iy = -10; iy < 10; ++iy)
      for (int iz = -10; iz < 10; ++iz) {
        const VoxelKey k{ix, iy, iz};
        const Vec3 c = voxel_center(k, res);
        int cls = -1;
        for (const auto& o : spec.objects) {
          if (o.containsClosed(c)) {
            cls = o.class_id;
            break;
          }
        }
        const auto it = scene.gt.cells().find(k);
        if (cls < 0) {
          EXPECT_EQ(it, scene.gt.cells().end());
        } else {
          ++expected;
          ASSERT_NE(it, scene.gt.cells().end());
          EXPECT_EQ(it->second, cls);
        }
      }
  EXPECT_EQ(scene.gt.cells().size(), expected);
  EXPECT_EQ(expected, 2u * 4 * 4 + 4u * 4 * 4);
}

TEST(SyntheticScene, QueriesAreOneHotPerClass) {
  const auto scene = generate_synthetic_scene(tiny_scene());
  ASSERT_EQ(scene.queries.size(), 3u);
  EXPECT_NO_THROW(scene.queries.validate());
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(scene.queries.labels[c].embedding[c], 1.0f);
}

TEST(SyntheticScene, ValidationRejectsBadSpecs) {
  auto s = tiny_scene();
  s.trajectory.push_back(Pose::lookAt(Vec3(2.5, 0, 0), Vec3(3, 3, 0)));
  EXPECT_THROW(generate_synthetic_scene(s), std::invalid_argument);
  s = tiny_scene();
  s.feature_dim = 2;
  EXPECT_THROW(generate_synthetic_scene(s), std::invalid_argument);
  s = tiny_scene();
  s.objects.push_back({{4, 4, 4}, {6, 6, 6}, 1});
  EXPECT_THROW(generate_synthetic_scene(s), std::invalid_argument);
}

TEST(RayBox, EntryCases) {
  const Box b{{1, -1, -1}, {2, 1, 1}, 1};
  EXPECT_DOUBLE_EQ(*ray_box_entry(Vec3::Zero(), Vec3::UnitX(), b), 1.0);
  EXPECT_FALSE(ray_box_entry(Vec3::Zero(), -Vec3::UnitX(), b));
  EXPECT_FALSE(ray_box_entry(Vec3(1.5, 0, 0), Vec3::UnitX(), b));  // starts inside
  EXPECT_FALSE(ray_box_entry(Vec3(0, 2, 0), Vec3::UnitX(), b));
}

namespace {

std::vector<std::vector<float>> correlated_samples(std::mt19937& rng, int n, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) mix(i, j) = g(rng) / (1.0 + i);
  std::vector<std::vector<float>> out(n, std::vector<float>(d));
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = g(rng) * (d - i);
    const Eigen::VectorXd x = mix * z + Eigen::VectorXd::Constant(d, 0.5);
    for (int i = 0; i < d; ++i) out[s][i] = static_cast<float>(x(i));
  }
  return out;
}

}  // namespace

TEST(Compressor, MatchesSvdOracle) {
  std::mt19937 rng(11);
  const int d = 6, k = 3, n = 400;
  const auto samples = correlated_samples(rng, n, d);
  const auto c = fit_compressor(samples, k);

  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = samples[i][j];
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();

  EXPECT_TRUE((c.basis.transpose() * c.basis).isApprox(Eigen::MatrixXd::Identity(k, k), 1e-9));
  for (int i = 0; i < k; ++i) {
    EXPECT_NEAR(c.variances(i), sv(i) * sv(i) / (n - 1), 1e-6 * sv(0) * sv(0));
    EXPECT_NEAR(std::abs(c.basis.col(i).dot(svd.matrixV().col(i))), 1.0, 1e-6);
    if (i > 0) {
      EXPECT_GE(c.variances(i - 1), c.variances(i));
    }
  }
  EXPECT_NEAR(c.total_variance, sv.squaredNorm() / (n - 1), 1e-6 * sv.squaredNorm());
  EXPECT_FALSE(c.degenerate);
  EXPECT_GT(c.retainedVarianceRatio(), 0.0);
  EXPECT_LE(c.retainedVarianceRatio(), 1.0 + 1e-12);
}

TEST(Compressor, FullRankReconstructsExactly) {
  std::mt19937 rng(5);
  const auto samples = correlated_samples(rng, 50, 4);
  const auto c = fit_compressor(samples, 4);
  for (const auto& s : samples) {
    const auto back = reconstruct(c, compress(c, s));
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(back[i], s[i], 1e-3);
  }
  EXPECT_NEAR(c.retainedVarianceRatio(), 1.0, 1e-9);
}

TEST(Compressor, ImageMatchesPerPixel) {
  std::mt19937 rng(8);
  const auto samples = correlated_samples(rng, 60, 5);
  const auto c = fit_compressor(samples, 2);
  FeatureImage img(3, 4, 5);
  for (std::size_t i = 0; i < 12; ++i) std::copy(samples[i].begin(), samples[i].end(), img.values.begin() + i * 5);
  const auto out = compress_image(c, img);
  ASSERT_EQ(out.dim, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto z = compress(c, samples[i]);
    EXPECT_NEAR(out.values[i * 2], z[0], 1e-4);
    EXPECT_NEAR(out.values[i * 2 + 1], z[1], 1e-4);
  }
}

TEST(Compressor, DegenerateAndInvalidInputs) {
  std::vector<std::vector<float>> flat(20, std::vector<float>{1.0f, 2.0f, 3.0f});
  for (int i = 0; i < 20; ++i) flat[i][0] = static_cast<float>(i);
  const auto c = fit_compressor(flat, 2);
  EXPECT_TRUE(c.degenerate);
  EXPECT_THROW(fit_compressor(flat, 0), std::invalid_argument);
  EXPECT_THROW(fit_compressor(flat, 4), std::invalid_argument);
  EXPECT_THROW(fit_compressor({{1.0f, 2.0f}, {3.0f, 4.0f}}, 2), std::invalid_argument);
  EXPECT_THROW(fit_compressor({}, 1), std::invalid_argument);
}
