#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace semray {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Rigid world-from-camera transform.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  /// Throws std::invalid_argument unless `rotation` is orthonormal with det +1 (tolerance 1e-6).
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return Pose(); }
  static Pose fromTranslation(const Vec3& t) { return Pose(Mat3::Identity(), t); }
  /// Builds a camera pose at `eye` whose optical (+z) axis points at `target`; image +y maps to
  /// the projection of `down` onto the image plane.
  static Pose lookAt(const Vec3& eye, const Vec3& target, const Vec3& down = Vec3(0, 0, -1));
  /// Row-major 4x4 homogeneous matrix; the last row must be (0,0,0,1).
  static Pose fromMatrix(std::span<const double, 16> m);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 transform(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 inverseTransform(const Vec3& p) const { return rotation_.transpose() * (p - translation_); }
  Vec3 rotate(const Vec3& d) const { return rotation_ * d; }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  std::array<double, 16> toMatrix() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// R*p + t.
inline Vec3 transform_point(const Pose& pose, const Vec3& p) { return pose.transform(p); }

struct PixelProjection {
  double u;
  double v;
  double depth;
};

/// Pinhole camera without distortion.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;

  /// Throws std::domain_error for points at or behind the image plane.
  PixelProjection project(const Vec3& p_cam) const;

  /// Unnormalized camera-frame ray (x, y, 1) through pixel (u, v).
  Vec3 pixelRay(double u, double v) const { return Vec3((u - cx) / fx, (v - cy) / fy, 1.0); }

  bool operator==(const CameraIntrinsics&) const = default;
};

inline PixelProjection project_point(const CameraIntrinsics& intr, const Vec3& p_cam) {
  return intr.project(p_cam);
}

/// Row-major H x W depth in meters. Out-of-range pixels hold +infinity.
struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  DepthImage() = default;
  DepthImage(int h, int w, float fill = std::numeric_limits<float>::infinity())
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  std::size_t size() const { return values.size(); }

  /// Throws when a finite value is not strictly positive or the buffer size is wrong.
  void validate() const;
};

/// Row-major H x W x D feature image.
struct FeatureImage {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> values;

  FeatureImage() = default;
  FeatureImage(int h, int w, int d, float fill = 0.0f)
      : height(h), width(w), dim(d), values(static_cast<std::size_t>(h) * w * d, fill) {}

  std::span<float> pixel(int row, int col) {
    return {values.data() + (static_cast<std::size_t>(row) * width + col) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<const float> pixel(int row, int col) const {
    return {values.data() + (static_cast<std::size_t>(row) * width + col) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<const float> pixel(std::size_t flat_index) const {
    return {values.data() + flat_index * dim, static_cast<std::size_t>(dim)};
  }

  void validate() const;
};

/// Integer cell index of a point at a given resolution.
struct VoxelKey {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  auto operator<=>(const VoxelKey&) const = default;

  VoxelKey operator+(const VoxelKey& o) const { return {ix + o.ix, iy + o.iy, iz + o.iz}; }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Large primes from the Teschner et al. spatial hash.
    std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.ix)) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.iy)) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.iz)) * 83492791ULL;
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0x9E3779B97F4A7C15ULL);
  }
};

inline std::int32_t floor_div(std::int32_t a, std::int32_t b) {
  std::int32_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline VoxelKey voxel_key(const Vec3& p, double resolution) {
  return {static_cast<std::int32_t>(std::floor(p.x() / resolution)),
          static_cast<std::int32_t>(std::floor(p.y() / resolution)),
          static_cast<std::int32_t>(std::floor(p.z() / resolution))};
}

inline Vec3 voxel_center(const VoxelKey& k, double resolution) {
  return {(k.ix + 0.5) * resolution, (k.iy + 0.5) * resolution, (k.iz + 0.5) * resolution};
}

/// Key of the coarse cell (side `factor` fine cells) containing a fine key.
inline VoxelKey coarsen(const VoxelKey& k, std::int32_t factor) {
  return {floor_div(k.ix, factor), floor_div(k.iy, factor), floor_div(k.iz, factor)};
}

struct SphericalAngles {
  double theta;  // azimuth, [-pi, pi)
  double phi;    // zenith, [0, pi]
};

/// theta = atan2(d.y, d.x), phi = acos(d.z). Throws for non-unit input (tolerance 1e-6).
SphericalAngles direction_to_angles(const Vec3& d);

/// Inverse of direction_to_angles.
Vec3 angles_to_direction(double theta, double phi);

struct AngleBin {
  int theta_bin = 0;
  int phi_bin = 0;

  auto operator<=>(const AngleBin&) const = default;
};

int theta_bin_count(double psi_deg);
int phi_bin_count(double psi_deg);

/// Discretizes (theta, phi) into psi-degree bins. phi == pi falls into the last zenith bin.
AngleBin angle_bin(double theta, double phi, double psi_deg);

/// Unit direction through the center of a bin.
Vec3 bin_center_direction(const AngleBin& bin, double psi_deg);

}  // namespace semray

template <>
struct std::hash<semray::VoxelKey> : semray::VoxelKeyHash {};
