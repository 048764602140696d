#include "semray/geometry.hpp"

#include <algorithm>
#include <string>

namespace semray {

namespace {
constexpr double kRotationTolerance = 1e-6;
constexpr double kUnitTolerance = 1e-6;
}  // namespace

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho_err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho_err <= kRotationTolerance) || std::abs(rotation.determinant() - 1.0) > kRotationTolerance) {
    throw std::invalid_argument("Pose: rotation is not a proper orthonormal matrix");
  }
  if (!translation.allFinite()) throw std::invalid_argument("Pose: non-finite translation");
}

Pose Pose::lookAt(const Vec3& eye, const Vec3& target, const Vec3& down) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 y = down - down.dot(forward) * forward;
  if (y.norm() < 1e-9) {
    // Looking straight along `down`; pick any perpendicular.
    y = forward.unitOrthogonal();
  }
  y.normalize();
  const Vec3 x = y.cross(forward);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = forward;
  return Pose(r, eye);
}

Pose Pose::fromMatrix(std::span<const double, 16> m) {
  Mat3 r;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = m[i * 4 + j];
    t(i) = m[i * 4 + 3];
  }
  if (std::abs(m[12]) > 1e-9 || std::abs(m[13]) > 1e-9 || std::abs(m[14]) > 1e-9 ||
      std::abs(m[15] - 1.0) > 1e-9) {
    throw std::invalid_argument("Pose: last matrix row must be 0 0 0 1");
  }
  return Pose(r, t);
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

std::array<double, 16> Pose::toMatrix() const {
  std::array<double, 16> m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i * 4 + j] = rotation_(i, j);
    m[i * 4 + 3] = translation_(i);
  }
  m[15] = 1.0;
  return m;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
  if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: image size must be > 0");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("intrinsics: principal point outside the image");
  }
}

PixelProjection CameraIntrinsics::project(const Vec3& p_cam) const {
  if (!(p_cam.z() > 0.0)) throw std::domain_error("project: point is behind the camera");
  return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy, p_cam.z()};
}

void DepthImage::validate() const {
  if (height < 0 || width < 0 || values.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("depth image: buffer size does not match dimensions");
  }
  for (float v : values) {
    if (std::isnan(v) || (std::isfinite(v) && !(v > 0.0f)) || v == -std::numeric_limits<float>::infinity()) {
      throw std::invalid_argument("depth image: finite depths must be > 0");
    }
  }
}

void FeatureImage::validate() const {
  if (dim < 1) throw std::invalid_argument("feature image: dimension must be >= 1");
  if (values.size() != static_cast<std::size_t>(height) * width * dim) {
    throw std::invalid_argument("feature image: buffer size does not match dimensions");
  }
  if (std::any_of(values.begin(), values.end(), [](float v) { return std::isnan(v); })) {
    throw std::invalid_argument("feature image: NaN entry");
  }
}

SphericalAngles direction_to_angles(const Vec3& d) {
  if (std::abs(d.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("direction_to_angles: direction is not unit length");
  }
  double theta = std::atan2(d.y(), d.x());
  if (theta >= kPi) theta -= 2.0 * kPi;  // atan2 may return +pi exactly
  const double phi = std::acos(std::clamp(d.z(), -1.0, 1.0));
  return {theta, phi};
}

Vec3 angles_to_direction(double theta, double phi) {
  return {std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi)};
}

int theta_bin_count(double psi_deg) {
  if (!(psi_deg > 0.0)) throw std::invalid_argument("angle bin size must be > 0");
  return static_cast<int>(std::ceil(360.0 / psi_deg - 1e-9));
}

int phi_bin_count(double psi_deg) {
  if (!(psi_deg > 0.0)) throw std::invalid_argument("angle bin size must be > 0");
  return static_cast<int>(std::ceil(180.0 / psi_deg - 1e-9));
}

AngleBin angle_bin(double theta, double phi, double psi_deg) {
  const int n_theta = theta_bin_count(psi_deg);
  const int n_phi = phi_bin_count(psi_deg);
  // Radian round-off (deg2rad(60) -> 59.999...) must not drop a value below its bin edge.
  constexpr double kEdgeTol = 1e-9;
  const int tb = static_cast<int>(std::floor((rad2deg(theta) + 180.0) / psi_deg + kEdgeTol));
  const int pb = static_cast<int>(std::floor(rad2deg(phi) / psi_deg + kEdgeTol));
  return {std::clamp(tb, 0, n_theta - 1), std::clamp(pb, 0, n_phi - 1)};
}

Vec3 bin_center_direction(const AngleBin& bin, double psi_deg) {
  const double theta_deg = std::min((bin.theta_bin + 0.5) * psi_deg, 360.0) - 180.0;
  const double phi_deg = std::min((bin.phi_bin + 0.5) * psi_deg, 180.0);
  return angles_to_direction(deg2rad(theta_deg), deg2rad(phi_deg));
}

}  // namespace semray
