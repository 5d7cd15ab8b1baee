#pragma once

// Pinhole camera model, Euler-angle rotations and look-at construction.
//
// Conventions:
//  * World frame is right-handed with +z up.
//  * Camera frame: x right, y down, z along the optical axis.
//  * Extrinsics map world to camera: P_cam = R * P_world + t.
//  * EulerAngles compose as E = Rz(yaw) * Ry(pitch) * Rx(roll) (roll innermost).
//  * A camera orientation is parametrized by the Euler angles of its body frame
//    (x forward, y left, z up) in the world: R = body_to_camera() * E^T.
//    Zero angles look horizontally along world +x; positive yaw turns left,
//    positive pitch tilts down, roll spins about the optical axis.

#include "ptzcap/types.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace ptzcap {

/// Minimum camera-frame depth (meters) for a point to count as in front.
inline constexpr double kMinDepth = 1e-6;

class BehindCameraError : public NumericalError {
 public:
  BehindCameraError() : NumericalError("point is behind the camera") {}
};

class DegenerateUpVectorError : public NumericalError {
 public:
  DegenerateUpVectorError() : NumericalError("look-at up vector is parallel to the view direction") {}
};

struct CameraIntrinsics {
  Mat3 K = Mat3::Identity();
  int width = 0;
  int height = 0;

  static CameraIntrinsics from_focal(double fx, double fy, double cx, double cy, int width, int height) {
    CameraIntrinsics in;
    in.K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    in.width = width;
    in.height = height;
    return in;
  }

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  Vec2 principal_point() const { return {K(0, 2), K(1, 2)}; }
  Vec2 image_size() const { return {static_cast<double>(width), static_cast<double>(height)}; }

  /// Throws InputError if focal lengths, principal point or det(K) are invalid.
  void validate() const {
    if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) throw InputError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InputError("intrinsics: image size must be positive");
    if (K(0, 2) < 0.0 || K(0, 2) > width || K(1, 2) < 0.0 || K(1, 2) > height)
      throw InputError("intrinsics: principal point outside the image");
    if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0) throw InputError("intrinsics: K must be upper triangular");
    if (std::abs(K.determinant()) < 1e-12) throw InputError("intrinsics: K is singular");
  }

  bool contains(const Vec2& px) const { return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= width && px.y() <= height; }
};

struct CameraExtrinsics {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  /// Extrinsics of a camera centered at `center` with world-to-camera rotation R.
  static CameraExtrinsics from_center(const Mat3& R, const Vec3& center) { return {R, -R * center}; }
  Vec3 center() const { return -R.transpose() * t; }
};

/// Projects a world point to Euclidean pixel coordinates. Throws BehindCameraError.
inline Vec2 project(const Vec3& p_world, const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  const Vec3 pc = extr.R * p_world + extr.t;
  if (!(pc.z() > kMinDepth)) throw BehindCameraError();
  const Vec3 h = intr.K * pc;
  return h.head<2>() / h.z();
}

struct EulerAngles {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  Vec3 as_vector() const { return {yaw, pitch, roll}; }
  static EulerAngles from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

namespace detail {

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}
inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}
inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}
inline Mat3 d_rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}
inline Mat3 d_rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}
inline Mat3 d_rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

}  // namespace detail

inline Mat3 rotation_x(double a) { return detail::rot_x(a); }
inline Mat3 rotation_y(double a) { return detail::rot_y(a); }
inline Mat3 rotation_z(double a) { return detail::rot_z(a); }

/// E = Rz(yaw) * Ry(pitch) * Rx(roll). Always a proper rotation.
inline Mat3 euler_to_matrix(const EulerAngles& a) {
  return detail::rot_z(a.yaw) * detail::rot_y(a.pitch) * detail::rot_x(a.roll);
}

/// Partial derivatives of euler_to_matrix with respect to (yaw, pitch, roll).
inline std::array<Mat3, 3> euler_to_matrix_derivatives(const EulerAngles& a) {
  const Mat3 z = detail::rot_z(a.yaw), y = detail::rot_y(a.pitch), x = detail::rot_x(a.roll);
  return {detail::d_rot_z(a.yaw) * y * x, z * detail::d_rot_y(a.pitch) * x, z * y * detail::d_rot_x(a.roll)};
}

struct EulerDecomposition {
  EulerAngles angles;
  /// Set when |pitch| is within 1e-6 of pi/2. Roll is then fixed to 0 and the
  /// remaining rotation about z is reported as yaw.
  bool gimbal_lock = false;
};

inline EulerDecomposition matrix_to_euler(const Mat3& R) {
  constexpr double kGimbalTolerance = 1e-6;
  EulerDecomposition out;
  const double cp = std::hypot(R(0, 0), R(1, 0));
  out.angles.pitch = std::atan2(-R(2, 0), cp);
  if (std::abs(std::abs(out.angles.pitch) - std::numbers::pi / 2) < kGimbalTolerance) {
    out.gimbal_lock = true;
    out.angles.roll = 0.0;
    out.angles.yaw = std::atan2(-R(0, 1), R(1, 1));
    return out;
  }
  out.angles.yaw = std::atan2(R(1, 0), R(0, 0));
  out.angles.roll = std::atan2(R(2, 1), R(2, 2));
  return out;
}

/// Maps body axes (x forward, y left, z up) onto camera axes (x right, y down, z forward).
inline const Mat3& body_to_camera() {
  static const Mat3 m = [] {
    Mat3 c;
    c << 0, -1, 0, 0, 0, -1, 1, 0, 0;
    return c;
  }();
  return m;
}

/// World-to-camera rotation of a camera whose body frame has the given Euler angles.
inline Mat3 camera_rotation(const EulerAngles& a) { return body_to_camera() * euler_to_matrix(a).transpose(); }

inline std::array<Mat3, 3> camera_rotation_derivatives(const EulerAngles& a) {
  auto d = euler_to_matrix_derivatives(a);
  for (auto& m : d) m = body_to_camera() * m.transpose();
  return d;
}

inline EulerDecomposition camera_angles(const Mat3& R_world_to_camera) {
  return matrix_to_euler(R_world_to_camera.transpose() * body_to_camera());
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

/// Removes 2*pi jumps so consecutive samples differ by less than pi.
inline void unwrap_angles(std::vector<double>& a) {
  for (std::size_t i = 1; i < a.size(); ++i) a[i] = a[i - 1] + wrap_angle(a[i] - a[i - 1]);
}

/// Nearest rotation in Frobenius norm (orthogonal polar factor with det = +1).
inline Mat3 nearest_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

/// Look-at extrinsics with camera x = right, y = down, z = towards target.
inline CameraExtrinsics look_at(const Vec3& cam_pos, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  const Vec3 diff = target - cam_pos;
  if (diff.norm() < 1e-12) throw InputError("look-at target coincides with the camera position");
  const Vec3 forward = diff.normalized();
  const Vec3 side = forward.cross(up);
  if (side.norm() < 1e-9 * up.norm()) throw DegenerateUpVectorError();
  const Vec3 right = side.normalized();
  const Vec3 down = forward.cross(right);
  Mat3 R;
  R.row(0) = right.transpose();
  R.row(1) = down.transpose();
  R.row(2) = forward.transpose();
  return CameraExtrinsics::from_center(R, cam_pos);
}

/// Look-at that pans and tilts the camera so the target lands on `subject_px`,
/// given in normalized image coordinates ((0.5, 0.5) is the image center).
/// The camera turns opposite to the subject's offset from the center.
inline CameraExtrinsics look_at_with_fov_shift(const Vec3& cam_pos, const Vec3& target, const Vec3& up,
                                               const CameraIntrinsics& intr, const Vec2& subject_px) {
  CameraExtrinsics centered = look_at(cam_pos, target, up);
  const Vec2 px = subject_px.cwiseProduct(intr.image_size());
  // The centered look-at puts the target on the optical axis; rotate that axis onto this ray.
  const Vec3 ray = intr.K.inverse() * Vec3(px.x(), px.y(), 1.0);
  const double xn = ray.x() / ray.z();
  const double yn = ray.y() / ray.z();
  const double tilt = -std::atan(yn);
  const double pan = std::atan(xn * std::cos(tilt));
  const Mat3 shift = detail::rot_x(tilt) * detail::rot_y(pan);
  return CameraExtrinsics::from_center(shift * centered.R, cam_pos);
}

/// One fixed-position pan-tilt camera.
struct RigCamera {
  /// One entry (fixed zoom) or one per frame.
  std::vector<CameraIntrinsics> intrinsics;
  /// Camera center in world coordinates (meters).
  Vec3 center = Vec3::Zero();
  /// Known world-to-camera rotation track, one per frame; empty when unknown.
  std::vector<Mat3> rotations;

  const CameraIntrinsics& intrinsics_at(int f) const {
    return intrinsics.size() == 1 ? intrinsics.front() : intrinsics.at(static_cast<std::size_t>(f));
  }
  bool has_rotations() const { return !rotations.empty(); }
  CameraExtrinsics extrinsics_at(int f) const { return CameraExtrinsics::from_center(rotations.at(f), center); }
};

struct CameraRig {
  std::vector<RigCamera> cameras;
  int n_frames = 0;

  int n_cameras() const { return static_cast<int>(cameras.size()); }

  bool has_rotations() const {
    if (cameras.empty()) return false;
    for (const auto& c : cameras)
      if (!c.has_rotations()) return false;
    return true;
  }

  Vec3 centroid() const {
    Vec3 m = Vec3::Zero();
    for (const auto& c : cameras) m += c.center;
    return cameras.empty() ? m : Vec3(m / static_cast<double>(cameras.size()));
  }

  /// Throws InputError when per-frame lists do not match n_frames or intrinsics are invalid.
  void validate() const {
    for (const auto& c : cameras) {
      if (c.intrinsics.empty()) throw InputError("camera without intrinsics");
      if (c.intrinsics.size() != 1 && static_cast<int>(c.intrinsics.size()) != n_frames)
        throw InputError("per-frame intrinsics do not match the frame count");
      for (const auto& k : c.intrinsics) k.validate();
      if (c.has_rotations() && static_cast<int>(c.rotations.size()) != n_frames)
        throw InputError("rotation track does not match the frame count");
    }
  }

  CameraRig select_cameras(const std::vector<int>& cams) const {
    CameraRig out;
    out.n_frames = n_frames;
    for (int c : cams) out.cameras.push_back(cameras.at(static_cast<std::size_t>(c)));
    return out;
  }
};

}  // namespace ptzcap
