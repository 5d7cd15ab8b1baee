#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptzcap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// One pose: N_J rows of (x, y, z) in meters.
using Pose = Eigen::Matrix<double, Eigen::Dynamic, 3>;
/// One 2D pose: N_J rows of (x, y) in pixels.
using Pose2d = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Errors caused by malformed or inconsistent inputs (files, shapes, flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors caused by numerical breakdown (degenerate geometry, non-finite energy).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A 2D joint detection. Invisible detections carry no information.
struct Detection {
  Vec2 px = Vec2::Zero();
  double confidence = 0.0;
  bool visible = false;
};

/// Dense frame x camera x joint table of detections.
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(int n_frames, int n_cameras, int n_joints)
      : n_frames_(n_frames), n_cameras_(n_cameras), n_joints_(n_joints),
        data_(static_cast<std::size_t>(n_frames) * n_cameras * n_joints) {
    if (n_frames < 0 || n_cameras < 0 || n_joints < 0)
      throw InputError("observation set dimensions must be non-negative");
  }

  int n_frames() const { return n_frames_; }
  int n_cameras() const { return n_cameras_; }
  int n_joints() const { return n_joints_; }

  Detection& at(int f, int c, int j) { return data_[index(f, c, j)]; }
  const Detection& at(int f, int c, int j) const { return data_[index(f, c, j)]; }

  std::size_t visible_count() const {
    std::size_t n = 0;
    for (const auto& d : data_) n += d.visible ? 1 : 0;
    return n;
  }

  /// Keeps only the listed cameras, in the given order.
  ObservationSet select_cameras(const std::vector<int>& cams) const {
    ObservationSet out(n_frames_, static_cast<int>(cams.size()), n_joints_);
    for (int f = 0; f < n_frames_; ++f)
      for (std::size_t k = 0; k < cams.size(); ++k)
        for (int j = 0; j < n_joints_; ++j) out.at(f, static_cast<int>(k), j) = at(f, cams[k], j);
    return out;
  }

 private:
  std::size_t index(int f, int c, int j) const {
    return (static_cast<std::size_t>(f) * n_cameras_ + c) * n_joints_ + j;
  }

  int n_frames_ = 0;
  int n_cameras_ = 0;
  int n_joints_ = 0;
  std::vector<Detection> data_;
};

/// World-space joint positions over time. Stored channel-major: row 3*j+d, column f.
class PoseTrajectory {
 public:
  PoseTrajectory() = default;
  PoseTrajectory(int n_frames, int n_joints) : channels_(Eigen::MatrixXd::Zero(3 * n_joints, n_frames)) {}
  explicit PoseTrajectory(Eigen::MatrixXd channels) : channels_(std::move(channels)) {
    if (channels_.rows() % 3 != 0) throw InputError("trajectory channel count must be a multiple of 3");
  }

  int n_frames() const { return static_cast<int>(channels_.cols()); }
  int n_joints() const { return static_cast<int>(channels_.rows() / 3); }

  Vec3 joint(int f, int j) const { return channels_.block<3, 1>(3 * j, f); }
  void set_joint(int f, int j, const Vec3& p) { channels_.block<3, 1>(3 * j, f) = p; }

  Pose pose(int f) const {
    Pose p(n_joints(), 3);
    for (int j = 0; j < n_joints(); ++j) p.row(j) = joint(f, j).transpose();
    return p;
  }
  void set_pose(int f, const Pose& p) {
    for (int j = 0; j < n_joints(); ++j) set_joint(f, j, p.row(j).transpose());
  }

  std::vector<Pose> poses() const {
    std::vector<Pose> out;
    out.reserve(n_frames());
    for (int f = 0; f < n_frames(); ++f) out.push_back(pose(f));
    return out;
  }

  const Eigen::MatrixXd& channels() const { return channels_; }
  Eigen::MatrixXd& channels() { return channels_; }

 private:
  Eigen::MatrixXd channels_;
};

/// Relative rotations between consecutive frames of one camera.
/// Entry f maps camera coordinates at frame f to frame f+1.
struct DeltaTrack {
  std::vector<Mat3> rotations;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> interpolated;

  std::size_t size() const { return rotations.size(); }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v ? 1 : 0;
    return n;
  }
};

/// Per-camera delta tracks; each has N_F - 1 entries.
using RotationDeltas = std::vector<DeltaTrack>;

/// Per camera, per frame world-to-camera rotations.
using RotationTracks = std::vector<std::vector<Mat3>>;

}  // namespace ptzcap
