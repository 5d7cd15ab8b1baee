#pragma once

// Objective terms for multi-view pose reconstruction with analytic gradients:
//   E = lambda_rep * E_rep + lambda_limbs * E_limbs + lambda_rot * E_rot
// E_rep   robust, confidence-weighted reprojection error
// E_limbs squared deviation of limb lengths from the skeleton reference
// E_rot   Frobenius mismatch between measured and estimated inter-frame rotations

#include "ptzcap/camera.hpp"
#include "ptzcap/motion_basis.hpp"
#include "ptzcap/skeleton.hpp"
#include "ptzcap/types.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace ptzcap {

struct EnergyWeights {
  double lambda_rep = 80.0;
  double lambda_limbs = 1.0;
  double lambda_rot = 0.0;
  double sigma_sq = 100.0;  // px^2

  static EnergyWeights calibrated() { return {80.0, 1.0, 0.0, 100.0}; }
  static EnergyWeights uncalibrated() { return {500.0, 1.0, 10000.0, 100.0}; }

  void validate() const {
    if (lambda_rep < 0.0 || lambda_limbs < 0.0 || lambda_rot < 0.0) throw InputError("energy weights must be >= 0");
    if (!(sigma_sq > 0.0)) throw InputError("sigma_sq must be > 0");
  }
};

struct EnergyBreakdown {
  double total = 0.0;
  double e_rep = 0.0;
  double e_limbs = 0.0;
  double e_rot = 0.0;
  Eigen::VectorXd gradient;
};

/// Residual (px) charged for a projection behind the camera, and the cap on any
/// reprojection error. Capped terms carry no gradient.
inline constexpr double kBehindCameraResidualPx = 1e4;

/// Zero-mean normal density with variance sigma_sq.
inline double normal_density(double x, double sigma_sq) {
  return std::exp(-0.5 * x * x / sigma_sq) / std::sqrt(2.0 * std::numbers::pi * sigma_sq);
}

/// g(e) = (n(0) - n(e)) e; optionally dg/de.
inline double robust_norm(double e, double sigma_sq, double* derivative = nullptr) {
  const double n0 = normal_density(0.0, sigma_sq);
  const double ne = normal_density(e, sigma_sq);
  if (derivative) *derivative = n0 - ne + e * e / sigma_sq * ne;
  return (n0 - ne) * e;
}

/// Supremum of dg/de over e >= 0, attained at e^2 = 3 sigma^2.
inline double robust_norm_slope_bound(double sigma_sq) {
  return normal_density(0.0, sigma_sq) * (1.0 + 2.0 * std::exp(-1.5));
}

inline double robust_distance(const Vec2& projected, const Vec2& observed, double confidence, double sigma_sq) {
  return robust_norm(((projected - observed) * confidence).norm(), sigma_sq);
}

/// World-to-camera rotations for every (frame, camera), optionally with their
/// derivatives with respect to the camera Euler angles.
class RotationField {
 public:
  RotationField() = default;

  static RotationField from_tracks(const RotationTracks& tracks, int n_frames) {
    RotationField r;
    r.n_frames_ = n_frames;
    r.n_cameras_ = static_cast<int>(tracks.size());
    r.R_.resize(static_cast<std::size_t>(n_frames) * r.n_cameras_);
    for (int c = 0; c < r.n_cameras_; ++c) {
      if (static_cast<int>(tracks[c].size()) != n_frames) throw InputError("rotation track length mismatch");
      for (int f = 0; f < n_frames; ++f) r.R_[r.index(f, c)] = tracks[c][f];
    }
    return r;
  }

  static RotationField from_rig(const CameraRig& rig) {
    RotationTracks t;
    for (const auto& c : rig.cameras) t.push_back(c.rotations);
    return from_tracks(t, rig.n_frames);
  }

  /// angles: 3*N_C x N_F, row 3c + k holds (yaw, pitch, roll)[k] of camera c.
  static RotationField from_angles(const Eigen::MatrixXd& angles, bool with_derivatives) {
    RotationField r;
    r.n_frames_ = static_cast<int>(angles.cols());
    r.n_cameras_ = static_cast<int>(angles.rows() / 3);
    r.R_.resize(static_cast<std::size_t>(r.n_frames_) * r.n_cameras_);
    if (with_derivatives) r.dR_.resize(r.R_.size());
    for (int f = 0; f < r.n_frames_; ++f) {
      for (int c = 0; c < r.n_cameras_; ++c) {
        const EulerAngles a{angles(3 * c, f), angles(3 * c + 1, f), angles(3 * c + 2, f)};
        r.R_[r.index(f, c)] = camera_rotation(a);
        if (with_derivatives) r.dR_[r.index(f, c)] = camera_rotation_derivatives(a);
      }
    }
    return r;
  }

  int n_frames() const { return n_frames_; }
  int n_cameras() const { return n_cameras_; }
  bool has_derivatives() const { return !dR_.empty(); }
  const Mat3& R(int f, int c) const { return R_[index(f, c)]; }
  const std::array<Mat3, 3>& dR(int f, int c) const { return dR_[index(f, c)]; }

  RotationTracks tracks() const {
    RotationTracks t(n_cameras_, std::vector<Mat3>(n_frames_));
    for (int c = 0; c < n_cameras_; ++c)
      for (int f = 0; f < n_frames_; ++f) t[c][f] = R(f, c);
    return t;
  }

 private:
  std::size_t index(int f, int c) const { return static_cast<std::size_t>(f) * n_cameras_ + c; }

  int n_frames_ = 0;
  int n_cameras_ = 0;
  std::vector<Mat3> R_;
  std::vector<std::array<Mat3, 3>> dR_;
};

/// Mean robust reprojection error over visible detections.
/// positions: 3*N_J x N_F. Gradients are accumulated (+=) into d_positions and,
/// when the rotation field carries derivatives, into d_angles (3*N_C x N_F).
inline double reprojection_energy(const Eigen::MatrixXd& positions, const RotationField& rot,
                                  const ObservationSet& obs, const CameraRig& rig, double sigma_sq,
                                  Eigen::MatrixXd* d_positions = nullptr, Eigen::MatrixXd* d_angles = nullptr) {
  const int nf = obs.n_frames(), nc = obs.n_cameras(), nj = obs.n_joints();
  if (positions.rows() != 3 * nj || positions.cols() != nf) throw InputError("reprojection: trajectory shape mismatch");
  if (rig.n_cameras() != nc || rot.n_cameras() != nc || rot.n_frames() != nf)
    throw InputError("reprojection: camera count mismatch");
  const bool want_angles = d_angles && rot.has_derivatives();

  const std::size_t count = obs.visible_count();
  if (count == 0) return 0.0;
  const double inv_count = 1.0 / static_cast<double>(count);
  const double behind = robust_norm(kBehindCameraResidualPx, sigma_sq);

  double sum = 0.0;
  for (int f = 0; f < nf; ++f) {
    for (int c = 0; c < nc; ++c) {
      const Mat3& R = rot.R(f, c);
      const Mat3& K = rig.cameras[c].intrinsics_at(f).K;
      const Vec3& center = rig.cameras[c].center;
      for (int j = 0; j < nj; ++j) {
        const Detection& d = obs.at(f, c, j);
        if (!d.visible) continue;
        const Vec3 rel = positions.block<3, 1>(3 * j, f) - center;
        const Vec3 X = R * rel;
        if (!(X.z() > kMinDepth)) {
          sum += behind;
          continue;
        }
        const Vec3 u = K * X;
        const Vec2 px(u.x() / u.z(), u.y() / u.z());
        const Vec2 r = (px - d.px) * d.confidence;
        const double e = r.norm();
        // Same flat cap as behind the camera, so crossing the image plane is continuous.
        if (!(e < kBehindCameraResidualPx)) {
          sum += behind;
          continue;
        }
        double slope = 0.0;
        sum += robust_norm(e, sigma_sq, &slope);
        if ((!d_positions && !want_angles) || e == 0.0) continue;

        const Vec2 g_px = (slope * inv_count * d.confidence / e) * r;
        Eigen::Matrix<double, 2, 3> J_u;
        J_u << 1.0 / u.z(), 0.0, -u.x() / (u.z() * u.z()), 0.0, 1.0 / u.z(), -u.y() / (u.z() * u.z());
        const Eigen::RowVector3d g_X = g_px.transpose() * J_u * K;
        if (d_positions) d_positions->block<3, 1>(3 * j, f) += (g_X * R).transpose();
        if (want_angles) {
          const auto& dR = rot.dR(f, c);
          for (int k = 0; k < 3; ++k) (*d_angles)(3 * c + k, f) += g_X.dot(dR[k] * rel);
        }
      }
    }
  }
  return sum * inv_count;
}

/// (1/N_F) sum_f sum_limbs (|P_a - P_b| - l_ab)^2.
inline double limb_energy(const Eigen::MatrixXd& positions, const SkeletonModel& skel,
                          Eigen::MatrixXd* d_positions = nullptr) {
  const int nf = static_cast<int>(positions.cols());
  if (nf == 0) return 0.0;
  if (positions.rows() != 3 * skel.n_joints()) throw InputError("limb energy: joint count mismatch");
  const double inv_nf = 1.0 / nf;
  double sum = 0.0;
  for (int f = 0; f < nf; ++f) {
    for (const auto& l : skel.limbs()) {
      const Vec3 d = positions.block<3, 1>(3 * l.a, f) - positions.block<3, 1>(3 * l.b, f);
      const double len = d.norm();
      const double r = len - l.length_m;
      sum += r * r;
      if (d_positions && len >= 1e-9) {
        const Vec3 g = (2.0 * r * inv_nf / len) * d;
        d_positions->block<3, 1>(3 * l.a, f) += g;
        d_positions->block<3, 1>(3 * l.b, f) -= g;
      }
    }
  }
  return sum * inv_nf;
}

/// (1/(N_F N_C)) sum_{f,c} |dR_meas(f,c) - R(f+1,c) R(f,c)^T|_F over valid deltas.
inline double rotation_energy(const RotationField& rot, const RotationDeltas& measured,
                              Eigen::MatrixXd* d_angles = nullptr) {
  const int nf = rot.n_frames(), nc = rot.n_cameras();
  if (nf == 0 || nc == 0) return 0.0;
  if (static_cast<int>(measured.size()) != nc) throw InputError("rotation energy: camera count mismatch");
  const bool want = d_angles && rot.has_derivatives();
  const double norm = 1.0 / (static_cast<double>(nf) * nc);
  double sum = 0.0;
  for (int c = 0; c < nc; ++c) {
    const auto& track = measured[c];
    const int pairs = std::min<int>(static_cast<int>(track.size()), nf - 1);
    for (int f = 0; f < pairs; ++f) {
      if (!track.valid[f]) continue;
      const Mat3& R0 = rot.R(f, c);
      const Mat3& R1 = rot.R(f + 1, c);
      const Mat3 D = track.rotations[f] - R1 * R0.transpose();
      const double n = D.norm();
      sum += n;
      if (!want || n < 1e-300) continue;
      const double s = -norm / n;
      const auto& d0 = rot.dR(f, c);
      const auto& d1 = rot.dR(f + 1, c);
      for (int k = 0; k < 3; ++k) {
        (*d_angles)(3 * c + k, f) += s * D.cwiseProduct(R1 * d0[k].transpose()).sum();
        (*d_angles)(3 * c + k, f + 1) += s * D.cwiseProduct(d1[k] * R0.transpose()).sum();
      }
    }
  }
  return sum * norm;
}

/// Everything needed to evaluate E over a parameter vector.
///
/// Layout of the parameter vector: pose coefficients (3*N_J x N_pose, column-major)
/// followed, when rotation_basis is set, by camera angle coefficients
/// (3*N_C x N_rot, column-major). Without a rotation basis the rotations are
/// taken from fixed_rotations and E_rot is omitted.
struct EnergyProblem {
  const ObservationSet* observations = nullptr;
  const CameraRig* rig = nullptr;
  const SkeletonModel* skeleton = nullptr;
  const RotationDeltas* deltas = nullptr;
  EnergyWeights weights;
  TrajectoryBasis pose_basis;
  std::optional<TrajectoryBasis> rotation_basis;
  RotationTracks fixed_rotations;
};

class EnergyModel {
 public:
  explicit EnergyModel(EnergyProblem problem) : p_(std::move(problem)) {
    if (!p_.observations || !p_.rig || !p_.skeleton) throw InputError("energy: incomplete problem");
    p_.weights.validate();
    nj_ = p_.observations->n_joints();
    nc_ = p_.observations->n_cameras();
    nf_ = p_.observations->n_frames();
    if (p_.skeleton->n_joints() != nj_) throw InputError("energy: skeleton and observations disagree on joints");
    if (p_.rig->n_cameras() != nc_) throw InputError("energy: rig and observations disagree on cameras");
    if (p_.pose_basis.n_frames() != nf_) throw InputError("energy: pose basis length mismatch");
    if (p_.rotation_basis) {
      if (p_.rotation_basis->n_frames() != nf_) throw InputError("energy: rotation basis length mismatch");
    } else {
      fixed_ = RotationField::from_tracks(p_.fixed_rotations, nf_);
    }
  }

  const EnergyProblem& problem() const { return p_; }
  bool estimates_rotations() const { return p_.rotation_basis.has_value(); }

  Eigen::Index pose_size() const { return 3 * nj_ * p_.pose_basis.n_basis(); }
  Eigen::Index rotation_size() const { return p_.rotation_basis ? 3 * nc_ * p_.rotation_basis->n_basis() : 0; }
  Eigen::Index size() const { return pose_size() + rotation_size(); }

  Eigen::MatrixXd pose_coefficients(const Eigen::VectorXd& x) const {
    return Eigen::Map<const Eigen::MatrixXd>(x.data(), 3 * nj_, p_.pose_basis.n_basis());
  }
  Eigen::MatrixXd rotation_coefficients(const Eigen::VectorXd& x) const {
    if (!p_.rotation_basis) return {};
    return Eigen::Map<const Eigen::MatrixXd>(x.data() + pose_size(), 3 * nc_, p_.rotation_basis->n_basis());
  }

  Eigen::VectorXd pack(const Eigen::MatrixXd& pose_coeffs, const Eigen::MatrixXd& rot_coeffs = {}) const {
    Eigen::VectorXd x(size());
    x.head(pose_size()) = Eigen::Map<const Eigen::VectorXd>(pose_coeffs.data(), pose_size());
    if (rotation_size() > 0)
      x.tail(rotation_size()) = Eigen::Map<const Eigen::VectorXd>(rot_coeffs.data(), rotation_size());
    return x;
  }

  Eigen::MatrixXd positions(const Eigen::VectorXd& x) const { return p_.pose_basis.evaluate(pose_coefficients(x)); }
  Eigen::MatrixXd angles(const Eigen::VectorXd& x) const {
    return p_.rotation_basis ? p_.rotation_basis->evaluate(rotation_coefficients(x)) : Eigen::MatrixXd{};
  }

  RotationTracks rotation_tracks(const Eigen::VectorXd& x) const {
    if (!p_.rotation_basis) return p_.fixed_rotations;
    return RotationField::from_angles(angles(x), false).tracks();
  }

  EnergyBreakdown evaluate(const Eigen::VectorXd& x, bool with_gradient = true) const {
    if (x.size() != size()) throw InputError("energy: parameter vector size mismatch");
    const auto& w = p_.weights;
    const Eigen::MatrixXd pos = positions(x);
    RotationField estimated;
    if (p_.rotation_basis) estimated = RotationField::from_angles(angles(x), with_gradient);
    const RotationField& rot = p_.rotation_basis ? estimated : fixed_;

    Eigen::MatrixXd g_pos, g_rep_ang, g_rot_ang;
    if (with_gradient) {
      g_pos = Eigen::MatrixXd::Zero(3 * nj_, nf_);
      if (p_.rotation_basis) {
        g_rep_ang = Eigen::MatrixXd::Zero(3 * nc_, nf_);
        g_rot_ang = Eigen::MatrixXd::Zero(3 * nc_, nf_);
      }
    }

    EnergyBreakdown out;
    Eigen::MatrixXd g_rep_pos, g_limb_pos;
    if (with_gradient) {
      g_rep_pos = Eigen::MatrixXd::Zero(3 * nj_, nf_);
      g_limb_pos = Eigen::MatrixXd::Zero(3 * nj_, nf_);
    }
    out.e_rep = reprojection_energy(pos, rot, *p_.observations, *p_.rig, w.sigma_sq,
                                    with_gradient ? &g_rep_pos : nullptr,
                                    with_gradient && p_.rotation_basis ? &g_rep_ang : nullptr);
    out.e_limbs = limb_energy(pos, *p_.skeleton, with_gradient ? &g_limb_pos : nullptr);
    if (p_.rotation_basis && p_.deltas)
      out.e_rot = rotation_energy(rot, *p_.deltas, with_gradient ? &g_rot_ang : nullptr);
    out.total = w.lambda_rep * out.e_rep + w.lambda_limbs * out.e_limbs + w.lambda_rot * out.e_rot;

    if (with_gradient) {
      g_pos = w.lambda_rep * g_rep_pos + w.lambda_limbs * g_limb_pos;
      out.gradient.resize(size());
      const Eigen::MatrixXd gp = p_.pose_basis.pullback(g_pos);
      out.gradient.head(pose_size()) = Eigen::Map<const Eigen::VectorXd>(gp.data(), pose_size());
      if (p_.rotation_basis) {
        const Eigen::MatrixXd ga = p_.rotation_basis->pullback(w.lambda_rep * g_rep_ang + w.lambda_rot * g_rot_ang);
        out.gradient.tail(rotation_size()) = Eigen::Map<const Eigen::VectorXd>(ga.data(), rotation_size());
      }
    }
    return out;
  }

 private:
  EnergyProblem p_;
  RotationField fixed_;
  int nj_ = 0;
  int nc_ = 0;
  int nf_ = 0;
};

}  // namespace ptzcap
