#pragma once

// Evaluation metrics: PCK, MPJPE variants, center of mass, speed and skiing
// biomechanics (knee/hip flexion, lean, fore/aft). Angles are reported in degrees.

#include "ptzcap/camera.hpp"
#include "ptzcap/signal.hpp"
#include "ptzcap/skeleton.hpp"
#include "ptzcap/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ptzcap {

class DegenerateGeometryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct MetricReport {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> series;
  std::string unit;

  static MetricReport from_series(std::vector<double> s, std::string unit) {
    MetricReport r;
    r.series = std::move(s);
    r.unit = std::move(unit);
    if (r.series.empty()) return r;
    double sum = 0.0;
    for (double v : r.series) sum += v;
    r.mean = sum / r.series.size();
    double var = 0.0;
    for (double v : r.series) var += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(var / r.series.size());
    return r;
  }
};

enum class Side { right, left };

/// Indices of the joints the biomechanical metrics refer to.
struct JointRoles {
  int head, neck;
  int r_hip, l_hip, r_knee, l_knee, r_ankle, l_ankle;
  int r_ski_tip, r_ski_tail, l_ski_tip, l_ski_tail;

  static JointRoles from(const SkeletonModel& s) {
    return {s.index("head"),      s.index("neck"),       s.index("r_hip"),     s.index("l_hip"),
            s.index("r_knee"),    s.index("l_knee"),     s.index("r_ankle"),   s.index("l_ankle"),
            s.index("r_ski_tip"), s.index("r_ski_tail"), s.index("l_ski_tip"), s.index("l_ski_tail")};
  }

  int hip(Side s) const { return s == Side::right ? r_hip : l_hip; }
  int knee(Side s) const { return s == Side::right ? r_knee : l_knee; }
  int ankle(Side s) const { return s == Side::right ? r_ankle : l_ankle; }
  int ski_tip(Side s) const { return s == Side::right ? r_ski_tip : l_ski_tip; }
  int ski_tail(Side s) const { return s == Side::right ? r_ski_tail : l_ski_tail; }
};

namespace detail {

inline Vec3 row(const Pose& p, int j) { return p.row(j).transpose(); }

inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Angle in degrees between two vectors; arccos argument clamped.
inline double angle_deg(const Vec3& a, const Vec3& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateGeometryError("undefined angle: zero-length vector");
  return rad2deg(std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0)));
}

inline Vec3 hip_center(const Pose& p, const JointRoles& r) { return 0.5 * (row(p, r.r_hip) + row(p, r.l_hip)); }

}  // namespace detail

/// Percentage of predicted 2D joints within multiplier * |head - neck| (ground truth) of the
/// ground truth. Frames with zero head-neck distance are skipped and reported in `skipped`.
inline double pck(const std::vector<Pose2d>& pred, const std::vector<Pose2d>& gt, int head, int neck,
                  double multiplier = 1.0, std::vector<int>* skipped = nullptr) {
  if (pred.size() != gt.size()) throw InputError("pck: frame count mismatch");
  long inside = 0, total = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    if (pred[f].rows() != gt[f].rows()) throw InputError("pck: joint count mismatch");
    const double r = multiplier * (gt[f].row(head) - gt[f].row(neck)).norm();
    if (!(r > 0.0)) {
      if (skipped) skipped->push_back(static_cast<int>(f));
      continue;
    }
    for (Eigen::Index j = 0; j < gt[f].rows(); ++j) {
      inside += (pred[f].row(j) - gt[f].row(j)).norm() <= r ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(inside) / static_cast<double>(total);
}

enum class MpjpeMode { global, centered, normalized };

/// Per-frame mean joint distance over `subset` (all joints when empty).
/// Centering subtracts the midpoint of the two hips; normalization additionally
/// rescales the centered prediction by the least-squares factor over all joints.
inline MetricReport mpjpe(const PoseTrajectory& pred, const PoseTrajectory& gt, MpjpeMode mode,
                          const JointRoles& roles, const std::vector<int>& subset = {},
                          int* degenerate_frames = nullptr) {
  if (pred.n_frames() != gt.n_frames() || pred.n_joints() != gt.n_joints())
    throw InputError("mpjpe: trajectory shape mismatch");
  std::vector<int> joints = subset;
  if (joints.empty())
    for (int j = 0; j < gt.n_joints(); ++j) joints.push_back(j);
  std::vector<double> series(gt.n_frames());
  for (int f = 0; f < gt.n_frames(); ++f) {
    Pose p = pred.pose(f), g = gt.pose(f);
    if (mode != MpjpeMode::global) {
      p.rowwise() -= detail::hip_center(p, roles).transpose();
      g.rowwise() -= detail::hip_center(g, roles).transpose();
    }
    if (mode == MpjpeMode::normalized) {
      const double pp = p.squaredNorm();
      if (pp > 0.0) {
        p *= p.cwiseProduct(g).sum() / pp;
      } else if (degenerate_frames) {
        ++*degenerate_frames;
      }
    }
    double sum = 0.0;
    for (int j : joints) sum += (p.row(j) - g.row(j)).norm();
    series[f] = sum / joints.size();
  }
  return MetricReport::from_series(std::move(series), "m");
}

/// Weighted mean of segment midpoints. With a mask, segments touching an unmasked
/// joint are dropped and the remaining weights renormalized.
inline Vec3 center_of_mass(const Pose& pose, const SkeletonModel& skel, const std::vector<bool>* present = nullptr) {
  if (pose.rows() != skel.n_joints()) throw InputError("center_of_mass: joint count mismatch");
  Vec3 acc = Vec3::Zero();
  double m = 0.0;
  for (const auto& s : skel.com_segments()) {
    if (present && (!(*present)[s.a] || !(*present)[s.b])) continue;
    const Vec3 a = detail::row(pose, s.a), b = detail::row(pose, s.b);
    if (!a.allFinite() || !b.allFinite())
      throw InputError("center_of_mass: missing position for segment " + skel.segment_name(s.a, s.b));
    acc += s.weight * 0.5 * (a + b);
    m += s.weight;
  }
  if (!(m > 0.0)) throw InputError("center_of_mass: no weighted segment present");
  return acc / m;
}

/// 3 x N_F matrix of per-frame centers of mass.
inline Eigen::Matrix3Xd com_series(const PoseTrajectory& traj, const SkeletonModel& skel) {
  Eigen::Matrix3Xd c(3, traj.n_frames());
  for (int f = 0; f < traj.n_frames(); ++f) c.col(f) = center_of_mass(traj.pose(f), skel);
  return c;
}

/// |CoM_{f+1} - CoM_f| * fps after Gaussian smoothing of each coordinate. N_F - 1 values.
inline std::vector<double> speed_series(const Eigen::Matrix3Xd& com, double fps, double smoothing_sigma) {
  if (com.cols() < 2) throw InputError("speed: need at least two frames");
  if (!(fps > 0.0)) throw InputError("speed: fps must be > 0");
  const int n = static_cast<int>(com.cols());
  Eigen::Matrix3Xd s(3, n);
  for (int k = 0; k < 3; ++k) {
    std::vector<double> ch(n);
    for (int f = 0; f < n; ++f) ch[f] = com(k, f);
    ch = gaussian_smooth(ch, smoothing_sigma);
    for (int f = 0; f < n; ++f) s(k, f) = ch[f];
  }
  std::vector<double> v(n - 1);
  for (int f = 0; f + 1 < n; ++f) v[f] = (s.col(f + 1) - s.col(f)).norm() * fps;
  return v;
}

/// Angle between thigh (hip - knee) and shank (ankle - knee); 180 for a straight leg.
inline double knee_flexion(const Pose& p, const JointRoles& r, Side side) {
  const Vec3 knee = detail::row(p, r.knee(side));
  return detail::angle_deg(detail::row(p, r.hip(side)) - knee, detail::row(p, r.ankle(side)) - knee);
}

/// Angle between spine (neck - hip center) and thigh (knee - hip).
inline double hip_flexion(const Pose& p, const JointRoles& r, Side side) {
  return detail::angle_deg(detail::row(p, r.neck) - detail::hip_center(p, r),
                           detail::row(p, r.knee(side)) - detail::row(p, r.hip(side)));
}

/// The leg with the larger knee angle (the straighter one) is taken as the outside leg.
inline Side outside_side(const Pose& p, const JointRoles& r) {
  return knee_flexion(p, r, Side::right) >= knee_flexion(p, r, Side::left) ? Side::right : Side::left;
}

/// Ski-aligned frame: x' along the ski, z' = x' x y (y points from right to left ankle), y' = z' x x'.
struct SkiFrame {
  Vec3 x, y, z;
};

inline SkiFrame ski_frame(const Pose& p, const JointRoles& r, Side side) {
  const Vec3 xr = detail::row(p, r.ski_tip(side)) - detail::row(p, r.ski_tail(side));
  const Vec3 yr = detail::row(p, r.l_ankle) - detail::row(p, r.r_ankle);
  if (xr.norm() == 0.0 || yr.norm() == 0.0) throw DegenerateGeometryError("ski frame: zero-length axis");
  const Vec3 x = xr.normalized();
  const Vec3 zr = x.cross(yr.normalized());
  if (zr.norm() < 1e-12) throw DegenerateGeometryError("ski frame: ski parallel to the ankle axis");
  const Vec3 z = zr.normalized();
  return {x, z.cross(x), z};
}

/// Sideways inclination of the CoM seen from the ankle center, measured in the y'z' plane.
inline double lean_angle(const Pose& p, const JointRoles& r, const Vec3& com, Side side) {
  const SkiFrame fr = ski_frame(p, r, side);
  const Vec3 c = com - 0.5 * (detail::row(p, r.l_ankle) + detail::row(p, r.r_ankle));
  const Vec3 proj = c - c.dot(fr.x) * fr.x;
  return detail::angle_deg(fr.z, proj);
}

struct ForeAft {
  double angle_deg = 0.0;
  double distance_m = 0.0;
};

/// Forward/backward inclination of the CoM seen from the outside ankle, measured in the x'z' plane.
inline ForeAft fore_aft(const Pose& p, const JointRoles& r, const Vec3& com, Side side) {
  const SkiFrame fr = ski_frame(p, r, side);
  const Vec3 c = com - detail::row(p, r.ankle(side));
  const Vec3 proj = c - c.dot(fr.y) * fr.y;
  const double a = detail::angle_deg(fr.z, proj);
  return {a, std::sin(a * std::numbers::pi / 180.0) * c.norm()};
}

struct EvaluationOptions {
  double fps = 50.0;
  double pred_speed_sigma = 1.5;
  double gt_speed_sigma = 0.0;
  double pck_multiplier = 1.0;
};

struct Evaluation {
  std::vector<std::pair<std::string, MetricReport>> metrics;  // report order
  std::vector<std::string> warnings;

  const MetricReport& at(const std::string& key) const {
    for (const auto& [k, v] : metrics)
      if (k == key) return v;
    throw InputError("no metric named '" + key + "'");
  }
};

/// Row labels of the summary table, in order. "PCK" is appended when cameras are supplied.
inline const std::vector<std::string>& summary_metric_names() {
  static const std::vector<std::string> names = {
      "Global MPJPE",           "Global Body MPJPE",       "Centered MPJPE",     "Centered Body MPJPE",
      "Normalized MPJPE",       "Normalized Body MPJPE",   "Global CoM Error",   "Global speed MAE",
      "Knee flexion MAE",       "Hip flexion MAE",         "Lean angle MAE",     "Fore/aft angle MAE",
      "Fore/aft distance MAE"};
  return names;
}

/// Full comparison of a predicted trajectory against ground truth. Flexion errors
/// average both legs; lean and fore/aft use the ground-truth outside leg for both poses.
inline Evaluation evaluate(const PoseTrajectory& pred, const PoseTrajectory& gt, const SkeletonModel& skel,
                           const EvaluationOptions& opt = {}, const CameraRig* rig = nullptr) {
  if (pred.n_frames() != gt.n_frames() || pred.n_joints() != gt.n_joints())
    throw InputError("evaluate: trajectory shape mismatch");
  if (gt.n_joints() != skel.n_joints()) throw InputError("evaluate: skeleton joint count mismatch");
  const JointRoles roles = JointRoles::from(skel);
  const auto& body = skel.body_subset();
  const int nf = gt.n_frames();
  Evaluation ev;
  auto add = [&](const std::string& k, MetricReport r) { ev.metrics.emplace_back(k, std::move(r)); };

  int degenerate = 0;
  add("Global MPJPE", mpjpe(pred, gt, MpjpeMode::global, roles));
  add("Global Body MPJPE", mpjpe(pred, gt, MpjpeMode::global, roles, body));
  add("Centered MPJPE", mpjpe(pred, gt, MpjpeMode::centered, roles));
  add("Centered Body MPJPE", mpjpe(pred, gt, MpjpeMode::centered, roles, body));
  add("Normalized MPJPE", mpjpe(pred, gt, MpjpeMode::normalized, roles, {}, &degenerate));
  add("Normalized Body MPJPE", mpjpe(pred, gt, MpjpeMode::normalized, roles, body));
  if (degenerate > 0)
    ev.warnings.push_back(std::to_string(degenerate) + " frame(s) with zero predicted pose norm; scale 1 used");

  const Eigen::Matrix3Xd com_p = com_series(pred, skel), com_g = com_series(gt, skel);
  std::vector<double> com_err(nf);
  for (int f = 0; f < nf; ++f) com_err[f] = (com_p.col(f) - com_g.col(f)).norm();
  add("Global CoM Error", MetricReport::from_series(std::move(com_err), "m"));

  std::vector<double> speed_err;
  if (nf >= 2) {
    const auto vp = speed_series(com_p, opt.fps, opt.pred_speed_sigma);
    const auto vg = speed_series(com_g, opt.fps, opt.gt_speed_sigma);
    for (std::size_t i = 0; i < vp.size(); ++i) speed_err.push_back(std::abs(vp[i] - vg[i]));
  }
  add("Global speed MAE", MetricReport::from_series(std::move(speed_err), "m/s"));

  std::vector<double> knee, hip, lean, fa_angle, fa_dist;
  int skipped = 0;
  for (int f = 0; f < nf; ++f) {
    const Pose p = pred.pose(f), g = gt.pose(f);
    try {
      const double k = 0.5 * (std::abs(knee_flexion(p, roles, Side::right) - knee_flexion(g, roles, Side::right)) +
                              std::abs(knee_flexion(p, roles, Side::left) - knee_flexion(g, roles, Side::left)));
      const double h = 0.5 * (std::abs(hip_flexion(p, roles, Side::right) - hip_flexion(g, roles, Side::right)) +
                              std::abs(hip_flexion(p, roles, Side::left) - hip_flexion(g, roles, Side::left)));
      const Side side = outside_side(g, roles);
      const double l = std::abs(lean_angle(p, roles, com_p.col(f), side) - lean_angle(g, roles, com_g.col(f), side));
      const ForeAft a = fore_aft(p, roles, com_p.col(f), side), b = fore_aft(g, roles, com_g.col(f), side);
      knee.push_back(k);
      hip.push_back(h);
      lean.push_back(l);
      fa_angle.push_back(std::abs(a.angle_deg - b.angle_deg));
      fa_dist.push_back(std::abs(a.distance_m - b.distance_m));
    } catch (const DegenerateGeometryError&) {
      ++skipped;
    }
  }
  if (skipped > 0) ev.warnings.push_back(std::to_string(skipped) + " frame(s) with degenerate geometry skipped");
  add("Knee flexion MAE", MetricReport::from_series(std::move(knee), "deg"));
  add("Hip flexion MAE", MetricReport::from_series(std::move(hip), "deg"));
  add("Lean angle MAE", MetricReport::from_series(std::move(lean), "deg"));
  add("Fore/aft angle MAE", MetricReport::from_series(std::move(fa_angle), "deg"));
  add("Fore/aft distance MAE", MetricReport::from_series(std::move(fa_dist), "m"));

  if (rig && rig->has_rotations()) {
    if (rig->n_frames != nf) throw InputError("evaluate: camera frame count mismatch");
    std::vector<double> per_cam;
    for (const auto& cam : rig->cameras) {
      std::vector<Pose2d> pp(nf), gg(nf);
      for (int f = 0; f < nf; ++f) {
        const auto intr = cam.intrinsics_at(f);
        const auto ext = cam.extrinsics_at(f);
        pp[f].resize(gt.n_joints(), 2);
        gg[f].resize(gt.n_joints(), 2);
        for (int j = 0; j < gt.n_joints(); ++j) {
          const Vec3 a = intr.K * (ext.R * pred.joint(f, j) + ext.t);
          const Vec3 b = intr.K * (ext.R * gt.joint(f, j) + ext.t);
          // A prediction behind the camera can never count as correct.
          const Vec2 pa = a.z() > kMinDepth ? Vec2(a.head<2>() / a.z())
                                            : Vec2::Constant(std::numeric_limits<double>::infinity());
          pp[f].row(j) = pa.transpose();
          gg[f].row(j) = (b.head<2>() / b.z()).transpose();
        }
      }
      per_cam.push_back(pck(pp, gg, roles.head, roles.neck, opt.pck_multiplier));
    }
    add("PCK", MetricReport::from_series(std::move(per_cam), "%"));
  }
  return ev;
}

}  // namespace ptzcap
