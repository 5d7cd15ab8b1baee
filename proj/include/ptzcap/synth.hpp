#pragma once

// Synthetic skiing scene with exact ground truth.
//
// Motion is built from cosines of the form cos(pi n (f + 1/2) / N_F), the same
// family the reconstruction basis uses, so low-order fits can represent the
// ground truth closely:
//   forward progress  truncated odd-cosine sweep approximating constant speed
//                     (the athlete eases in and out over the first and last frames)
//   lateral slalom    one cosine near 0.4 Hz
//   posture           lean into the turn, alternating knee bend, torso pitch, arm swing
// Limbs are rigid, so limb lengths match the default skeleton exactly in every frame.
//
// Cameras sit on a circle around the course and aim at the mean joint position
// (exact look-at), plus an optional smooth Euler-angle jitter. Background
// correspondences come from points seen by a purely rotating camera.

#include "ptzcap/camera.hpp"
#include "ptzcap/rotation_from_background.hpp"
#include "ptzcap/skeleton.hpp"
#include "ptzcap/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace ptzcap {

class SceneGenerationError : public InputError {
 public:
  using InputError::InputError;
};

struct SceneConfig {
  int n_cameras = 6;
  int n_frames = 250;
  double fps = 50.0;
  double speed_mps = 17.0;  // mean speed over the sequence
  double noise_px = 0.0;    // isotropic Gaussian detection noise
  std::uint64_t seed = 1;

  double camera_radius_m = 50.0;
  double camera_height_m = 4.0;
  double first_camera_deg = 30.0;
  double focal_px = 3000.0;
  int width = 1920;
  int height = 1080;
  double jitter_deg = 0.3;  // first-harmonic amplitude of the smooth jitter per axis; total below 11/6 of it

  double slalom_amplitude_m = 2.5;
  double slalom_hz = 0.4;

  double dropout_rate = 0.0;  // fraction of detections marked invisible
  double outlier_rate = 0.0;  // fraction of detections replaced by a uniform image point

  bool correspondences = true;
  int background_points = 40;
  double background_noise_px = 0.0;
  double background_outlier_rate = 0.0;

  void validate() const {
    if (n_cameras < 1) throw SceneGenerationError("need at least one camera");
    if (n_frames < 2) throw SceneGenerationError("need at least two frames");
    if (!(fps > 0.0) || speed_mps < 0.0 || noise_px < 0.0 || !(focal_px > 0.0) || width < 1 || height < 1)
      throw SceneGenerationError("invalid scene parameters");
    if (!(camera_radius_m > 0.0)) throw SceneGenerationError("camera radius must be > 0");
    for (double r : {dropout_rate, outlier_rate, background_outlier_rate})
      if (r < 0.0 || r > 1.0) throw SceneGenerationError("rates must lie in [0, 1]");
    if (background_points < 0 || background_noise_px < 0.0) throw SceneGenerationError("invalid background parameters");
  }
};

struct SyntheticScene {
  SceneConfig config;
  SkeletonModel skeleton;
  PoseTrajectory gt_trajectory;
  RotationTracks gt_rotations;
  RotationDeltas gt_deltas;
  CameraRig rig;  // carries the ground-truth rotation tracks
  ObservationSet observations;
  CorrespondenceSet correspondences;

  /// The rig with rotations removed, as seen by the uncalibrated pipeline.
  CameraRig rig_without_rotations() const {
    CameraRig r = rig;
    for (auto& c : r.cameras) c.rotations.clear();
    return r;
  }
};

/// Posture parameters at one instant. Angles in radians.
struct SkierState {
  Vec3 position = Vec3::Zero();  // ground point below the pelvis
  double heading = 0.0;          // yaw of the direction of travel
  double lean = 0.0;             // roll about the direction of travel, positive to the left
  double torso_pitch = 0.0;      // forward bend of the upper body
  double knee_bend_r = 0.0;      // 0 = straight leg
  double knee_bend_l = 0.0;
  double arm_raise = 0.0;        // forward arm raise
  double pole_angle = 0.0;       // pole rotation relative to the forearm, positive trailing
};

namespace detail {

// Rotation about the body y axis taking down (0,0,-1) towards forward (+x) for positive a.
inline Vec3 swing_forward(const Vec3& v, double a) {
  return {v.x() * std::cos(a) - v.z() * std::sin(a), v.y(), v.x() * std::sin(a) + v.z() * std::cos(a)};
}

}  // namespace detail

/// Forward kinematics of the default skeleton. Every segment is rigid, so the
/// returned pose has the rest-pose limb lengths for any state.
inline Pose skier_pose(const SkierState& s) {
  const SkeletonModel skel = default_skeleton();
  const Pose rest = default_rest_pose();
  auto R = [&](const char* n) -> Vec3 { return rest.row(skel.index(n)).transpose(); };
  Pose p(rest.rows(), 3);
  auto set = [&](const char* n, const Vec3& v) { p.row(skel.index(n)) = v.transpose(); };

  const Vec3 hip_mid = 0.5 * (R("r_hip") + R("l_hip"));

  // Legs: thigh swings forward, shank backward, so the knee bends by the sum.
  for (int side = 0; side < 2; ++side) {
    const std::string pre = side == 0 ? "r_" : "l_";
    const double bend = side == 0 ? s.knee_bend_r : s.knee_bend_l;
    const Vec3 hip = R((pre + "hip").c_str());
    const Vec3 thigh = R((pre + "knee").c_str()) - hip;
    const Vec3 shank = R((pre + "ankle").c_str()) - R((pre + "knee").c_str());
    const Vec3 knee = hip + detail::swing_forward(thigh, 0.5 * bend);
    const Vec3 ankle = knee + detail::swing_forward(shank, -0.5 * bend);
    set((pre + "hip").c_str(), hip);
    set((pre + "knee").c_str(), knee);
    set((pre + "ankle").c_str(), ankle);
    for (const char* part : {"toes", "heel", "ski_tip", "ski_tail"}) {
      const std::string n = pre + part;
      set(n.c_str(), ankle + R(n.c_str()) - R((pre + "ankle").c_str()));
    }
  }

  // Upper body pitches forward about the hip center as one rigid piece.
  auto torso = [&](const Vec3& v) -> Vec3 { return hip_mid + detail::swing_forward(v - hip_mid, -s.torso_pitch); };
  for (const char* n : {"head", "neck", "r_shoulder", "l_shoulder"}) set(n, torso(R(n)));
  // swing_forward with a negative angle tilts an upward vector forward.
  for (int side = 0; side < 2; ++side) {
    const std::string pre = side == 0 ? "r_" : "l_";
    const Vec3 sh_rest = R((pre + "shoulder").c_str());
    const Vec3 sh = torso(sh_rest);
    const Vec3 elbow = sh + detail::swing_forward(R((pre + "elbow").c_str()) - sh_rest, s.arm_raise - s.torso_pitch);
    const Vec3 hand = elbow + detail::swing_forward(R((pre + "hand").c_str()) - R((pre + "elbow").c_str()),
                                                    s.arm_raise - s.torso_pitch);
    const Vec3 pole = detail::swing_forward(R((pre + "pole_basket").c_str()) - R((pre + "hand").c_str()),
                                            s.arm_raise - s.torso_pitch - s.pole_angle);
    set((pre + "elbow").c_str(), elbow);
    set((pre + "hand").c_str(), hand);
    set((pre + "pole_basket").c_str(), hand + pole);
  }

  // Keep the lower ankle at its rest height, then lean about the travel axis and place in the world.
  const double lift = R("r_ankle").z() - std::min(p(skel.index("r_ankle"), 2), p(skel.index("l_ankle"), 2));
  const Mat3 world = rotation_z(s.heading) * rotation_x(-s.lean);
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    Vec3 v = p.row(j).transpose();
    v.z() += lift;
    p.row(j) = (world * v + s.position).transpose();
  }
  return p;
}

/// Athlete state at frame f of an n-frame sequence.
inline SkierState skier_state(const SceneConfig& cfg, int f) {
  const int n = cfg.n_frames;
  const double pi = std::numbers::pi;
  const double th = pi * (f + 0.5) / n;
  const double duration = n / cfg.fps;

  // Odd-cosine sweep normalized to run from -L/2 to L/2 over the frame range.
  auto sweep = [&](double t) { return -(std::cos(t) + std::cos(3 * t) / 9.0 + std::cos(5 * t) / 25.0); };
  auto dsweep = [&](double t) { return std::sin(t) + std::sin(3 * t) / 3.0 + std::sin(5 * t) / 5.0; };
  const double s0 = sweep(pi * 0.5 / n), s1 = sweep(pi * (n - 0.5) / n);
  const double length = cfg.speed_mps * (n - 1) / cfg.fps;
  const double scale = s1 > s0 ? length / (s1 - s0) : 0.0;
  const double x = -0.5 * length + (sweep(th) - s0) * scale;

  // Slalom at the cosine frequency closest to slalom_hz (k half-periods over the sequence).
  const int k = std::max(1, static_cast<int>(std::lround(2.0 * duration * cfg.slalom_hz)));
  const double y = cfg.slalom_amplitude_m * std::cos(k * th);

  const double dx = dsweep(th) * scale;
  const double dy = -cfg.slalom_amplitude_m * k * std::sin(k * th);
  SkierState s;
  s.position = {x, y, 0.0};
  s.heading = dx == 0.0 && dy == 0.0 ? 0.0 : std::atan2(dy, dx);
  // Lateral acceleration is proportional to -y; lean follows it.
  s.lean = -0.25 * std::cos(k * th);
  s.torso_pitch = 0.35 + 0.05 * std::cos(2 * k * th);
  s.knee_bend_r = 0.7 + 0.25 * std::cos(k * th);
  s.knee_bend_l = 0.7 - 0.25 * std::cos(k * th);
  s.arm_raise = 0.6 + 0.1 * std::cos(2 * k * th + 0.5);
  s.pole_angle = 1.1;
  return s;
}

namespace detail {

inline Vec3 joint_mean(const Pose& p) { return p.colwise().mean().transpose(); }

// Smooth per-axis jitter from a few low cosine harmonics with seeded amplitudes and phases.
inline std::vector<Vec3> camera_jitter(const SceneConfig& cfg, int camera) {
  std::vector<Vec3> out(cfg.n_frames, Vec3::Zero());
  if (cfg.jitter_deg == 0.0) return out;
  std::seed_seq seq{cfg.seed, std::uint64_t{101}, static_cast<std::uint64_t>(camera)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double amp = cfg.jitter_deg * std::numbers::pi / 180.0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int h = 1; h <= 3; ++h) {
      const double a = amp * u(rng) / h;
      for (int f = 0; f < cfg.n_frames; ++f)
        out[f][axis] += a * std::cos(std::numbers::pi * (2 * h) * (f + 0.5) / cfg.n_frames);
    }
  }
  return out;
}

}  // namespace detail

inline SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  const int nf = cfg.n_frames, nc = cfg.n_cameras;
  SyntheticScene sc;
  sc.config = cfg;
  sc.skeleton = default_skeleton();
  const int nj = sc.skeleton.n_joints();

  sc.gt_trajectory = PoseTrajectory(nf, nj);
  for (int f = 0; f < nf; ++f) sc.gt_trajectory.set_pose(f, skier_pose(skier_state(cfg, f)));

  const auto intr = CameraIntrinsics::from_focal(cfg.focal_px, cfg.focal_px, 0.5 * cfg.width, 0.5 * cfg.height,
                                                 cfg.width, cfg.height);
  sc.rig.n_frames = nf;
  sc.gt_rotations.assign(nc, std::vector<Mat3>(nf));
  for (int c = 0; c < nc; ++c) {
    const double a = (cfg.first_camera_deg + 360.0 * c / nc) * std::numbers::pi / 180.0;
    RigCamera cam;
    cam.intrinsics = {intr};
    cam.center = {cfg.camera_radius_m * std::cos(a), cfg.camera_radius_m * std::sin(a), cfg.camera_height_m};
    const auto jitter = detail::camera_jitter(cfg, c);
    for (int f = 0; f < nf; ++f) {
      const Mat3 aim = look_at(cam.center, detail::joint_mean(sc.gt_trajectory.pose(f))).R;
      const Vec3 angles = camera_angles(aim).angles.as_vector() + jitter[f];
      sc.gt_rotations[c][f] = camera_rotation(EulerAngles::from_vector(angles));
    }
    cam.rotations = sc.gt_rotations[c];
    sc.rig.cameras.push_back(std::move(cam));
  }

  sc.gt_deltas.resize(nc);
  for (int c = 0; c < nc; ++c) {
    auto& d = sc.gt_deltas[c];
    for (int f = 0; f + 1 < nf; ++f)
      d.rotations.push_back(sc.gt_rotations[c][f + 1] * sc.gt_rotations[c][f].transpose());
    d.valid.assign(d.rotations.size(), 1);
    d.interpolated.assign(d.rotations.size(), 0);
  }

  // Detections.
  sc.observations = ObservationSet(nf, nc, nj);
  {
    std::seed_seq seq{cfg.seed, std::uint64_t{1}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int f = 0; f < nf; ++f) {
      bool seen = false;
      for (int c = 0; c < nc; ++c) {
        const auto ext = sc.rig.cameras[c].extrinsics_at(f);
        for (int j = 0; j < nj; ++j) {
          // Draw every random number unconditionally so streams stay aligned across options.
          const double nx = noise(rng), ny = noise(rng);
          const double drop = u01(rng), out = u01(rng), ox = u01(rng), oy = u01(rng);
          auto& d = sc.observations.at(f, c, j);
          const Vec3 X = ext.R * sc.gt_trajectory.joint(f, j) + ext.t;
          if (!(X.z() > kMinDepth)) continue;
          const Vec3 uvw = intr.K * X;
          const Vec2 px(uvw.x() / uvw.z(), uvw.y() / uvw.z());
          if (!intr.contains(px)) continue;
          seen = true;
          d.px = px + cfg.noise_px * Vec2(nx, ny);
          d.confidence = 1.0;
          d.visible = drop >= cfg.dropout_rate;
          if (out < cfg.outlier_rate) d.px = Vec2(ox * cfg.width, oy * cfg.height);
        }
      }
      if (!seen) throw SceneGenerationError("athlete outside every camera's view at frame " + std::to_string(f));
    }
  }

  // Background correspondences for each consecutive frame pair.
  if (cfg.correspondences) {
    std::seed_seq seq{cfg.seed, std::uint64_t{2}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const Mat3 Kinv = intr.K.inverse();
    for (int c = 0; c < nc; ++c) {
      const auto& cam = sc.rig.cameras[c];
      for (int f = 0; f + 1 < nf; ++f) {
        // Athlete bounding box in frame f, with margin; background samples avoid it.
        Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
        for (int j = 0; j < nj; ++j) {
          const Vec3 X = intr.K * (cam.rotations[f] * (sc.gt_trajectory.joint(f, j) - cam.center));
          const Vec2 px = X.head<2>() / X.z();
          lo = lo.cwiseMin(px);
          hi = hi.cwiseMax(px);
        }
        lo.array() -= 20.0;
        hi.array() += 20.0;
        const double athlete_dist = (detail::joint_mean(sc.gt_trajectory.pose(f)) - cam.center).norm();

        FramePairCorrespondences pair{c, f, {}};
        int attempts = 0;
        while (static_cast<int>(pair.points.size()) < cfg.background_points && attempts < 50 * cfg.background_points) {
          ++attempts;
          const Vec2 p(u01(rng) * cfg.width, u01(rng) * cfg.height);
          const double depth = athlete_dist + 20.0 + 80.0 * u01(rng);
          const double n1 = noise(rng), n2 = noise(rng), n3 = noise(rng), n4 = noise(rng);
          const double o = u01(rng), ox = u01(rng), oy = u01(rng);
          if ((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all()) continue;
          const Vec3 ray = Kinv * Vec3(p.x(), p.y(), 1.0);
          const Vec3 X = cam.center + cam.rotations[f].transpose() * (depth * ray.normalized());
          const Vec3 Y = intr.K * (cam.rotations[f + 1] * (X - cam.center));
          if (!(Y.z() > kMinDepth)) continue;
          Vec2 q = Y.head<2>() / Y.z();
          if (!intr.contains(q)) continue;
          Correspondence cr{p + cfg.background_noise_px * Vec2(n1, n2), q + cfg.background_noise_px * Vec2(n3, n4)};
          if (o < cfg.background_outlier_rate) cr.q = Vec2(ox * cfg.width, oy * cfg.height);
          pair.points.push_back(cr);
        }
        sc.correspondences.push_back(std::move(pair));
      }
    }
  }
  return sc;
}

}  // namespace ptzcap
