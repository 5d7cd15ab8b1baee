#pragma once

// Reconstruction drivers: calibrated (known rotations), uncalibrated (rotations
// estimated from look-at bootstrap plus measured deltas) and the direct
// per-frame baseline.

#include "ptzcap/camera.hpp"
#include "ptzcap/energy.hpp"
#include "ptzcap/lbfgs.hpp"
#include "ptzcap/motion_basis.hpp"
#include "ptzcap/skeleton.hpp"
#include "ptzcap/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ptzcap {

enum class SolverMode { calibrated, uncalibrated, baseline_direct };

inline std::string to_string(SolverMode m) {
  switch (m) {
    case SolverMode::calibrated: return "calibrated";
    case SolverMode::uncalibrated: return "uncalibrated";
    case SolverMode::baseline_direct: return "baseline_direct";
  }
  return "?";
}

inline SolverMode solver_mode_from_string(const std::string& s) {
  if (s == "calibrated") return SolverMode::calibrated;
  if (s == "uncalibrated") return SolverMode::uncalibrated;
  if (s == "baseline_direct") return SolverMode::baseline_direct;
  throw InputError("unknown solver mode: " + s);
}

struct SolverConfig {
  double step_length = 0.05;
  int outer_iters = 100;
  int max_inner_iters = 20;
  int history_size = 10;
  int max_line_search_evals = 20;
  SolverMode mode = SolverMode::calibrated;
  double init_spread_m = 10.0;
  int bootstrap_iters = 25;
  std::uint64_t seed = 0;
  int pose_basis_size = 25;
  int rotation_basis_size = 11;
  int basis_length = 0;  // cosine period parameter L; 0 means N_F
  // Stop once the relative decrease stays below convergence_tol for convergence_window outer iterations.
  double convergence_tol = 1e-9;
  int convergence_window = 10;

  static SolverConfig calibrated() { return {}; }

  static SolverConfig uncalibrated() {
    SolverConfig c;
    c.mode = SolverMode::uncalibrated;
    c.outer_iters = 1500;
    c.init_spread_m = 1.0;
    c.pose_basis_size = 11;
    return c;
  }

  void validate() const {
    if (!(step_length > 0.0)) throw InputError("step_length must be > 0");
    if (outer_iters < 1 || max_inner_iters < 1 || history_size < 1 || max_line_search_evals < 1 || bootstrap_iters < 0)
      throw InputError("iteration counts must be positive");
    if (pose_basis_size < 1 || rotation_basis_size < 1) throw InputError("basis sizes must be positive");
    if (init_spread_m < 0.0) throw InputError("init_spread_m must be >= 0");
    if (basis_length < 0) throw InputError("basis_length must be >= 0");
    if (convergence_window < 1) throw InputError("convergence_window must be positive");
  }

  LbfgsOptions lbfgs() const {
    LbfgsOptions o;
    o.step_length = step_length;
    o.max_inner_iters = max_inner_iters;
    o.history_size = history_size;
    o.max_line_search_evals = max_line_search_evals;
    return o;
  }
};

struct SolveResult {
  DctCoefficients pi;
  std::optional<DctCoefficients> gamma;
  PoseTrajectory trajectory;
  RotationTracks rotation_tracks;
  std::vector<EnergyBreakdown> energy_history;  // initial state, then one entry per outer iteration
  bool converged = false;
  std::string status;
  std::vector<std::string> warnings;
  int outer_iterations = 0;
  long evaluations = 0;
};

namespace detail {

inline TrajectoryBasis make_basis(bool direct, int n_frames, int size, int basis_length = 0) {
  return direct ? TrajectoryBasis::identity(n_frames)
                : TrajectoryBasis::cosine(n_frames, std::min(size, n_frames), basis_length);
}

// Constant-in-time pose: every joint at the rig centroid plus U(-spread, spread) per axis.
inline Eigen::MatrixXd initial_positions(const CameraRig& rig, int n_joints, int n_frames, double spread,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  const Vec3 c = rig.centroid();
  Eigen::MatrixXd pos(3 * n_joints, n_frames);
  for (int j = 0; j < n_joints; ++j) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = c[k] + (spread > 0.0 ? u(rng) : 0.0);
    pos.block(3 * j, 0, 3, n_frames) = p.replicate(1, n_frames);
  }
  return pos;
}

inline void check_inputs(const ObservationSet& obs, const CameraRig& rig, const SkeletonModel& skel) {
  rig.validate();
  if (obs.n_cameras() != rig.n_cameras()) throw InputError("observations and cameras disagree on camera count");
  if (obs.n_frames() != rig.n_frames) throw InputError("observations and cameras disagree on frame count");
  if (obs.n_joints() != skel.n_joints()) throw InputError("observations and skeleton disagree on joint count");
  if (obs.n_frames() < 1) throw InputError("no frames");
}

// Drives outer iterations until the budget or the convergence window is exhausted.
//
// The optimizer works on z with x = D z. D is 1 on pose coefficients and
// angle_scale on angle coefficients. A radian of camera angle moves the image
// about as much as the camera distance in meters of pose, so without this the quasi-Newton
// scalar Hessian guess is off by orders of magnitude for one of the blocks.
inline void run_outer_loop(const EnergyModel& model, const SolverConfig& cfg, Eigen::VectorXd& x, SolveResult& res,
                           double angle_scale = 1.0) {
  Eigen::VectorXd D = Eigen::VectorXd::Ones(x.size());
  D.tail(model.rotation_size()).setConstant(angle_scale);
  Lbfgs opt([&model, &D](const Eigen::VectorXd& z, Eigen::VectorXd* g) {
    auto e = model.evaluate(D.cwiseProduct(z), g != nullptr);
    if (g) *g = D.cwiseProduct(e.gradient);
    return e.total;
  }, cfg.lbfgs());

  auto record = [&](const Eigen::VectorXd& v) {
    auto e = model.evaluate(v, false);
    e.gradient.resize(0);
    res.energy_history.push_back(e);
    return e.total;
  };

  double prev = record(x);
  if (!std::isfinite(prev)) throw NumericalError("non-finite energy at initialization");
  int quiet = 0;
  res.converged = false;
  res.status = "budget exhausted";
  for (int it = 0; it < cfg.outer_iters; ++it) {
    Eigen::VectorXd z = x.cwiseQuotient(D);
    opt.step(z);
    Eigen::VectorXd trial = D.cwiseProduct(z);
    const double cur = record(trial);
    ++res.outer_iterations;
    if (!std::isfinite(cur)) {
      res.energy_history.pop_back();
      res.status = "line-search failure; returning last valid iterate";
      break;
    }
    x = std::move(trial);
    const double rel = (prev - cur) / std::max(std::abs(prev), 1e-300);
    quiet = rel < cfg.convergence_tol ? quiet + 1 : 0;
    prev = cur;
    if (quiet >= cfg.convergence_window) {
      res.converged = true;
      res.status = "converged";
      break;
    }
  }
  res.evaluations += opt.evaluations();
}

inline Eigen::MatrixXd track_angles(const RotationTracks& tracks, int n_frames) {
  const int nc = static_cast<int>(tracks.size());
  Eigen::MatrixXd a(3 * nc, n_frames);
  for (int c = 0; c < nc; ++c) {
    std::vector<double> ch[3];
    for (auto& v : ch) v.resize(n_frames);
    for (int f = 0; f < n_frames; ++f) {
      const Vec3 e = camera_angles(tracks[c][f]).angles.as_vector();
      for (int k = 0; k < 3; ++k) ch[k][f] = e[k];
    }
    for (int k = 0; k < 3; ++k) {
      unwrap_angles(ch[k]);
      for (int f = 0; f < n_frames; ++f) a(3 * c + k, f) = ch[k][f];
    }
  }
  return a;
}

// Confidence-weighted mean of visible detections, normalized to [0,1]^2; image center when none.
inline Vec2 subject_position(const ObservationSet& obs, const CameraIntrinsics& intr, int f, int c) {
  Vec2 acc = Vec2::Zero();
  double w = 0.0;
  for (int j = 0; j < obs.n_joints(); ++j) {
    const auto& d = obs.at(f, c, j);
    if (!d.visible || !(d.confidence > 0.0)) continue;
    acc += d.confidence * d.px;
    w += d.confidence;
  }
  if (w <= 0.0) return {0.5, 0.5};
  return (acc / w).cwiseQuotient(intr.image_size());
}

// One over the mean camera distance from the rig centroid, a stand-in for the
// unknown camera-subject distance.
inline double rotation_scale(const CameraRig& rig) {
  const Vec3 c = rig.centroid();
  double d = 0.0;
  for (const auto& cam : rig.cameras) d += (cam.center - c).norm();
  d /= std::max(rig.n_cameras(), 1);
  return d > 1.0 ? 1.0 / d : 1.0;
}

inline void finish(const EnergyModel& model, const Eigen::VectorXd& x, SolveResult& res) {
  const auto& p = model.problem();
  using Kind = TrajectoryBasis::Kind;
  res.pi = {model.pose_coefficients(x), p.pose_basis.n_frames(), p.pose_basis.basis_length(),
            p.pose_basis.kind() == Kind::identity};
  res.trajectory = PoseTrajectory(model.positions(x));
  res.rotation_tracks = model.rotation_tracks(x);
  if (p.rotation_basis)
    res.gamma = DctCoefficients{model.rotation_coefficients(x), p.rotation_basis->n_frames(),
                                p.rotation_basis->basis_length(), p.rotation_basis->kind() == Kind::identity};
}

}  // namespace detail

/// Minimizes E over the pose coefficients with the rig's known rotations.
inline SolveResult solve_calibrated(const ObservationSet& obs, const CameraRig& rig, const SkeletonModel& skel,
                                    const EnergyWeights& weights, const SolverConfig& cfg) {
  cfg.validate();
  detail::check_inputs(obs, rig, skel);
  if (!rig.has_rotations()) throw InputError("calibrated solve requires a rotation track for every camera");
  const bool direct = cfg.mode == SolverMode::baseline_direct;
  const int nf = obs.n_frames();

  EnergyProblem prob;
  prob.observations = &obs;
  prob.rig = &rig;
  prob.skeleton = &skel;
  prob.weights = weights;
  prob.pose_basis = detail::make_basis(direct, nf, cfg.pose_basis_size, cfg.basis_length);
  for (const auto& c : rig.cameras) prob.fixed_rotations.push_back(c.rotations);
  const EnergyModel model(std::move(prob));

  const Eigen::MatrixXd init = detail::initial_positions(rig, obs.n_joints(), nf, cfg.init_spread_m, cfg.seed);
  Eigen::VectorXd x = model.pack(model.problem().pose_basis.fit(init));
  SolveResult res;
  detail::run_outer_loop(model, cfg, x, res);
  detail::finish(model, x, res);
  return res;
}

struct BootstrapResult {
  Eigen::MatrixXd pose_coeffs;      // 3*N_J x N_pose
  Eigen::MatrixXd rotation_coeffs;  // 3*N_C x N_rot
  RotationTracks rotation_tracks;   // look-at rotations from the last iteration
  long evaluations = 0;
};

/// Alternates one outer iteration on the pose (cameras held fixed) with re-aiming
/// every camera at the current mean pose, offset by where the subject is observed
/// in the image. Finally fits the rotation basis to the aimed tracks.
inline BootstrapResult bootstrap_uncalibrated(const ObservationSet& obs, const CameraRig& rig,
                                              const SkeletonModel& skel, const EnergyWeights& weights,
                                              const SolverConfig& cfg) {
  cfg.validate();
  detail::check_inputs(obs, rig, skel);
  const bool direct = cfg.mode == SolverMode::baseline_direct;
  const int nf = obs.n_frames(), nc = obs.n_cameras(), nj = obs.n_joints();
  const TrajectoryBasis pose_basis = detail::make_basis(direct, nf, cfg.pose_basis_size, cfg.basis_length);
  const TrajectoryBasis rot_basis = detail::make_basis(direct, nf, cfg.rotation_basis_size, cfg.basis_length);

  EnergyWeights w = weights;
  w.lambda_rot = 0.0;
  Eigen::MatrixXd coeffs = pose_basis.fit(detail::initial_positions(rig, nj, nf, cfg.init_spread_m, cfg.seed));

  auto aim = [&](const Eigen::MatrixXd& pos) {
    RotationTracks tracks(nc, std::vector<Mat3>(nf));
    for (int f = 0; f < nf; ++f) {
      Vec3 target = Vec3::Zero();
      for (int j = 0; j < nj; ++j) target += pos.block<3, 1>(3 * j, f);
      target /= nj;
      for (int c = 0; c < nc; ++c) {
        const auto& cam = rig.cameras[c];
        const auto& intr = cam.intrinsics_at(f);
        tracks[c][f] = look_at_with_fov_shift(cam.center, target, Vec3::UnitZ(), intr,
                                              detail::subject_position(obs, intr, f, c)).R;
      }
    }
    return tracks;
  };

  std::optional<EnergyModel> model;
  Lbfgs opt([&model](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    auto e = model->evaluate(v, g != nullptr);
    if (g) *g = std::move(e.gradient);
    return e.total;
  }, cfg.lbfgs());

  BootstrapResult out;
  for (int it = 0; it < cfg.bootstrap_iters; ++it) {
    EnergyProblem prob;
    prob.observations = &obs;
    prob.rig = &rig;
    prob.skeleton = &skel;
    prob.weights = w;
    prob.pose_basis = pose_basis;
    prob.fixed_rotations = aim(pose_basis.evaluate(coeffs));
    model.emplace(std::move(prob));
    Eigen::VectorXd x = model->pack(coeffs);
    const double e = opt.step(x);
    if (std::isfinite(e)) coeffs = model->pose_coefficients(x);
  }
  out.rotation_tracks = aim(pose_basis.evaluate(coeffs));
  out.pose_coeffs = coeffs;
  out.rotation_coeffs = rot_basis.fit(detail::track_angles(out.rotation_tracks, nf));
  out.evaluations = opt.evaluations();
  return out;
}

/// Joint minimization over pose and camera-angle coefficients, starting from the bootstrap.
inline SolveResult solve_uncalibrated(const ObservationSet& obs, const CameraRig& rig, const SkeletonModel& skel,
                                      const RotationDeltas& deltas, const EnergyWeights& weights,
                                      const SolverConfig& cfg) {
  cfg.validate();
  detail::check_inputs(obs, rig, skel);
  const bool direct = cfg.mode == SolverMode::baseline_direct;
  const int nf = obs.n_frames(), nc = obs.n_cameras();
  if (static_cast<int>(deltas.size()) != nc) throw InputError("rotation deltas do not cover every camera");

  SolveResult res;
  std::size_t total_valid = 0;
  for (int c = 0; c < nc; ++c) {
    const auto& d = deltas[c];
    if (static_cast<int>(d.size()) != std::max(nf - 1, 0)) throw InputError("rotation delta track length mismatch");
    total_valid += d.valid_count();
    if (d.size() > 0 && 2 * d.valid_count() < d.size())
      res.warnings.push_back("camera " + std::to_string(c) + ": more than half of the rotation deltas are invalid");
  }
  if (total_valid == 0 && weights.lambda_rot > 0.0)
    res.warnings.push_back("no valid rotation deltas; rotations are optimized without the delta term");

  const BootstrapResult boot = bootstrap_uncalibrated(obs, rig, skel, weights, cfg);
  res.evaluations = boot.evaluations;

  EnergyProblem prob;
  prob.observations = &obs;
  prob.rig = &rig;
  prob.skeleton = &skel;
  prob.deltas = &deltas;
  prob.weights = weights;
  prob.pose_basis = detail::make_basis(direct, nf, cfg.pose_basis_size, cfg.basis_length);
  prob.rotation_basis = detail::make_basis(direct, nf, cfg.rotation_basis_size, cfg.basis_length);
  const EnergyModel model(std::move(prob));

  Eigen::VectorXd x = model.pack(boot.pose_coeffs, boot.rotation_coeffs);
  detail::run_outer_loop(model, cfg, x, res, detail::rotation_scale(rig));
  detail::finish(model, x, res);
  return res;
}

/// Per-frame parametrization of the pose (and, without known rotations, of the camera angles).
inline SolveResult solve_baseline_direct(const ObservationSet& obs, const CameraRig& rig, const SkeletonModel& skel,
                                         const EnergyWeights& weights, const SolverConfig& cfg,
                                         const RotationDeltas* deltas = nullptr) {
  SolverConfig c = cfg;
  c.mode = SolverMode::baseline_direct;
  if (rig.has_rotations()) return solve_calibrated(obs, rig, skel, weights, c);
  if (deltas) return solve_uncalibrated(obs, rig, skel, *deltas, weights, c);
  RotationDeltas none(rig.n_cameras());
  for (auto& d : none) {
    d.rotations.assign(std::max(obs.n_frames() - 1, 0), Mat3::Identity());
    d.valid.assign(d.rotations.size(), 0);
    d.interpolated.assign(d.rotations.size(), 0);
  }
  return solve_uncalibrated(obs, rig, skel, none, weights, c);
}

}  // namespace ptzcap
