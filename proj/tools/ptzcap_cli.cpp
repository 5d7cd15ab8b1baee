// ptzcap: synthetic scenes, rotation deltas, reconstruction and metrics from the shell.
//
// Exit codes
//   0  success
//   1  usage error (bad flags)
//   2  input error (unreadable, malformed or mutually inconsistent files)
//   3  numerical failure (no usable rotation delta, non-finite energy, ...)
//   4  reconstruction finished and wrote its outputs but did not converge
//
// A default configuration file (see save_config) is read from --config or, when
// that flag is absent, from $PTZCAP_CONFIG. Command-line flags override it.

#include "ptzcap/ptzcap.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ptzcap;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kNumerical = 3, kNotConverged = 4 };

std::string config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("PTZCAP_CONFIG");
  return env ? env : "";
}

std::optional<Json> config_document(const std::string& flag) {
  const std::string path = config_path(flag);
  if (path.empty()) return std::nullopt;
  return io_detail::read_object(path, "config");
}

std::string fmt(double v, const char* format = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SceneConfig scene;
  std::string out_dir = ".";
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  auto& c = a.scene;
  s->add_option("--out-dir", a.out_dir, "Directory for the generated files")->capture_default_str();
  s->add_option("--cameras", c.n_cameras, "Number of cameras")->capture_default_str();
  s->add_option("--frames", c.n_frames, "Number of frames")->capture_default_str();
  s->add_option("--fps", c.fps, "Frame rate")->capture_default_str();
  s->add_option("--speed", c.speed_mps, "Mean athlete speed (m/s)")->capture_default_str();
  s->add_option("--noise", c.noise_px, "Detection noise std (px)")->capture_default_str();
  s->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  s->add_option("--radius", c.camera_radius_m, "Camera circle radius (m)")->capture_default_str();
  s->add_option("--focal", c.focal_px, "Focal length (px)")->capture_default_str();
  s->add_option("--jitter", c.jitter_deg, "Camera jitter amplitude per axis (deg)")->capture_default_str();
  s->add_option("--dropout", c.dropout_rate, "Fraction of detections marked invisible")->capture_default_str();
  s->add_option("--outliers", c.outlier_rate, "Fraction of detections replaced by random points")
      ->capture_default_str();
  s->add_option("--background-points", c.background_points, "Background points per frame pair")->capture_default_str();
  s->add_option("--background-noise", c.background_noise_px, "Background point noise (px)")->capture_default_str();
  s->add_option("--background-outliers", c.background_outlier_rate, "Fraction of mismatched background points")
      ->capture_default_str();
  s->add_flag("!--no-correspondences", c.correspondences, "Skip background correspondences");
}

int run_synth(const SynthArgs& a) {
  const SyntheticScene sc = generate_scene(a.scene);
  fs::create_directories(a.out_dir);
  const fs::path d(a.out_dir);
  const auto& names = sc.skeleton.joint_names();
  write_observations((d / "observations.jsonl").string(), sc.observations, names);
  write_cameras((d / "cameras.jsonl").string(), sc.rig, true);
  write_cameras((d / "cameras_positions.jsonl").string(), sc.rig, false);
  if (a.scene.correspondences) write_correspondences((d / "correspondences.jsonl").string(), sc.correspondences);
  write_trajectory((d / "gt_trajectory.jsonl").string(), sc.gt_trajectory, sc.gt_rotations, names);
  write_deltas((d / "gt_deltas.jsonl").string(), sc.gt_deltas);
  save_skeleton(sc.skeleton, (d / "skeleton.json").string());
  std::cout << "scene: " << a.scene.n_cameras << " cameras, " << a.scene.n_frames << " frames, seed " << a.scene.seed
            << " -> " << a.out_dir << "\n";
  return kOk;
}

// ---------------------------------------------------------------- estimate-rotations

struct RotationArgs {
  std::string correspondences, cameras, out, raw_out, config;
  bool no_filter = false, from_homography = false;
  std::optional<double> threshold, sigma;
  std::optional<int> iters, window;
  std::optional<std::uint64_t> seed;
};

void add_rotations(CLI::App& app, RotationArgs& a) {
  auto* s = app.add_subcommand("estimate-rotations", "Estimate inter-frame camera rotations from background matches");
  s->add_option("--correspondences", a.correspondences, "Correspondence file")->required();
  s->add_option("--cameras", a.cameras, "Camera file (intrinsics are used)")->required();
  s->add_option("--out", a.out, "Output deltas file")->required();
  s->add_option("--raw-out", a.raw_out, "Also write the unfiltered deltas here");
  s->add_option("--config", a.config, "Configuration file (default $PTZCAP_CONFIG)");
  s->add_flag("--no-filter", a.no_filter, "Write raw deltas without median/Gaussian filtering");
  s->add_flag("--from-homography", a.from_homography,
              "Take each delta as the projected K^-1 H K instead of a rotation fit to the inliers");
  s->add_option("--ransac-threshold", a.threshold, "RANSAC inlier threshold (px)");
  s->add_option("--ransac-iters", a.iters, "RANSAC iteration cap");
  s->add_option("--ransac-seed", a.seed, "RANSAC seed");
  s->add_option("--median-window", a.window, "Median filter window (frames)");
  s->add_option("--gaussian-sigma", a.sigma, "Gaussian smoothing sigma (frames)");
}

int run_rotations(const RotationArgs& a) {
  PipelineConfig cfg;
  if (auto doc = config_document(a.config)) cfg = config_from_json(*doc, cfg);
  auto& o = cfg.rotation;
  if (a.threshold) o.ransac.inlier_threshold_px = *a.threshold;
  if (a.iters) o.ransac.max_iters = *a.iters;
  if (a.seed) o.ransac.seed = *a.seed;
  if (a.window) o.filter.median_window = *a.window;
  if (a.sigma) o.filter.gaussian_sigma = *a.sigma;
  if (a.no_filter) o.apply_filter = false;
  if (a.from_homography) o.rotation_from_inliers = false;

  const CameraRig rig = read_cameras(a.cameras);
  const CorrespondenceSet corr = read_correspondences(a.correspondences);
  const RotationEstimationResult res = estimate_rotation_deltas(corr, rig, o);
  write_deltas(a.out, res.deltas);
  if (!a.raw_out.empty()) write_deltas(a.raw_out, res.raw);

  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  std::size_t valid = 0;
  for (std::size_t c = 0; c < res.summaries.size(); ++c) {
    const auto& s = res.summaries[c];
    valid += s.valid_pairs;
    std::cout << "camera " << c << ": " << s.valid_pairs << "/" << s.pairs << " pairs valid, median inlier ratio "
              << fmt(s.median_inlier_ratio, "%.3f") << ", mean |euler delta| "
              << fmt(s.mean_abs_euler_delta * 180.0 / std::numbers::pi, "%.4f") << " deg\n";
  }
  if (valid == 0) {
    std::cerr << "error: no frame pair produced a rotation delta\n";
    return kNumerical;
  }
  return kOk;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string observations, cameras, skeleton, deltas, out, energy_csv, config, mode;
  std::vector<int> use_cameras;
  std::optional<int> outer_iters, pose_basis, rot_basis, basis_length, bootstrap_iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> init_spread, step_length, lambda_rep, lambda_limbs, lambda_rot, sigma_sq;
};

void add_reconstruct(CLI::App& app, ReconstructArgs& a) {
  auto* s = app.add_subcommand("reconstruct", "Reconstruct the 3D pose trajectory");
  s->add_option("--observations", a.observations, "Observation file")->required();
  s->add_option("--cameras", a.cameras, "Camera file")->required();
  s->add_option("--skeleton", a.skeleton, "Skeleton file (default: built-in skier skeleton)");
  s->add_option("--deltas", a.deltas, "Rotation deltas file (uncalibrated mode)");
  s->add_option("--out", a.out, "Output trajectory file")->required();
  s->add_option("--energy-csv", a.energy_csv, "Write the per-iteration energy history here");
  s->add_option("--config", a.config, "Configuration file (default $PTZCAP_CONFIG)");
  s->add_option("--mode", a.mode, "calibrated | uncalibrated | baseline_direct (default: inferred from inputs)")
      ->check(CLI::IsMember({"calibrated", "uncalibrated", "baseline_direct"}));
  s->add_option("--use-cameras", a.use_cameras, "Comma-separated camera indices to use")->delimiter(',');
  s->add_option("--outer-iters", a.outer_iters, "Outer iteration budget");
  s->add_option("--seed", a.seed, "Initialization seed");
  s->add_option("--pose-basis", a.pose_basis, "Number of pose cosines");
  s->add_option("--rot-basis", a.rot_basis, "Number of camera-angle cosines");
  s->add_option("--basis-length", a.basis_length, "Cosine period parameter (0 = number of frames)");
  s->add_option("--bootstrap-iters", a.bootstrap_iters, "Look-at bootstrap iterations");
  s->add_option("--init-spread", a.init_spread, "Initial joint spread around the rig centroid (m)");
  s->add_option("--step-length", a.step_length, "First quasi-Newton trial step");
  s->add_option("--lambda-rep", a.lambda_rep, "Reprojection weight");
  s->add_option("--lambda-limbs", a.lambda_limbs, "Limb-length weight");
  s->add_option("--lambda-rot", a.lambda_rot, "Rotation-delta weight");
  s->add_option("--sigma-sq", a.sigma_sq, "Robust norm variance (px^2)");
}

int run_reconstruct(const ReconstructArgs& a) {
  std::vector<std::string> gaps;
  ObservationSet obs = read_observations(a.observations, &gaps);
  for (const auto& g : gaps) std::cerr << "warning: " << g << "\n";
  CameraRig rig = read_cameras(a.cameras);
  const SkeletonModel skel = load_skeleton(a.skeleton);
  std::optional<RotationDeltas> deltas;
  if (!a.deltas.empty()) deltas = read_deltas(a.deltas);

  if (!a.use_cameras.empty()) {
    for (int c : a.use_cameras)
      if (c < 0 || c >= rig.n_cameras()) throw InputError("--use-cameras: no camera " + std::to_string(c));
    obs = obs.select_cameras(a.use_cameras);
    rig = rig.select_cameras(a.use_cameras);
    if (deltas) {
      RotationDeltas sub;
      for (int c : a.use_cameras) sub.push_back(deltas->at(static_cast<std::size_t>(c)));
      deltas = std::move(sub);
    }
  }

  const std::optional<Json> doc = config_document(a.config);
  SolverMode mode;
  if (!a.mode.empty()) {
    mode = solver_mode_from_string(a.mode);
  } else if (doc && doc->contains("solver") && (*doc)["solver"].contains("mode")) {
    mode = solver_mode_from_string((*doc)["solver"]["mode"].get<std::string>());
  } else if (rig.has_rotations()) {
    mode = SolverMode::calibrated;
  } else if (deltas) {
    mode = SolverMode::uncalibrated;
  } else {
    mode = SolverMode::baseline_direct;
    std::cerr << "warning: no rotation tracks and no deltas; camera rotations are optimized freely\n";
  }
  if (mode == SolverMode::calibrated && !rig.has_rotations())
    throw InputError("calibrated mode needs a rotation track for every camera");
  if (mode == SolverMode::uncalibrated && !deltas) throw InputError("uncalibrated mode needs --deltas");

  const bool known_rotations =
      mode == SolverMode::calibrated || (mode == SolverMode::baseline_direct && rig.has_rotations());
  PipelineConfig cfg;
  cfg.solver = known_rotations ? SolverConfig::calibrated() : SolverConfig::uncalibrated();
  cfg.weights = known_rotations ? EnergyWeights::calibrated() : EnergyWeights::uncalibrated();
  if (doc) cfg = config_from_json(*doc, cfg);
  auto& s = cfg.solver;
  auto& w = cfg.weights;
  s.mode = mode;
  if (a.outer_iters) s.outer_iters = *a.outer_iters;
  if (a.seed) s.seed = *a.seed;
  if (a.pose_basis) s.pose_basis_size = *a.pose_basis;
  if (a.rot_basis) s.rotation_basis_size = *a.rot_basis;
  if (a.basis_length) s.basis_length = *a.basis_length;
  if (a.bootstrap_iters) s.bootstrap_iters = *a.bootstrap_iters;
  if (a.init_spread) s.init_spread_m = *a.init_spread;
  if (a.step_length) s.step_length = *a.step_length;
  if (a.lambda_rep) w.lambda_rep = *a.lambda_rep;
  if (a.lambda_limbs) w.lambda_limbs = *a.lambda_limbs;
  if (a.lambda_rot) w.lambda_rot = *a.lambda_rot;
  if (a.sigma_sq) w.sigma_sq = *a.sigma_sq;
  s.validate();
  w.validate();

  SolveResult res;
  switch (mode) {
    case SolverMode::calibrated:
      res = solve_calibrated(obs, rig, skel, w, s);
      break;
    case SolverMode::uncalibrated:
      res = solve_uncalibrated(obs, rig, skel, *deltas, w, s);
      break;
    case SolverMode::baseline_direct:
      res = solve_baseline_direct(obs, rig, skel, w, s, deltas ? &*deltas : nullptr);
      break;
  }

  write_trajectory(a.out, res.trajectory, res.rotation_tracks, skel.joint_names());
  if (!a.energy_csv.empty()) write_energy_history(a.energy_csv, res.energy_history);
  for (const auto& m : res.warnings) std::cerr << "warning: " << m << "\n";
  const auto& last = res.energy_history.back();
  std::cout << "mode " << to_string(mode) << ": " << res.status << " after " << res.outer_iterations
            << " outer iterations; E = " << fmt(last.total) << " (rep " << fmt(last.e_rep) << ", limbs "
            << fmt(last.e_limbs) << ", rot " << fmt(last.e_rot) << ")\n";
  if (res.status.rfind("line-search failure", 0) == 0) return kNumerical;
  return res.converged ? kOk : kNotConverged;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string pred, gt, skeleton, cameras, out_json, out_csv;
  EvaluationOptions opt;
};

void add_metrics(CLI::App& app, MetricsArgs& a) {
  auto* s = app.add_subcommand("metrics", "Compare a reconstruction against ground truth");
  s->add_option("--pred", a.pred, "Predicted trajectory file")->required();
  s->add_option("--gt", a.gt, "Ground-truth trajectory file")->required();
  s->add_option("--skeleton", a.skeleton, "Skeleton file (default: built-in skier skeleton)");
  s->add_option("--cameras", a.cameras, "Camera file with rotations; enables PCK");
  s->add_option("--out-json", a.out_json, "Summary JSON output");
  s->add_option("--out-csv", a.out_csv, "Per-frame CSV output");
  s->add_option("--fps", a.opt.fps, "Frame rate")->capture_default_str();
  s->add_option("--pred-speed-sigma", a.opt.pred_speed_sigma, "CoM smoothing for predicted speed (frames)")
      ->capture_default_str();
  s->add_option("--gt-speed-sigma", a.opt.gt_speed_sigma, "CoM smoothing for ground-truth speed (frames)")
      ->capture_default_str();
  s->add_option("--pck-multiplier", a.opt.pck_multiplier, "PCK radius in head-neck lengths")->capture_default_str();
}

int run_metrics(const MetricsArgs& a) {
  const SkeletonModel skel = load_skeleton(a.skeleton);
  const TrajectoryFile pred = read_trajectory(a.pred);
  const TrajectoryFile gt = read_trajectory(a.gt);
  for (const auto* t : {&pred, &gt})
    if (!t->joint_names.empty() && t->joint_names != skel.joint_names())
      throw InputError("trajectory joint names do not match the skeleton");
  std::optional<CameraRig> rig;
  if (!a.cameras.empty()) rig = read_cameras(a.cameras);
  const Evaluation ev = evaluate(pred.trajectory, gt.trajectory, skel, a.opt, rig ? &*rig : nullptr);

  for (const auto& [key, r] : ev.metrics)
    std::cout << key << ": " << fmt(r.mean, "%.4f") << " +- " << fmt(r.std, "%.4f") << " " << r.unit << "\n";
  for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
  if (!a.out_json.empty()) write_metrics_summary(a.out_json, ev);
  if (!a.out_csv.empty()) write_metrics_series(a.out_csv, ev, gt.trajectory.n_frames());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view pan-tilt motion capture"};
  app.require_subcommand(1);
  SynthArgs synth;
  RotationArgs rot;
  ReconstructArgs rec;
  MetricsArgs met;
  add_synth(app, synth);
  add_rotations(app, rot);
  add_reconstruct(app, rec);
  add_metrics(app, met);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("synth")) return run_synth(synth);
    if (app.got_subcommand("estimate-rotations")) return run_rotations(rot);
    if (app.got_subcommand("reconstruct")) return run_reconstruct(rec);
    if (app.got_subcommand("metrics")) return run_metrics(met);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const Json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
