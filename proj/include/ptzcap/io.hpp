#pragma once

// File formats.
//
// Record files are JSON Lines. The first line is a header object
//   {"format": "ptzcap/<kind>", "version": 1, ...dimensions}
// and every following non-empty line is one record. Doubles are written in
// shortest round-trip form, so every reader/writer pair is lossless.
//
//   observations     {camera_id, frame, joints: [{id, x_px, y_px, confidence, visible}]}
//   cameras          {camera_id, image_size: [w, h], K: [9] | K_per_frame: [[9]...],
//                     center: [3] | t: [3], R: [[9] per frame] (optional)}
//   correspondences  {camera_id, frame, points: [[x, y, x', y'], ...]}
//   deltas           {camera_id, frame, R: [9], valid, interpolated}
//   trajectory       {kind: "pose", frame, joints: [{id, x_m, y_m, z_m}]}
//                    {kind: "rotation", camera_id, frame, R: [9]}
// Matrices are row-major. Tables (energy history, metric series) are CSV.
// Single-object files (skeleton, config, metric summary) are plain JSON.

#include "ptzcap/camera.hpp"
#include "ptzcap/energy.hpp"
#include "ptzcap/metrics.hpp"
#include "ptzcap/rotation_from_background.hpp"
#include "ptzcap/skeleton.hpp"
#include "ptzcap/solver.hpp"
#include "ptzcap/types.hpp"

#include <json.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace ptzcap {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

namespace io_detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json mat_json(const Mat3& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

inline Mat3 mat_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 9) throw InputError(where + ": expected 9 numbers for a 3x3 matrix");
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = j.at(k).get<double>();
  return m;
}

inline Vec3 vec3_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw InputError(where + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw InputError("cannot open '" + path + "' for writing");
  }
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void line(const Json& j) { out_ << j.dump() << '\n'; }
  void raw(const std::string& s) { out_ << s; }

  void close() {
    out_.close();
    if (!out_) throw InputError("write failed for '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline Json header(const std::string& kind) {
  Json h;
  h["format"] = "ptzcap/" + kind;
  h["version"] = kFormatVersion;
  return h;
}

using RecordFn = std::function<void(const Json&, const std::string&)>;

// Reads a JSON Lines file: validates the header, hands it to on_header, then each record to on_record.
inline void read_records(const std::string& path, const std::string& kind, const RecordFn& on_header,
                         const RecordFn& on_record) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    try {
      const Json j = Json::parse(line);
      if (!have_header) {
        if (!j.is_object() || !j.contains("format") || j["format"] != "ptzcap/" + kind)
          throw InputError(where + ": expected a 'ptzcap/" + kind + "' header line");
        if (!j.contains("version") || j["version"] != kFormatVersion)
          throw InputError(where + ": unsupported format version");
        on_header(j, where);
        have_header = true;
        continue;
      }
      on_record(j, where);
    } catch (const Json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (!have_header) throw InputError(path + ": missing header line");
}

inline Json read_object(const std::string& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != "ptzcap/" + kind)
    throw InputError(path + ": expected a 'ptzcap/" + kind + "' document");
  if (!j.contains("version") || j["version"] != kFormatVersion) throw InputError(path + ": unsupported format version");
  return j;
}

inline int require_int(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number_integer()) throw InputError(where + ": missing integer '" + key + "'");
  return j[key].get<int>();
}

inline void check_range(int v, int n, const char* what, const std::string& where) {
  if (v < 0 || v >= n)
    throw InputError(where + ": " + what + " " + std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
}

}  // namespace io_detail

// ---------------------------------------------------------------- observations

inline void write_observations(const std::string& path, const ObservationSet& obs,
                               const std::vector<std::string>& joint_names = {}) {
  io_detail::Writer w(path);
  Json h = io_detail::header("observations");
  h["n_frames"] = obs.n_frames();
  h["n_cameras"] = obs.n_cameras();
  h["n_joints"] = obs.n_joints();
  if (!joint_names.empty()) h["joint_names"] = joint_names;
  w.line(h);
  for (int c = 0; c < obs.n_cameras(); ++c) {
    for (int f = 0; f < obs.n_frames(); ++f) {
      Json r;
      r["camera_id"] = c;
      r["frame"] = f;
      Json joints = Json::array();
      for (int j = 0; j < obs.n_joints(); ++j) {
        const auto& d = obs.at(f, c, j);
        Json e;
        e["id"] = j;
        e["x_px"] = d.px.x();
        e["y_px"] = d.px.y();
        e["confidence"] = d.confidence;
        e["visible"] = d.visible;
        joints.push_back(std::move(e));
      }
      r["joints"] = std::move(joints);
      w.line(r);
    }
  }
  w.close();
}

/// (camera, frame) records absent from the file leave their detections invisible
/// and are reported in `gaps`.
inline ObservationSet read_observations(const std::string& path, std::vector<std::string>* gaps = nullptr) {
  ObservationSet obs;
  std::vector<char> seen;
  io_detail::read_records(
      path, "observations",
      [&](const Json& h, const std::string& where) {
        const int nf = io_detail::require_int(h, "n_frames", where);
        const int nc = io_detail::require_int(h, "n_cameras", where);
        const int nj = io_detail::require_int(h, "n_joints", where);
        obs = ObservationSet(nf, nc, nj);
        seen.assign(static_cast<std::size_t>(nf) * nc, 0);
      },
      [&](const Json& r, const std::string& where) {
        const int c = io_detail::require_int(r, "camera_id", where);
        const int f = io_detail::require_int(r, "frame", where);
        io_detail::check_range(c, obs.n_cameras(), "camera_id", where);
        io_detail::check_range(f, obs.n_frames(), "frame", where);
        seen[static_cast<std::size_t>(f) * obs.n_cameras() + c] = 1;
        for (const auto& e : r.at("joints")) {
          const int j = io_detail::require_int(e, "id", where);
          io_detail::check_range(j, obs.n_joints(), "joint id", where);
          auto& d = obs.at(f, c, j);
          d.px = {e.at("x_px").get<double>(), e.at("y_px").get<double>()};
          d.confidence = e.contains("confidence") ? e["confidence"].get<double>() : 1.0;
          d.visible = e.contains("visible") ? e["visible"].get<bool>() : true;
          if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw InputError(where + ": confidence outside [0, 1]");
          if (d.visible && !d.px.allFinite()) throw InputError(where + ": non-finite pixel coordinate");
        }
      });
  if (gaps) {
    for (int c = 0; c < obs.n_cameras(); ++c)
      for (int f = 0; f < obs.n_frames(); ++f)
        if (!seen[static_cast<std::size_t>(f) * obs.n_cameras() + c])
          gaps->push_back("camera " + std::to_string(c) + " frame " + std::to_string(f) + ": no record");
  }
  return obs;
}

// ---------------------------------------------------------------- cameras

inline void write_cameras(const std::string& path, const CameraRig& rig, bool include_rotations = true) {
  io_detail::Writer w(path);
  Json h = io_detail::header("cameras");
  h["n_frames"] = rig.n_frames;
  h["n_cameras"] = rig.n_cameras();
  w.line(h);
  for (int c = 0; c < rig.n_cameras(); ++c) {
    const auto& cam = rig.cameras[c];
    Json r;
    r["camera_id"] = c;
    r["image_size"] = {cam.intrinsics.front().width, cam.intrinsics.front().height};
    if (cam.intrinsics.size() == 1) {
      r["K"] = io_detail::mat_json(cam.intrinsics.front().K);
    } else {
      Json ks = Json::array();
      for (const auto& k : cam.intrinsics) ks.push_back(io_detail::mat_json(k.K));
      r["K_per_frame"] = std::move(ks);
    }
    r["center"] = {cam.center.x(), cam.center.y(), cam.center.z()};
    if (include_rotations && cam.has_rotations()) {
      Json rs = Json::array();
      for (const auto& R : cam.rotations) rs.push_back(io_detail::mat_json(R));
      r["R"] = std::move(rs);
    }
    w.line(r);
  }
  w.close();
}

/// A camera given by translation t instead of center needs its rotation track; the
/// center -R^T t must agree across frames (within 1e-6 m).
inline CameraRig read_cameras(const std::string& path) {
  CameraRig rig;
  std::vector<char> seen;
  io_detail::read_records(
      path, "cameras",
      [&](const Json& h, const std::string& where) {
        rig.n_frames = io_detail::require_int(h, "n_frames", where);
        const int nc = io_detail::require_int(h, "n_cameras", where);
        if (rig.n_frames < 1 || nc < 1) throw InputError(where + ": need at least one frame and one camera");
        rig.cameras.resize(nc);
        seen.assign(nc, 0);
      },
      [&](const Json& r, const std::string& where) {
        const int c = io_detail::require_int(r, "camera_id", where);
        io_detail::check_range(c, rig.n_cameras(), "camera_id", where);
        if (seen[c]) throw InputError(where + ": duplicate camera_id");
        seen[c] = 1;
        auto& cam = rig.cameras[c];
        const auto& size = r.at("image_size");
        if (!size.is_array() || size.size() != 2) throw InputError(where + ": image_size must be [w, h]");
        const int width = size[0].get<int>(), height = size[1].get<int>();
        auto make = [&](const Json& k) {
          CameraIntrinsics in{io_detail::mat_from(k, where), width, height};
          in.validate();
          return in;
        };
        if (r.contains("K")) {
          cam.intrinsics = {make(r["K"])};
        } else if (r.contains("K_per_frame")) {
          for (const auto& k : r["K_per_frame"]) cam.intrinsics.push_back(make(k));
        } else {
          throw InputError(where + ": missing intrinsics (K or K_per_frame)");
        }
        if (r.contains("R")) {
          for (const auto& m : r["R"]) cam.rotations.push_back(io_detail::mat_from(m, where));
          if (static_cast<int>(cam.rotations.size()) != rig.n_frames)
            throw InputError(where + ": rotation track length differs from n_frames");
        }
        if (r.contains("center")) {
          cam.center = io_detail::vec3_from(r["center"], where);
        } else if (r.contains("t")) {
          if (!cam.has_rotations()) throw InputError(where + ": translation t given without a rotation track");
          const Vec3 t = io_detail::vec3_from(r["t"], where);
          cam.center = -cam.rotations.front().transpose() * t;
          for (const auto& R : cam.rotations)
            if ((-R.transpose() * t - cam.center).norm() > 1e-6)
              throw InputError(where + ": fixed t with a rotating camera implies a moving center");
        } else {
          throw InputError(where + ": missing camera center");
        }
      });
  for (int c = 0; c < rig.n_cameras(); ++c)
    if (!seen[c]) throw InputError(path + ": no record for camera " + std::to_string(c));
  rig.validate();
  return rig;
}

// ---------------------------------------------------------------- correspondences

inline void write_correspondences(const std::string& path, const CorrespondenceSet& set) {
  io_detail::Writer w(path);
  w.line(io_detail::header("correspondences"));
  for (const auto& pair : set) {
    Json r;
    r["camera_id"] = pair.camera;
    r["frame"] = pair.frame;
    Json pts = Json::array();
    for (const auto& c : pair.points) pts.push_back({c.p.x(), c.p.y(), c.q.x(), c.q.y()});
    r["points"] = std::move(pts);
    w.line(r);
  }
  w.close();
}

inline CorrespondenceSet read_correspondences(const std::string& path) {
  CorrespondenceSet set;
  io_detail::read_records(
      path, "correspondences", [](const Json&, const std::string&) {},
      [&](const Json& r, const std::string& where) {
        FramePairCorrespondences pair;
        pair.camera = io_detail::require_int(r, "camera_id", where);
        pair.frame = io_detail::require_int(r, "frame", where);
        for (const auto& p : r.at("points")) {
          if (!p.is_array() || p.size() != 4) throw InputError(where + ": each point must be [x, y, x', y']");
          pair.points.push_back({{p[0].get<double>(), p[1].get<double>()}, {p[2].get<double>(), p[3].get<double>()}});
        }
        set.push_back(std::move(pair));
      });
  return set;
}

// ---------------------------------------------------------------- rotation deltas

inline void write_deltas(const std::string& path, const RotationDeltas& deltas) {
  io_detail::Writer w(path);
  Json h = io_detail::header("deltas");
  h["n_cameras"] = static_cast<int>(deltas.size());
  h["n_pairs"] = deltas.empty() ? 0 : static_cast<int>(deltas.front().size());
  w.line(h);
  for (std::size_t c = 0; c < deltas.size(); ++c) {
    const auto& d = deltas[c];
    for (std::size_t f = 0; f < d.size(); ++f) {
      Json r;
      r["camera_id"] = static_cast<int>(c);
      r["frame"] = static_cast<int>(f);
      r["R"] = io_detail::mat_json(d.rotations[f]);
      r["valid"] = d.valid[f] != 0;
      r["interpolated"] = !d.interpolated.empty() && d.interpolated[f] != 0;
      w.line(r);
    }
  }
  w.close();
}

/// Pairs without a record are invalid.
inline RotationDeltas read_deltas(const std::string& path) {
  RotationDeltas deltas;
  io_detail::read_records(
      path, "deltas",
      [&](const Json& h, const std::string& where) {
        const int nc = io_detail::require_int(h, "n_cameras", where);
        const int np = io_detail::require_int(h, "n_pairs", where);
        if (nc < 0 || np < 0) throw InputError(where + ": negative dimensions");
        deltas.resize(nc);
        for (auto& d : deltas) {
          d.rotations.assign(np, Mat3::Identity());
          d.valid.assign(np, 0);
          d.interpolated.assign(np, 0);
        }
      },
      [&](const Json& r, const std::string& where) {
        const int c = io_detail::require_int(r, "camera_id", where);
        const int f = io_detail::require_int(r, "frame", where);
        io_detail::check_range(c, static_cast<int>(deltas.size()), "camera_id", where);
        io_detail::check_range(f, static_cast<int>(deltas[c].size()), "frame", where);
        deltas[c].rotations[f] = io_detail::mat_from(r.at("R"), where);
        deltas[c].valid[f] = r.contains("valid") ? r["valid"].get<bool>() : true;
        deltas[c].interpolated[f] = r.contains("interpolated") ? r["interpolated"].get<bool>() : false;
      });
  return deltas;
}

// ---------------------------------------------------------------- trajectory

struct TrajectoryFile {
  PoseTrajectory trajectory;
  RotationTracks rotations;  // empty when the file has none
  std::vector<std::string> joint_names;
};

inline void write_trajectory(const std::string& path, const PoseTrajectory& traj, const RotationTracks& rotations = {},
                             const std::vector<std::string>& joint_names = {}) {
  io_detail::Writer w(path);
  Json h = io_detail::header("trajectory");
  h["n_frames"] = traj.n_frames();
  h["n_joints"] = traj.n_joints();
  h["n_cameras"] = static_cast<int>(rotations.size());
  if (!joint_names.empty()) h["joint_names"] = joint_names;
  w.line(h);
  for (int f = 0; f < traj.n_frames(); ++f) {
    Json r;
    r["kind"] = "pose";
    r["frame"] = f;
    Json joints = Json::array();
    for (int j = 0; j < traj.n_joints(); ++j) {
      const Vec3 p = traj.joint(f, j);
      Json e;
      e["id"] = j;
      e["x_m"] = p.x();
      e["y_m"] = p.y();
      e["z_m"] = p.z();
      joints.push_back(std::move(e));
    }
    r["joints"] = std::move(joints);
    w.line(r);
  }
  for (std::size_t c = 0; c < rotations.size(); ++c) {
    for (std::size_t f = 0; f < rotations[c].size(); ++f) {
      Json r;
      r["kind"] = "rotation";
      r["camera_id"] = static_cast<int>(c);
      r["frame"] = static_cast<int>(f);
      r["R"] = io_detail::mat_json(rotations[c][f]);
      w.line(r);
    }
  }
  w.close();
}

inline TrajectoryFile read_trajectory(const std::string& path) {
  TrajectoryFile out;
  std::vector<char> pose_seen, rot_seen;
  int nc = 0;
  io_detail::read_records(
      path, "trajectory",
      [&](const Json& h, const std::string& where) {
        const int nf = io_detail::require_int(h, "n_frames", where);
        const int nj = io_detail::require_int(h, "n_joints", where);
        nc = h.contains("n_cameras") ? h["n_cameras"].get<int>() : 0;
        if (nf < 0 || nj < 0 || nc < 0) throw InputError(where + ": negative dimensions");
        out.trajectory = PoseTrajectory(nf, nj);
        out.trajectory.channels().setConstant(std::numeric_limits<double>::quiet_NaN());
        pose_seen.assign(nf, 0);
        if (nc > 0) {
          out.rotations.assign(nc, std::vector<Mat3>(nf, Mat3::Identity()));
          rot_seen.assign(static_cast<std::size_t>(nc) * nf, 0);
        }
        if (h.contains("joint_names")) out.joint_names = h["joint_names"].get<std::vector<std::string>>();
      },
      [&](const Json& r, const std::string& where) {
        const std::string kind = r.at("kind").get<std::string>();
        const int f = io_detail::require_int(r, "frame", where);
        io_detail::check_range(f, out.trajectory.n_frames(), "frame", where);
        if (kind == "pose") {
          pose_seen[f] = 1;
          for (const auto& e : r.at("joints")) {
            const int j = io_detail::require_int(e, "id", where);
            io_detail::check_range(j, out.trajectory.n_joints(), "joint id", where);
            const Vec3 p(e.at("x_m").get<double>(), e.at("y_m").get<double>(), e.at("z_m").get<double>());
            if (!p.allFinite()) throw InputError(where + ": non-finite coordinate");
            out.trajectory.set_joint(f, j, p);
          }
        } else if (kind == "rotation") {
          const int c = io_detail::require_int(r, "camera_id", where);
          io_detail::check_range(c, nc, "camera_id", where);
          out.rotations[c][f] = io_detail::mat_from(r.at("R"), where);
          rot_seen[static_cast<std::size_t>(c) * out.trajectory.n_frames() + f] = 1;
        } else {
          throw InputError(where + ": unknown record kind '" + kind + "'");
        }
      });
  for (int f = 0; f < out.trajectory.n_frames(); ++f)
    if (!pose_seen[f]) throw InputError(path + ": no pose for frame " + std::to_string(f));
  if (!out.trajectory.channels().allFinite()) throw InputError(path + ": incomplete pose records");
  for (char s : rot_seen)
    if (!s) throw InputError(path + ": incomplete rotation tracks");
  return out;
}

// ---------------------------------------------------------------- configuration

struct PipelineConfig {
  SolverConfig solver;
  EnergyWeights weights;
  RotationEstimationOptions rotation;
  bool weights_set = false;  // false: weights follow the solver mode preset
};

inline Json config_to_json(const PipelineConfig& c) {
  Json j = io_detail::header("config");
  const auto& s = c.solver;
  j["solver"] = {{"mode", to_string(s.mode)},
                 {"step_length", s.step_length},
                 {"outer_iters", s.outer_iters},
                 {"max_inner_iters", s.max_inner_iters},
                 {"history_size", s.history_size},
                 {"max_line_search_evals", s.max_line_search_evals},
                 {"init_spread_m", s.init_spread_m},
                 {"bootstrap_iters", s.bootstrap_iters},
                 {"seed", s.seed},
                 {"pose_basis_size", s.pose_basis_size},
                 {"rotation_basis_size", s.rotation_basis_size},
                 {"basis_length", s.basis_length},
                 {"convergence_tol", s.convergence_tol},
                 {"convergence_window", s.convergence_window}};
  j["energy"] = {{"lambda_rep", c.weights.lambda_rep},
                 {"lambda_limbs", c.weights.lambda_limbs},
                 {"lambda_rot", c.weights.lambda_rot},
                 {"sigma_sq", c.weights.sigma_sq}};
  const auto& r = c.rotation;
  j["rotation"] = {{"ransac_inlier_threshold_px", r.ransac.inlier_threshold_px},
                   {"ransac_max_iters", r.ransac.max_iters},
                   {"ransac_seed", r.ransac.seed},
                   {"ransac_confidence", r.ransac.confidence},
                   {"ransac_min_consensus", r.ransac.min_consensus},
                   {"median_window", r.filter.median_window},
                   {"gaussian_sigma", r.filter.gaussian_sigma},
                   {"apply_filter", r.apply_filter},
                   {"rotation_from_inliers", r.rotation_from_inliers}};
  return j;
}

/// Keys absent from the document keep their current values in `base`.
inline PipelineConfig config_from_json(const Json& j, PipelineConfig base = {}) {
  auto get = [](const Json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj[key].get<std::decay_t<decltype(field)>>();
  };
  try {
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      auto& o = base.solver;
      if (s.contains("mode")) o.mode = solver_mode_from_string(s["mode"].get<std::string>());
      get(s, "step_length", o.step_length);
      get(s, "outer_iters", o.outer_iters);
      get(s, "max_inner_iters", o.max_inner_iters);
      get(s, "history_size", o.history_size);
      get(s, "max_line_search_evals", o.max_line_search_evals);
      get(s, "init_spread_m", o.init_spread_m);
      get(s, "bootstrap_iters", o.bootstrap_iters);
      get(s, "seed", o.seed);
      get(s, "pose_basis_size", o.pose_basis_size);
      get(s, "rotation_basis_size", o.rotation_basis_size);
      get(s, "basis_length", o.basis_length);
      get(s, "convergence_tol", o.convergence_tol);
      get(s, "convergence_window", o.convergence_window);
    }
    if (j.contains("energy")) {
      const auto& e = j["energy"];
      get(e, "lambda_rep", base.weights.lambda_rep);
      get(e, "lambda_limbs", base.weights.lambda_limbs);
      get(e, "lambda_rot", base.weights.lambda_rot);
      get(e, "sigma_sq", base.weights.sigma_sq);
      base.weights_set = true;
    }
    if (j.contains("rotation")) {
      const auto& r = j["rotation"];
      auto& o = base.rotation;
      get(r, "ransac_inlier_threshold_px", o.ransac.inlier_threshold_px);
      get(r, "ransac_max_iters", o.ransac.max_iters);
      get(r, "ransac_seed", o.ransac.seed);
      get(r, "ransac_confidence", o.ransac.confidence);
      get(r, "ransac_min_consensus", o.ransac.min_consensus);
      get(r, "median_window", o.filter.median_window);
      get(r, "gaussian_sigma", o.filter.gaussian_sigma);
      get(r, "apply_filter", o.apply_filter);
      get(r, "rotation_from_inliers", o.rotation_from_inliers);
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  base.solver.validate();
  base.weights.validate();
  return base;
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
  return config_from_json(io_detail::read_object(path, "config"), std::move(base));
}

inline void save_config(const std::string& path, const PipelineConfig& c) {
  io_detail::Writer w(path);
  w.raw(config_to_json(c).dump(2) + "\n");
  w.close();
}

// ---------------------------------------------------------------- tables and reports

inline void write_energy_history(const std::string& path, const std::vector<EnergyBreakdown>& history) {
  io_detail::Writer w(path);
  w.raw("iteration,total,e_rep,e_limbs,e_rot\n");
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& e = history[i];
    w.raw(std::to_string(i) + "," + io_detail::fmt_double(e.total) + "," + io_detail::fmt_double(e.e_rep) + "," +
          io_detail::fmt_double(e.e_limbs) + "," + io_detail::fmt_double(e.e_rot) + "\n");
  }
  w.close();
}

inline Json evaluation_to_json(const Evaluation& ev) {
  Json j = io_detail::header("metrics");
  Json m = Json::object();
  for (const auto& [key, r] : ev.metrics) m[key] = {{"mean", r.mean}, {"std", r.std}, {"unit", r.unit}};
  j["metrics"] = std::move(m);
  j["warnings"] = ev.warnings;
  return j;
}

inline void write_metrics_summary(const std::string& path, const Evaluation& ev) {
  io_detail::Writer w(path);
  w.raw(evaluation_to_json(ev).dump(2) + "\n");
  w.close();
}

/// One row per frame, one column per per-frame metric. Series shorter than the
/// frame count (speed) leave trailing cells empty; per-camera metrics are omitted.
inline void write_metrics_series(const std::string& path, const Evaluation& ev, int n_frames) {
  io_detail::Writer w(path);
  std::vector<const std::pair<std::string, MetricReport>*> cols;
  for (const auto& m : ev.metrics)
    if (m.first != "PCK") cols.push_back(&m);
  std::string head = "frame";
  for (const auto* c : cols) head += ",\"" + c->first + " [" + c->second.unit + "]\"";
  w.raw(head + "\n");
  for (int f = 0; f < n_frames; ++f) {
    std::string row = std::to_string(f);
    for (const auto* c : cols) {
      row += ",";
      if (f < static_cast<int>(c->second.series.size())) row += io_detail::fmt_double(c->second.series[f]);
    }
    w.raw(row + "\n");
  }
  w.close();
}

}  // namespace ptzcap
