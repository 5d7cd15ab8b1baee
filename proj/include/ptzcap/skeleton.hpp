#pragma once

// Articulated skier model: 24 joints, limb graph, reference limb lengths and
// segment mass weights used for the center of mass.

#include "ptzcap/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ptzcap {

class SkeletonError : public InputError {
 public:
  using InputError::InputError;
};

/// Missing sections, unknown joints, duplicate edges.
class SkeletonSchemaError : public SkeletonError {
 public:
  explicit SkeletonSchemaError(const std::string& what) : SkeletonError("skeleton schema error: " + what) {}
};

class NonpositiveLimbLengthError : public SkeletonError {
 public:
  explicit NonpositiveLimbLengthError(const std::string& limb)
      : SkeletonError("nonpositive limb length: " + limb) {}
};

class NonpositiveMassWeightError : public SkeletonError {
 public:
  explicit NonpositiveMassWeightError(const std::string& segment)
      : SkeletonError("nonpositive mass weight: " + segment) {}
};

class MassWeightSumError : public SkeletonError {
 public:
  explicit MassWeightSumError(double sum)
      : SkeletonError("mass weights do not sum to 1 (sum = " + std::to_string(sum) + ")") {}
};

class AsymmetricMassWeightError : public SkeletonError {
 public:
  explicit AsymmetricMassWeightError(const std::string& segment)
      : SkeletonError("mass weights are not mirrored: " + segment) {}
};

struct Limb {
  int a = 0;
  int b = 0;
  double length_m = 0.0;
};

/// A mass-carrying segment. Point masses have a == b and their center is the joint.
struct MassSegment {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

class SkeletonModel {
 public:
  static constexpr double kWeightSumTolerance = 1e-9;

  SkeletonModel() = default;

  /// Validates every invariant; throws a SkeletonError subclass on violation.
  SkeletonModel(std::vector<std::string> joint_names, std::vector<int> body_subset, std::vector<Limb> limbs,
                std::vector<MassSegment> com_segments)
      : joint_names_(std::move(joint_names)), body_subset_(std::move(body_subset)), limbs_(std::move(limbs)),
        com_segments_(std::move(com_segments)) {
    validate();
  }

  int n_joints() const { return static_cast<int>(joint_names_.size()); }
  const std::vector<std::string>& joint_names() const { return joint_names_; }
  const std::vector<int>& body_subset() const { return body_subset_; }
  const std::vector<Limb>& limbs() const { return limbs_; }
  const std::vector<MassSegment>& com_segments() const { return com_segments_; }

  std::optional<int> find(const std::string& name) const {
    auto it = std::find(joint_names_.begin(), joint_names_.end(), name);
    if (it == joint_names_.end()) return std::nullopt;
    return static_cast<int>(it - joint_names_.begin());
  }

  int index(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw SkeletonSchemaError("unknown joint '" + name + "'");
  }

  std::string segment_name(int a, int b) const {
    return a == b ? joint_names_[a] : joint_names_[a] + "-" + joint_names_[b];
  }

  double total_mass() const {
    double m = 0.0;
    for (const auto& s : com_segments_) m += s.weight;
    return m;
  }

  /// Copy with limb lengths replaced, e.g. by subject-specific measurements.
  SkeletonModel with_limb_lengths(const std::vector<double>& lengths) const {
    if (lengths.size() != limbs_.size()) throw SkeletonSchemaError("limb length count mismatch");
    auto limbs = limbs_;
    for (std::size_t i = 0; i < limbs.size(); ++i) limbs[i].length_m = lengths[i];
    return SkeletonModel(joint_names_, body_subset_, std::move(limbs), com_segments_);
  }

  /// Counterpart of a left/right joint name ("l_knee" <-> "r_knee"); midline names map to themselves.
  static std::string mirror_name(const std::string& name) {
    if (name.rfind("l_", 0) == 0) return "r_" + name.substr(2);
    if (name.rfind("r_", 0) == 0) return "l_" + name.substr(2);
    return name;
  }

 private:
  void validate() const {
    std::set<std::string> seen;
    for (const auto& n : joint_names_) {
      if (n.empty()) throw SkeletonSchemaError("empty joint name");
      if (!seen.insert(n).second) throw SkeletonSchemaError("duplicate joint '" + n + "'");
    }
    const int nj = n_joints();
    auto in_range = [nj](int i) { return i >= 0 && i < nj; };
    for (int i : body_subset_)
      if (!in_range(i)) throw SkeletonSchemaError("body subset index out of range");

    std::set<std::pair<int, int>> edges;
    for (const auto& l : limbs_) {
      if (!in_range(l.a) || !in_range(l.b)) throw SkeletonSchemaError("limb references a missing joint");
      if (l.a == l.b) throw SkeletonSchemaError("limb connects a joint to itself");
      if (!edges.insert(std::minmax(l.a, l.b)).second)
        throw SkeletonSchemaError("duplicate limb " + segment_name(l.a, l.b));
      if (!(l.length_m > 0.0) || !std::isfinite(l.length_m))
        throw NonpositiveLimbLengthError(segment_name(l.a, l.b));
    }

    std::map<std::pair<std::string, std::string>, double> by_name;
    double sum = 0.0;
    for (const auto& s : com_segments_) {
      if (!in_range(s.a) || !in_range(s.b)) throw SkeletonSchemaError("mass segment references a missing joint");
      if (!(s.weight > 0.0) || !std::isfinite(s.weight)) throw NonpositiveMassWeightError(segment_name(s.a, s.b));
      sum += s.weight;
      by_name[std::pair<std::string, std::string>(std::minmax(joint_names_[s.a], joint_names_[s.b]))] = s.weight;
    }
    if (!com_segments_.empty() && std::abs(sum - 1.0) > kWeightSumTolerance) throw MassWeightSumError(sum);

    for (const auto& [key, w] : by_name) {
      const std::string ma = mirror_name(key.first), mb = mirror_name(key.second);
      const std::pair<std::string, std::string> mirrored = std::minmax(ma, mb);
      auto it = by_name.find(mirrored);
      if (it == by_name.end() || std::abs(it->second - w) > kWeightSumTolerance)
        throw AsymmetricMassWeightError(key.first == key.second ? key.first : key.first + "-" + key.second);
    }
  }

  std::vector<std::string> joint_names_;
  std::vector<int> body_subset_;
  std::vector<Limb> limbs_;
  std::vector<MassSegment> com_segments_;
};

namespace detail {

struct RestJoint {
  const char* name;
  double x, y, z;
};

// Standing rest pose in a body frame (x forward, y left, z up, ground at z = 0).
// Limb lengths of the default skeleton are measured on this pose.
inline constexpr RestJoint kRestPose[] = {
    {"head", 0.0, 0.0, 1.66},          {"neck", 0.0, 0.0, 1.45},
    {"r_shoulder", 0.0, -0.19, 1.42},  {"r_elbow", 0.0, -0.21, 1.12},
    {"r_hand", 0.0, -0.22, 0.85},      {"l_shoulder", 0.0, 0.19, 1.42},
    {"l_elbow", 0.0, 0.21, 1.12},      {"l_hand", 0.0, 0.22, 0.85},
    {"r_hip", 0.0, -0.12, 0.92},       {"r_knee", 0.0, -0.12, 0.48},
    {"r_ankle", 0.0, -0.12, 0.10},     {"l_hip", 0.0, 0.12, 0.92},
    {"l_knee", 0.0, 0.12, 0.48},       {"l_ankle", 0.0, 0.12, 0.10},
    {"r_toes", 0.16, -0.12, 0.03},     {"r_heel", -0.07, -0.12, 0.03},
    {"l_toes", 0.16, 0.12, 0.03},      {"l_heel", -0.07, 0.12, 0.03},
    {"r_ski_tip", 0.95, -0.12, 0.0},   {"r_ski_tail", -0.75, -0.12, 0.0},
    {"l_ski_tip", 0.95, 0.12, 0.0},    {"l_ski_tail", -0.75, 0.12, 0.0},
    {"r_pole_basket", 0.0, -0.25, -0.27}, {"l_pole_basket", 0.0, 0.25, -0.27},
};

inline constexpr std::pair<const char*, const char*> kDefaultLimbs[] = {
    {"head", "neck"},
    {"neck", "r_shoulder"},         {"neck", "l_shoulder"},
    {"r_shoulder", "r_elbow"},      {"r_elbow", "r_hand"},
    {"l_shoulder", "l_elbow"},      {"l_elbow", "l_hand"},
    {"r_shoulder", "r_hip"},        {"l_shoulder", "l_hip"},
    {"r_hip", "l_hip"},
    {"r_hip", "r_knee"},            {"r_knee", "r_ankle"},
    {"l_hip", "l_knee"},            {"l_knee", "l_ankle"},
    {"r_ankle", "r_toes"},          {"r_ankle", "r_heel"},        {"r_toes", "r_heel"},
    {"l_ankle", "l_toes"},          {"l_ankle", "l_heel"},        {"l_toes", "l_heel"},
    {"r_ski_tip", "r_ski_tail"},    {"r_ankle", "r_ski_tip"},     {"r_ankle", "r_ski_tail"},
    {"l_ski_tip", "l_ski_tail"},    {"l_ankle", "l_ski_tip"},     {"l_ankle", "l_ski_tail"},
    {"r_hand", "r_pole_basket"},    {"l_hand", "l_pole_basket"},
};

struct WeightEntry {
  const char* a;
  const char* b;  // nullptr for point masses
  double weight;
};

// Per-side relative masses. The head sits on the midline and is counted once.
inline constexpr WeightEntry kSideWeights[] = {
    {"shoulder", "hip", 0.1835}, {"shoulder", "elbow", 0.023}, {"elbow", "hand", 0.014},
    {"hand", nullptr, 0.006},    {"hip", "knee", 0.119},       {"knee", "ankle", 0.038},
    {"toes", "heel", 0.038},     {"ski_tip", "ski_tail", 0.043}, {"hand", "pole_basket", 0.003},
};
inline constexpr double kHeadWeight = 0.065;

}  // namespace detail

/// Rest pose of the default skeleton (N_J x 3, meters).
inline Pose default_rest_pose() {
  Pose p(std::size(detail::kRestPose), 3);
  int i = 0;
  for (const auto& r : detail::kRestPose) p.row(i++) << r.x, r.y, r.z;
  return p;
}

/// The built-in 24-joint skier skeleton with a 14-joint body subset.
inline SkeletonModel default_skeleton() {
  std::vector<std::string> names;
  for (const auto& r : detail::kRestPose) names.emplace_back(r.name);
  auto idx = [&](const std::string& n) {
    return static_cast<int>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  const Pose rest = default_rest_pose();

  std::vector<int> body;
  for (int i = 0; i < 14; ++i) body.push_back(i);

  std::vector<Limb> limbs;
  for (const auto& [a, b] : detail::kDefaultLimbs) {
    const int ia = idx(a), ib = idx(b);
    limbs.push_back({ia, ib, (rest.row(ia) - rest.row(ib)).norm()});
  }

  std::vector<MassSegment> mass;
  mass.push_back({idx("head"), idx("head"), detail::kHeadWeight});
  for (const char* side : {"r_", "l_"}) {
    for (const auto& w : detail::kSideWeights) {
      const int ia = idx(std::string(side) + w.a);
      const int ib = w.b ? idx(std::string(side) + w.b) : ia;
      mass.push_back({ia, ib, w.weight});
    }
  }
  return SkeletonModel(std::move(names), std::move(body), std::move(limbs), std::move(mass));
}

inline constexpr const char* kSkeletonFormat = "ptzcap/skeleton";
inline constexpr int kSkeletonVersion = 1;

/// Serializes to the key/value skeleton format (sections joints, body_subset, limbs, lengths_m, com_weights).
inline nlohmann::ordered_json skeleton_to_json(const SkeletonModel& s) {
  nlohmann::ordered_json j;
  j["format"] = kSkeletonFormat;
  j["version"] = kSkeletonVersion;
  j["joints"] = s.joint_names();
  auto body = nlohmann::ordered_json::array();
  for (int i : s.body_subset()) body.push_back(s.joint_names()[i]);
  j["body_subset"] = body;
  auto limbs = nlohmann::ordered_json::array();
  auto lengths = nlohmann::ordered_json::object();
  for (const auto& l : s.limbs()) {
    limbs.push_back({s.joint_names()[l.a], s.joint_names()[l.b]});
    lengths[s.segment_name(l.a, l.b)] = l.length_m;
  }
  j["limbs"] = limbs;
  j["lengths_m"] = lengths;
  auto weights = nlohmann::ordered_json::object();
  for (const auto& m : s.com_segments()) weights[s.segment_name(m.a, m.b)] = m.weight;
  j["com_weights"] = weights;
  return j;
}

inline SkeletonModel skeleton_from_json(const nlohmann::ordered_json& j) {
  try {
    for (const char* key : {"joints", "limbs", "lengths_m", "com_weights"})
      if (!j.contains(key)) throw SkeletonSchemaError(std::string("missing section '") + key + "'");
    if (j.contains("format") && j.at("format") != kSkeletonFormat) throw SkeletonSchemaError("unexpected format tag");

    std::vector<std::string> names = j.at("joints").get<std::vector<std::string>>();
    auto idx = [&](const std::string& n) {
      auto it = std::find(names.begin(), names.end(), n);
      if (it == names.end()) throw SkeletonSchemaError("unknown joint '" + n + "'");
      return static_cast<int>(it - names.begin());
    };

    std::vector<int> body;
    if (j.contains("body_subset"))
      for (const auto& n : j.at("body_subset")) body.push_back(idx(n.get<std::string>()));

    const auto& lengths = j.at("lengths_m");
    std::vector<Limb> limbs;
    for (const auto& l : j.at("limbs")) {
      if (!l.is_array() || l.size() != 2) throw SkeletonSchemaError("limb entries must be [joint, joint]");
      const auto a = l[0].get<std::string>(), b = l[1].get<std::string>();
      const std::string key = a + "-" + b;
      const std::string alt = b + "-" + a;
      double len;
      if (lengths.contains(key)) len = lengths.at(key).get<double>();
      else if (lengths.contains(alt)) len = lengths.at(alt).get<double>();
      else throw SkeletonSchemaError("no length for limb " + key);
      limbs.push_back({idx(a), idx(b), len});
    }

    std::vector<MassSegment> mass;
    for (const auto& [key, w] : j.at("com_weights").items()) {
      const auto dash = key.find('-');
      const int a = idx(key.substr(0, dash));
      const int b = dash == std::string::npos ? a : idx(key.substr(dash + 1));
      mass.push_back({a, b, w.get<double>()});
    }
    return SkeletonModel(std::move(names), std::move(body), std::move(limbs), std::move(mass));
  } catch (const nlohmann::json::exception& e) {
    throw SkeletonSchemaError(e.what());
  }
}

/// Loads a skeleton definition file; an empty path yields the built-in default.
inline SkeletonModel load_skeleton(const std::string& path = {}) {
  if (path.empty()) return default_skeleton();
  std::ifstream in(path);
  if (!in) throw InputError("cannot open skeleton file '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SkeletonSchemaError(std::string("parse failure: ") + e.what());
  }
  return skeleton_from_json(j);
}

inline void save_skeleton(const SkeletonModel& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write skeleton file '" + path + "'");
  out << skeleton_to_json(s).dump(2) << '\n';
}

}  // namespace ptzcap
