#pragma once

// Inter-frame camera rotation from static-background correspondences:
// normalized DLT homography, RANSAC, K^-1 H K rotation extraction and
// median + Gaussian filtering of the resulting Euler angle series.

#include "ptzcap/camera.hpp"
#include "ptzcap/signal.hpp"
#include "ptzcap/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ptzcap {

class DegenerateConfigurationError : public NumericalError {
 public:
  DegenerateConfigurationError() : NumericalError("degenerate correspondence configuration (rank deficient)") {}
};

class NoConsensusError : public NumericalError {
 public:
  explicit NoConsensusError(std::size_t best)
      : NumericalError("RANSAC found no consensus (best inlier count " + std::to_string(best) + ")") {}
};

/// p in frame f corresponds to q in frame f + 1.
struct Correspondence {
  Vec2 p;
  Vec2 q;
};

struct FramePairCorrespondences {
  int camera = 0;
  int frame = 0;  // pair (frame, frame + 1)
  std::vector<Correspondence> points;
};

using CorrespondenceSet = std::vector<FramePairCorrespondences>;

namespace detail {

// Similarity taking the points to zero centroid and mean distance sqrt(2).
inline Mat3 hartley_normalization(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
  Mat3 T;
  T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return T;
}

inline Vec2 apply_h(const Mat3& H, const Vec2& p) {
  const Vec3 h = H * p.homogeneous();
  return h.head<2>() / h.z();
}

inline double triangle_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

// True if any three of the four points are collinear relative to their spread.
inline bool has_collinear_triple(const std::array<Vec2, 4>& p) {
  double scale = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) scale = std::max(scale, (p[i] - p[j]).squaredNorm());
  if (scale == 0.0) return true;
  constexpr int tri[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : tri)
    if (std::abs(triangle_area2(p[t[0]], p[t[1]], p[t[2]])) < 1e-8 * scale) return true;
  return false;
}

inline Mat3 normalize_scale(const Mat3& H) {
  if (std::abs(H(2, 2)) > 1e-12 * H.norm()) return H / H(2, 2);
  return H / H.norm();
}

}  // namespace detail

/// Normalized DLT homography with q ~ H p. Throws DegenerateConfigurationError.
inline Mat3 fit_homography_dlt(const std::vector<Correspondence>& pairs) {
  if (pairs.size() < 4) throw DegenerateConfigurationError();
  std::vector<Vec2> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& c : pairs) {
    src.push_back(c.p);
    dst.push_back(c.q);
  }
  if (pairs.size() == 4 && (detail::has_collinear_triple({src[0], src[1], src[2], src[3]}) ||
                            detail::has_collinear_triple({dst[0], dst[1], dst[2], dst[3]})))
    throw DegenerateConfigurationError();

  const Mat3 Ts = detail::hartley_normalization(src);
  const Mat3 Td = detail::hartley_normalization(dst);
  const Eigen::Index rows = std::max<Eigen::Index>(2 * static_cast<Eigen::Index>(pairs.size()), 9);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec3 p = Ts * src[i].homogeneous();
    const Vec3 q = Td * dst[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    A.row(r) << -p.x(), -p.y(), -1.0, 0.0, 0.0, 0.0, q.x() * p.x(), q.x() * p.y(), q.x();
    A.row(r + 1) << 0.0, 0.0, 0.0, -p.x(), -p.y(), -1.0, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A one-dimensional null space needs the eighth singular value bounded away from zero.
  if (!(sv(7) > 1e-10 * sv(0))) throw DegenerateConfigurationError();
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 H = Td.inverse() * Hn * Ts;
  if (!H.allFinite()) throw DegenerateConfigurationError();
  return detail::normalize_scale(H);
}

/// Forward transfer error |H p - q| in pixels.
inline double transfer_error(const Mat3& H, const Correspondence& c) {
  const Vec3 h = H * c.p.homogeneous();
  if (std::abs(h.z()) < 1e-15) return std::numeric_limits<double>::infinity();
  return (h.head<2>() / h.z() - c.q).norm();
}

struct RansacOptions {
  double inlier_threshold_px = 3.0;
  int max_iters = 2000;
  std::uint64_t seed = 12345;
  /// Early stop once the chance of having missed a better sample falls below 1 - confidence.
  double confidence = 0.999;
  /// Consensus needed beyond the minimal sample: min(N, min_consensus) inliers.
  int min_consensus = 8;
};

struct RansacResult {
  Mat3 H = Mat3::Identity();
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
  int iterations = 0;
};

inline RansacResult fit_homography_ransac(const std::vector<Correspondence>& pairs, const RansacOptions& opt,
                                          std::seed_seq& seed) {
  const std::size_t n = pairs.size();
  if (n < 4) throw DegenerateConfigurationError();

  auto classify = [&](const Mat3& H, std::vector<std::uint8_t>& mask) {
    std::size_t count = 0;
    mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (transfer_error(H, pairs[i]) <= opt.inlier_threshold_px) {
        mask[i] = 1;
        ++count;
      }
    }
    return count;
  };

  RansacResult best;
  if (n == 4) {
    best.H = fit_homography_dlt(pairs);
    best.inlier_count = classify(best.H, best.inliers);
    if (best.inlier_count < 4) throw NoConsensusError(best.inlier_count);
    return best;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> mask;
  std::vector<Correspondence> sample(4);
  long long needed = opt.max_iters;
  int it = 0;
  for (; it < opt.max_iters && it < needed; ++it) {
    std::array<std::size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      } while (!fresh);
    }
    std::array<Vec2, 4> sp, sq;
    for (int k = 0; k < 4; ++k) {
      sample[k] = pairs[idx[k]];
      sp[k] = sample[k].p;
      sq[k] = sample[k].q;
    }
    if (detail::has_collinear_triple(sp) || detail::has_collinear_triple(sq)) continue;
    Mat3 H;
    try {
      H = fit_homography_dlt(sample);
    } catch (const DegenerateConfigurationError&) {
      continue;
    }
    const std::size_t count = classify(H, mask);
    if (count > best.inlier_count) {
      best.H = H;
      best.inlier_count = count;
      best.inliers = mask;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double miss = 1.0 - std::pow(w, 4);
      if (miss <= 0.0) {
        needed = it + 1;
      } else if (miss < 1.0) {
        needed = static_cast<long long>(std::ceil(std::log(1.0 - opt.confidence) / std::log(miss)));
      }
    }
  }
  best.iterations = it;

  const std::size_t required = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(4, opt.min_consensus)));
  if (best.inlier_count < required) throw NoConsensusError(best.inlier_count);

  // Refit on the consensus set until the inlier set is stable.
  for (int round = 0; round < 5; ++round) {
    std::vector<Correspondence> in;
    for (std::size_t i = 0; i < n; ++i)
      if (best.inliers[i]) in.push_back(pairs[i]);
    Mat3 H;
    try {
      H = fit_homography_dlt(in);
    } catch (const DegenerateConfigurationError&) {
      break;
    }
    const std::size_t count = classify(H, mask);
    const bool same = mask == best.inliers;
    if (count < 4) break;
    best.H = H;
    best.inlier_count = count;
    best.inliers = mask;
    if (same) break;
  }
  if (best.inlier_count < required) throw NoConsensusError(best.inlier_count);
  return best;
}

inline RansacResult fit_homography_ransac(const std::vector<Correspondence>& pairs, const RansacOptions& opt) {
  std::seed_seq seq{opt.seed};
  return fit_homography_ransac(pairs, opt, seq);
}

struct RotationDeltaEstimate {
  Mat3 raw;        // K_{f+1}^-1 H K_f rescaled to unit determinant
  Mat3 projected;  // nearest rotation
};

/// Relative camera rotation from a pure-rotation homography H = K_{f+1} dR K_f^-1.
inline RotationDeltaEstimate extract_rotation_delta(const Mat3& H, const Mat3& K_f, const Mat3& K_f1) {
  if (std::abs(K_f.determinant()) < 1e-12 || std::abs(K_f1.determinant()) < 1e-12)
    throw InputError("extract_rotation_delta: intrinsics not invertible");
  Mat3 M = K_f1.inverse() * H * K_f;
  const double det = M.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) throw DegenerateConfigurationError();
  M /= std::cbrt(det);
  return {M, nearest_rotation(M)};
}

/// Rotation best aligning the back-projected rays of frame f with those of frame f+1
/// (orthogonal Procrustes), over the pairs selected by `mask` (all when null).
/// Three parameters instead of the homography's eight: the perspective entries of H
/// are fixed to about 1 px / w^2 and K^-1 H K scales them by f, so with a narrow field
/// of view they dominate the error of the projected K^-1 H K.
inline Mat3 fit_rotation_from_rays(const std::vector<Correspondence>& pairs, const Mat3& K_f, const Mat3& K_f1,
                                   const std::vector<std::uint8_t>* mask = nullptr) {
  if (std::abs(K_f.determinant()) < 1e-12 || std::abs(K_f1.determinant()) < 1e-12)
    throw InputError("fit_rotation_from_rays: intrinsics not invertible");
  const Mat3 Kinv = K_f.inverse(), K1inv = K_f1.inverse();
  Mat3 M = Mat3::Zero();
  std::vector<Vec3> rays;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const Vec3 a = (Kinv * pairs[i].p.homogeneous()).normalized();
    const Vec3 b = (K1inv * pairs[i].q.homogeneous()).normalized();
    M += b * a.transpose();
    rays.push_back(a);
  }
  // Two independent ray directions fix the rotation.
  bool spread = false;
  for (std::size_t i = 1; i < rays.size() && !spread; ++i) spread = rays[0].cross(rays[i]).norm() > 1e-9;
  if (!spread) throw DegenerateConfigurationError();
  return nearest_rotation(M);
}

struct RotationFilterOptions {
  int median_window = 7;
  double gaussian_sigma = 3.0;
};

/// Euler-angle median + Gaussian filtering of one camera's delta track.
/// Invalid entries are linearly interpolated from valid neighbours first and
/// flagged as interpolated; their validity flag is left unchanged.
inline DeltaTrack filter_rotation_track(const DeltaTrack& track, const RotationFilterOptions& opt = {}) {
  const std::size_t n = track.size();
  DeltaTrack out = track;
  out.interpolated.assign(n, 0);
  if (n == 0) return out;

  std::array<std::vector<double>, 3> angles;
  for (auto& a : angles) a.assign(n, 0.0);
  std::vector<std::size_t> valid_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (!track.valid[i]) continue;
    valid_idx.push_back(i);
    const Vec3 e = matrix_to_euler(track.rotations[i]).angles.as_vector();
    for (int k = 0; k < 3; ++k) angles[k][i] = e(k);
  }
  if (valid_idx.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      out.rotations[i] = Mat3::Identity();
      out.interpolated[i] = 1;
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (track.valid[i]) continue;
    out.interpolated[i] = 1;
    auto next = std::lower_bound(valid_idx.begin(), valid_idx.end(), i);
    for (int k = 0; k < 3; ++k) {
      if (next == valid_idx.begin()) {
        angles[k][i] = angles[k][*next];
      } else if (next == valid_idx.end()) {
        angles[k][i] = angles[k][valid_idx.back()];
      } else {
        const std::size_t hi = *next, lo = *(next - 1);
        const double t = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
        angles[k][i] = (1.0 - t) * angles[k][lo] + t * angles[k][hi];
      }
    }
  }
  for (auto& a : angles) a = gaussian_smooth(median_filter(a, opt.median_window), opt.gaussian_sigma);
  for (std::size_t i = 0; i < n; ++i) out.rotations[i] = euler_to_matrix({angles[0][i], angles[1][i], angles[2][i]});
  return out;
}

struct RotationEstimationOptions {
  RansacOptions ransac;
  RotationFilterOptions filter;
  bool apply_filter = true;
  /// true: rotation fit to the RANSAC inliers' rays; false: projected K^-1 H K.
  bool rotation_from_inliers = true;
};

struct CameraDeltaSummary {
  std::size_t pairs = 0;
  std::size_t valid_pairs = 0;
  double median_inlier_ratio = 0.0;
  double mean_abs_euler_delta = 0.0;  // radians, mean over valid pairs and axes
};

struct RotationEstimationResult {
  RotationDeltas raw;
  RotationDeltas deltas;  // filtered unless filtering was disabled
  std::vector<CameraDeltaSummary> summaries;
  std::vector<std::string> warnings;
};

/// Runs homography fitting, rotation extraction and (optionally) filtering for every
/// camera and consecutive frame pair. Pair failures are flagged invalid, not fatal.
/// Each pair draws from its own RNG stream seeded by (seed, camera, frame), so the
/// result does not depend on processing order.
inline RotationEstimationResult estimate_rotation_deltas(const CorrespondenceSet& corr, const CameraRig& rig,
                                                         const RotationEstimationOptions& opt = {}) {
  const int nc = rig.n_cameras();
  const int nf = rig.n_frames;
  RotationEstimationResult res;
  res.raw.resize(nc);
  for (auto& t : res.raw) {
    const std::size_t m = nf > 0 ? static_cast<std::size_t>(nf - 1) : 0;
    t.rotations.assign(m, Mat3::Identity());
    t.valid.assign(m, 0);
    t.interpolated.assign(m, 0);
  }
  std::vector<std::vector<double>> ratios(nc);
  std::vector<double> abs_sum(nc, 0.0);
  res.summaries.resize(nc);

  for (const auto& pair : corr) {
    if (pair.camera < 0 || pair.camera >= nc || pair.frame < 0 || pair.frame >= nf - 1) {
      res.warnings.push_back("correspondences for camera " + std::to_string(pair.camera) + " frame " +
                             std::to_string(pair.frame) + " are out of range; ignored");
      continue;
    }
    auto& summary = res.summaries[pair.camera];
    ++summary.pairs;
    const std::string where = "camera " + std::to_string(pair.camera) + " frame " + std::to_string(pair.frame);
    if (pair.points.size() < 4) {
      res.warnings.push_back(where + ": fewer than 4 correspondences, pair flagged invalid");
      continue;
    }
    try {
      std::seed_seq seq{opt.ransac.seed, static_cast<std::uint64_t>(pair.camera),
                        static_cast<std::uint64_t>(pair.frame)};
      const auto fit = fit_homography_ransac(pair.points, opt.ransac, seq);
      const Mat3& K_f = rig.cameras[pair.camera].intrinsics_at(pair.frame).K;
      const Mat3& K_f1 = rig.cameras[pair.camera].intrinsics_at(pair.frame + 1).K;
      const Mat3 dR = opt.rotation_from_inliers ? fit_rotation_from_rays(pair.points, K_f, K_f1, &fit.inliers)
                                                : extract_rotation_delta(fit.H, K_f, K_f1).projected;
      res.raw[pair.camera].rotations[pair.frame] = dR;
      res.raw[pair.camera].valid[pair.frame] = 1;
      ++summary.valid_pairs;
      ratios[pair.camera].push_back(static_cast<double>(fit.inlier_count) / static_cast<double>(pair.points.size()));
      abs_sum[pair.camera] += matrix_to_euler(dR).angles.as_vector().cwiseAbs().sum() / 3.0;
    } catch (const NumericalError& e) {
      res.warnings.push_back(where + ": " + e.what());
    }
  }

  for (int c = 0; c < nc; ++c) {
    auto& r = ratios[c];
    auto& s = res.summaries[c];
    if (!r.empty()) {
      std::sort(r.begin(), r.end());
      const std::size_t m = r.size() / 2;
      s.median_inlier_ratio = r.size() % 2 ? r[m] : 0.5 * (r[m - 1] + r[m]);
      s.mean_abs_euler_delta = abs_sum[c] / static_cast<double>(r.size());
    }
  }

  res.deltas = res.raw;
  if (opt.apply_filter)
    for (auto& t : res.deltas) t = filter_rotation_track(t, opt.filter);
  return res;
}

}  // namespace ptzcap
