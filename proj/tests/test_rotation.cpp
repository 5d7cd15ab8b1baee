#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ptzcap;
using namespace ptzcap::testing;

namespace {

Mat3 k_matrix(double f) { return CameraIntrinsics::from_focal(f, f, 960, 540, 1920, 1080).K; }

Mat3 random_homography(Gen& g) {
  Mat3 H = Mat3::Identity();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) H(r, c) += g.uniform(-0.2, 0.2);
  H(0, 2) = g.uniform(-50, 50);
  H(1, 2) = g.uniform(-50, 50);
  H(2, 0) = g.uniform(-1e-4, 1e-4);
  H(2, 1) = g.uniform(-1e-4, 1e-4);
  return H;
}

std::vector<Correspondence> from_h(Gen& g, const Mat3& H, int n) {
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    const Vec2 p(g.uniform(0, 1920), g.uniform(0, 1080));
    out.push_back({p, detail::apply_h(H, p)});
  }
  return out;
}

double rel_frobenius(const Mat3& a, const Mat3& b) {
  return (a / a(2, 2) - b / b(2, 2)).norm() / (b / b(2, 2)).norm();
}

// Small random rotation: a few degrees about a random axis.
Mat3 small_rotation(Gen& g, double max_deg) { return rodrigues(g.unit(), deg(g.uniform(0.0, max_deg))); }

}  // namespace

TEST(Dlt, IdentityPairsGiveIdentity) {
  Gen g(41);
  auto pairs = from_h(g, Mat3::Identity(), 10);
  EXPECT_LT((fit_homography_dlt(pairs) - Mat3::Identity()).norm(), 1e-10);
}

TEST(Dlt, RecoversGeneratingHomography) {
  Gen g(42);
  for (int i = 0; i < 100; ++i) {
    const Mat3 H = random_homography(g);
    const Mat3 est = fit_homography_dlt(from_h(g, H, 8));
    EXPECT_LT(rel_frobenius(est, H), 1e-8);
    EXPECT_NEAR(est(2, 2), 1.0, 1e-15);
  }
}

TEST(Dlt, CollinearPointsAreDegenerate) {
  std::vector<Correspondence> pairs;
  for (int i = 0; i < 4; ++i) pairs.push_back({Vec2(100.0 * i, 50.0 * i), Vec2(100.0 * i + 3, 50.0 * i)});
  EXPECT_THROW(fit_homography_dlt(pairs), DegenerateConfigurationError);
  // Collinear even when there are more than four.
  for (int i = 4; i < 10; ++i) pairs.push_back({Vec2(100.0 * i, 50.0 * i), Vec2(100.0 * i + 3, 50.0 * i)});
  EXPECT_THROW(fit_homography_dlt(pairs), DegenerateConfigurationError);
  EXPECT_THROW(fit_homography_dlt({pairs[0], pairs[1], pairs[2]}), DegenerateConfigurationError);
}

TEST(Dlt, InvariantUnderSimilarityOfInputs) {
  Gen g(43);
  for (int i = 0; i < 50; ++i) {
    const Mat3 H = random_homography(g);
    const auto pairs = from_h(g, H, 12);
    // Apply similarities S to sources and T to targets; the fit must become T H S^-1.
    auto similarity = [&] {
      const double a = g.uniform(-kPi, kPi), s = g.uniform(0.2, 5.0);
      Mat3 S;
      S << s * std::cos(a), -s * std::sin(a), g.uniform(-500, 500), s * std::sin(a), s * std::cos(a),
          g.uniform(-500, 500), 0, 0, 1;
      return S;
    };
    const Mat3 S = similarity(), T = similarity();
    std::vector<Correspondence> moved;
    for (const auto& c : pairs) moved.push_back({detail::apply_h(S, c.p), detail::apply_h(T, c.q)});
    const Mat3 expected = T * fit_homography_dlt(pairs) * S.inverse();
    EXPECT_LT(rel_frobenius(fit_homography_dlt(moved), expected), 1e-8);
  }
}

TEST(Ransac, AllInliersMatchesDlt) {
  Gen g(44);
  for (int i = 0; i < 20; ++i) {
    const auto pairs = from_h(g, random_homography(g), 30);
    const auto r = fit_homography_ransac(pairs, {});
    EXPECT_EQ(r.inlier_count, pairs.size());
    EXPECT_LT(rel_frobenius(r.H, fit_homography_dlt(pairs)), 1e-10);
  }
}

TEST(Ransac, RecoversInliersAtThirtyPercentOutliers) {
  Gen g(45);
  RansacOptions opt;
  opt.inlier_threshold_px = 2.0;
  std::size_t truth = 0, found = 0, false_pos = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 H = random_homography(g);
    auto pairs = from_h(g, H, 100);
    std::vector<bool> label(100, true);
    for (int i = 0; i < 30; ++i) {
      pairs[i].q = Vec2(g.uniform(0, 1920), g.uniform(0, 1080));
      label[i] = transfer_error(H, pairs[i]) <= 2.0;  // a random point can land on the model
    }
    for (auto& c : pairs) c.q += Vec2(g.normal(0.3), g.normal(0.3));
    opt.seed = 1000 + trial;
    const auto r = fit_homography_ransac(pairs, opt);
    for (int i = 0; i < 100; ++i) {
      truth += label[i];
      found += label[i] && r.inliers[i];
      false_pos += !label[i] && r.inliers[i];
    }
  }
  EXPECT_GE(static_cast<double>(found) / truth, 0.95);
  EXPECT_LE(false_pos, 5u);
}

TEST(Ransac, PureOutliersHaveNoConsensus) {
  Gen g(46);
  int failures = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::vector<Correspondence> pairs;
    for (int i = 0; i < 40; ++i) pairs.push_back({g.vec2(0, 1000), g.vec2(0, 1000)});
    RansacOptions opt;
    opt.seed = seed;
    opt.max_iters = 200;
    try {
      fit_homography_ransac(pairs, opt);
    } catch (const NoConsensusError&) {
      ++failures;
    }
  }
  EXPECT_EQ(failures, 100);
}

TEST(Ransac, DeterministicForSeed) {
  Gen g(47);
  auto pairs = from_h(g, random_homography(g), 60);
  for (int i = 0; i < 20; ++i) pairs[i].q = g.vec2(0, 1000);
  const auto a = fit_homography_ransac(pairs, {}), b = fit_homography_ransac(pairs, {});
  EXPECT_EQ(a.H, b.H);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Ransac, TooFewPointsIsDegenerate) {
  Gen g(48);
  EXPECT_THROW(fit_homography_ransac(from_h(g, Mat3::Identity(), 3), {}), DegenerateConfigurationError);
}

TEST(Extract, IdentityHomographyGivesIdentity) {
  const Mat3 K = k_matrix(3000);
  const auto d = extract_rotation_delta(K * K.inverse(), K, K);
  EXPECT_LT((d.projected - Mat3::Identity()).norm(), 1e-12);
}

TEST(Extract, RecoversGeneratingRotation) {
  Gen g(49);
  for (int i = 0; i < 100; ++i) {
    const Mat3 K0 = k_matrix(g.uniform(1000, 6000)), K1 = k_matrix(g.uniform(1000, 6000));
    const Mat3 R = small_rotation(g, 10.0);
    const double scale = g.uniform(0.1, 10.0);
    const auto d = extract_rotation_delta(scale * K1 * R * K0.inverse(), K0, K1);
    EXPECT_LT((d.projected - R).norm(), 1e-8);
    EXPECT_LT((d.raw - R).norm(), 1e-8);
  }
}

TEST(Extract, ProjectedIsAlwaysARotation) {
  Gen g(50);
  for (int i = 0; i < 200; ++i) {
    const Mat3 K = k_matrix(3000);
    Mat3 H = K * small_rotation(g, 5.0) * K.inverse();
    for (int k = 0; k < 9; ++k) H.data()[k] *= 1.0 + g.normal(1e-3);
    const auto d = extract_rotation_delta(H, K, K);
    EXPECT_LT((d.projected.transpose() * d.projected - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(d.projected.determinant(), 1.0, 1e-12);
  }
}

TEST(Extract, SingularIntrinsicsAreRejected) {
  Mat3 K = Mat3::Zero();
  EXPECT_THROW(extract_rotation_delta(Mat3::Identity(), K, K), InputError);
}

namespace {

DeltaTrack track_from_angles(const std::vector<Vec3>& angles) {
  DeltaTrack t;
  for (const auto& a : angles) t.rotations.push_back(euler_to_matrix(EulerAngles::from_vector(a)));
  t.valid.assign(angles.size(), 1);
  t.interpolated.assign(angles.size(), 0);
  return t;
}

Vec3 track_angles_at(const DeltaTrack& t, std::size_t i) { return matrix_to_euler(t.rotations[i]).angles.as_vector(); }

}  // namespace

TEST(Filter, ConstantTrackIsUnchanged) {
  const auto t = track_from_angles(std::vector<Vec3>(20, Vec3(0.01, -0.002, 0.0005)));
  const auto f = filter_rotation_track(t);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LT((f.rotations[i] - t.rotations[i]).norm(), 1e-12);
}

TEST(Filter, MedianRemovesSingleSpike) {
  std::vector<Vec3> a(12, Vec3(0.01, 0.0, 0.0));
  a[5] = Vec3(0.3, 0.2, -0.1);
  const auto f = filter_rotation_track(track_from_angles(a));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT((track_angles_at(f, i) - Vec3(0.01, 0, 0)).norm(), 1e-12);
}

TEST(Filter, RampMatchesNaivePipeline) {
  std::vector<Vec3> a;
  for (int i = 0; i < 40; ++i) a.emplace_back(0.001 * i, -0.0005 * i + 0.01, 0.0);
  const auto f = filter_rotation_track(track_from_angles(a));
  // Oracle: median then renormalized Gaussian, both written out by hand.
  for (int k = 0; k < 3; ++k) {
    std::vector<double> x(40), med(40), out(40);
    for (int i = 0; i < 40; ++i) x[i] = a[i][k];
    for (int i = 0; i < 40; ++i) {
      std::vector<double> w;
      for (int d = -3; d <= 3; ++d) w.push_back(x[std::clamp(i + d, 0, 39)]);
      std::sort(w.begin(), w.end());
      med[i] = w[3];
    }
    for (int i = 0; i < 40; ++i) {
      double s = 0, n = 0;
      for (int d = -12; d <= 12; ++d) {
        if (i + d < 0 || i + d > 39) continue;
        const double c = std::exp(-d * d / 18.0);
        s += c * med[i + d];
        n += c;
      }
      out[i] = s / n;
    }
    for (int i = 0; i < 40; ++i) EXPECT_NEAR(track_angles_at(f, i)[k], out[i], 1e-10);
    // Interior of a ramp is preserved.
    for (int i = 15; i < 25; ++i) EXPECT_NEAR(track_angles_at(f, i)[k], x[i], 1e-10);
  }
}

TEST(Filter, InvalidEntriesAreInterpolatedAndFlagged) {
  std::vector<Vec3> a;
  for (int i = 0; i < 10; ++i) a.emplace_back(0.01 * i, 0, 0);
  auto t = track_from_angles(a);
  t.valid[4] = 0;
  t.rotations[4] = Mat3::Identity() * 7.0;  // garbage must be ignored
  RotationFilterOptions opt;
  opt.median_window = 1;
  opt.gaussian_sigma = 0.0;
  const auto f = filter_rotation_track(t, opt);
  EXPECT_EQ(f.interpolated[4], 1);
  EXPECT_EQ(f.valid[4], 0);
  EXPECT_NEAR(track_angles_at(f, 4)[0], 0.04, 1e-12);
  for (int i = 0; i < 10; ++i) {
    if (i != 4) EXPECT_EQ(f.interpolated[i], 0);
  }
}

TEST(Pipeline, NoiseFreeSceneRecoversDeltas) {
  SceneConfig cfg;
  cfg.n_cameras = 2;
  cfg.n_frames = 30;
  const auto sc = generate_scene(cfg);
  RotationEstimationOptions opt;
  opt.apply_filter = false;
  const auto res = estimate_rotation_deltas(sc.correspondences, sc.rig_without_rotations(), opt);
  EXPECT_TRUE(res.warnings.empty());
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(res.summaries[c].valid_pairs, 29u);
    for (int f = 0; f < 29; ++f) {
      const Vec3 e = matrix_to_euler(res.raw[c].rotations[f]).angles.as_vector();
      const Vec3 t = matrix_to_euler(sc.gt_deltas[c].rotations[f]).angles.as_vector();
      EXPECT_LT((e - t).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
  // Without filtering the output is the raw extraction, bit for bit.
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < 29; ++f) EXPECT_EQ(res.deltas[c].rotations[f], res.raw[c].rotations[f]);
}

TEST(Pipeline, ComposedDeltasReproduceFinalRotation) {
  SceneConfig cfg;
  cfg.n_cameras = 1;
  cfg.n_frames = 40;
  const auto sc = generate_scene(cfg);
  RotationEstimationOptions opt;
  opt.apply_filter = false;
  const auto res = estimate_rotation_deltas(sc.correspondences, sc.rig_without_rotations(), opt);
  Mat3 R = sc.gt_rotations[0][0];
  for (int f = 0; f < 39; ++f) R = res.raw[0].rotations[f] * R;
  EXPECT_LT((R - sc.gt_rotations[0][39]).norm(), 1e-7);
}

TEST(Pipeline, ShortPairIsFlaggedNotFatal) {
  SceneConfig cfg;
  cfg.n_cameras = 1;
  cfg.n_frames = 6;
  auto sc = generate_scene(cfg);
  sc.correspondences[2].points.resize(3);
  const auto res = estimate_rotation_deltas(sc.correspondences, sc.rig_without_rotations());
  EXPECT_EQ(res.raw[0].valid[2], 0);
  EXPECT_EQ(res.summaries[0].valid_pairs, 4u);
  EXPECT_EQ(res.deltas[0].interpolated[2], 1);
  ASSERT_FALSE(res.warnings.empty());
}

TEST(Pipeline, OrderOfPairsDoesNotMatter) {
  SceneConfig cfg;
  cfg.n_cameras = 2;
  cfg.n_frames = 12;
  cfg.background_outlier_rate = 0.3;
  cfg.background_noise_px = 0.5;
  const auto sc = generate_scene(cfg);
  auto reversed = sc.correspondences;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = estimate_rotation_deltas(sc.correspondences, sc.rig_without_rotations());
  const auto b = estimate_rotation_deltas(reversed, sc.rig_without_rotations());
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < 11; ++f) EXPECT_EQ(a.deltas[c].rotations[f], b.deltas[c].rotations[f]);
}

TEST(RaysFit, RecoversTheRotationFromNoiseFreeRays) {
  Gen g(60);
  for (int i = 0; i < 50; ++i) {
    const Mat3 K0 = k_matrix(g.uniform(1000, 6000)), K1 = k_matrix(g.uniform(1000, 6000));
    const Mat3 R = small_rotation(g, 10.0);
    const auto pairs = from_h(g, K1 * R * K0.inverse(), 10);
    EXPECT_LT((fit_rotation_from_rays(pairs, K0, K1) - R).norm(), 1e-10);
  }
}

TEST(RaysFit, MaskedPairsAreIgnored) {
  Gen g(61);
  const Mat3 K = k_matrix(3000);
  const Mat3 R = small_rotation(g, 3.0);
  auto pairs = from_h(g, K * R * K.inverse(), 12);
  std::vector<std::uint8_t> mask(12, 1);
  for (int i = 0; i < 4; ++i) {
    pairs[i].q = Vec2(g.uniform(0, 1920), g.uniform(0, 1080));
    mask[i] = 0;
  }
  EXPECT_LT((fit_rotation_from_rays(pairs, K, K, &mask) - R).norm(), 1e-10);
  EXPECT_GT((fit_rotation_from_rays(pairs, K, K) - R).norm(), 1e-4);
}

TEST(RaysFit, OneDirectionIsDegenerate) {
  const Mat3 K = k_matrix(3000);
  const std::vector<Correspondence> same(5, Correspondence{Vec2(100, 200), Vec2(110, 205)});
  EXPECT_THROW(fit_rotation_from_rays(same, K, K), DegenerateConfigurationError);
  EXPECT_THROW(fit_rotation_from_rays({}, K, K), DegenerateConfigurationError);
}

// With a narrow field of view the eight-parameter homography leaves its perspective
// entries loose, and K^-1 H K amplifies them by f; the three-parameter fit does not.
TEST(RaysFit, NarrowFieldOfViewNoiseStaysAtThePixelScale) {
  Gen g(62);
  const Mat3 K = k_matrix(5000);
  std::vector<double> rays_err, homography_err;
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 R = small_rotation(g, 2.0);
    auto pairs = from_h(g, K * R * K.inverse(), 20);
    for (auto& c : pairs) {
      c.p += Vec2(g.normal(), g.normal());
      c.q += Vec2(g.normal(), g.normal());
    }
    auto angle = [&](const Mat3& est) { return to_deg(Eigen::AngleAxisd(est * R.transpose()).angle()); };
    rays_err.push_back(angle(fit_rotation_from_rays(pairs, K, K)));
    homography_err.push_back(angle(extract_rotation_delta(fit_homography_dlt(pairs), K, K).projected));
  }
  std::sort(rays_err.begin(), rays_err.end());
  std::sort(homography_err.begin(), homography_err.end());
  // Roll about the optical axis is the weakest direction: sqrt(2) px of ray noise over a
  // lever of 0.127 rad (rms ray radius) and 20 points gives sigma 0.029 deg, median 0.019.
  EXPECT_LT(rays_err[50], 0.03);
  EXPECT_GT(homography_err[50], 5.0 * rays_err[50]);
}

TEST(Pipeline, HomographyPathIsSelectable) {
  SceneConfig cfg;
  cfg.n_cameras = 2;
  cfg.n_frames = 8;
  const auto s = generate_scene(cfg);
  RotationEstimationOptions opt;
  opt.apply_filter = false;
  opt.rotation_from_inliers = false;
  const auto r = estimate_rotation_deltas(s.correspondences, s.rig_without_rotations(), opt);
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < 7; ++f) EXPECT_LT((r.raw[c].rotations[f] - s.gt_deltas[c].rotations[f]).norm(), 1e-8);
}
