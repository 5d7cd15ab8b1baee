#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ptzcap;
using namespace ptzcap::testing;

namespace {

SyntheticScene io_scene() {
  SceneConfig cfg;
  cfg.n_cameras = 2;
  cfg.n_frames = 6;
  cfg.noise_px = 1.5;
  cfg.dropout_rate = 0.2;
  cfg.background_points = 12;
  cfg.background_noise_px = 0.5;
  return generate_scene(cfg);
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST(Io, ObservationsRoundTripExactly) {
  const auto s = io_scene();
  const auto path = (scratch_dir("io_obs") / "obs.jsonl").string();
  write_observations(path, s.observations, s.skeleton.joint_names());
  std::vector<std::string> gaps;
  const auto o = read_observations(path, &gaps);
  EXPECT_TRUE(gaps.empty());
  ASSERT_EQ(o.n_frames(), 6);
  ASSERT_EQ(o.n_cameras(), 2);
  ASSERT_EQ(o.n_joints(), 24);
  for (int f = 0; f < 6; ++f)
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < 24; ++j) {
        const auto &a = s.observations.at(f, c, j), &b = o.at(f, c, j);
        EXPECT_EQ(a.visible, b.visible);
        EXPECT_EQ(a.confidence, b.confidence);
        EXPECT_EQ(a.px, b.px);
      }
}

TEST(Io, MissingRecordsAreGapsWithInvisibleDetections) {
  const auto dir = scratch_dir("io_gaps");
  write_text(dir / "obs.jsonl",
             "{\"format\":\"ptzcap/observations\",\"version\":1,\"n_frames\":2,\"n_cameras\":1,\"n_joints\":2}\n"
             "{\"camera_id\":0,\"frame\":1,\"joints\":[{\"id\":1,\"x_px\":3.5,\"y_px\":4}]}\n");
  std::vector<std::string> gaps;
  const auto o = read_observations((dir / "obs.jsonl").string(), &gaps);
  EXPECT_EQ(gaps, std::vector<std::string>{"camera 0 frame 0: no record"});
  EXPECT_FALSE(o.at(0, 0, 0).visible);
  EXPECT_FALSE(o.at(1, 0, 0).visible);
  // Omitted confidence and visibility default to 1 and true.
  EXPECT_TRUE(o.at(1, 0, 1).visible);
  EXPECT_EQ(o.at(1, 0, 1).confidence, 1.0);
  EXPECT_EQ(o.at(1, 0, 1).px, Vec2(3.5, 4.0));
}

TEST(Io, MalformedObservationsAreInputErrors) {
  const auto dir = scratch_dir("io_bad_obs");
  const std::string head =
      "{\"format\":\"ptzcap/observations\",\"version\":1,\"n_frames\":1,\"n_cameras\":1,\"n_joints\":1}\n";
  auto expect_input_error = [&](const std::string& text) {
    write_text(dir / "o.jsonl", text);
    EXPECT_THROW(read_observations((dir / "o.jsonl").string()), InputError) << text;
  };
  expect_input_error("");
  expect_input_error("{\"format\":\"ptzcap/cameras\",\"version\":1,\"n_frames\":1,\"n_cameras\":1}\n");
  expect_input_error(
      "{\"format\":\"ptzcap/observations\",\"version\":2,\"n_frames\":1,\"n_cameras\":1,\"n_joints\":1}\n");
  expect_input_error(head + "{\"camera_id\":0,\"frame\":3,\"joints\":[]}\n");
  expect_input_error(
      head + "{\"camera_id\":0,\"frame\":0,\"joints\":[{\"id\":0,\"x_px\":1,\"y_px\":1,\"confidence\":1.5}]}\n");
  expect_input_error(head + "not json\n");
  EXPECT_THROW(read_observations((dir / "absent.jsonl").string()), InputError);
}

TEST(Io, CamerasRoundTripWithAndWithoutRotations) {
  const auto s = io_scene();
  const auto dir = scratch_dir("io_cams");
  write_cameras((dir / "a.jsonl").string(), s.rig);
  const auto r = read_cameras((dir / "a.jsonl").string());
  ASSERT_EQ(r.n_cameras(), 2);
  EXPECT_EQ(r.n_frames, 6);
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(r.cameras[c].center, s.rig.cameras[c].center);
    EXPECT_EQ(r.cameras[c].intrinsics.front().K, s.rig.cameras[c].intrinsics.front().K);
    EXPECT_EQ(r.cameras[c].rotations, s.rig.cameras[c].rotations);
  }
  write_cameras((dir / "b.jsonl").string(), s.rig, false);
  EXPECT_FALSE(read_cameras((dir / "b.jsonl").string()).has_rotations());
}

TEST(Io, CameraTranslationMustKeepTheCenterFixed) {
  const auto dir = scratch_dir("io_cam_t");
  const std::string head = "{\"format\":\"ptzcap/cameras\",\"version\":1,\"n_frames\":2,\"n_cameras\":1}\n";
  const std::string K = "\"K\":[1000,0,500,0,1000,400,0,0,1],\"image_size\":[1000,800]";
  // Identity rotations: center = -t.
  write_text(dir / "ok.jsonl",
             head + "{\"camera_id\":0," + K + ",\"R\":[[1,0,0,0,1,0,0,0,1],[1,0,0,0,1,0,0,0,1]],\"t\":[1,2,3]}\n");
  EXPECT_EQ(read_cameras((dir / "ok.jsonl").string()).cameras[0].center, Vec3(-1, -2, -3));
  // A 90 degree pan with the same t would move the center.
  write_text(dir / "bad.jsonl",
             head + "{\"camera_id\":0," + K + ",\"R\":[[1,0,0,0,1,0,0,0,1],[0,-1,0,1,0,0,0,0,1]],\"t\":[1,2,3]}\n");
  EXPECT_THROW(read_cameras((dir / "bad.jsonl").string()), InputError);
  write_text(dir / "no_center.jsonl", head + "{\"camera_id\":0," + K + "}\n");
  EXPECT_THROW(read_cameras((dir / "no_center.jsonl").string()), InputError);
  write_text(
      dir / "bad_k.jsonl",
      head + "{\"camera_id\":0,\"K\":[0,0,500,0,1000,400,0,0,1],\"image_size\":[1000,800],\"center\":[0,0,0]}\n");
  EXPECT_THROW(read_cameras((dir / "bad_k.jsonl").string()), InputError);
}

TEST(Io, CorrespondencesRoundTrip) {
  const auto s = io_scene();
  const auto path = (scratch_dir("io_corr") / "c.jsonl").string();
  write_correspondences(path, s.correspondences);
  const auto c = read_correspondences(path);
  ASSERT_EQ(c.size(), s.correspondences.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(c[i].camera, s.correspondences[i].camera);
    EXPECT_EQ(c[i].frame, s.correspondences[i].frame);
    ASSERT_EQ(c[i].points.size(), s.correspondences[i].points.size());
    for (std::size_t k = 0; k < c[i].points.size(); ++k) {
      EXPECT_EQ(c[i].points[k].p, s.correspondences[i].points[k].p);
      EXPECT_EQ(c[i].points[k].q, s.correspondences[i].points[k].q);
    }
  }
}

TEST(Io, DeltasRoundTripWithFlags) {
  auto d = io_scene().gt_deltas;
  d[0].valid[2] = 0;
  d[1].interpolated[1] = 1;
  const auto path = (scratch_dir("io_deltas") / "d.jsonl").string();
  write_deltas(path, d);
  const auto r = read_deltas(path);
  ASSERT_EQ(r.size(), d.size());
  for (std::size_t c = 0; c < d.size(); ++c) {
    EXPECT_EQ(r[c].rotations, d[c].rotations);
    EXPECT_EQ(r[c].valid, d[c].valid);
    EXPECT_EQ(r[c].interpolated, d[c].interpolated);
  }
}

TEST(Io, TrajectoryRoundTrip) {
  const auto s = io_scene();
  const auto dir = scratch_dir("io_traj");
  write_trajectory((dir / "t.jsonl").string(), s.gt_trajectory, s.gt_rotations, s.skeleton.joint_names());
  const auto t = read_trajectory((dir / "t.jsonl").string());
  EXPECT_EQ(t.trajectory.channels(), s.gt_trajectory.channels());
  EXPECT_EQ(t.rotations, s.gt_rotations);
  EXPECT_EQ(t.joint_names, s.skeleton.joint_names());
  write_trajectory((dir / "bare.jsonl").string(), s.gt_trajectory);
  const auto b = read_trajectory((dir / "bare.jsonl").string());
  EXPECT_TRUE(b.rotations.empty());
  EXPECT_EQ(b.trajectory.channels(), s.gt_trajectory.channels());
}

TEST(Io, WritingTwiceGivesIdenticalBytes) {
  const auto s = io_scene();
  const auto dir = scratch_dir("io_bytes");
  for (const char* name : {"a.jsonl", "b.jsonl"})
    write_trajectory((dir / name).string(), s.gt_trajectory, s.gt_rotations, s.skeleton.joint_names());
  EXPECT_EQ(file_bytes((dir / "a.jsonl").string()), file_bytes((dir / "b.jsonl").string()));
}

TEST(Io, ConfigRoundTripAndPartialOverrides) {
  PipelineConfig c;
  c.solver = SolverConfig::uncalibrated();
  c.solver.seed = 99;
  c.solver.basis_length = 300;
  c.weights = EnergyWeights::uncalibrated();
  c.weights.sigma_sq = 64.0;
  c.rotation.ransac.inlier_threshold_px = 1.25;
  c.rotation.apply_filter = false;
  const auto dir = scratch_dir("io_cfg");
  save_config((dir / "c.json").string(), c);
  const auto r = load_config((dir / "c.json").string());
  EXPECT_EQ(r.solver.mode, SolverMode::uncalibrated);
  EXPECT_EQ(r.solver.seed, 99u);
  EXPECT_EQ(r.solver.basis_length, 300);
  EXPECT_EQ(r.solver.outer_iters, c.solver.outer_iters);
  EXPECT_EQ(r.weights.sigma_sq, 64.0);
  EXPECT_EQ(r.weights.lambda_rot, 10000.0);
  EXPECT_TRUE(r.weights_set);
  EXPECT_EQ(r.rotation.ransac.inlier_threshold_px, 1.25);
  EXPECT_FALSE(r.rotation.apply_filter);

  // Keys that are absent keep the base values.
  const auto p = config_from_json(Json::parse(R"({"solver": {"outer_iters": 7}})"), c);
  EXPECT_EQ(p.solver.outer_iters, 7);
  EXPECT_EQ(p.solver.seed, 99u);
  EXPECT_THROW(config_from_json(Json::parse(R"({"solver": {"mode": "fast"}})")), InputError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"solver": {"outer_iters": "many"}})")), InputError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"energy": {"sigma_sq": 0}})")), InputError);
}

TEST(Io, EnergyHistoryCsvUsesRoundTripPrecision) {
  std::vector<EnergyBreakdown> h(2);
  h[0] = {1.0 / 3.0, 0.1, 0.2, 0.0, {}};
  h[1] = {0.25, 0.05, 0.0, 2.0 / 3.0, {}};
  const auto path = (scratch_dir("io_energy") / "e.csv").string();
  write_energy_history(path, h);
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_NE(header.find("total"), std::string::npos);
  EXPECT_NE(first.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(second.find("0.66666666666666663"), std::string::npos);
}
