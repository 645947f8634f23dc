#include "doctest.h"

#include <random>

#include "rigcal/error.hpp"
#include "rigcal/metrics.hpp"
#include "rigcal/synthetic.hpp"

using namespace rigcal;

TEST_CASE("focal, normal and rho metrics") {
  CHECK(metric_focal_pct(1100.0, 1000.0) == doctest::Approx(10.0));
  CHECK(metric_focal_pct(900.0, 1000.0) == doctest::Approx(10.0));
  CHECK(metric_normal_deg(Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitZ()) == 0.0);
  CHECK(metric_normal_deg(Eigen::Vector3d(1, 0, 1).normalized(), Eigen::Vector3d::UnitZ()) ==
        doctest::Approx(45.0));
  CHECK(metric_rho_pct(2.2, 2.0) == doctest::Approx(10.0));
  const std::vector<Eigen::Vector3d> gt = {{0, 0, 10}, {0, 0, 20}};
  const std::vector<Eigen::Vector3d> pred = {{0, 0, 11}, {0, 0, 20}};
  CHECK(metric_x_pct(pred, gt) == doctest::Approx(5.0));
}

TEST_CASE("relative pose error ignores a common world motion") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<CameraExtrinsics> gt(3);
  for (auto& e : gt) {
    e.rot_world_to_cam = rotation_from_axis_angle(Eigen::Vector3d(g(rng), g(rng), g(rng)));
    e.position = Eigen::Vector3d(g(rng), g(rng), g(rng)) * 5.0;
  }
  const Eigen::Matrix3d q = rotation_from_axis_angle(Eigen::Vector3d(0.3, -1.0, 0.2));
  const Eigen::Vector3d t(4.0, 1.0, -2.0);
  std::vector<CameraExtrinsics> moved = gt;
  for (auto& e : moved) {
    e.rot_world_to_cam = e.rot_world_to_cam * q.transpose();
    e.position = q * e.position + t;
  }
  const RelativePoseError same = metric_relpose(moved, gt);
  CHECK(same.rotation_deg < 1e-9);
  CHECK(same.translation_m < 1e-9);
  CHECK(same.angle_diff_deg < 1e-9);

  std::vector<CameraExtrinsics> off = gt;
  off[2].position += (gt[2].rot_world_to_cam.transpose() * Eigen::Vector3d(0.0, 0.0, 0.5));
  const RelativePoseError e = metric_relpose(off, gt);
  CHECK(e.per_camera_translation_m[1] == doctest::Approx(0.5));
  CHECK(e.per_camera_translation_m[0] == doctest::Approx(0.0));
  CHECK(e.translation_m == doctest::Approx(0.25));
}

TEST_CASE("nmpjpe is zero for identical poses and scale invariant") {
  const std::vector<std::vector<Eigen::Vector3d>> pose = {{{0, 0, 0}, {0, 1, 0}, {1, 1, 0}}};
  CHECK(metric_nmpjpe(pose, pose) == doctest::Approx(0.0));
  auto scaled = pose;
  for (auto& p : scaled[0]) p *= 2.0;
  CHECK(metric_nmpjpe(scaled, pose) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("noise injection targets") {
  CHECK(parse_noise_target("sync") == NoiseTarget::kSync);
  CHECK(noise_target_name(NoiseTarget::kRotation) == "rotation");
  CHECK_THROWS_AS(parse_noise_target("lens"), Error);

  int dt = 5;
  inject_noise(NoiseTarget::kSync, -3.0, 0, NoiseInputs{.delta_t = &dt});
  CHECK(dt == 2);

  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  inject_noise(NoiseTarget::kNormal, 0.1, 7, NoiseInputs{.normal = &n});
  CHECK(n.norm() == doctest::Approx(1.0));
  CHECK(n.z() < 1.0);

  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  inject_noise(NoiseTarget::kRotation, 2.0, 7, NoiseInputs{.rotation = &r});
  CHECK(orthonormality_residual(r) < 1e-12);
  CHECK(rotation_angle(r) > 0.0);

  double sum = 0.0, sq = 0.0;
  for (int s = 0; s < 4000; ++s) {
    double f = 1000.0;
    inject_noise(NoiseTarget::kFocal, 50.0, static_cast<std::uint64_t>(s), NoiseInputs{.focal = &f});
    sum += f - 1000.0;
    sq += (f - 1000.0) * (f - 1000.0);
  }
  CHECK(std::abs(sum / 4000.0) < 5.0);
  CHECK(std::sqrt(sq / 4000.0) == doctest::Approx(50.0).epsilon(0.05));

  RigConfig rc;
  rc.n_frames = 5;
  rc.seed = 42;
  const RigScene rig = generate_rig(rc);
  auto seqs = rig.sequences;
  inject_noise(NoiseTarget::kDetections, 0.0, 1, NoiseInputs{.detections = &seqs});
  CHECK(seqs[0].frames[0].poses[0].joints[0]->pixel ==
        rig.sequences[0].frames[0].poses[0].joints[0]->pixel);
  inject_noise(NoiseTarget::kDetections, 3.0, 1, NoiseInputs{.detections = &seqs});
  CHECK(seqs[0].frames[0].poses[0].joints[0]->pixel !=
        rig.sequences[0].frames[0].poses[0].joints[0]->pixel);
}

TEST_CASE("rig generator honors fixed offsets and rejects bad ones") {
  RigConfig rc;
  rc.n_cameras = 2;
  rc.n_frames = 30;
  rc.delta_t = {0, 12};
  const RigScene rig = generate_rig(rc);
  CHECK(rig.delta_t == std::vector<int>{0, 12});
  rc.delta_t = {3, 12};
  CHECK_THROWS_AS(generate_rig(rc), Error);
}

TEST_CASE("trials are reproducible from the seed") {
  SceneConfig sc;
  sc.seed = 43;
  const TrialOutcome a = run_single_trial(sc, 1.0, 1.7);
  const TrialOutcome b = run_single_trial(sc, 1.0, 1.7);
  CHECK(a.failed == b.failed);
  CHECK(a.fx_pct == b.fx_pct);
  CHECK(a.normal_deg == b.normal_deg);
}
