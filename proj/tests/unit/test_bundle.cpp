#include "doctest.h"

#include <random>

#include "rigcal/bundle.hpp"
#include "rigcal/metrics.hpp"
#include "rigcal/synthetic.hpp"

using namespace rigcal;

namespace {

RigScene small_rig(std::uint64_t seed) {
  RigConfig rc;
  rc.n_frames = 60;
  rc.seed = seed;
  return generate_rig(rc);
}

void nudge(BundleProblem& prob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t c = 1; c < prob.cameras.size(); ++c) {
    auto& e = prob.cameras[c].extrinsics;
    e.rot_world_to_cam =
        rotation_from_axis_angle(Eigen::Vector3d(g(rng), g(rng), g(rng)) * 0.02) * e.rot_world_to_cam;
    e.position += Eigen::Vector3d(g(rng), g(rng), g(rng)) * 0.05;
  }
}

}  // namespace

TEST_CASE("ground truth rig has zero intersection, symmetry and plane loss") {
  const RigScene rig = small_rig(21);
  const BundleProblem prob = rig_bundle_problem(rig, 20);
  const LossTerms t = bundle_loss(prob);
  CHECK(t.intersection_count > 0);
  CHECK(t.intersection < 1e-9);
  CHECK(t.plane < 1e-9);
  CHECK(t.symmetry < 1e-9);
  // Bent legs make the bone chain longer than the straight ankle-shoulder h.
  CHECK(t.height_count > 0);
}

TEST_CASE("gradient matches central differences") {
  const RigScene rig = small_rig(22);
  BundleProblem prob = rig_bundle_problem(rig, 8);
  prob.weights.height = 0.1;
  nudge(prob, 1);
  for (bool intr : {false, true}) {
    BundleConfig cfg;
    cfg.optimize_intrinsics = intr;
    cfg.optimize_principal_point = intr;
    const BundleObjective obj(prob, cfg);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(obj.num_parameters(), 1e-3);
    Eigen::VectorXd grad;
    const double v = obj.value_and_gradient(x, grad);
    CHECK(v == doctest::Approx(obj.value(x)).epsilon(1e-12));
    Eigen::VectorXd fd(x.size());
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd a = x, b = x;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      fd[i] = (obj.value(a) - obj.value(b)) / 2e-6;
    }
    CHECK((grad - fd).norm() / fd.norm() < 1e-4);
  }
}

TEST_CASE("parameter layout skips the reference camera") {
  const RigScene rig = small_rig(23);
  const BundleProblem prob = rig_bundle_problem(rig, 5);
  const BundleObjective plain(prob, BundleConfig{});
  CHECK(plain.num_parameters() == 6 * 2);
  CHECK(plain.layout(0).size == 0);
  BundleConfig all;
  all.optimize_intrinsics = true;
  all.optimize_principal_point = true;
  const BundleObjective full(prob, all);
  CHECK(full.num_parameters() == 6 * 2 + 3 * 3);
  const BundleProblem same = full.apply(Eigen::VectorXd::Zero(full.num_parameters()));
  for (std::size_t c = 0; c < prob.cameras.size(); ++c) {
    CHECK((same.cameras[c].extrinsics.position - prob.cameras[c].extrinsics.position).norm() < 1e-12);
    CHECK(same.cameras[c].intrinsics.f == doctest::Approx(prob.cameras[c].intrinsics.f));
  }
}

TEST_CASE("descent never raises the loss and keeps rotations orthonormal") {
  const RigScene rig = small_rig(24);
  BundleProblem prob = rig_bundle_problem(rig, 30);
  nudge(prob, 2);
  BundleConfig cfg;
  cfg.max_iter = 60;
  const BundleResult res = optimize_bundle(prob, cfg);
  REQUIRE(res.loss_history.size() >= 2);
  for (std::size_t i = 1; i < res.loss_history.size(); ++i) {
    CHECK(res.loss_history[i] < res.loss_history[i - 1]);
  }
  for (const auto& c : res.cameras) CHECK(orthonormality_residual(c.extrinsics.rot_world_to_cam) < 1e-12);
  CHECK((res.cameras[0].extrinsics.position - prob.cameras[0].extrinsics.position).norm() == 0.0);
}

TEST_CASE("top-k keeps the most confident poses") {
  std::vector<MatchedPose> poses(5);
  for (int i = 0; i < 5; ++i) {
    poses[i].frame = i;
    ViewObservation v;
    v.joints[0] = Keypoint{{0.0, 0.0}, 0.1 * (i + 1)};
    poses[i].views = {v, v};
  }
  const auto top = select_top_k(poses, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].frame == 4);
  CHECK(top[1].frame == 3);
}
