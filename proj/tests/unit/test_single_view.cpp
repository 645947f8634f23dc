#include "doctest.h"

#include <random>

#include <Eigen/SVD>

#include "rigcal/error.hpp"
#include "rigcal/single_view.hpp"
#include "rigcal/synthetic.hpp"

using namespace rigcal;

namespace {

std::vector<AnkleShoulderPair> square_pairs(const SyntheticScene& scene) {
  std::vector<AnkleShoulderPair> pairs;
  for (const auto& p : scene.people) {
    AnkleShoulderPair a;
    a.ankle = scene.to_square(p.ankle_px);
    a.shoulder = scene.to_square(p.shoulder_px);
    pairs.push_back(a);
  }
  return pairs;
}

}  // namespace

TEST_CASE("scene generator puts ankles on the plane and shoulders h above") {
  SceneConfig cfg;
  cfg.n_people = 20;
  cfg.seed = 11;
  const SyntheticScene s = generate_scene(cfg);
  REQUIRE(s.people.size() == 20);
  for (const auto& p : s.people) {
    CHECK(s.plane.to_plane(p.ankle).z() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK((p.shoulder - p.ankle).norm() == doctest::Approx(p.height));
    CHECK((p.shoulder - p.ankle).normalized().dot(s.normal) == doctest::Approx(1.0));
    CHECK(p.ankle.z() > 0.0);
    CHECK((s.project_gen(p.ankle) - p.ankle_px).norm() < 1e-9);
  }
  CHECK(s.camera_height >= cfg.camera_height_min);
  CHECK(s.camera_height <= cfg.camera_height_max);
}

TEST_CASE("stacked solve equals the smallest right singular vector") {
  SceneConfig cfg;
  cfg.n_people = 8;
  cfg.seed = 12;
  const SyntheticScene s = generate_scene(cfg);
  auto pairs = square_pairs(s);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 2.0);
  for (auto& p : pairs) {
    p.ankle += Eigen::Vector2d(g(rng), g(rng));
    p.shoulder += Eigen::Vector2d(g(rng), g(rng));
  }
  const Eigen::Vector2d c(0.5 * s.width, 0.5 * s.height);
  const Eigen::MatrixXd a = dlt_constraint_matrix(pairs, c);
  CHECK(a.rows() == 2 * 8);
  CHECK(a.cols() == 3 + 8);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd oracle = svd.matrixV().col(a.cols() - 1);
  const Eigen::VectorXd got = solve_dlt_stacked(pairs, c);
  REQUIRE(got.size() == oracle.size());
  const double sign = got.dot(oracle) < 0.0 ? -1.0 : 1.0;
  CHECK((sign * got.normalized() - oracle).norm() < 1e-6);
}

TEST_CASE("noise-free pairs give exact focal, normal and camera height") {
  for (int seed = 0; seed < 20; ++seed) {
    SceneConfig cfg;
    cfg.n_people = 3 + seed % 4;
    cfg.seed = 100 + seed;
    const SyntheticScene s = generate_scene(cfg);
    const auto pairs = square_pairs(s);
    const Eigen::Vector2d c(0.5 * s.width, 0.5 * s.height);
    const Eigen::VectorXd sol = solve_dlt_stacked(pairs, c);
    for (auto est : {FocalEstimator::kFirstPair, FocalEstimator::kLeastSquares}) {
      const FocalNormal fn = extract_focal_and_normal(sol, pairs, c, cfg.height_mean, est);
      CHECK(fn.f == doctest::Approx(s.fx).epsilon(1e-7));
      CHECK((fn.normal - s.normal).norm() < 1e-7);
      CHECK(fn.camera_height == doctest::Approx(s.camera_height).epsilon(1e-7));
    }
    const CameraIntrinsics k{s.fx, c.x(), c.y()};
    CHECK(camera_height_given(k, s.normal, pairs, cfg.height_mean) ==
          doctest::Approx(s.camera_height).epsilon(1e-9));
    for (const auto& p : pairs) {
      CHECK(inlier_test(p, k, s.plane, cfg.height_mean, deg2rad(0.01), 1e-6));
    }
  }
}

TEST_CASE("three-pair solve agrees with the stacked solve") {
  SceneConfig cfg;
  cfg.seed = 13;
  const SyntheticScene s = generate_scene(cfg);
  const auto pairs = square_pairs(s);
  const Eigen::Vector2d c(0.5 * s.width, 0.5 * s.height);
  const Eigen::Matrix<double, 6, 1> v = solve_dlt(pairs, cfg.height_mean, c);
  const FocalNormal fn = extract_focal_and_normal(v, pairs, c, cfg.height_mean);
  CHECK(fn.f == doctest::Approx(s.fx).epsilon(1e-7));
}

TEST_CASE("ransac rejects gross outliers") {
  SceneConfig cfg;
  cfg.n_people = 30;
  cfg.seed = 14;
  const SyntheticScene s = generate_scene(cfg);
  auto pairs = square_pairs(s);
  for (int i = 0; i < 6; ++i) pairs[i].shoulder += Eigen::Vector2d(40.0, -25.0);
  SingleViewConfig sv;
  sv.h = cfg.height_mean;
  sv.iterations = 300;
  const SingleViewSolution sol =
      ransac_calibrate(pairs, Eigen::Vector2d(0.5 * s.width, 0.5 * s.height), sv);
  CHECK(sol.num_inliers == 24);
  for (int i = 0; i < 6; ++i) CHECK_FALSE(sol.inlier_mask[i]);
  CHECK(sol.intrinsics.f == doctest::Approx(s.fx).epsilon(1e-6));
}

TEST_CASE("too few pairs is an error") {
  SceneConfig cfg;
  cfg.seed = 15;
  const SyntheticScene s = generate_scene(cfg);
  auto pairs = square_pairs(s);
  pairs.resize(2);
  CHECK_THROWS_AS(ransac_calibrate(pairs, Eigen::Vector2d(960.0, 540.0), SingleViewConfig{}),
                  Error);
}

TEST_CASE("standing filter") {
  PoseDetection p;
  auto set = [&](Joint j, double x, double y) { p[j] = Keypoint{{x, y}, 1.0}; };
  set(Joint::kLeftShoulder, 100, 100);
  set(Joint::kLeftHip, 100, 200);
  set(Joint::kLeftKnee, 100, 300);
  set(Joint::kLeftAnkle, 100, 400);
  CHECK(standing_deviation(p) == doctest::Approx(0.0));
  CHECK(filter_standing(p, 0.1));
  set(Joint::kLeftKnee, 160, 300);
  CHECK(standing_deviation(p) > 0.6);
  CHECK_FALSE(filter_standing(p, 0.6));
  PoseDetection empty;
  CHECK_THROWS_AS(standing_deviation(empty), Error);
}
