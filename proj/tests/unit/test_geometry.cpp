#include "doctest.h"

#include <random>

#include "rigcal/bundle.hpp"
#include "rigcal/error.hpp"
#include "rigcal/geometry.hpp"

using namespace rigcal;

namespace {

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
}

// Normal of a camera tilted down by `tilt` with optional roll.
Eigen::Vector3d tilted_normal(double tilt_deg, double roll_deg) {
  const Eigen::Vector3d up(0.0, -1.0, 0.0);
  return (Eigen::AngleAxisd(deg2rad(roll_deg), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(deg2rad(tilt_deg), Eigen::Vector3d::UnitX()) * up)
      .normalized();
}

}  // namespace

TEST_CASE("project and backproject round trip through the plane") {
  const CameraIntrinsics k{1000.0, 960.0, 540.0};
  const GroundPlaneFrame plane = plane_basis_from_normal(tilted_normal(30.0, 4.0), k, 3.5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const PlanePoint q(u(rng), u(rng), 0.0);
    const CamPoint c = plane.to_camera(q);
    REQUIRE(c.z() > 0.0);
    const PlanePoint back = backproject_to_plane(project(c, k), k, plane);
    CHECK((back - q).norm() < 1e-9);
  }
}

TEST_CASE("plane basis is right handed with the camera at the given height") {
  const CameraIntrinsics k{800.0, 640.0, 360.0};
  const Eigen::Vector3d n = tilted_normal(45.0, -6.0);
  const GroundPlaneFrame plane = plane_basis_from_normal(n, k, 2.25);
  const Eigen::Matrix3d& r = plane.rot_cam_to_plane;
  CHECK(orthonormality_residual(r) < 1e-12);
  CHECK(r.determinant() == doctest::Approx(1.0));
  CHECK((r.row(2).transpose() - n).norm() < 1e-12);
  CHECK(plane.camera_height() == doctest::Approx(2.25));
  CHECK(plane.camera_center().z() == doctest::Approx(2.25));
}

TEST_CASE("axis-angle rotations") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d axis = random_unit(rng);
    const double angle = 0.1 + 2.9 * (i / 50.0);
    const Eigen::Matrix3d r = rotation_from_axis_angle(axis * angle);
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    CHECK((r - ref).norm() < 1e-12);
    CHECK(rotation_angle(r) == doctest::Approx(angle).epsilon(1e-9));
  }
  CHECK(rotation_angle(Eigen::Matrix3d::Identity()) == 0.0);
}

TEST_CASE("orthonormalize recovers a perturbed rotation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1e-3);
  const Eigen::Matrix3d r = rotation_from_axis_angle(random_unit(rng) * 0.7);
  Eigen::Matrix3d noisy = r;
  for (int i = 0; i < 9; ++i) noisy.data()[i] += g(rng);
  const Eigen::Matrix3d fixed = orthonormalize(noisy);
  CHECK(orthonormality_residual(fixed) < 1e-12);
  CHECK(fixed.determinant() > 0.0);
  CHECK(rotation_angle(fixed.transpose() * r) < 5e-3);
}

TEST_CASE("angle wrapping") {
  CHECK(wrap_angle(-0.5 * kPi) == doctest::Approx(1.5 * kPi));
  CHECK(wrap_angle(4.0 * kPi + 0.25) == doctest::Approx(0.25));
  CHECK(wrap_angle_signed(1.5 * kPi) == doctest::Approx(-0.5 * kPi));
  CHECK(wrap_angle_signed(kPi) == doctest::Approx(kPi));
}

TEST_CASE("rigid 2D transforms compose with their inverse") {
  const RigidTransform2D t(1.1, Eigen::Vector2d(0.3, -2.0));
  const RigidTransform2D inv = t.inverse();
  const Eigen::Vector2d p(4.0, 5.0);
  CHECK((inv.apply(t.apply(p)) - p).norm() < 1e-12);
  const Eigen::Vector3d lifted = t.lifted() * Eigen::Vector3d(p.x(), p.y(), 0.7);
  CHECK((lifted.head<2>() - t.apply(p)).norm() < 1e-12);
  CHECK(lifted.z() == doctest::Approx(0.7));
}

TEST_CASE("extrinsics map world points to camera and back") {
  std::mt19937_64 rng(4);
  CameraExtrinsics e;
  e.rot_world_to_cam = rotation_from_axis_angle(random_unit(rng) * 1.3);
  e.position = Eigen::Vector3d(1.0, -2.0, 3.0);
  const WorldPoint p(0.5, 0.25, -1.0);
  CHECK((e.to_world(e.to_camera(p)) - p).norm() < 1e-12);
  CHECK(e.to_camera(e.position).norm() < 1e-12);
}

TEST_CASE("closest points of skew and parallel rays") {
  Ray a;
  a.origin = Eigen::Vector3d(0.0, 0.0, 0.0);
  a.direction = Eigen::Vector3d::UnitX();
  Ray b;
  b.origin = Eigen::Vector3d(0.0, 1.0, 2.0);
  b.direction = Eigen::Vector3d::UnitZ();
  const ClosestPoints cp = closest_points(a, b);
  CHECK_FALSE(cp.parallel);
  CHECK(cp.distance == doctest::Approx(1.0));
  CHECK(cp.on_first.norm() < 1e-12);
  CHECK((cp.on_second - Eigen::Vector3d(0.0, 1.0, 0.0)).norm() < 1e-12);

  Ray c = a;
  c.origin = Eigen::Vector3d(0.0, 0.0, 3.0);
  const ClosestPoints par = closest_points(a, c);
  CHECK(par.parallel);
  CHECK(par.distance == doctest::Approx(3.0));
}

TEST_CASE("build_ray passes through the world point it images") {
  Camera cam;
  cam.intrinsics = {900.0, 640.0, 360.0};
  cam.extrinsics.rot_world_to_cam = rotation_from_axis_angle(Eigen::Vector3d(0.2, -0.4, 0.1));
  cam.extrinsics.position = Eigen::Vector3d(0.0, -1.0, 4.0);
  const WorldPoint p = cam.extrinsics.to_world(Eigen::Vector3d(0.3, -0.2, 5.0));
  const Ray r = build_ray(cam.project_world(p), cam);
  const Eigen::Vector3d u = r.direction.normalized();
  const Eigen::Vector3d d = p - r.origin;
  CHECK((d - d.dot(u) * u).norm() < 1e-9);
  CHECK(d.dot(u) > 0.0);
}
