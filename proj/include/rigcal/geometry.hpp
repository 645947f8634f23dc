#pragma once

// Pinhole camera model, ground-plane frames and rigid transforms shared by
// every calibration stage.
//
// Conventions:
//  * Camera coordinates: x right, y down, z forward (optical axis).
//  * The ground normal points from the ground toward the camera, so the
//    camera height above the plane is positive along the normal.
//  * Plane coordinates are right-handed with the normal as the third axis;
//    2D plane points are the first two coordinates.
//  * Angles are radians.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rigcal {

using ImagePoint = Eigen::Vector2d;
using CamPoint = Eigen::Vector3d;
using WorldPoint = Eigen::Vector3d;
using PlanePoint = Eigen::Vector3d;
using PlanePoint2 = Eigen::Vector2d;

struct CameraIntrinsics {
  double f = 1.0;
  double o1 = 0.0;
  double o2 = 0.0;

  Eigen::Vector2d principal_point() const { return {o1, o2}; }
  Eigen::Matrix3d matrix() const;
  // Direction (z = 1) of the viewing ray through `p`.
  Eigen::Vector3d unproject(const ImagePoint& p) const;
};

// Rigid map from camera coordinates to plane coordinates:
//   p_plane = rot_cam_to_plane * (p_cam - t_plane)
// `t_plane` is the plane origin expressed in camera coordinates.
struct GroundPlaneFrame {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Eigen::Matrix3d rot_cam_to_plane = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_plane = Eigen::Vector3d::Zero();

  PlanePoint to_plane(const CamPoint& p) const { return rot_cam_to_plane * (p - t_plane); }
  CamPoint to_camera(const PlanePoint& q) const { return rot_cam_to_plane.transpose() * q + t_plane; }
  // Distance from the camera center to the plane.
  double camera_height() const { return -normal.dot(t_plane); }
  // Camera center in plane coordinates.
  PlanePoint camera_center() const { return to_plane(Eigen::Vector3d::Zero()); }
};

// In-plane rigid motion p' = R(angle) p + translation.
struct RigidTransform2D {
  double angle = 0.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  RigidTransform2D() = default;
  RigidTransform2D(double angle_rad, const Eigen::Vector2d& t);

  Eigen::Matrix2d rotation() const;
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return rotation() * p + translation; }
  RigidTransform2D inverse() const;
  // Rotation about the plane normal plus in-plane translation, as a 3D isometry.
  Eigen::Isometry3d lifted() const;
};

// p_cam = rot_world_to_cam * (p_world - position)
struct CameraExtrinsics {
  Eigen::Matrix3d rot_world_to_cam = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();

  CamPoint to_camera(const WorldPoint& p) const { return rot_world_to_cam * (p - position); }
  WorldPoint to_world(const CamPoint& p) const { return rot_world_to_cam.transpose() * p + position; }
  // Translation t of the world-to-camera map p_cam = R p_world + t.
  Eigen::Vector3d translation() const { return -rot_world_to_cam * position; }
  static CameraExtrinsics from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;

  ImagePoint project_world(const WorldPoint& p) const;
};

ImagePoint project(const CamPoint& p, const CameraIntrinsics& k);

PlanePoint backproject_to_plane(const ImagePoint& p, const CameraIntrinsics& k,
                                const GroundPlaneFrame& plane);

// Camera-coordinate intersection of the viewing ray with the plane.
CamPoint backproject_to_plane_cam(const ImagePoint& p, const CameraIntrinsics& k,
                                  const GroundPlaneFrame& plane);

// Builds the plane frame for a camera at `camera_height` above the plane with
// unit normal `n`. The in-plane x-axis is the camera x-axis projected onto the
// plane; the second axis is n x x. The origin is where the optical axis meets
// the plane, or the foot of the camera when the optical axis misses it.
GroundPlaneFrame plane_basis_from_normal(const Eigen::Vector3d& n, const CameraIntrinsics& k,
                                         double camera_height);

Eigen::Matrix2d rotation2d(double angle);
// Wraps an angle into [0, 2*pi).
double wrap_angle(double angle);
// Wraps an angle into (-pi, pi].
double wrap_angle_signed(double angle);

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& w);
// Geodesic angle of a rotation matrix.
double rotation_angle(const Eigen::Matrix3d& r);
// Nearest proper rotation in the Frobenius sense.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r);
double orthonormality_residual(const Eigen::Matrix3d& r);

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace rigcal
