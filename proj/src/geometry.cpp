#include "rigcal/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "rigcal/error.hpp"

namespace rigcal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kRayParallelToPlane: return "RayParallelToPlane";
    case ErrorCode::kDegenerateBasis: return "DegenerateBasis";
    case ErrorCode::kMissingJoints: return "MissingJoints";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNegativeFocalSquared: return "NegativeFocalSquared";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kCalibrationFailed: return "CalibrationFailed";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptySignal: return "EmptySignal";
    case ErrorCode::kEmptyCloud: return "EmptyCloud";
    case ErrorCode::kTooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::kNoSharedObservations: return "NoSharedObservations";
    case ErrorCode::kFrustumExhausted: return "FrustumExhausted";
    case ErrorCode::kUnknownTarget: return "UnknownTarget";
    case ErrorCode::kMismatchedRigs: return "MismatchedRigs";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << f, 0, o1, 0, f, o2, 0, 0, 1;
  return k;
}

Eigen::Vector3d CameraIntrinsics::unproject(const ImagePoint& p) const {
  return {(p.x() - o1) / f, (p.y() - o2) / f, 1.0};
}

RigidTransform2D::RigidTransform2D(double angle_rad, const Eigen::Vector2d& t)
    : angle(wrap_angle(angle_rad)), translation(t) {}

Eigen::Matrix2d RigidTransform2D::rotation() const { return rotation2d(angle); }

RigidTransform2D RigidTransform2D::inverse() const {
  const Eigen::Matrix2d rt = rotation().transpose();
  return RigidTransform2D(-angle, -(rt * translation));
}

Eigen::Isometry3d RigidTransform2D::lifted() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear().topLeftCorner<2, 2>() = rotation();
  iso.translation().head<2>() = translation;
  return iso;
}

CameraExtrinsics CameraExtrinsics::from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  CameraExtrinsics e;
  e.rot_world_to_cam = r;
  e.position = -r.transpose() * t;
  return e;
}

ImagePoint Camera::project_world(const WorldPoint& p) const {
  return project(extrinsics.to_camera(p), intrinsics);
}

ImagePoint project(const CamPoint& p, const CameraIntrinsics& k) {
  if (!(p.z() > 1e-12)) {
    throw Error(ErrorCode::kNonPositiveDepth, "point depth must be positive");
  }
  return {k.f * p.x() / p.z() + k.o1, k.f * p.y() / p.z() + k.o2};
}

CamPoint backproject_to_plane_cam(const ImagePoint& p, const CameraIntrinsics& k,
                                  const GroundPlaneFrame& plane) {
  const Eigen::Vector3d ray = k.unproject(p);
  const double denom = plane.normal.dot(ray);
  if (std::abs(denom) <= 1e-9) {
    throw Error(ErrorCode::kRayParallelToPlane, "viewing ray parallel to ground plane");
  }
  const double depth = plane.normal.dot(plane.t_plane) / denom;
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kRayParallelToPlane, "viewing ray meets the plane behind the camera");
  }
  return depth * ray;
}

PlanePoint backproject_to_plane(const ImagePoint& p, const CameraIntrinsics& k,
                                const GroundPlaneFrame& plane) {
  PlanePoint q = plane.to_plane(backproject_to_plane_cam(p, k, plane));
  q.z() = 0.0;
  return q;
}

GroundPlaneFrame plane_basis_from_normal(const Eigen::Vector3d& n, const CameraIntrinsics& k,
                                         double camera_height) {
  if (std::abs(n.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument, "normal must be unit length");
  }
  const Eigen::Vector3d up = n.normalized();
  const Eigen::Vector3d horizontal = Eigen::Vector3d::UnitX();
  if (horizontal.cross(up).norm() < 1e-6) {
    throw Error(ErrorCode::kDegenerateBasis, "image horizontal is parallel to the normal");
  }
  const Eigen::Vector3d x_axis = (horizontal - horizontal.dot(up) * up).normalized();
  const Eigen::Vector3d y_axis = up.cross(x_axis);

  GroundPlaneFrame frame;
  frame.normal = up;
  frame.rot_cam_to_plane.row(0) = x_axis.transpose();
  frame.rot_cam_to_plane.row(1) = y_axis.transpose();
  frame.rot_cam_to_plane.row(2) = up.transpose();

  // Foot of the camera on the plane; used to intersect the principal ray.
  frame.t_plane = -camera_height * up;
  const Eigen::Vector3d axis_ray = k.unproject(k.principal_point());
  const double denom = up.dot(axis_ray);
  if (denom < -1e-9) {
    frame.t_plane = (up.dot(frame.t_plane) / denom) * axis_ray;
  }
  return frame;
}

Eigen::Matrix2d rotation2d(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

double wrap_angle(double angle) {
  double a = std::fmod(angle, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a = 0.0;
  return a;
}

double wrap_angle_signed(double angle) {
  double a = wrap_angle(angle);
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-15) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

double rotation_angle(const Eigen::Matrix3d& r) {
  // atan2 form stays accurate near 0 and pi.
  const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double orthonormality_residual(const Eigen::Matrix3d& r) {
  return std::max((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(),
                  std::abs(r.determinant() - 1.0));
}

}  // namespace rigcal
