#pragma once

// Error metrics for single-view and rig calibration.

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rigcal/geometry.hpp"

namespace rigcal {

// 100 * |f_pred - f_gt| / f_gt
double metric_focal_pct(double f_pred, double f_gt);

// Angle between unit normals, degrees.
double metric_normal_deg(const Eigen::Vector3d& n_pred, const Eigen::Vector3d& n_gt);

// 100 * |rho_pred - rho_gt| / rho_gt, rho = camera distance to the plane.
double metric_rho_pct(double rho_pred, double rho_gt);

// Mean over points of 100 * |P_pred - P_gt| / |P_gt|, camera coordinates.
double metric_x_pct(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt);

// Relative pose of every non-reference camera from the reference camera.
struct RelativePoseError {
  // Mean over cameras, as reported in the tables: |angle(R_pred) - angle(R_gt)|
  // in degrees and | |t_pred| - |t_gt| | in meters.
  double angle_diff_deg = 0.0;
  double norm_diff_m = 0.0;
  // Mean geodesic distance between R_pred and R_gt, degrees, and mean
  // |t_pred - t_gt|, meters. Zero only when the relative poses agree.
  double rotation_deg = 0.0;
  double translation_m = 0.0;
  std::vector<double> per_camera_rotation_deg;
  std::vector<double> per_camera_translation_m;
};

// Both rigs are lists of world-to-camera extrinsics; `reference` indexes both.
RelativePoseError metric_relpose(std::span<const CameraExtrinsics> pred,
                                 std::span<const CameraExtrinsics> gt, int reference = 0);

// Mean per-joint distance after scaling each predicted pose (about its own
// root-relative coordinates) by the least-squares optimal factor. Poses are
// root-centered on their mean joint first.
double metric_nmpjpe(std::span<const std::vector<Eigen::Vector3d>> pred,
                     std::span<const std::vector<Eigen::Vector3d>> gt);

}  // namespace rigcal
