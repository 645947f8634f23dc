#pragma once

// Single-view calibration from standing people: focal length, ground normal
// and camera height from ankle/shoulder centers, assuming every person has
// the same ankle-to-shoulder height h and stands parallel to the normal.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rigcal/geometry.hpp"
#include "rigcal/skeleton.hpp"

namespace rigcal {

// Sum of knee and hip bend angles (radians away from a straight line) for the
// straighter body side. Throws MissingJoints if neither side is complete.
double standing_deviation(const PoseDetection& pose);
bool filter_standing(const PoseDetection& pose, double threshold);

// Null vector of the 6x6 constraint matrix for exactly three pairs.
// Layout: (f*n_x, f*n_y, n_z, z_1/h, z_2/h, z_3/h) up to scale, with pixel
// coordinates taken relative to `principal_point`.
Eigen::Matrix<double, 6, 1> solve_dlt(std::span<const AnkleShoulderPair> pairs, double h,
                                      const Eigen::Vector2d& principal_point);

// Stacked 2M x (3 + M) constraint matrix for M >= 3 pairs.
Eigen::MatrixXd dlt_constraint_matrix(std::span<const AnkleShoulderPair> pairs,
                                      const Eigen::Vector2d& principal_point);

// Right singular vector of the stacked matrix for its smallest singular value.
// The per-pair depth unknowns are eliminated so the cost is linear in M.
Eigen::VectorXd solve_dlt_stacked(std::span<const AnkleShoulderPair> pairs,
                                  const Eigen::Vector2d& principal_point);

struct FocalNormal {
  double f = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  std::vector<double> depths;  // ankle depths (camera z), meters
  double camera_height = 0.0;  // distance from camera center to the plane
};

// How f is read off the null vector when there are more than three pairs:
// the closed form on the first two ankles (always used for three pairs), or
// least squares over the coplanarity of every ankle.
enum class FocalEstimator { kFirstPair, kLeastSquares };

// Recovers f, the unit normal and ankle depths from a DLT null vector.
FocalNormal extract_focal_and_normal(const Eigen::VectorXd& solution,
                                     std::span<const AnkleShoulderPair> pairs,
                                     const Eigen::Vector2d& principal_point, double h,
                                     FocalEstimator estimator = FocalEstimator::kLeastSquares);

// Camera height given a known focal length and normal.
double camera_height_given(const CameraIntrinsics& k, const Eigen::Vector3d& normal,
                           std::span<const AnkleShoulderPair> pairs, double h);

struct InlierResidual {
  bool valid = false;
  double pixel_error = 0.0;  // fraction of the detected ankle-to-shoulder length
  double angle_error = 0.0;  // radians
};

InlierResidual inlier_residual(const AnkleShoulderPair& pair, const CameraIntrinsics& k,
                               const GroundPlaneFrame& plane, double h);

bool inlier_test(const AnkleShoulderPair& pair, const CameraIntrinsics& k,
                 const GroundPlaneFrame& plane, double h, double angle_thresh,
                 double pixel_thresh);

struct SingleViewConfig {
  double h = 1.7;
  int iterations = 1000;
  double angle_thresh = deg2rad(2.86);
  double pixel_thresh = 0.05;
  double standing_thresh = 0.6;
  double min_confidence = 0.2;
  std::uint64_t seed = 0;
};

struct SingleViewSolution {
  CameraIntrinsics intrinsics;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  std::vector<double> depths;  // one per inlier pair
  GroundPlaneFrame plane;
  std::vector<bool> inlier_mask;
  std::vector<AnkleShoulderPair> pairs;
  int num_inliers = 0;
  int failed_hypotheses = 0;
  bool refit_accepted = false;
};

// Ankle/shoulder centers of every standing pose in the sequence.
std::vector<AnkleShoulderPair> collect_standing_pairs(const CameraSequence& seq,
                                                      double standing_thresh,
                                                      double min_confidence);

SingleViewSolution ransac_calibrate(std::span<const AnkleShoulderPair> pairs,
                                    const Eigen::Vector2d& principal_point,
                                    const SingleViewConfig& cfg);

SingleViewSolution ransac_calibrate(const CameraSequence& seq, const SingleViewConfig& cfg);

}  // namespace rigcal
