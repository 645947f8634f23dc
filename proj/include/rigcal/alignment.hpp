#pragma once

// In-plane alignment of a sync camera's ground-plane trajectories onto the
// reference camera's plane: brute-force rotation search on a timed chamfer
// cost followed by ICP with per-frame Hungarian association.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "rigcal/geometry.hpp"
#include "rigcal/sync.hpp"

namespace rigcal {

struct TimedPlanePoint {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  int frame = 0;  // in the reference clock
};

std::vector<TimedPlanePoint> to_timed(const FramePoints& points, int frame_shift = 0);

// Symmetric sum over both clouds of each point's distance to its nearest
// neighbor in the other cloud. Candidates are restricted to the same frame
// when that frame has points; otherwise the search runs in (x, y, w * frame).
double timed_chamfer(std::span<const TimedPlanePoint> a, std::span<const TimedPlanePoint> b,
                     double time_weight);

// Median distance between a point and its nearest neighbor in the previous
// frame, in meters per frame.
double median_frame_displacement(const FramePoints& points);

struct AlignmentResult {
  RigidTransform2D transform;  // maps sync plane coordinates to reference plane
  double cost = 0.0;
  int iterations = 0;
  std::vector<double> curve;   // cost per searched angle or per ICP iteration
};

AlignmentResult search_rotation(std::span<const TimedPlanePoint> ref,
                                std::span<const TimedPlanePoint> sync, double step_deg,
                                double time_weight);

// Closed-form weighted 2D rigid fit: argmin sum w_i |R src_i + t - dst_i|^2.
RigidTransform2D fit_rigid_2d(std::span<const Eigen::Vector2d> src,
                              std::span<const Eigen::Vector2d> dst,
                              std::span<const double> weights = {});

struct IcpConfig {
  int max_iter = 50;
  double tol = 1e-12;
  // Squared distances are truncated at gate^2 (trimmed ICP). Infinite keeps
  // every Hungarian match.
  double gate = 1.0;
  bool recheck_dt = false;
  int dt_window = 5;
};

struct IcpResult {
  RigidTransform2D transform;
  int delta_t = 0;
  double cost = 0.0;  // sqrt of the mean truncated squared distance
  int iterations = 0;
  std::vector<double> history;
};

// `ref` is in reference frames, `sync` in the sync camera's own frames; the
// frame of a sync point in the reference clock is frame + delta_t.
IcpResult icp_refine(const FramePoints& ref, const FramePoints& sync,
                     const RigidTransform2D& init, int delta_t, const IcpConfig& cfg);

// Per-frame Hungarian matches under `t`: (sync frame, sync index, ref index).
struct FrameMatch {
  int sync_frame = 0;
  int sync_index = 0;
  int ref_index = 0;
  double distance = 0.0;
};
std::vector<FrameMatch> associate_frames(const FramePoints& ref, const FramePoints& sync,
                                         const RigidTransform2D& t, int delta_t);

// Pose of the sync camera in the reference camera's coordinates, given both
// plane frames and the in-plane map from sync plane to reference plane.
CameraExtrinsics compose_extrinsics(const GroundPlaneFrame& plane_ref,
                                    const GroundPlaneFrame& plane_sync,
                                    const RigidTransform2D& t2d);

// Inverse of compose_extrinsics for the in-plane part.
RigidTransform2D decompose_extrinsics(const GroundPlaneFrame& plane_ref,
                                      const GroundPlaneFrame& plane_sync,
                                      const CameraExtrinsics& extrinsics);

}  // namespace rigcal
