#pragma once

// End-to-end rig calibration: single-view calibration per camera, temporal
// offset, in-plane alignment and ICP against a reference camera, then joint
// bundle adjustment.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rigcal/alignment.hpp"
#include "rigcal/bundle.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/single_view.hpp"
#include "rigcal/skeleton.hpp"
#include "rigcal/sync.hpp"

namespace rigcal {

// Per-camera replacements used by the noise studies. A given focal keeps the
// Stage I ground direction in solution units and re-derives the normal.
struct CameraOverride {
  std::optional<double> focal;
  std::optional<Eigen::Vector3d> normal;
  std::optional<int> delta_t;        // replaces the searched offset
  int delta_t_offset = 0;            // added after search
};

struct PipelineConfig {
  SingleViewConfig single_view;
  SyncConfig sync;
  double rotation_step_deg = 1.0;
  double time_weight = -1.0;  // <0: median per-frame displacement of the reference
  IcpConfig icp;
  bool run_bundle = true;
  BundleConfig bundle;
  BundleWeights weights;
  int top_k = 300;
  double match_gate = 1.0;  // meters on the reference plane
  int reference = 0;
  std::vector<CameraOverride> overrides;  // empty or one per camera
};

struct CameraResult {
  std::string id;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;  // reference camera coordinates as world
  GroundPlaneFrame plane;       // the camera's own Stage I plane frame
  int delta_t = 0;              // t_ref = t_cam + delta_t
  double delta_t_refined = 0.0;
  int num_pairs = 0;
  int num_inliers = 0;
  // Diagnostics; empty for the reference camera.
  SyncResult sync;
  std::vector<double> rotation_curve;
  double rotation_step_deg = 0.0;
  RigidTransform2D plane_transform;  // this plane -> reference plane
  std::vector<double> icp_history;
};

struct RigSolution {
  int reference = 0;
  std::vector<CameraResult> cameras;
  std::vector<double> bundle_loss;
  int bundle_poses = 0;
  bool bundle_run = false;
  std::vector<std::string> warnings;
};

// Plane points of ankle centers per frame with the matching person ids.
struct PlaneTrack {
  FramePoints points;
  std::map<int, std::vector<int>> person_ids;
};

PlaneTrack plane_points(const CameraSequence& seq, const CameraIntrinsics& k,
                        const GroundPlaneFrame& plane, double min_confidence);

RigSolution run_pipeline(const std::vector<CameraSequence>& cameras, const PipelineConfig& cfg);

// Rigid motion taking camera `camera`'s plane coordinates to world (the
// reference camera frame).
Eigen::Isometry3d plane_to_world(const RigSolution& sol, int camera);

}  // namespace rigcal
