#pragma once

// Detection files, solution files and diagnostic curves.
//
// Detection file (JSON):
//   {
//     "version": 1,
//     "camera_id": "cam0", "width": 1920, "height": 1080, "fps": 25.0,
//     "frames": [
//       {"index": 0, "poses": [
//         {"person_id": 3, "keypoints": {"left_ankle": [x, y, confidence], ...}}
//       ]}
//     ]
//   }
// Frame indices are strictly increasing; joint names are the snake_case
// names of the Joint enumeration. Written files use sorted keys, so a
// load/write round trip reproduces a canonical file byte for byte.
//
// Solution file (JSON), version 1: reference camera id and one block per
// camera with fx, fy, o1, o2, R (3x3 row-major, world to camera), T (meters,
// p_cam = R p_world + T), position, plane normal and height in the camera
// frame, and delta_t (t_ref = t_cam + delta_t). The world frame is the
// reference camera's frame.

#include <filesystem>
#include <string>
#include <vector>

#include "rigcal/pipeline.hpp"
#include "rigcal/skeleton.hpp"

namespace rigcal {

inline constexpr int kDetectionVersion = 1;
inline constexpr int kSolutionVersion = 1;

CameraSequence parse_detections(const std::string& text);
CameraSequence load_detections(const std::filesystem::path& path);
std::string format_detections(const CameraSequence& seq);
void write_detections(const CameraSequence& seq, const std::filesystem::path& path);

std::string format_solution(const RigSolution& sol);
void write_solution(const RigSolution& sol, const std::filesystem::path& path);
// Reads back calibration fields; diagnostics are not stored in the file.
RigSolution read_solution(const std::filesystem::path& path);

// One CSV per curve: sync_<id>.csv (offset,cost), rotation_<id>.csv
// (angle_deg,cost), icp_<id>.csv (iteration,cost) and bundle_loss.csv
// (iteration,loss). Returns the written paths.
std::vector<std::filesystem::path> write_curves(const RigSolution& sol,
                                                const std::filesystem::path& dir);

// COCO-17 keypoint dump (one camera): {"camera_id", "width", "height", "fps",
// "annotations": [{"frame", "track_id", "keypoints": [x, y, v] * 17}]}.
// Head is taken from the nose, neck from the shoulder midpoint; eyes and
// ears are dropped.
CameraSequence convert_coco(const std::filesystem::path& path);

// Pipeline settings from a JSON object. Only keys present in the text are
// changed, so a config file can be layered over flags. Angles in degrees.
// Keys: height, reference, seed, ransac_iterations, angle_thresh_deg,
// pixel_thresh, standing_thresh, min_confidence, dbscan_eps, dbscan_min_pts,
// max_offset, penalize_unmatched, rotation_step_deg, time_weight,
// icp_max_iter, icp_gate, run_bundle, lr, max_iter, optimize_intrinsics,
// optimize_principal_point, optimize_dt, top_k, match_gate and weights
// {intersection, symmetry, height, plane}.
void apply_config_json(const std::string& text, PipelineConfig& cfg);

}  // namespace rigcal
