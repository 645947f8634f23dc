#pragma once

// Synthetic scenes with exact ground truth: single-camera ankle/shoulder
// scenes for the DLT trials and walking multi-camera rigs for the pipeline,
// plus noise injection and the trial runners.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rigcal/bundle.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/single_view.hpp"
#include "rigcal/skeleton.hpp"

namespace rigcal {

// Seed of trial `index` derived from a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct SceneConfig {
  int n_people = 3;
  double height_mean = 1.7;
  double height_std = 0.0;
  double fx = 960.0;
  double fy = 540.0;
  int width = 1920;
  int height = 1080;
  double camera_height_min = 2.0;
  double camera_height_max = 8.0;
  double tilt_min_deg = 10.0;
  double tilt_max_deg = 60.0;
  double roll_max_deg = 10.0;
  double patch_size = 10.0;  // side of the square people are placed in
  // The square is centered where the optical axis meets the ground, but no
  // farther than this from the camera foot.
  double patch_max_distance = 25.0;
  std::uint64_t seed = 0;
};

struct ScenePerson {
  CamPoint ankle = CamPoint::Zero();
  CamPoint shoulder = CamPoint::Zero();
  double height = 0.0;
  ImagePoint ankle_px = ImagePoint::Zero();     // generator pixels (fx, fy)
  ImagePoint shoulder_px = ImagePoint::Zero();
};

// Everything in the camera frame.
struct SyntheticScene {
  double fx = 0.0;
  double fy = 0.0;
  int width = 0;
  int height = 0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double camera_height = 0.0;
  GroundPlaneFrame plane;
  std::vector<ScenePerson> people;

  Eigen::Vector2d principal_point() const { return {0.5 * width, 0.5 * height}; }
  // Projection with the generator's fx, fy.
  ImagePoint project_gen(const CamPoint& p) const;
  // Maps generator pixels to square pixels of focal fx (known aspect ratio).
  ImagePoint to_square(const ImagePoint& p) const;
};

SyntheticScene generate_scene(const SceneConfig& cfg);

// Ankle/shoulder pairs in square pixels, with optional extra pixel noise
// (standard deviation `noise_std`, added in generator pixels).
std::vector<AnkleShoulderPair> scene_pairs(const SyntheticScene& scene, double noise_std,
                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Noise injection.

enum class NoiseTarget { kDetections, kFocal, kNormal, kSync, kRotation };

NoiseTarget parse_noise_target(std::string_view name);
std::string_view noise_target_name(NoiseTarget t);

// Inputs a noise target can act on; only the one matching the target is used.
struct NoiseInputs {
  std::vector<CameraSequence>* detections = nullptr;
  double* focal = nullptr;
  Eigen::Vector3d* normal = nullptr;
  int* delta_t = nullptr;
  Eigen::Matrix3d* rotation = nullptr;
};

// Detections: Gaussian pixel noise of std `magnitude` on every keypoint.
// Focal: Gaussian of std `magnitude` pixels. Normal: Gaussian of std
// `magnitude` per component, then renormalized. Sync: adds `magnitude` frames
// (rounded). Rotation: left-multiplies exp(w), w ~ N(0, magnitude deg) per axis.
void inject_noise(NoiseTarget target, double magnitude, std::uint64_t seed, NoiseInputs inputs);
void inject_noise(std::string_view target, double magnitude, std::uint64_t seed,
                  NoiseInputs inputs);

// ---------------------------------------------------------------------------
// Single-view trials.

struct TrialReport {
  double grid_value = 0.0;
  double fx_pct = 0.0;
  double fy_pct = 0.0;
  double normal_deg = 0.0;
  double rho_pct = 0.0;
  double x_pct = 0.0;
  double fail_pct = 0.0;
  int trials = 0;
};

struct TrialOutcome {
  bool failed = false;
  double fx_pct = 0.0;
  double fy_pct = 0.0;
  double normal_deg = 0.0;
  double rho_pct = 0.0;
  double x_pct = 0.0;
};

// One scene, one noisy solve with the assumed height `solve_h`.
TrialOutcome run_single_trial(const SceneConfig& scene_cfg, double noise_std, double solve_h,
                              FocalEstimator estimator = FocalEstimator::kLeastSquares);

// Mean over `trials` trials; failed trials only count toward fail_pct.
TrialReport run_trials(const SceneConfig& base, double noise_std, double solve_h, int trials,
                       std::uint64_t seed,
                       FocalEstimator estimator = FocalEstimator::kLeastSquares);

struct MeasurementTrialConfig {
  std::vector<double> stds = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  int trials = 5000;
  double height = 1.6;
  int n_people = 3;
  std::uint64_t seed = 0;
  FocalEstimator estimator = FocalEstimator::kLeastSquares;
  SceneConfig scene;
};
std::vector<TrialReport> run_measurement_noise_trials(const MeasurementTrialConfig& cfg);

struct HeightTrialConfig {
  std::vector<double> height_stds = {0.05, 0.1, 0.15, 0.2, 0.25};
  int trials = 5000;
  double height_mean = 1.7;
  double noise_std = 0.5;
  int n_people = 3;
  std::uint64_t seed = 0;
  FocalEstimator estimator = FocalEstimator::kLeastSquares;
  SceneConfig scene;
};
std::vector<TrialReport> run_height_trials(const HeightTrialConfig& cfg);

struct PeopleTrialConfig {
  std::vector<int> people = {5, 10, 20, 50, 100};
  int trials = 5000;
  double height_mean = 1.7;
  double height_std = 0.1;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
  FocalEstimator estimator = FocalEstimator::kLeastSquares;
  SceneConfig scene;
};
std::vector<TrialReport> run_people_trials(const PeopleTrialConfig& cfg);

void write_reports_csv(std::ostream& os, std::string_view grid_name,
                       const std::vector<TrialReport>& reports);

// ---------------------------------------------------------------------------
// Walking multi-camera rigs. World frame: z up, ground plane z = 0.

struct RigConfig {
  int n_cameras = 3;
  int n_people = 5;
  int n_frames = 300;
  double fps = 25.0;
  double person_height = 1.7;  // ankle to shoulder
  double person_height_std = 0.0;
  double area_radius = 4.0;     // people stay roughly within this radius
  double camera_radius = 12.0;
  double camera_height_min = 3.0;
  double camera_height_max = 5.0;
  double focal_min = 900.0;
  double focal_max = 1300.0;
  int width = 1920;
  int height = 1080;
  int max_delta_t = 50;        // delta_t of non-reference cameras in [0, max]
  std::vector<int> delta_t;    // if set, one value >= 0 per camera, 0 first
  double detection_noise = 0.0;
  std::uint64_t seed = 0;
};

struct RigScene {
  std::vector<Camera> cameras;          // world frame
  std::vector<int> delta_t;             // t_ref = t_cam + delta_t; reference = 0
  std::vector<CameraSequence> sequences;
  // Ground-truth joints per world frame, person, joint (world coordinates).
  std::vector<std::vector<std::array<WorldPoint, kNumJoints>>> joints;
  std::vector<double> heights;  // ankle-to-shoulder per person
  int world_frames = 0;
};

RigScene generate_rig(const RigConfig& cfg);

// Ground-truth cameras expressed in camera `reference`'s frame.
std::vector<Camera> rig_cameras_in_reference(const RigScene& rig, int reference = 0);

// Bundle problem with ground-truth cameras and associations: every person
// seen by two or more cameras at a reference frame becomes one pose. At most
// `max_poses` poses are kept, evenly spread over the sequence.
BundleProblem rig_bundle_problem(const RigScene& rig, int max_poses, double h = 1.7);

// Joints of a person standing at `ground` facing `heading`, `phase` in the
// gait cycle, ankle-to-shoulder height `h`.
std::array<WorldPoint, kNumJoints> body_joints(const Eigen::Vector2d& ground, double heading,
                                               double phase, double h);

// Look-at camera: world-to-camera rotation with x right, y down, z toward
// `target`, rolled by `roll` about the optical axis.
Eigen::Matrix3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double roll);

}  // namespace rigcal
