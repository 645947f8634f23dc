#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rigcal/geometry.hpp"

namespace rigcal {

enum class Joint : int {
  kHead = 0,
  kNeck,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

inline constexpr int kNumJoints = 14;

std::string_view joint_name(Joint j);
std::optional<Joint> joint_from_name(std::string_view name);
// Joints used for multi-view refinement: head and arm keypoints are excluded.
bool is_body_joint(Joint j);

struct Keypoint {
  ImagePoint pixel = ImagePoint::Zero();
  double confidence = 1.0;
};

struct PoseDetection {
  int person_id = 0;
  std::array<std::optional<Keypoint>, kNumJoints> joints{};

  const std::optional<Keypoint>& operator[](Joint j) const { return joints[static_cast<int>(j)]; }
  std::optional<Keypoint>& operator[](Joint j) { return joints[static_cast<int>(j)]; }
  bool has(Joint j) const { return joints[static_cast<int>(j)].has_value(); }
  double mean_confidence() const;
};

struct FrameDetections {
  int index = 0;
  std::vector<PoseDetection> poses;
};

// All detections of one camera.
struct CameraSequence {
  std::string camera_id;
  int width = 0;
  int height = 0;
  double fps = 0.0;
  std::vector<FrameDetections> frames;

  Eigen::Vector2d image_center() const { return {0.5 * width, 0.5 * height}; }
};

// Mean ankle and mean shoulder of one standing person.
struct AnkleShoulderPair {
  ImagePoint ankle = ImagePoint::Zero();
  ImagePoint shoulder = ImagePoint::Zero();
  int frame = 0;
  int person_id = 0;
};

std::optional<ImagePoint> ankle_center(const PoseDetection& pose, double min_confidence = 0.0);
std::optional<ImagePoint> shoulder_center(const PoseDetection& pose, double min_confidence = 0.0);

}  // namespace rigcal
