#include "rigcal/skeleton.hpp"

namespace rigcal {
namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "head",      "neck",       "left_shoulder", "right_shoulder", "left_elbow",
    "right_elbow", "left_wrist", "right_wrist",   "left_hip",       "right_hip",
    "left_knee", "right_knee", "left_ankle",    "right_ankle",
};

std::optional<ImagePoint> pair_center(const PoseDetection& pose, Joint a, Joint b,
                                      double min_confidence) {
  const auto& ka = pose[a];
  const auto& kb = pose[b];
  if (!ka || !kb || ka->confidence < min_confidence || kb->confidence < min_confidence) {
    return std::nullopt;
  }
  return ImagePoint(0.5 * (ka->pixel + kb->pixel));
}

}  // namespace

std::string_view joint_name(Joint j) { return kJointNames[static_cast<int>(j)]; }

std::optional<Joint> joint_from_name(std::string_view name) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (kJointNames[i] == name) return static_cast<Joint>(i);
  }
  return std::nullopt;
}

bool is_body_joint(Joint j) {
  switch (j) {
    case Joint::kHead:
    case Joint::kLeftElbow:
    case Joint::kRightElbow:
    case Joint::kLeftWrist:
    case Joint::kRightWrist:
      return false;
    default:
      return true;
  }
}

double PoseDetection::mean_confidence() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& k : joints) {
    if (k) {
      sum += k->confidence;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / n;
}

std::optional<ImagePoint> ankle_center(const PoseDetection& pose, double min_confidence) {
  return pair_center(pose, Joint::kLeftAnkle, Joint::kRightAnkle, min_confidence);
}

std::optional<ImagePoint> shoulder_center(const PoseDetection& pose, double min_confidence) {
  return pair_center(pose, Joint::kLeftShoulder, Joint::kRightShoulder, min_confidence);
}

}  // namespace rigcal
