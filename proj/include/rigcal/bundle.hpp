#pragma once

// Joint refinement of all cameras from matched multi-view poses. Every
// camera pair triangulates shared joints by the closest points of the two
// viewing rays; the loss mixes ray distance, left/right bone symmetry, an
// ankle-to-shoulder height prior and ankle-on-plane distance.

#include <array>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rigcal/geometry.hpp"
#include "rigcal/skeleton.hpp"

namespace rigcal {

// Line origin + k * direction, k real.
struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

Ray build_ray(const ImagePoint& p, const Camera& cam);

// Same ray from a camera's ground-plane frame and the map from its plane
// coordinates to world coordinates.
Ray build_ray(const ImagePoint& p, const CameraIntrinsics& k, const GroundPlaneFrame& plane,
              const Eigen::Isometry3d& plane_to_world);

struct ClosestPoints {
  Eigen::Vector3d on_first = Eigen::Vector3d::Zero();
  Eigen::Vector3d on_second = Eigen::Vector3d::Zero();
  double distance = 0.0;
  bool parallel = false;
};

ClosestPoints closest_points(const Ray& r1, const Ray& r2);

struct ViewObservation {
  int camera = 0;
  int track_id = 0;
  int frame = 0;  // in this camera's clock
  std::array<std::optional<Keypoint>, kNumJoints> joints{};
};

// One person at one reference frame, seen by two or more cameras.
struct MatchedPose {
  int frame = 0;
  int person_id = 0;
  std::vector<ViewObservation> views;

  double mean_confidence() const;
};

// Keeps the k poses with the highest mean joint confidence; ties are broken
// by (frame, person_id). Output is in ranking order.
std::vector<MatchedPose> select_top_k(std::vector<MatchedPose> poses, int k);

struct BundleWeights {
  double intersection = 1.0;
  double symmetry = 0.1;
  double height = 0.0;
  double plane = 0.1;
};

using Track = std::map<int, std::array<std::optional<Keypoint>, kNumJoints>>;

struct BundleProblem {
  std::vector<Camera> cameras;     // extrinsics in the world frame
  std::vector<double> delta_t;     // t_ref = t_cam + delta_t
  std::vector<MatchedPose> poses;
  BundleWeights weights;
  double h = 1.7;
  Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d plane_point = Eigen::Vector3d::Zero();
  int reference_camera = 0;
  // Per camera: track id -> frame -> joints. Needed only to refine delta_t.
  std::vector<std::map<int, Track>> tracks;
};

struct LossTerms {
  double total = 0.0;
  double intersection = 0.0;
  double symmetry = 0.0;
  double height = 0.0;
  double plane = 0.0;
  int intersection_count = 0;
  int symmetry_count = 0;
  int height_count = 0;
  int plane_count = 0;
};

LossTerms bundle_loss(const BundleProblem& prob);

struct BundleConfig {
  double lr = 1e-2;
  int max_iter = 500;
  bool optimize_intrinsics = false;
  bool optimize_principal_point = false;
  bool optimize_dt = false;
};

// Parameters are increments on the problem's current cameras: per camera an
// axis-angle rotation increment and a position offset (except the reference
// camera), then optionally log focal scale, principal point offset in units
// of focal length, and a continuous delta_t offset. Rotation, log focal and
// principal point parameters are multiplied by angular_scale(), one over the
// mean camera height above the plane.
class BundleObjective {
 public:
  BundleObjective(const BundleProblem& prob, const BundleConfig& cfg);

  int num_parameters() const { return num_params_; }
  double angular_scale() const { return angular_scale_; }
  double value(const Eigen::VectorXd& x) const;
  double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
  LossTerms terms(const Eigen::VectorXd& x) const;
  BundleProblem apply(const Eigen::VectorXd& x) const;

  struct Layout {
    int rotation = -1;
    int position = -1;
    int log_focal = -1;
    int principal = -1;
    int delta_t = -1;
    int size = 0;
  };
  const Layout& layout(int camera) const { return layouts_[camera]; }

 private:
  const BundleProblem& prob_;
  BundleConfig cfg_;
  std::vector<Layout> layouts_;
  std::vector<int> offsets_;
  int num_params_ = 0;
  double angular_scale_ = 1.0;
};

struct BundleResult {
  std::vector<Camera> cameras;
  std::vector<double> delta_t;
  std::vector<double> loss_history;
  std::vector<WorldPoint> triangulated_points;
  int iterations = 0;
  bool diverged = false;
};

BundleResult optimize_bundle(const BundleProblem& prob, const BundleConfig& cfg);

// Midpoints of the closest ray points for every body joint of every pose,
// using the first two views of each pose.
std::vector<WorldPoint> triangulate_poses(const BundleProblem& prob);

}  // namespace rigcal
