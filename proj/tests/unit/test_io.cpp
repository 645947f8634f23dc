#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rigcal/error.hpp"
#include "rigcal/io.hpp"
#include "rigcal/synthetic.hpp"

using namespace rigcal;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInvariantViolation;
}

const char* kMinimal = R"({"version": 1, "camera_id": "c", "width": 640, "height": 480, "fps": 30,
  "frames": [{"index": 0, "poses": [{"person_id": 1, "keypoints": {"left_ankle": [1, 2, 0.5]}}]},
             {"index": 4, "poses": []}]})";

}  // namespace

TEST_CASE("detections round trip to a canonical form") {
  RigConfig rc;
  rc.n_frames = 20;
  rc.detection_noise = 1.0;
  rc.seed = 31;
  const RigScene rig = generate_rig(rc);
  const std::string text = format_detections(rig.sequences[1]);
  const CameraSequence back = parse_detections(text);
  CHECK(back.camera_id == rig.sequences[1].camera_id);
  CHECK(back.frames.size() == rig.sequences[1].frames.size());
  CHECK(format_detections(back) == text);
  const auto& p0 = rig.sequences[1].frames[0].poses[0];
  const auto& q0 = back.frames[0].poses[0];
  for (int j = 0; j < kNumJoints; ++j) {
    REQUIRE(p0.joints[j].has_value() == q0.joints[j].has_value());
    if (p0.joints[j]) CHECK(p0.joints[j]->pixel == q0.joints[j]->pixel);
  }
}

TEST_CASE("detection schema errors") {
  CHECK(parse_detections(kMinimal).frames.size() == 2);
  std::string bad = kMinimal;
  bad.replace(bad.find("\"index\": 4"), 10, "\"index\": 0");
  CHECK(code_of([&] { parse_detections(bad); }) == ErrorCode::kSchemaError);
  std::string joint = kMinimal;
  joint.replace(joint.find("left_ankle"), 10, "left_tail0");
  CHECK(code_of([&] { parse_detections(joint); }) == ErrorCode::kSchemaError);
  CHECK(code_of([] { parse_detections("{not json"); }) == ErrorCode::kParseError);
  CHECK(code_of([] {
          parse_detections(R"({"version": 1, "camera_id": "c", "width": 1, "height": 1,
                               "fps": 1, "frames": []})");
        }) == ErrorCode::kEmptySequence);
  CHECK(code_of([] { load_detections("/nonexistent/rigcal.json"); }) == ErrorCode::kIoError);
}

TEST_CASE("solution file round trip") {
  RigConfig rc;
  rc.n_frames = 10;
  rc.seed = 32;
  const RigScene rig = generate_rig(rc);
  RigSolution sol;
  for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
    CameraResult r;
    r.id = rig.sequences[c].camera_id;
    r.intrinsics = rig.cameras[c].intrinsics;
    r.extrinsics = rig.cameras[c].extrinsics;
    const Eigen::Vector3d n = r.extrinsics.rot_world_to_cam * Eigen::Vector3d::UnitZ();
    r.plane = plane_basis_from_normal(n, r.intrinsics, r.extrinsics.position.z());
    r.delta_t = rig.delta_t[c];
    sol.cameras.push_back(r);
  }
  const fs::path dir = fs::temp_directory_path() / "rigcal_unit_io";
  fs::create_directories(dir);
  write_solution(sol, dir / "s.json");
  const RigSolution back = read_solution(dir / "s.json");
  REQUIRE(back.cameras.size() == sol.cameras.size());
  for (std::size_t c = 0; c < sol.cameras.size(); ++c) {
    CHECK(back.cameras[c].id == sol.cameras[c].id);
    CHECK(back.cameras[c].delta_t == sol.cameras[c].delta_t);
    CHECK(back.cameras[c].intrinsics.f == sol.cameras[c].intrinsics.f);
    CHECK((back.cameras[c].extrinsics.position - sol.cameras[c].extrinsics.position).norm() < 1e-12);
    CHECK((back.cameras[c].plane.normal - sol.cameras[c].plane.normal).norm() < 1e-12);
  }
  CHECK(format_solution(sol) == format_solution(RigSolution(sol)));

  sol.bundle_loss = {1.0, 0.5};
  sol.cameras[1].icp_history = {0.3, 0.2, 0.1};
  const auto files = write_curves(sol, dir);
  CHECK(fs::exists(dir / "bundle_loss.csv"));
  std::ifstream icp(dir / ("icp_" + sol.cameras[1].id + ".csv"));
  std::string line;
  int rows = 0;
  std::getline(icp, line);
  CHECK(line == "iteration,cost");
  while (std::getline(icp, line)) ++rows;
  CHECK(rows == 3);
  fs::remove_all(dir);
}

TEST_CASE("config json layers over existing settings") {
  PipelineConfig cfg;
  cfg.single_view.h = 1.5;
  cfg.sync.max_offset = 10;
  apply_config_json(R"({"height": 1.8, "lr": 0.5, "weights": {"plane": 0.3}})", cfg);
  CHECK(cfg.single_view.h == 1.8);
  CHECK(cfg.bundle.lr == 0.5);
  CHECK(cfg.weights.plane == 0.3);
  CHECK(cfg.sync.max_offset == 10);
  CHECK(code_of([&] { apply_config_json(R"({"hieght": 1.8})", cfg); }) == ErrorCode::kSchemaError);
}

TEST_CASE("coco conversion") {
  const fs::path p = fs::temp_directory_path() / "rigcal_unit_coco.json";
  {
    std::ostringstream kp;
    for (int i = 0; i < 17; ++i) kp << (i ? "," : "") << 10 * i << "," << 20 * i << "," << (i == 7 ? 0 : 2);
    std::ofstream out(p);
    out << R"({"camera_id": "k", "width": 100, "height": 80, "fps": 25, "annotations": [)"
        << R"({"frame": 3, "track_id": 9, "keypoints": [)" << kp.str() << "]}]}";
  }
  const CameraSequence seq = convert_coco(p);
  REQUIRE(seq.frames.size() == 1);
  const PoseDetection& pose = seq.frames[0].poses[0];
  CHECK(pose.person_id == 9);
  CHECK(pose[Joint::kHead]->pixel == Eigen::Vector2d(0, 0));
  CHECK(pose[Joint::kLeftShoulder]->pixel == Eigen::Vector2d(50, 100));
  CHECK(pose[Joint::kNeck]->pixel == Eigen::Vector2d(55, 110));
  CHECK_FALSE(pose.has(Joint::kLeftElbow));
  CHECK(pose.has(Joint::kRightElbow));
  CHECK(pose[Joint::kRightAnkle]->confidence == 1.0);
  fs::remove(p);
}
