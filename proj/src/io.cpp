#include "rigcal/io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "rigcal/error.hpp"

namespace rigcal {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

[[noreturn]] void schema(const std::string& context, const std::string& msg) {
  throw Error(ErrorCode::kSchemaError, context + ": " + msg);
}

const json& field(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object()) schema(context, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema(context, std::string("missing '") + key + "'");
  return *it;
}

double number(const json& v, const std::string& context) {
  if (!v.is_number()) schema(context, "expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& context) {
  if (!v.is_number_integer()) schema(context, "expected an integer");
  return v.get<int>();
}

std::string string_field(const json& v, const std::string& context) {
  if (!v.is_string()) schema(context, "expected a string");
  return v.get<std::string>();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

json matrix_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

json vector_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d read_vector(const json& v, const std::string& context) {
  if (!v.is_array() || v.size() != 3) schema(context, "expected 3 numbers");
  return {number(v[0], context), number(v[1], context), number(v[2], context)};
}

Eigen::Matrix3d read_matrix(const json& v, const std::string& context) {
  if (!v.is_array() || v.size() != 3) schema(context, "expected 3 rows");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) m.row(r) = read_vector(v[r], context).transpose();
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const char* header,
               const std::vector<std::pair<std::string, double>>& rows) {
  std::string text = std::string(header) + "\n";
  for (const auto& [x, y] : rows) text += x + "," + fmt(y) + "\n";
  write_file(path, text);
}

}  // namespace

CameraSequence parse_detections(const std::string& text) {
  const json doc = parse_json(text);
  const std::string root = "detections";
  if (integer(field(doc, "version", root), root + ".version") != kDetectionVersion)
    schema(root + ".version", "unsupported version");

  CameraSequence seq;
  seq.camera_id = string_field(field(doc, "camera_id", root), root + ".camera_id");
  seq.width = integer(field(doc, "width", root), root + ".width");
  seq.height = integer(field(doc, "height", root), root + ".height");
  seq.fps = number(field(doc, "fps", root), root + ".fps");
  if (seq.width <= 0 || seq.height <= 0) schema(root, "image size must be positive");
  if (seq.fps <= 0.0) schema(root + ".fps", "must be positive");

  const json& frames = field(doc, "frames", root);
  if (!frames.is_array()) schema(root + ".frames", "expected an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string ctx = "frames[" + std::to_string(i) + "]";
    FrameDetections fd;
    fd.index = integer(field(frames[i], "index", ctx), ctx + ".index");
    if (!seq.frames.empty() && fd.index <= seq.frames.back().index)
      schema(ctx + ".index", "frame indices must be strictly increasing");
    const json& poses = field(frames[i], "poses", ctx);
    if (!poses.is_array()) schema(ctx + ".poses", "expected an array");
    for (std::size_t p = 0; p < poses.size(); ++p) {
      const std::string pctx = ctx + ".poses[" + std::to_string(p) + "]";
      PoseDetection pose;
      pose.person_id = integer(field(poses[p], "person_id", pctx), pctx + ".person_id");
      const json& kps = field(poses[p], "keypoints", pctx);
      if (!kps.is_object()) schema(pctx + ".keypoints", "expected an object");
      for (const auto& [name, value] : kps.items()) {
        const std::string kctx = pctx + ".keypoints." + name;
        auto joint = joint_from_name(name);
        if (!joint) schema(kctx, "unknown joint");
        if (!value.is_array() || value.size() != 3) schema(kctx, "expected [x, y, confidence]");
        Keypoint kp;
        kp.pixel = {number(value[0], kctx), number(value[1], kctx)};
        kp.confidence = number(value[2], kctx);
        pose[*joint] = kp;
      }
      fd.poses.push_back(pose);
    }
    seq.frames.push_back(std::move(fd));
  }
  if (seq.frames.empty()) throw Error(ErrorCode::kEmptySequence, seq.camera_id + " has no frames");
  return seq;
}

CameraSequence load_detections(const std::filesystem::path& path) {
  try {
    return parse_detections(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoError) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_detections(const CameraSequence& seq) {
  json doc;
  doc["version"] = kDetectionVersion;
  doc["camera_id"] = seq.camera_id;
  doc["width"] = seq.width;
  doc["height"] = seq.height;
  doc["fps"] = seq.fps;
  json frames = json::array();
  for (const auto& fd : seq.frames) {
    json poses = json::array();
    for (const auto& pose : fd.poses) {
      json kps = json::object();
      for (int j = 0; j < kNumJoints; ++j) {
        const auto& kp = pose.joints[j];
        if (!kp) continue;
        kps[std::string(joint_name(static_cast<Joint>(j)))] = {kp->pixel.x(), kp->pixel.y(),
                                                               kp->confidence};
      }
      poses.push_back({{"person_id", pose.person_id}, {"keypoints", kps}});
    }
    frames.push_back({{"index", fd.index}, {"poses", poses}});
  }
  doc["frames"] = frames;
  return doc.dump() + "\n";
}

void write_detections(const CameraSequence& seq, const std::filesystem::path& path) {
  write_file(path, format_detections(seq));
}

std::string format_solution(const RigSolution& sol) {
  json doc;
  doc["version"] = kSolutionVersion;
  doc["reference"] = sol.cameras.at(sol.reference).id;
  json cams = json::array();
  for (const auto& c : sol.cameras) {
    json jc;
    jc["id"] = c.id;
    jc["fx"] = c.intrinsics.f;
    jc["fy"] = c.intrinsics.f;
    jc["o1"] = c.intrinsics.o1;
    jc["o2"] = c.intrinsics.o2;
    jc["R"] = matrix_json(c.extrinsics.rot_world_to_cam);
    jc["T"] = vector_json(c.extrinsics.translation());
    jc["position"] = vector_json(c.extrinsics.position);
    jc["plane_normal"] = vector_json(c.plane.normal);
    jc["camera_height"] = c.plane.camera_height();
    jc["delta_t"] = c.delta_t;
    jc["delta_t_refined"] = c.delta_t_refined;
    jc["num_pairs"] = c.num_pairs;
    jc["num_inliers"] = c.num_inliers;
    cams.push_back(jc);
  }
  doc["cameras"] = cams;
  doc["bundle_run"] = sol.bundle_run;
  doc["bundle_poses"] = sol.bundle_poses;
  doc["warnings"] = sol.warnings;
  return doc.dump(2) + "\n";
}

void write_solution(const RigSolution& sol, const std::filesystem::path& path) {
  write_file(path, format_solution(sol));
}

RigSolution read_solution(const std::filesystem::path& path) {
  const json doc = parse_json(read_file(path));
  const std::string root = path.filename().string();
  if (integer(field(doc, "version", root), root + ".version") != kSolutionVersion)
    schema(root + ".version", "unsupported version");
  const std::string ref = string_field(field(doc, "reference", root), root + ".reference");
  const json& cams = field(doc, "cameras", root);
  if (!cams.is_array() || cams.empty()) schema(root + ".cameras", "expected a non-empty array");

  RigSolution sol;
  sol.reference = -1;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string ctx = "cameras[" + std::to_string(i) + "]";
    const json& jc = cams[i];
    CameraResult c;
    c.id = string_field(field(jc, "id", ctx), ctx + ".id");
    c.intrinsics.f = number(field(jc, "fx", ctx), ctx + ".fx");
    c.intrinsics.o1 = number(field(jc, "o1", ctx), ctx + ".o1");
    c.intrinsics.o2 = number(field(jc, "o2", ctx), ctx + ".o2");
    const Eigen::Matrix3d r = read_matrix(field(jc, "R", ctx), ctx + ".R");
    const Eigen::Vector3d t = read_vector(field(jc, "T", ctx), ctx + ".T");
    c.extrinsics = CameraExtrinsics::from_rt(r, t);
    const Eigen::Vector3d n = read_vector(field(jc, "plane_normal", ctx), ctx + ".plane_normal");
    const double h = number(field(jc, "camera_height", ctx), ctx + ".camera_height");
    c.plane = plane_basis_from_normal(n, c.intrinsics, h);
    c.delta_t = integer(field(jc, "delta_t", ctx), ctx + ".delta_t");
    if (jc.contains("delta_t_refined"))
      c.delta_t_refined = number(jc["delta_t_refined"], ctx + ".delta_t_refined");
    else
      c.delta_t_refined = c.delta_t;
    if (jc.contains("num_pairs")) c.num_pairs = integer(jc["num_pairs"], ctx + ".num_pairs");
    if (jc.contains("num_inliers")) c.num_inliers = integer(jc["num_inliers"], ctx + ".num_inliers");
    if (c.id == ref) sol.reference = static_cast<int>(i);
    sol.cameras.push_back(std::move(c));
  }
  if (sol.reference < 0) schema(root + ".reference", "not a camera id");
  if (doc.contains("bundle_run") && doc["bundle_run"].is_boolean())
    sol.bundle_run = doc["bundle_run"].get<bool>();
  if (doc.contains("bundle_poses"))
    sol.bundle_poses = integer(doc["bundle_poses"], root + ".bundle_poses");
  if (doc.contains("warnings") && doc["warnings"].is_array())
    for (const auto& w : doc["warnings"]) sol.warnings.push_back(string_field(w, root + ".warnings"));
  return sol;
}

std::vector<std::filesystem::path> write_curves(const RigSolution& sol,
                                                const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string());
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < sol.cameras.size(); ++i) {
    if (static_cast<int>(i) == sol.reference) continue;
    const auto& c = sol.cameras[i];
    std::vector<std::pair<std::string, double>> rows;
    for (std::size_t k = 0; k < c.sync.per_offset_costs.size(); ++k)
      rows.emplace_back(std::to_string(c.sync.first_offset + static_cast<int>(k)),
                        c.sync.per_offset_costs[k]);
    written.push_back(dir / ("sync_" + c.id + ".csv"));
    write_csv(written.back(), "offset,cost", rows);

    rows.clear();
    for (std::size_t k = 0; k < c.rotation_curve.size(); ++k)
      rows.emplace_back(fmt(static_cast<double>(k) * c.rotation_step_deg), c.rotation_curve[k]);
    written.push_back(dir / ("rotation_" + c.id + ".csv"));
    write_csv(written.back(), "angle_deg,cost", rows);

    rows.clear();
    for (std::size_t k = 0; k < c.icp_history.size(); ++k)
      rows.emplace_back(std::to_string(k), c.icp_history[k]);
    written.push_back(dir / ("icp_" + c.id + ".csv"));
    write_csv(written.back(), "iteration,cost", rows);
  }
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t k = 0; k < sol.bundle_loss.size(); ++k)
    rows.emplace_back(std::to_string(k), sol.bundle_loss[k]);
  written.push_back(dir / "bundle_loss.csv");
  write_csv(written.back(), "iteration,loss", rows);
  return written;
}

CameraSequence convert_coco(const std::filesystem::path& path) {
  const json doc = parse_json(read_file(path));
  const std::string root = path.filename().string();
  CameraSequence seq;
  seq.camera_id = string_field(field(doc, "camera_id", root), root + ".camera_id");
  seq.width = integer(field(doc, "width", root), root + ".width");
  seq.height = integer(field(doc, "height", root), root + ".height");
  seq.fps = number(field(doc, "fps", root), root + ".fps");
  const json& anns = field(doc, "annotations", root);
  if (!anns.is_array()) schema(root + ".annotations", "expected an array");

  // COCO-17 order: nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles.
  static constexpr std::array<std::pair<int, Joint>, 12> kMap = {{
      {5, Joint::kLeftShoulder}, {6, Joint::kRightShoulder}, {7, Joint::kLeftElbow},
      {8, Joint::kRightElbow},   {9, Joint::kLeftWrist},     {10, Joint::kRightWrist},
      {11, Joint::kLeftHip},     {12, Joint::kRightHip},     {13, Joint::kLeftKnee},
      {14, Joint::kRightKnee},   {15, Joint::kLeftAnkle},    {16, Joint::kRightAnkle},
  }};
  std::map<int, FrameDetections> frames;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string ctx = "annotations[" + std::to_string(i) + "]";
    const int frame = integer(field(anns[i], "frame", ctx), ctx + ".frame");
    PoseDetection pose;
    pose.person_id = integer(field(anns[i], "track_id", ctx), ctx + ".track_id");
    const json& kp = field(anns[i], "keypoints", ctx);
    if (!kp.is_array() || kp.size() != 51) schema(ctx + ".keypoints", "expected 51 numbers");
    auto at = [&](int k) -> std::optional<Keypoint> {
      const double v = number(kp[3 * k + 2], ctx);
      if (v <= 0.0) return std::nullopt;
      return Keypoint{{number(kp[3 * k], ctx), number(kp[3 * k + 1], ctx)}, std::min(v, 1.0)};
    };
    for (const auto& [k, j] : kMap) pose[j] = at(k);
    pose[Joint::kHead] = at(0);
    if (pose[Joint::kLeftShoulder] && pose[Joint::kRightShoulder]) {
      Keypoint neck;
      neck.pixel = 0.5 * (pose[Joint::kLeftShoulder]->pixel + pose[Joint::kRightShoulder]->pixel);
      neck.confidence =
          std::min(pose[Joint::kLeftShoulder]->confidence, pose[Joint::kRightShoulder]->confidence);
      pose[Joint::kNeck] = neck;
    }
    auto& fd = frames[frame];
    fd.index = frame;
    fd.poses.push_back(pose);
  }
  for (auto& [idx, fd] : frames) seq.frames.push_back(std::move(fd));
  if (seq.frames.empty()) throw Error(ErrorCode::kEmptySequence, root + " has no annotations");
  return seq;
}

void apply_config_json(const std::string& text, PipelineConfig& cfg) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema("config", "expected an object");
  static const std::set<std::string> kKeys = {
      "height", "reference", "seed", "ransac_iterations", "angle_thresh_deg", "pixel_thresh",
      "standing_thresh", "min_confidence", "dbscan_eps", "dbscan_min_pts", "max_offset",
      "penalize_unmatched", "rotation_step_deg", "time_weight", "icp_max_iter", "icp_gate",
      "run_bundle", "lr", "max_iter", "optimize_intrinsics", "optimize_principal_point",
      "optimize_dt", "top_k", "match_gate", "weights"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKeys.count(key)) schema("config." + key, "unknown key");
  }
  auto num = [&](const char* key, double& out) {
    if (doc.contains(key)) out = number(doc[key], std::string("config.") + key);
  };
  auto inte = [&](const char* key, int& out) {
    if (doc.contains(key)) out = integer(doc[key], std::string("config.") + key);
  };
  auto flag = [&](const char* key, bool& out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_boolean()) schema(std::string("config.") + key, "expected a boolean");
    out = doc[key].get<bool>();
  };
  num("height", cfg.single_view.h);
  inte("reference", cfg.reference);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) schema("config.seed", "expected a non-negative integer");
    cfg.single_view.seed = doc["seed"].get<std::uint64_t>();
  }
  inte("ransac_iterations", cfg.single_view.iterations);
  if (doc.contains("angle_thresh_deg"))
    cfg.single_view.angle_thresh = deg2rad(number(doc["angle_thresh_deg"], "config.angle_thresh_deg"));
  num("pixel_thresh", cfg.single_view.pixel_thresh);
  num("standing_thresh", cfg.single_view.standing_thresh);
  num("min_confidence", cfg.single_view.min_confidence);
  num("dbscan_eps", cfg.sync.dbscan_eps);
  inte("dbscan_min_pts", cfg.sync.dbscan_min_pts);
  inte("max_offset", cfg.sync.max_offset);
  flag("penalize_unmatched", cfg.sync.penalize_unmatched);
  num("rotation_step_deg", cfg.rotation_step_deg);
  num("time_weight", cfg.time_weight);
  inte("icp_max_iter", cfg.icp.max_iter);
  num("icp_gate", cfg.icp.gate);
  flag("run_bundle", cfg.run_bundle);
  num("lr", cfg.bundle.lr);
  inte("max_iter", cfg.bundle.max_iter);
  flag("optimize_intrinsics", cfg.bundle.optimize_intrinsics);
  flag("optimize_principal_point", cfg.bundle.optimize_principal_point);
  flag("optimize_dt", cfg.bundle.optimize_dt);
  inte("top_k", cfg.top_k);
  num("match_gate", cfg.match_gate);
  if (doc.contains("weights")) {
    const json& w = doc["weights"];
    const std::string ctx = "config.weights";
    if (!w.is_object()) schema(ctx, "expected an object");
    for (const auto& [key, value] : w.items()) {
      double* target = key == "intersection" ? &cfg.weights.intersection
                       : key == "symmetry"   ? &cfg.weights.symmetry
                       : key == "height"     ? &cfg.weights.height
                       : key == "plane"      ? &cfg.weights.plane
                                             : nullptr;
      if (!target) schema(ctx + "." + key, "unknown key");
      *target = number(value, ctx + "." + key);
      if (*target < 0.0) schema(ctx + "." + key, "weights must be non-negative");
    }
  }
}

}  // namespace rigcal
