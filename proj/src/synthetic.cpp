#include "rigcal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "rigcal/error.hpp"
#include "rigcal/metrics.hpp"
#include "rigcal/single_view.hpp"

namespace rigcal {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool in_image(const ImagePoint& p, int width, int height) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width && p.y() < height;
}

}  // namespace

Eigen::Matrix3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double roll) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
  if (x.norm() < 1e-9) throw Error(ErrorCode::kInvalidArgument, "camera looks straight down");
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  const Eigen::Matrix3d roll_m =
      Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return roll_m * r;
}

ImagePoint SyntheticScene::project_gen(const CamPoint& p) const {
  if (p.z() <= 1e-12) throw Error(ErrorCode::kNonPositiveDepth, "point behind the camera");
  return {fx * p.x() / p.z() + 0.5 * width, fy * p.y() / p.z() + 0.5 * height};
}

ImagePoint SyntheticScene::to_square(const ImagePoint& p) const {
  const double cy = 0.5 * height;
  return {p.x(), cy + (p.y() - cy) * fx / fy};
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
  if (cfg.n_people < 3) throw Error(ErrorCode::kInvalidArgument, "at least 3 people required");
  std::mt19937_64 rng(cfg.seed);
  SyntheticScene s;
  s.fx = cfg.fx;
  s.fy = cfg.fy;
  s.width = cfg.width;
  s.height = cfg.height;

  const double cam_h = uniform(rng, cfg.camera_height_min, cfg.camera_height_max);
  const double tilt = deg2rad(uniform(rng, cfg.tilt_min_deg, cfg.tilt_max_deg));
  const double roll = deg2rad(uniform(rng, -cfg.roll_max_deg, cfg.roll_max_deg));
  const double yaw = uniform(rng, 0.0, 2.0 * kPi);
  const Eigen::Vector3d eye(0.0, 0.0, cam_h);
  const Eigen::Vector3d forward(std::cos(yaw) * std::cos(tilt), std::sin(yaw) * std::cos(tilt),
                                -std::sin(tilt));
  const Eigen::Matrix3d r = look_at(eye, eye + forward, roll);
  const double reach = tilt > 0.0 ? std::min(cam_h / std::tan(tilt), cfg.patch_max_distance)
                                  : cfg.patch_max_distance;
  const Eigen::Vector3d hit(reach * std::cos(yaw), reach * std::sin(yaw), 0.0);

  s.normal = r * Eigen::Vector3d::UnitZ();
  s.camera_height = cam_h;
  s.plane = plane_basis_from_normal(s.normal, CameraIntrinsics{cfg.fx, 0.5 * cfg.width,
                                                               0.5 * cfg.height},
                                    cam_h);

  std::normal_distribution<double> height_dist(cfg.height_mean, cfg.height_std);
  int attempts = 0;  // per person
  while (static_cast<int>(s.people.size()) < cfg.n_people) {
    if (++attempts > 1000) {
      throw Error(ErrorCode::kFrustumExhausted, "could not place people inside the image");
    }
    const Eigen::Vector3d ground =
        hit + Eigen::Vector3d(uniform(rng, -0.5, 0.5) * cfg.patch_size,
                              uniform(rng, -0.5, 0.5) * cfg.patch_size, 0.0);
    const double h = cfg.height_std > 0.0 ? height_dist(rng) : cfg.height_mean;
    ScenePerson p;
    p.height = h;
    p.ankle = r * (ground - eye);
    p.shoulder = p.ankle + h * s.normal;
    if (p.ankle.z() < 0.1 || p.shoulder.z() < 0.1 || h <= 0.0) continue;
    p.ankle_px = s.project_gen(p.ankle);
    p.shoulder_px = s.project_gen(p.shoulder);
    if (!in_image(p.ankle_px, cfg.width, cfg.height) ||
        !in_image(p.shoulder_px, cfg.width, cfg.height)) {
      continue;
    }
    s.people.push_back(p);
    attempts = 0;
  }
  return s;
}

std::vector<AnkleShoulderPair> scene_pairs(const SyntheticScene& scene, double noise_std,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<AnkleShoulderPair> out;
  out.reserve(scene.people.size());
  int id = 0;
  for (const auto& p : scene.people) {
    ImagePoint a = p.ankle_px;
    ImagePoint s = p.shoulder_px;
    if (noise_std > 0.0) {
      a += noise_std * Eigen::Vector2d(noise(rng), noise(rng));
      s += noise_std * Eigen::Vector2d(noise(rng), noise(rng));
    }
    out.push_back({scene.to_square(a), scene.to_square(s), 0, id++});
  }
  return out;
}

NoiseTarget parse_noise_target(std::string_view name) {
  if (name == "detections") return NoiseTarget::kDetections;
  if (name == "focal") return NoiseTarget::kFocal;
  if (name == "normal") return NoiseTarget::kNormal;
  if (name == "sync") return NoiseTarget::kSync;
  if (name == "rotation") return NoiseTarget::kRotation;
  throw Error(ErrorCode::kUnknownTarget, "unknown noise target '" + std::string(name) + "'");
}

std::string_view noise_target_name(NoiseTarget t) {
  switch (t) {
    case NoiseTarget::kDetections: return "detections";
    case NoiseTarget::kFocal: return "focal";
    case NoiseTarget::kNormal: return "normal";
    case NoiseTarget::kSync: return "sync";
    case NoiseTarget::kRotation: return "rotation";
  }
  return "unknown";
}

void inject_noise(NoiseTarget target, double magnitude, std::uint64_t seed, NoiseInputs in) {
  if (target != NoiseTarget::kSync && magnitude < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "noise magnitude must be non-negative");
  }
  auto need = [](const void* p) {
    if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, "missing input for noise target");
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  switch (target) {
    case NoiseTarget::kDetections:
      need(in.detections);
      if (magnitude == 0.0) return;
      for (auto& seq : *in.detections) {
        for (auto& frame : seq.frames) {
          for (auto& pose : frame.poses) {
            for (auto& k : pose.joints) {
              if (!k) continue;
              const double dx = g(rng);
              const double dy = g(rng);
              k->pixel += magnitude * Eigen::Vector2d(dx, dy);
            }
          }
        }
      }
      return;
    case NoiseTarget::kFocal:
      need(in.focal);
      if (magnitude == 0.0) return;
      *in.focal += magnitude * g(rng);
      return;
    case NoiseTarget::kNormal: {
      need(in.normal);
      if (magnitude == 0.0) return;
      const double a = g(rng);
      const double b = g(rng);
      const double c = g(rng);
      *in.normal = (*in.normal + magnitude * Eigen::Vector3d(a, b, c)).normalized();
      return;
    }
    case NoiseTarget::kSync:
      need(in.delta_t);
      *in.delta_t += static_cast<int>(std::lround(magnitude));
      return;
    case NoiseTarget::kRotation: {
      need(in.rotation);
      if (magnitude == 0.0) return;
      const double a = g(rng);
      const double b = g(rng);
      const double c = g(rng);
      const Eigen::Vector3d w = deg2rad(magnitude) * Eigen::Vector3d(a, b, c);
      *in.rotation = orthonormalize(rotation_from_axis_angle(w) * *in.rotation);
      return;
    }
  }
  throw Error(ErrorCode::kUnknownTarget, "unknown noise target");
}

void inject_noise(std::string_view target, double magnitude, std::uint64_t seed,
                  NoiseInputs inputs) {
  inject_noise(parse_noise_target(target), magnitude, seed, inputs);
}

TrialOutcome run_single_trial(const SceneConfig& scene_cfg, double noise_std, double solve_h,
                              FocalEstimator estimator) {
  TrialOutcome out;
  const SyntheticScene scene = generate_scene(scene_cfg);
  const auto pairs = scene_pairs(scene, noise_std, derive_seed(scene_cfg.seed, 0xD17EC7));
  const Eigen::Vector2d o = scene.principal_point();
  FocalNormal fn;
  try {
    const Eigen::VectorXd v = pairs.size() == 3 ? Eigen::VectorXd(solve_dlt(pairs, solve_h, o))
                                                : solve_dlt_stacked(pairs, o);
    fn = extract_focal_and_normal(v, pairs, o, solve_h, estimator);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNegativeFocalSquared &&
        e.code() != ErrorCode::kDegenerateConfiguration) {
      throw;
    }
    out.failed = true;
    return out;
  }
  out.fx_pct = metric_focal_pct(fn.f, scene.fx);
  out.fy_pct = metric_focal_pct(fn.f * scene.fy / scene.fx, scene.fy);
  out.normal_deg = metric_normal_deg(fn.normal, scene.normal);
  out.rho_pct = metric_rho_pct(fn.camera_height, scene.camera_height);
  std::vector<Eigen::Vector3d> pred;
  std::vector<Eigen::Vector3d> gt;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::Vector2d a = pairs[i].ankle - o;
    pred.emplace_back(fn.depths[i] * a.x() / fn.f, fn.depths[i] * a.y() / fn.f, fn.depths[i]);
    gt.push_back(scene.people[i].ankle);
  }
  out.x_pct = metric_x_pct(pred, gt);
  return out;
}

TrialReport run_trials(const SceneConfig& base, double noise_std, double solve_h, int trials,
                       std::uint64_t seed, FocalEstimator estimator) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be positive");
  TrialReport rep;
  rep.trials = trials;
  int failed = 0;
  int ok = 0;
  for (int t = 0; t < trials; ++t) {
    SceneConfig cfg = base;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    const TrialOutcome o = run_single_trial(cfg, noise_std, solve_h, estimator);
    if (o.failed) {
      ++failed;
      continue;
    }
    ++ok;
    rep.fx_pct += o.fx_pct;
    rep.fy_pct += o.fy_pct;
    rep.normal_deg += o.normal_deg;
    rep.rho_pct += o.rho_pct;
    rep.x_pct += o.x_pct;
  }
  if (ok > 0) {
    rep.fx_pct /= ok;
    rep.fy_pct /= ok;
    rep.normal_deg /= ok;
    rep.rho_pct /= ok;
    rep.x_pct /= ok;
  }
  rep.fail_pct = 100.0 * failed / trials;
  return rep;
}

std::vector<TrialReport> run_measurement_noise_trials(const MeasurementTrialConfig& cfg) {
  std::vector<TrialReport> out;
  SceneConfig scene = cfg.scene;
  scene.n_people = cfg.n_people;
  scene.height_mean = cfg.height;
  scene.height_std = 0.0;
  for (std::size_t i = 0; i < cfg.stds.size(); ++i) {
    TrialReport r = run_trials(scene, cfg.stds[i], cfg.height, cfg.trials, cfg.seed, cfg.estimator);
    r.grid_value = cfg.stds[i];
    out.push_back(r);
  }
  return out;
}

std::vector<TrialReport> run_height_trials(const HeightTrialConfig& cfg) {
  std::vector<TrialReport> out;
  SceneConfig scene = cfg.scene;
  scene.n_people = cfg.n_people;
  scene.height_mean = cfg.height_mean;
  for (double sd : cfg.height_stds) {
    scene.height_std = sd;
    TrialReport r = run_trials(scene, cfg.noise_std, cfg.height_mean, cfg.trials, cfg.seed, cfg.estimator);
    r.grid_value = sd;
    out.push_back(r);
  }
  return out;
}

std::vector<TrialReport> run_people_trials(const PeopleTrialConfig& cfg) {
  std::vector<TrialReport> out;
  SceneConfig scene = cfg.scene;
  scene.height_mean = cfg.height_mean;
  scene.height_std = cfg.height_std;
  for (int n : cfg.people) {
    scene.n_people = n;
    TrialReport r = run_trials(scene, cfg.noise_std, cfg.height_mean, cfg.trials, cfg.seed, cfg.estimator);
    r.grid_value = n;
    out.push_back(r);
  }
  return out;
}

void write_reports_csv(std::ostream& os, std::string_view grid_name,
                       const std::vector<TrialReport>& reports) {
  os << grid_name << ",fx_pct,fy_pct,normal_deg,rho_pct,x_pct,fail_pct,trials\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", r.grid_value,
                  r.fx_pct, r.fy_pct, r.normal_deg, r.rho_pct, r.x_pct, r.fail_pct, r.trials);
    os << buf;
  }
}

// ---------------------------------------------------------------------------

std::array<WorldPoint, kNumJoints> body_joints(const Eigen::Vector2d& ground, double heading,
                                               double phase, double h) {
  const Eigen::Vector3d fwd(std::cos(heading), std::sin(heading), 0.0);
  const Eigen::Vector3d left(-std::sin(heading), std::cos(heading), 0.0);
  const Eigen::Vector3d base(ground.x(), ground.y(), 0.0);
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const double swing = 0.22 * std::sin(phase);
  const double arm = 0.15 * std::sin(phase);

  std::array<WorldPoint, kNumJoints> j;
  auto at = [&j](Joint k) -> WorldPoint& { return j[static_cast<int>(k)]; };
  const double hip_z = 0.655 * h;
  const double knee_frac = (0.655 - 0.345) / 0.655;
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;  // left, right
    const Eigen::Vector3d ankle = base + 0.1 * s * left + s * swing * fwd;
    const Eigen::Vector3d hip = base + 0.1 * s * left + hip_z * up;
    const Eigen::Vector3d shoulder = base + 0.19 * s * left + h * up;
    const Eigen::Vector3d elbow = shoulder - 0.3 * h * up - s * arm * fwd + 0.03 * s * left;
    const Eigen::Vector3d wrist = elbow - 0.26 * h * up - 2.0 * s * arm * fwd;
    at(side == 0 ? Joint::kLeftAnkle : Joint::kRightAnkle) = ankle;
    at(side == 0 ? Joint::kLeftHip : Joint::kRightHip) = hip;
    at(side == 0 ? Joint::kLeftKnee : Joint::kRightKnee) = hip + knee_frac * (ankle - hip);
    at(side == 0 ? Joint::kLeftShoulder : Joint::kRightShoulder) = shoulder;
    at(side == 0 ? Joint::kLeftElbow : Joint::kRightElbow) = elbow;
    at(side == 0 ? Joint::kLeftWrist : Joint::kRightWrist) = wrist;
  }
  at(Joint::kNeck) = base + (h + 0.06 * h) * up;
  at(Joint::kHead) = base + (h + 0.2 * h) * up + 0.05 * fwd;
  return j;
}

RigScene generate_rig(const RigConfig& cfg) {
  if (cfg.n_cameras < 1 || cfg.n_people < 1 || cfg.n_frames < 1) {
    throw Error(ErrorCode::kInvalidArgument, "rig needs cameras, people and frames");
  }
  if (!cfg.delta_t.empty() &&
      (static_cast<int>(cfg.delta_t.size()) != cfg.n_cameras ||
       *std::min_element(cfg.delta_t.begin(), cfg.delta_t.end()) < 0 || cfg.delta_t[0] != 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "delta_t needs one non-negative value per camera, 0 for the first");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RigScene rig;

  // Cameras on a ring around the walking area.
  const double ring0 = uniform(rng, 0.0, 2.0 * kPi);
  for (int c = 0; c < cfg.n_cameras; ++c) {
    const double az = ring0 + 2.0 * kPi * c / cfg.n_cameras + deg2rad(uniform(rng, -15.0, 15.0));
    const double radius = cfg.camera_radius * uniform(rng, 0.9, 1.1);
    const Eigen::Vector3d eye(radius * std::cos(az), radius * std::sin(az),
                              uniform(rng, cfg.camera_height_min, cfg.camera_height_max));
    const Eigen::Vector3d target(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), 0.0);
    Camera cam;
    cam.extrinsics.rot_world_to_cam = look_at(eye, target, deg2rad(uniform(rng, -5.0, 5.0)));
    cam.extrinsics.position = eye;
    cam.intrinsics = {uniform(rng, cfg.focal_min, cfg.focal_max), 0.5 * cfg.width,
                      0.5 * cfg.height};
    rig.cameras.push_back(cam);
    rig.delta_t.push_back(c == 0 ? 0 : std::uniform_int_distribution<int>(0, cfg.max_delta_t)(rng));
    if (!cfg.delta_t.empty()) rig.delta_t.back() = cfg.delta_t[c];
  }

  // Non-periodic walks: heading performs a random walk and steers back
  // toward the center near the edge of the area.
  const int max_dt = *std::max_element(rig.delta_t.begin(), rig.delta_t.end());
  rig.world_frames = cfg.n_frames + max_dt;
  rig.joints.assign(rig.world_frames, {});
  const double dt = 1.0 / cfg.fps;
  for (int p = 0; p < cfg.n_people; ++p) {
    const double r0 = cfg.area_radius * std::sqrt(uniform(rng, 0.0, 1.0));
    const double a0 = uniform(rng, 0.0, 2.0 * kPi);
    Eigen::Vector2d pos(r0 * std::cos(a0), r0 * std::sin(a0));
    double heading = uniform(rng, 0.0, 2.0 * kPi);
    double speed = uniform(rng, 0.8, 1.6);
    double phase = uniform(rng, 0.0, 2.0 * kPi);
    const double h = cfg.person_height + cfg.person_height_std * g(rng);
    rig.heights.push_back(h);
    for (int t = 0; t < rig.world_frames; ++t) {
      rig.joints[t].push_back(body_joints(pos, heading, phase, h));
      heading += 0.06 * g(rng);
      if (pos.norm() > cfg.area_radius) {
        const double to_center = std::atan2(-pos.y(), -pos.x());
        heading += 0.15 * wrap_angle_signed(to_center - heading);
      }
      speed = std::clamp(speed + 0.02 * g(rng), 0.5, 1.8);
      pos += speed * dt * Eigen::Vector2d(std::cos(heading), std::sin(heading));
      phase += 2.0 * kPi * speed * dt / 1.3;
    }
  }

  for (int c = 0; c < cfg.n_cameras; ++c) {
    CameraSequence seq;
    seq.camera_id = "cam" + std::to_string(c);
    seq.width = cfg.width;
    seq.height = cfg.height;
    seq.fps = cfg.fps;
    const Camera& cam = rig.cameras[c];
    std::uniform_real_distribution<double> conf(0.6, 1.0);
    for (int f = 0; f < cfg.n_frames; ++f) {
      const int world = f + rig.delta_t[c];
      FrameDetections fd;
      fd.index = f;
      for (int p = 0; p < cfg.n_people; ++p) {
        PoseDetection pose;
        pose.person_id = p;
        int visible = 0;
        for (int j = 0; j < kNumJoints; ++j) {
          const double confidence = conf(rng);
          const double nx = g(rng);
          const double ny = g(rng);
          const CamPoint pc = cam.extrinsics.to_camera(rig.joints[world][p][j]);
          if (pc.z() < 0.1) continue;
          ImagePoint px = project(pc, cam.intrinsics);
          px += cfg.detection_noise * Eigen::Vector2d(nx, ny);
          if (!in_image(px, cfg.width, cfg.height)) continue;
          pose.joints[j] = Keypoint{px, confidence};
          ++visible;
        }
        if (visible >= 4) fd.poses.push_back(pose);
      }
      seq.frames.push_back(std::move(fd));
    }
    rig.sequences.push_back(std::move(seq));
  }
  return rig;
}

std::vector<Camera> rig_cameras_in_reference(const RigScene& rig, int reference) {
  const CameraExtrinsics& r0 = rig.cameras.at(reference).extrinsics;
  std::vector<Camera> out;
  for (const auto& cam : rig.cameras) {
    Camera c = cam;
    c.extrinsics.rot_world_to_cam = cam.extrinsics.rot_world_to_cam * r0.rot_world_to_cam.transpose();
    c.extrinsics.position = r0.to_camera(cam.extrinsics.position);
    out.push_back(c);
  }
  return out;
}

BundleProblem rig_bundle_problem(const RigScene& rig, int max_poses, double h) {
  if (max_poses < 1) throw Error(ErrorCode::kInvalidArgument, "max_poses must be positive");
  BundleProblem prob;
  prob.cameras = rig_cameras_in_reference(rig, 0);
  for (int dt : rig.delta_t) prob.delta_t.push_back(dt);
  const CameraExtrinsics& r0 = rig.cameras[0].extrinsics;
  prob.plane_normal = r0.rot_world_to_cam * Eigen::Vector3d::UnitZ();
  prob.plane_point = r0.to_camera(Eigen::Vector3d::Zero());
  prob.h = h;
  prob.reference_camera = 0;

  const int ncam = static_cast<int>(rig.cameras.size());
  auto find_pose = [&](int c, int frame, int person) -> const PoseDetection* {
    const auto& frames = rig.sequences[c].frames;
    if (frame < 0 || frame >= static_cast<int>(frames.size())) return nullptr;
    for (const auto& p : frames[frame].poses) {
      if (p.person_id == person) return &p;
    }
    return nullptr;
  };
  std::vector<MatchedPose> all;
  const int nframes = static_cast<int>(rig.sequences[0].frames.size());
  for (int f = 0; f < nframes; ++f) {
    for (const auto& ref_pose : rig.sequences[0].frames[f].poses) {
      MatchedPose m;
      m.frame = f;
      m.person_id = ref_pose.person_id;
      for (int c = 0; c < ncam; ++c) {
        const int fc = f - rig.delta_t[c];
        const PoseDetection* p = find_pose(c, fc, ref_pose.person_id);
        if (p) m.views.push_back({c, p->person_id, fc, p->joints});
      }
      if (m.views.size() >= 2) all.push_back(std::move(m));
    }
  }
  if (static_cast<int>(all.size()) <= max_poses) {
    prob.poses = std::move(all);
  } else {
    for (int i = 0; i < max_poses; ++i) {
      prob.poses.push_back(all[static_cast<std::size_t>(i) * all.size() / max_poses]);
    }
  }
  return prob;
}

}  // namespace rigcal
