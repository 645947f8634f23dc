#include "rigcal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rigcal/assignment.hpp"
#include "rigcal/error.hpp"

namespace rigcal {
namespace {

template <typename F>
auto in_stage(const std::string& camera, const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "camera " + camera + ", " + stage + ": " + e.what());
  }
}

struct PlaneObservation {
  const PoseDetection* pose = nullptr;
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
};

// Frame index -> poses with a ground-plane ankle center.
using PlaneFrames = std::map<int, std::vector<PlaneObservation>>;

PlaneFrames plane_frames(const CameraSequence& seq, const CameraIntrinsics& k,
                         const GroundPlaneFrame& plane, double min_confidence) {
  PlaneFrames out;
  for (const auto& frame : seq.frames) {
    for (const auto& pose : frame.poses) {
      const auto ankle = ankle_center(pose, min_confidence);
      if (!ankle) continue;
      try {
        const PlanePoint q = backproject_to_plane(*ankle, k, plane);
        out[frame.index].push_back({&pose, q.head<2>()});
      } catch (const Error&) {
        // Ankles above the horizon have no ground intersection.
      }
    }
  }
  return out;
}

PlaneTrack to_track(const PlaneFrames& frames) {
  PlaneTrack t;
  for (const auto& [f, obs] : frames) {
    for (const auto& o : obs) {
      t.points[f].push_back(o.xy);
      t.person_ids[f].push_back(o.pose->person_id);
    }
  }
  return t;
}

PlaneTrack dbscan_track(const PlaneTrack& in, double eps, int min_pts) {
  std::vector<Eigen::Vector2d> flat;
  for (const auto& [f, pts] : in.points) flat.insert(flat.end(), pts.begin(), pts.end());
  if (flat.empty()) throw Error(ErrorCode::kEmptyInput, "no ground-plane points");
  const auto keep = dbscan_filter(flat, eps, min_pts);
  PlaneTrack out;
  std::size_t idx = 0;
  for (const auto& [f, pts] : in.points) {
    const auto& ids = in.person_ids.at(f);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!keep[idx++]) continue;
      out.points[f].push_back(pts[i]);
      out.person_ids[f].push_back(ids[i]);
    }
  }
  if (out.points.empty()) throw Error(ErrorCode::kEmptyInput, "every ground-plane point is noise");
  return out;
}

std::vector<TimedPlanePoint> overlap_only(const std::vector<TimedPlanePoint>& pts,
                                          const std::set<int>& frames) {
  std::vector<TimedPlanePoint> out;
  for (const auto& p : pts) {
    if (frames.count(p.frame)) out.push_back(p);
  }
  return out;
}

struct StageOne {
  SingleViewSolution sv;
  CameraIntrinsics k;
  Eigen::Vector3d normal;
  GroundPlaneFrame plane;
};

StageOne stage_one(const CameraSequence& seq, const PipelineConfig& cfg,
                   const CameraOverride* ov) {
  StageOne s;
  s.sv = ransac_calibrate(seq, cfg.single_view);
  s.k = s.sv.intrinsics;
  s.normal = s.sv.normal;
  double height = s.sv.plane.camera_height();
  std::vector<AnkleShoulderPair> inliers;
  for (std::size_t i = 0; i < s.sv.pairs.size(); ++i) {
    if (s.sv.inlier_mask[i]) inliers.push_back(s.sv.pairs[i]);
  }
  if (ov && (ov->focal || ov->normal)) {
    if (ov->focal) {
      if (!(*ov->focal > 0.0)) throw Error(ErrorCode::kInvalidArgument, "focal must be positive");
      // Same null-vector direction, read with the given focal length.
      const Eigen::Vector3d v(s.k.f * s.normal.x(), s.k.f * s.normal.y(), s.normal.z());
      s.k.f = *ov->focal;
      s.normal = Eigen::Vector3d(v.x() / s.k.f, v.y() / s.k.f, v.z()).normalized();
    }
    if (ov->normal) s.normal = ov->normal->normalized();
    height = camera_height_given(s.k, s.normal, inliers, cfg.single_view.h);
  }
  s.plane = plane_basis_from_normal(s.normal, s.k, height);
  return s;
}

}  // namespace

PlaneTrack plane_points(const CameraSequence& seq, const CameraIntrinsics& k,
                        const GroundPlaneFrame& plane, double min_confidence) {
  return to_track(plane_frames(seq, k, plane, min_confidence));
}

Eigen::Isometry3d plane_to_world(const RigSolution& sol, int camera) {
  const CameraResult& c = sol.cameras.at(camera);
  Eigen::Isometry3d plane_to_cam = Eigen::Isometry3d::Identity();
  plane_to_cam.linear() = c.plane.rot_cam_to_plane.transpose();
  plane_to_cam.translation() = c.plane.t_plane;
  Eigen::Isometry3d cam_to_world = Eigen::Isometry3d::Identity();
  cam_to_world.linear() = c.extrinsics.rot_world_to_cam.transpose();
  cam_to_world.translation() = c.extrinsics.position;
  return cam_to_world * plane_to_cam;
}

RigSolution run_pipeline(const std::vector<CameraSequence>& cameras, const PipelineConfig& cfg) {
  const int n = static_cast<int>(cameras.size());
  if (n < 2) throw Error(ErrorCode::kInsufficientData, "at least 2 cameras required");
  if (cfg.reference < 0 || cfg.reference >= n) {
    throw Error(ErrorCode::kInvalidArgument, "reference camera index out of range");
  }
  if (!cfg.overrides.empty() && static_cast<int>(cfg.overrides.size()) != n) {
    throw Error(ErrorCode::kInvalidArgument, "overrides must be empty or one per camera");
  }
  const int ref = cfg.reference;
  const double min_conf = cfg.single_view.min_confidence;

  RigSolution sol;
  sol.reference = ref;
  sol.cameras.resize(n);
  if (n == 2) sol.warnings.push_back("two-camera rig: bundle adjustment is weakly constrained");

  // Stage I, independently per camera.
  std::vector<StageOne> one(n);
  std::vector<PlaneFrames> frames(n);
  std::vector<PlaneTrack> tracks(n);
  for (int c = 0; c < n; ++c) {
    const auto& seq = cameras[c];
    const CameraOverride* ov = cfg.overrides.empty() ? nullptr : &cfg.overrides[c];
    one[c] = in_stage(seq.camera_id, "single-view calibration",
                      [&] { return stage_one(seq, cfg, ov); });
    frames[c] = plane_frames(seq, one[c].k, one[c].plane, min_conf);
    tracks[c] = in_stage(seq.camera_id, "ground-plane filtering", [&] {
      return dbscan_track(to_track(frames[c]), cfg.sync.dbscan_eps, cfg.sync.dbscan_min_pts);
    });
    CameraResult& r = sol.cameras[c];
    r.id = seq.camera_id;
    r.intrinsics = one[c].k;
    r.plane = one[c].plane;
    r.num_pairs = static_cast<int>(one[c].sv.pairs.size());
    r.num_inliers = one[c].sv.num_inliers;
  }

  const double time_weight =
      cfg.time_weight >= 0.0 ? cfg.time_weight : median_frame_displacement(tracks[ref].points);
  const auto ref_timed = to_timed(tracks[ref].points, 0);

  // Stages II-IV against the reference camera.
  for (int c = 0; c < n; ++c) {
    CameraResult& r = sol.cameras[c];
    if (c == ref) continue;
    const std::string& id = cameras[c].camera_id;
    const CameraOverride* ov = cfg.overrides.empty() ? nullptr : &cfg.overrides[c];

    r.sync = in_stage(id, "temporal search", [&] {
      return search_time_offset_signed(tracks[ref].points, tracks[c].points, cfg.sync.max_offset,
                                       cfg.sync.penalize_unmatched);
    });
    int dt = r.sync.delta_t;
    if (ov && ov->delta_t) dt = *ov->delta_t;
    if (ov) dt += ov->delta_t_offset;

    const AlignmentResult rot = in_stage(id, "rotation search", [&] {
      const auto sync_timed = to_timed(tracks[c].points, dt);
      std::set<int> a;
      std::set<int> b;
      std::set<int> both;
      for (const auto& p : ref_timed) a.insert(p.frame);
      for (const auto& p : sync_timed) b.insert(p.frame);
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                            std::inserter(both, both.end()));
      if (both.empty()) throw Error(ErrorCode::kEmptyCloud, "no overlapping frames");
      return search_rotation(overlap_only(ref_timed, both), overlap_only(sync_timed, both),
                             cfg.rotation_step_deg, time_weight);
    });
    r.rotation_curve = rot.curve;
    r.rotation_step_deg = cfg.rotation_step_deg;

    const IcpResult icp = in_stage(id, "ICP", [&] {
      return icp_refine(tracks[ref].points, tracks[c].points, rot.transform, dt, cfg.icp);
    });
    r.icp_history = icp.history;
    r.plane_transform = icp.transform;
    r.delta_t = icp.delta_t;
    r.delta_t_refined = icp.delta_t;
    r.extrinsics = compose_extrinsics(one[ref].plane, one[c].plane, icp.transform);
  }

  if (!cfg.run_bundle) return sol;

  // Multi-view poses: per reference frame, each camera's poses are mapped to
  // the reference plane and matched to the reference poses.
  std::vector<MatchedPose> poses;
  for (const auto& [fr, ref_obs] : frames[ref]) {
    std::vector<MatchedPose> here(ref_obs.size());
    for (std::size_t i = 0; i < ref_obs.size(); ++i) {
      here[i].frame = fr;
      here[i].person_id = ref_obs[i].pose->person_id;
      here[i].views.push_back({ref, ref_obs[i].pose->person_id, fr, ref_obs[i].pose->joints});
    }
    for (int c = 0; c < n; ++c) {
      if (c == ref) continue;
      const int fc = fr - sol.cameras[c].delta_t;
      const auto it = frames[c].find(fc);
      if (it == frames[c].end() || it->second.empty() || ref_obs.empty()) continue;
      const auto& obs = it->second;
      Eigen::MatrixXd cost(ref_obs.size(), obs.size());
      for (std::size_t i = 0; i < ref_obs.size(); ++i) {
        for (std::size_t j = 0; j < obs.size(); ++j) {
          cost(i, j) = (ref_obs[i].xy - sol.cameras[c].plane_transform.apply(obs[j].xy)).norm();
        }
      }
      for (const auto& [i, j] : hungarian_assign(cost)) {
        if (cost(i, j) > cfg.match_gate) continue;
        here[i].views.push_back({c, obs[j].pose->person_id, fc, obs[j].pose->joints});
      }
    }
    for (auto& m : here) {
      if (m.views.size() >= 2) poses.push_back(std::move(m));
    }
  }
  if (poses.empty()) {
    sol.warnings.push_back("no multi-view poses; bundle adjustment skipped");
    return sol;
  }
  poses = select_top_k(std::move(poses), cfg.top_k);

  BundleProblem prob;
  for (int c = 0; c < n; ++c) {
    prob.cameras.push_back({sol.cameras[c].intrinsics, sol.cameras[c].extrinsics});
    prob.delta_t.push_back(sol.cameras[c].delta_t);
  }
  prob.poses = std::move(poses);
  prob.weights = cfg.weights;
  prob.h = cfg.single_view.h;
  prob.plane_normal = one[ref].plane.normal;
  prob.plane_point = one[ref].plane.t_plane;
  prob.reference_camera = ref;
  if (cfg.bundle.optimize_dt) {
    prob.tracks.resize(n);
    for (int c = 0; c < n; ++c) {
      for (const auto& frame : cameras[c].frames) {
        for (const auto& pose : frame.poses) {
          prob.tracks[c][pose.person_id][frame.index] = pose.joints;
        }
      }
    }
  }
  sol.bundle_poses = static_cast<int>(prob.poses.size());

  const BundleResult br =
      in_stage("all", "bundle adjustment", [&] { return optimize_bundle(prob, cfg.bundle); });
  sol.bundle_run = true;
  sol.bundle_loss = br.loss_history;
  if (br.diverged) sol.warnings.push_back("bundle adjustment rejected a diverging step");
  for (int c = 0; c < n; ++c) {
    CameraResult& r = sol.cameras[c];
    r.intrinsics = br.cameras[c].intrinsics;
    if (c == ref) continue;
    r.extrinsics = br.cameras[c].extrinsics;
    r.delta_t_refined = br.delta_t[c];
    r.delta_t = static_cast<int>(std::lround(br.delta_t[c]));
  }
  return sol;
}

}  // namespace rigcal
