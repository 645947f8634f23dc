#include "rigcal/noise_study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "rigcal/error.hpp"
#include "rigcal/metrics.hpp"

namespace rigcal {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct RunMetrics {
  double focal_pct = 0.0;
  double sync_error = 0.0;
  double rotation_deg = 0.0;
  double translation_m = 0.0;
  double nmpjpe_m = 0.0;
};

Eigen::Vector3d gt_normal(const RigScene& rig, int c) {
  return rig.cameras[c].extrinsics.rot_world_to_cam * Eigen::Vector3d::UnitZ();
}

RunMetrics pipeline_run(const NoiseStudyConfig& cfg, const RigScene& rig, double magnitude,
                        std::uint64_t noise_seed) {
  const int n = static_cast<int>(rig.cameras.size());
  std::vector<CameraSequence> seqs = rig.sequences;
  PipelineConfig pc = cfg.pipeline;
  pc.reference = 0;
  pc.overrides.clear();

  if (cfg.target == NoiseTarget::kDetections) {
    inject_noise(cfg.target, magnitude, noise_seed, {.detections = &seqs});
  } else {
    pc.overrides.resize(n);
    for (int c = 0; c < n; ++c) {
      double f = rig.cameras[c].intrinsics.f;
      Eigen::Vector3d normal = gt_normal(rig, c);
      const std::uint64_t s = derive_seed(noise_seed, static_cast<std::uint64_t>(c));
      if (cfg.target == NoiseTarget::kFocal) inject_noise(cfg.target, magnitude, s, {.focal = &f});
      if (cfg.target == NoiseTarget::kNormal)
        inject_noise(cfg.target, magnitude, s, {.normal = &normal});
      pc.overrides[c].focal = f;
      pc.overrides[c].normal = normal;
      if (cfg.target == NoiseTarget::kSync && c != 0) {
        int dt = rig.delta_t[c];
        inject_noise(cfg.target, magnitude, s, {.delta_t = &dt});
        pc.overrides[c].delta_t = dt;
      }
    }
  }

  const RigSolution sol = run_pipeline(seqs, pc);
  const auto gt = rig_cameras_in_reference(rig, 0);
  std::vector<CameraExtrinsics> pred_ext;
  std::vector<CameraExtrinsics> gt_ext;
  RunMetrics m;
  for (int c = 0; c < n; ++c) {
    pred_ext.push_back(sol.cameras[c].extrinsics);
    gt_ext.push_back(gt[c].extrinsics);
    m.focal_pct += metric_focal_pct(sol.cameras[c].intrinsics.f, gt[c].intrinsics.f) / n;
    if (c != 0) m.sync_error += std::abs(sol.cameras[c].delta_t - rig.delta_t[c]) / double(n - 1);
  }
  const RelativePoseError e = metric_relpose(pred_ext, gt_ext, 0);
  m.rotation_deg = e.rotation_deg;
  m.translation_m = e.translation_m;
  return m;
}

RunMetrics rotation_run(const NoiseStudyConfig& cfg, const RigScene& rig, double magnitude,
                        std::uint64_t noise_seed) {
  BundleProblem prob = rig_bundle_problem(rig, cfg.max_poses);
  const int n = static_cast<int>(prob.cameras.size());
  std::vector<CameraExtrinsics> gt_ext;
  for (int c = 0; c < n; ++c) {
    gt_ext.push_back(prob.cameras[c].extrinsics);
    Eigen::Matrix3d r = prob.cameras[c].extrinsics.rot_world_to_cam;
    inject_noise(NoiseTarget::kRotation, magnitude, derive_seed(noise_seed, c), {.rotation = &r});
    prob.cameras[c].extrinsics.rot_world_to_cam = r;
  }

  const CameraExtrinsics& world_to_ref = rig.cameras[0].extrinsics;
  std::vector<std::vector<Eigen::Vector3d>> pred;
  std::vector<std::vector<Eigen::Vector3d>> truth;
  for (const auto& pose : prob.poses) {
    const auto& va = pose.views[0];
    const auto& vb = pose.views[1];
    std::vector<Eigen::Vector3d> p;
    std::vector<Eigen::Vector3d> t;
    for (int j = 0; j < kNumJoints; ++j) {
      if (!is_body_joint(static_cast<Joint>(j)) || !va.joints[j] || !vb.joints[j]) continue;
      const auto cp = closest_points(build_ray(va.joints[j]->pixel, prob.cameras[va.camera]),
                                     build_ray(vb.joints[j]->pixel, prob.cameras[vb.camera]));
      if (cp.parallel) continue;
      p.push_back(0.5 * (cp.on_first + cp.on_second));
      t.push_back(world_to_ref.to_camera(rig.joints[pose.frame][pose.person_id][j]));
    }
    if (p.size() < 2) continue;
    pred.push_back(std::move(p));
    truth.push_back(std::move(t));
  }
  if (pred.empty()) throw Error(ErrorCode::kNoSharedObservations, "no triangulated poses");

  RunMetrics m;
  std::vector<CameraExtrinsics> pred_ext;
  for (const auto& cam : prob.cameras) pred_ext.push_back(cam.extrinsics);
  const RelativePoseError e = metric_relpose(pred_ext, gt_ext, 0);
  m.rotation_deg = e.rotation_deg;
  m.translation_m = e.translation_m;
  m.nmpjpe_m = metric_nmpjpe(pred, truth);
  return m;
}

}  // namespace

std::vector<double> default_noise_magnitudes(NoiseTarget target) {
  switch (target) {
    case NoiseTarget::kDetections: return {0, 5, 10, 15, 20, 25, 30, 35};
    case NoiseTarget::kFocal: return {0, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
    case NoiseTarget::kNormal: return {0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    case NoiseTarget::kSync: return {-100, -75, -50, -25, 0, 25, 50, 75, 100};
    case NoiseTarget::kRotation: return {0, 1, 2, 3, 5, 10, 15, 20};
  }
  return {};
}

std::vector<NoiseStudyRow> run_noise_study(const NoiseStudyConfig& cfg) {
  if (cfg.repeats < 1) throw Error(ErrorCode::kInvalidArgument, "repeats must be positive");
  std::vector<RigScene> rigs;
  for (int r = 0; r < cfg.repeats; ++r) {
    RigConfig rc = cfg.rig;
    rc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    rigs.push_back(generate_rig(rc));
  }

  std::vector<NoiseStudyRow> rows;
  for (std::size_t k = 0; k < cfg.magnitudes.size(); ++k) {
    const double mag = cfg.magnitudes[k];
    std::vector<double> f, s, rot, tr, mp;
    NoiseStudyRow row;
    row.magnitude = mag;
    for (int r = 0; r < cfg.repeats; ++r) {
      const std::uint64_t noise_seed =
          derive_seed(derive_seed(cfg.seed, 0x5EED0000u + k), static_cast<std::uint64_t>(r));
      ++row.runs;
      try {
        const RunMetrics m = cfg.target == NoiseTarget::kRotation
                                 ? rotation_run(cfg, rigs[r], mag, noise_seed)
                                 : pipeline_run(cfg, rigs[r], mag, noise_seed);
        f.push_back(m.focal_pct);
        s.push_back(m.sync_error);
        rot.push_back(m.rotation_deg);
        tr.push_back(m.translation_m);
        mp.push_back(m.nmpjpe_m);
      } catch (const Error&) {
        ++row.failures;
      }
    }
    row.focal_pct = median(f);
    row.sync_error = median(s);
    row.rotation_deg = median(rot);
    row.translation_m = median(tr);
    row.nmpjpe_m = median(mp);
    rows.push_back(row);
  }
  return rows;
}

void write_noise_study_csv(std::ostream& os, const std::vector<NoiseStudyRow>& rows) {
  os << "magnitude,focal_pct,sync_error,rotation_deg,translation_m,nmpjpe_m,runs,failures\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.magnitude,
                  r.focal_pct, r.sync_error, r.rotation_deg, r.translation_m, r.nmpjpe_m, r.runs,
                  r.failures);
    os << buf;
  }
}

}  // namespace rigcal
