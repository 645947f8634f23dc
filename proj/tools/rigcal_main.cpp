// rigcal: multi-camera calibration and synchronization from 2D keypoints.
//
// Exit codes: 0 success, 2 input error, 3 calibration failure,
// 4 internal invariant violation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rigcal/error.hpp"
#include "rigcal/io.hpp"
#include "rigcal/noise_study.hpp"
#include "rigcal/pipeline.hpp"
#include "rigcal/single_view.hpp"
#include "rigcal/sync.hpp"
#include "rigcal/synthetic.hpp"

namespace fs = std::filesystem;
using namespace rigcal;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitInvariant = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaError:
    case ErrorCode::kEmptySequence:
    case ErrorCode::kIoError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnknownTarget:
    case ErrorCode::kEmptyInput:
      return kExitInput;
    case ErrorCode::kInvariantViolation:
      return kExitInvariant;
    default:
      return kExitCalibration;
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

// Flags shared by the commands that run Stage I or the full pipeline.
struct PipelineFlags {
  double height = 1.7;
  int reference = 0;
  std::uint64_t seed = 0;
  int ransac_iterations = 1000;
  double angle_thresh_deg = 2.86;
  double pixel_thresh = 0.05;
  double standing_thresh = 0.6;
  int max_offset = -1;
  double rotation_step_deg = 1.0;
  bool no_bundle = false;
  int max_iter = 500;
  double lr = 1e-2;
  int top_k = 300;
  bool optimize_intrinsics = false;
  bool optimize_dt = false;
  std::string config;

  void add(CLI::App* app, bool full) {
    app->add_option("--height", height, "ankle-to-shoulder height, meters")->capture_default_str();
    app->add_option("--seed", seed, "RANSAC seed")->capture_default_str();
    app->add_option("--ransac-iterations", ransac_iterations)->capture_default_str();
    app->add_option("--angle-thresh", angle_thresh_deg, "inlier angle threshold, degrees")
        ->capture_default_str();
    app->add_option("--pixel-thresh", pixel_thresh, "inlier threshold, fraction of pixel height")
        ->capture_default_str();
    app->add_option("--standing-thresh", standing_thresh, "standing filter threshold, radians")
        ->capture_default_str();
    app->add_option("--config", config, "JSON config; its keys override flags");
    if (!full) return;
    app->add_option("--reference", reference, "index of the reference camera")
        ->capture_default_str();
    app->add_option("--max-offset", max_offset, "largest |delta_t| searched (-1: a third)")
        ->capture_default_str();
    app->add_option("--rotation-step", rotation_step_deg, "rotation search step, degrees")
        ->capture_default_str();
    app->add_flag("--no-bundle", no_bundle, "skip bundle adjustment");
    app->add_option("--max-iter", max_iter, "bundle adjustment iterations")->capture_default_str();
    app->add_option("--lr", lr, "initial bundle step")->capture_default_str();
    app->add_option("--top-k", top_k, "poses kept for bundle adjustment")->capture_default_str();
    app->add_flag("--optimize-intrinsics", optimize_intrinsics, "refine focal lengths");
    app->add_flag("--optimize-dt", optimize_dt, "refine delta_t continuously");
  }

  PipelineConfig build() const {
    PipelineConfig cfg;
    cfg.single_view.h = height;
    cfg.single_view.seed = seed;
    cfg.single_view.iterations = ransac_iterations;
    cfg.single_view.angle_thresh = deg2rad(angle_thresh_deg);
    cfg.single_view.pixel_thresh = pixel_thresh;
    cfg.single_view.standing_thresh = standing_thresh;
    cfg.reference = reference;
    cfg.sync.max_offset = max_offset;
    cfg.rotation_step_deg = rotation_step_deg;
    cfg.run_bundle = !no_bundle;
    cfg.bundle.max_iter = max_iter;
    cfg.bundle.lr = lr;
    cfg.bundle.optimize_intrinsics = optimize_intrinsics;
    cfg.bundle.optimize_dt = optimize_dt;
    cfg.top_k = top_k;
    if (!config.empty()) apply_config_json(read_text(config), cfg);
    return cfg;
  }
};

void check_solution(const RigSolution& sol) {
  const auto& ref = sol.cameras.at(sol.reference);
  if (!ref.extrinsics.rot_world_to_cam.isIdentity(1e-9) || ref.extrinsics.position.norm() > 1e-9 ||
      ref.delta_t != 0) {
    throw Error(ErrorCode::kInvariantViolation, "reference camera is not the identity");
  }
  for (const auto& c : sol.cameras) {
    const Eigen::Matrix3d& r = c.extrinsics.rot_world_to_cam;
    if (!(r * r.transpose()).isIdentity(1e-6) || r.determinant() < 0.0) {
      throw Error(ErrorCode::kInvariantViolation, "camera " + c.id + " rotation is not orthonormal");
    }
  }
}

std::string camera_json(const SingleViewSolution& sv) {
  nlohmann::json j;
  j["f"] = sv.intrinsics.f;
  j["o1"] = sv.intrinsics.o1;
  j["o2"] = sv.intrinsics.o2;
  j["normal"] = {sv.normal.x(), sv.normal.y(), sv.normal.z()};
  j["camera_height"] = sv.plane.camera_height();
  j["num_pairs"] = sv.pairs.size();
  j["num_inliers"] = sv.num_inliers;
  return j.dump(2) + "\n";
}

FramePoints filtered_track(const CameraSequence& seq, const SingleViewSolution& sv,
                           const PipelineConfig& cfg) {
  const PlaneTrack t = plane_points(seq, sv.intrinsics, sv.plane, cfg.single_view.min_confidence);
  return dbscan_filter_frames(t.points, cfg.sync.dbscan_eps, cfg.sync.dbscan_min_pts);
}

void write_rig_truth(const RigScene& rig, const fs::path& path) {
  RigSolution truth;
  truth.reference = 0;
  const auto cams = rig_cameras_in_reference(rig, 0);
  for (std::size_t c = 0; c < cams.size(); ++c) {
    CameraResult r;
    r.id = rig.sequences[c].camera_id;
    r.intrinsics = cams[c].intrinsics;
    r.extrinsics = cams[c].extrinsics;
    const Eigen::Vector3d n = rig.cameras[c].extrinsics.rot_world_to_cam * Eigen::Vector3d::UnitZ();
    r.plane = plane_basis_from_normal(n, r.intrinsics, rig.cameras[c].extrinsics.position.z());
    r.delta_t = rig.delta_t[c];
    r.delta_t_refined = rig.delta_t[c];
    truth.cameras.push_back(r);
  }
  write_solution(truth, path);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "not a number: '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera calibration and synchronization from 2D human keypoints"};
  app.require_subcommand(1);

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "run the full pipeline on detection files");
  std::vector<std::string> cal_inputs;
  std::string cal_out = "out";
  PipelineFlags cal_flags;
  calibrate->add_option("inputs", cal_inputs, "detection files, one per camera")->required();
  calibrate->add_option("-o,--out", cal_out, "output directory")->capture_default_str();
  cal_flags.add(calibrate, true);

  // single-view
  auto* single = app.add_subcommand("single-view", "Stage I on one camera");
  std::string sv_input;
  PipelineFlags sv_flags;
  single->add_option("input", sv_input, "detection file")->required();
  sv_flags.add(single, false);

  // sync
  auto* sync_cmd = app.add_subcommand("sync", "temporal offset between two cameras");
  std::string sync_ref;
  std::string sync_other;
  std::string sync_curve;
  PipelineFlags sync_flags;
  sync_cmd->add_option("ref_file", sync_ref, "reference detection file")->required();
  sync_cmd->add_option("other_file", sync_other, "detection file to synchronize")->required();
  sync_cmd->add_option("--curve", sync_curve, "write the cost per offset as CSV");
  sync_flags.add(sync_cmd, true);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "synthetic trials and rig generation");
  std::string sim_mode = "measurement";
  std::string sim_out;
  int sim_trials = 5000;
  std::uint64_t sim_seed = 0;
  int sim_cameras = 3;
  int sim_frames = 300;
  double sim_noise = 0.0;
  bool sim_first_pair = false;
  simulate->add_option("mode", sim_mode, "measurement, height, people or rig")
      ->check(CLI::IsMember({"measurement", "height", "people", "rig"}))
      ->capture_default_str();
  simulate->add_option("-o,--out", sim_out, "CSV path (trials) or directory (rig)");
  simulate->add_option("--trials", sim_trials, "trials per grid point")->capture_default_str();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  simulate->add_option("--cameras", sim_cameras, "rig cameras")->capture_default_str();
  simulate->add_option("--frames", sim_frames, "rig frames")->capture_default_str();
  simulate->add_option("--noise", sim_noise, "rig detection noise, pixels")->capture_default_str();
  simulate->add_flag("--first-pair", sim_first_pair, "closed-form focal from the first two pairs");

  // noise-study
  auto* study = app.add_subcommand("noise-study", "noise propagation through the pipeline");
  std::string study_target = "detections";
  std::string study_magnitudes;
  std::string study_out;
  int study_repeats = 5;
  std::uint64_t study_seed = 0;
  bool study_bundle = false;
  study->add_option("target", study_target, "detections, focal, normal, sync or rotation")
      ->capture_default_str();
  study->add_option("--magnitudes", study_magnitudes, "comma-separated noise magnitudes");
  study->add_option("--repeats", study_repeats, "rigs per magnitude")->capture_default_str();
  study->add_option("--seed", study_seed)->capture_default_str();
  study->add_option("-o,--out", study_out, "CSV path (default stdout)");
  study->add_flag("--bundle", study_bundle, "also run bundle adjustment");

  // convert-coco
  auto* coco = app.add_subcommand("convert-coco", "convert a COCO-17 keypoint dump");
  std::string coco_in;
  std::string coco_out;
  coco->add_option("input", coco_in)->required();
  coco->add_option("output", coco_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*calibrate) {
      const PipelineConfig cfg = cal_flags.build();
      std::vector<CameraSequence> seqs;
      for (const auto& p : cal_inputs) seqs.push_back(load_detections(p));
      if (seqs.size() < 2) throw Error(ErrorCode::kInvalidArgument, "at least 2 cameras required");
      if (seqs.size() == 2) {
        std::cerr << "warning: two-camera rig; bundle adjustment is weakly constrained\n";
      }
      RigSolution sol;
      try {
        sol = run_pipeline(seqs, cfg);
      } catch (const Error& e) {
        std::cerr << "calibration failed: " << e.what() << "\n";
        return e.code() == ErrorCode::kInvariantViolation ? kExitInvariant : kExitCalibration;
      }
      check_solution(sol);
      const fs::path out(cal_out);
      fs::create_directories(out);
      write_solution(sol, out / "solution.json");
      write_curves(sol, out);
      for (const auto& c : sol.cameras) {
        std::printf("%s f=%.3f delta_t=%d\n", c.id.c_str(), c.intrinsics.f, c.delta_t);
      }
      return 0;
    }

    if (*single) {
      const PipelineConfig cfg = sv_flags.build();
      const CameraSequence seq = load_detections(sv_input);
      SingleViewSolution sv;
      try {
        sv = ransac_calibrate(seq, cfg.single_view);
      } catch (const Error& e) {
        std::cerr << "calibration failed: " << e.what() << "\n";
        return exit_code(e.code()) == kExitInput ? kExitCalibration : exit_code(e.code());
      }
      std::cout << camera_json(sv);
      return 0;
    }

    if (*sync_cmd) {
      const PipelineConfig cfg = sync_flags.build();
      const CameraSequence a = load_detections(sync_ref);
      const CameraSequence b = load_detections(sync_other);
      SyncResult res;
      try {
        const SingleViewSolution sa = ransac_calibrate(a, cfg.single_view);
        const SingleViewSolution sb = ransac_calibrate(b, cfg.single_view);
        res = search_time_offset_signed(filtered_track(a, sa, cfg), filtered_track(b, sb, cfg),
                                        cfg.sync.max_offset, cfg.sync.penalize_unmatched);
      } catch (const Error& e) {
        std::cerr << "synchronization failed: " << e.what() << "\n";
        return kExitCalibration;
      }
      std::printf("delta_t=%d score=%.17g\n", res.delta_t, res.score);
      if (!sync_curve.empty()) {
        std::string csv = "offset,cost\n";
        char buf[64];
        for (std::size_t k = 0; k < res.per_offset_costs.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%d,%.17g\n", res.first_offset + static_cast<int>(k),
                        res.per_offset_costs[k]);
          csv += buf;
        }
        write_text(sync_curve, csv);
      }
      return 0;
    }

    if (*simulate) {
      const FocalEstimator est =
          sim_first_pair ? FocalEstimator::kFirstPair : FocalEstimator::kLeastSquares;
      if (sim_mode == "rig") {
        RigConfig rc;
        rc.n_cameras = sim_cameras;
        rc.n_frames = sim_frames;
        rc.detection_noise = sim_noise;
        rc.seed = sim_seed;
        const RigScene rig = generate_rig(rc);
        const fs::path dir = sim_out.empty() ? fs::path("rig") : fs::path(sim_out);
        fs::create_directories(dir);
        for (const auto& seq : rig.sequences) write_detections(seq, dir / (seq.camera_id + ".json"));
        write_rig_truth(rig, dir / "ground_truth.json");
        std::printf("wrote %zu cameras to %s\n", rig.sequences.size(), dir.string().c_str());
        return 0;
      }
      std::vector<TrialReport> reports;
      std::string grid;
      if (sim_mode == "measurement") {
        MeasurementTrialConfig c;
        c.trials = sim_trials;
        c.seed = sim_seed;
        c.estimator = est;
        reports = run_measurement_noise_trials(c);
        grid = "noise_std";
      } else if (sim_mode == "height") {
        HeightTrialConfig c;
        c.trials = sim_trials;
        c.seed = sim_seed;
        c.estimator = est;
        reports = run_height_trials(c);
        grid = "height_std";
      } else {
        PeopleTrialConfig c;
        c.trials = sim_trials;
        c.seed = sim_seed;
        c.estimator = est;
        reports = run_people_trials(c);
        grid = "people";
      }
      std::ostringstream os;
      write_reports_csv(os, grid, reports);
      if (sim_out.empty()) {
        std::cout << os.str();
      } else {
        write_text(sim_out, os.str());
      }
      return 0;
    }

    if (*study) {
      NoiseStudyConfig c;
      c.target = parse_noise_target(study_target);
      c.magnitudes = study_magnitudes.empty() ? default_noise_magnitudes(c.target)
                                              : parse_list(study_magnitudes);
      c.repeats = study_repeats;
      c.seed = study_seed;
      c.pipeline.run_bundle = study_bundle;
      std::ostringstream os;
      write_noise_study_csv(os, run_noise_study(c));
      if (study_out.empty()) {
        std::cout << os.str();
      } else {
        write_text(study_out, os.str());
      }
      return 0;
    }

    if (*coco) {
      write_detections(convert_coco(coco_in), coco_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
