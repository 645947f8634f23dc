#pragma once

// Noise propagation through the multi-camera pipeline on synthetic rigs.
// Focal, normal and sync studies start from ground-truth focal and normal
// and perturb one of them; the detection study perturbs the keypoints; the
// rotation study perturbs ground-truth rotations and scores triangulated
// poses with NMPJPE.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rigcal/pipeline.hpp"
#include "rigcal/synthetic.hpp"

namespace rigcal {

struct NoiseStudyConfig {
  NoiseTarget target = NoiseTarget::kDetections;
  std::vector<double> magnitudes = {0, 5, 10, 15, 20, 25, 30, 35};
  int repeats = 5;
  RigConfig rig = [] {
    RigConfig r;
    r.n_frames = 500;
    return r;
  }();
  PipelineConfig pipeline = [] {
    PipelineConfig p;
    p.run_bundle = false;
    return p;
  }();
  int max_poses = 300;  // rotation study
  std::uint64_t seed = 0;
};

// Medians over the successful repeats; NaN when every repeat failed.
struct NoiseStudyRow {
  double magnitude = 0.0;
  double focal_pct = 0.0;      // mean over cameras
  double sync_error = 0.0;     // mean |delta_t error| over non-reference cameras, frames
  double rotation_deg = 0.0;   // relative pose errors, mean over non-reference cameras
  double translation_m = 0.0;
  double nmpjpe_m = 0.0;       // rotation study only
  int runs = 0;
  int failures = 0;
};

std::vector<double> default_noise_magnitudes(NoiseTarget target);

std::vector<NoiseStudyRow> run_noise_study(const NoiseStudyConfig& cfg);

void write_noise_study_csv(std::ostream& os, const std::vector<NoiseStudyRow>& rows);

}  // namespace rigcal
