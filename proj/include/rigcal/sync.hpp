#pragma once

// Temporal offset search between two cameras from the distances of ground
// plane ankle positions to their sequence centroid. Frames relate as
// t_ref = t_sync + delta_t.

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace rigcal {

// Plane points per frame index.
using FramePoints = std::map<int, std::vector<Eigen::Vector2d>>;

struct DistanceSignal {
  int first_frame = 0;
  std::vector<std::vector<double>> frames;  // contiguous from first_frame

  int size() const { return static_cast<int>(frames.size()); }
  bool empty() const;
};

struct SyncResult {
  int delta_t = 0;
  double score = 0.0;
  int first_offset = 0;                 // offset of per_offset_costs[0]
  std::vector<double> per_offset_costs;

  double cost_at(int offset) const { return per_offset_costs.at(offset - first_offset); }
};

struct SyncConfig {
  double dbscan_eps = 0.5;
  int dbscan_min_pts = 5;
  int max_offset = -1;  // <0: one third of the sequence length
  bool penalize_unmatched = true;
};

// Keeps the largest DBSCAN cluster of all points in the sequence.
FramePoints dbscan_filter_frames(const FramePoints& points, double eps, int min_pts);

// Subtracts the mean of all points and emits per-frame distances to it.
DistanceSignal center_distance_signal(const FramePoints& points);
DistanceSignal center_distance_signal(const FramePoints& points, const Eigen::Vector2d& center);

// Alignment cost of one offset; +inf when no frames overlap.
double offset_cost(const DistanceSignal& ref, const DistanceSignal& sync, int offset,
                   bool penalize_unmatched = true);

// Brute force over non-negative offsets [0, max_offset].
SyncResult search_time_offset(const DistanceSignal& ref, const DistanceSignal& sync,
                              int max_offset = -1, bool penalize_unmatched = true);

// Runs both directions and returns a signed offset with the joint cost curve.
SyncResult search_time_offset_signed(const DistanceSignal& ref, const DistanceSignal& sync,
                                     int max_offset = -1, bool penalize_unmatched = true);

// Point-based variants: for every candidate offset both point sets are
// centered on their own mean over the frames that overlap under that offset,
// so people seen only outside the overlap do not shift the centers.
double offset_cost(const FramePoints& ref, const FramePoints& sync, int offset,
                   bool penalize_unmatched = true);
SyncResult search_time_offset(const FramePoints& ref, const FramePoints& sync,
                              int max_offset = -1, bool penalize_unmatched = true);
SyncResult search_time_offset_signed(const FramePoints& ref, const FramePoints& sync,
                                     int max_offset = -1, bool penalize_unmatched = true);

}  // namespace rigcal
