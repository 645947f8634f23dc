#include "rigcal/sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "rigcal/assignment.hpp"
#include "rigcal/error.hpp"

namespace rigcal {
namespace {

// Reverse-direction offsets k become -k on the signed axis.
SyncResult merge_directions(const SyncResult& fwd, const SyncResult& rev) {
  const int nrev = static_cast<int>(rev.per_offset_costs.size()) - 1;
  SyncResult res;
  res.first_offset = -nrev;
  for (int k = nrev; k >= 1; --k) res.per_offset_costs.push_back(rev.per_offset_costs[k]);
  res.per_offset_costs.insert(res.per_offset_costs.end(), fwd.per_offset_costs.begin(),
                              fwd.per_offset_costs.end());
  res.score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.per_offset_costs.size(); ++i) {
    if (res.per_offset_costs[i] < res.score) {
      res.score = res.per_offset_costs[i];
      res.delta_t = res.first_offset + static_cast<int>(i);
    }
  }
  return res;
}

}  // namespace

bool DistanceSignal::empty() const {
  return std::all_of(frames.begin(), frames.end(), [](const auto& f) { return f.empty(); });
}

FramePoints dbscan_filter_frames(const FramePoints& points, double eps, int min_pts) {
  std::vector<Eigen::Vector2d> flat;
  for (const auto& [frame, pts] : points) flat.insert(flat.end(), pts.begin(), pts.end());
  if (flat.empty()) throw Error(ErrorCode::kEmptyInput, "no plane points");
  const auto keep = dbscan_filter(flat, eps, min_pts);
  FramePoints out;
  std::size_t idx = 0;
  for (const auto& [frame, pts] : points) {
    for (const auto& p : pts) {
      if (keep[idx++]) out[frame].push_back(p);
    }
  }
  return out;
}

DistanceSignal center_distance_signal(const FramePoints& points) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  std::size_t count = 0;
  for (const auto& [frame, pts] : points) {
    for (const auto& p : pts) {
      mean += p;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::kEmptyInput, "no plane points");
  mean /= static_cast<double>(count);
  return center_distance_signal(points, mean);
}

DistanceSignal center_distance_signal(const FramePoints& points, const Eigen::Vector2d& mean) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "no plane points");
  DistanceSignal sig;
  sig.first_frame = points.begin()->first;
  const int last = points.rbegin()->first;
  sig.frames.resize(last - sig.first_frame + 1);
  for (const auto& [frame, pts] : points) {
    auto& d = sig.frames[frame - sig.first_frame];
    for (const auto& p : pts) d.push_back((p - mean).norm());
  }
  return sig;
}

double offset_cost(const DistanceSignal& ref, const DistanceSignal& sync, int offset,
                   bool penalize_unmatched) {
  const int nref = ref.size();
  double total = 0.0;
  int frames_used = 0;
  double matched_sum = 0.0;
  int matched_count = 0;
  for (int s = 0; s < sync.size(); ++s) {
    const auto& a = sync.frames[s];
    if (a.empty()) continue;
    // Endpoints of the reference curve are repeated beyond its ends.
    const int r = std::clamp(sync.first_frame + s + offset - ref.first_frame, 0, nref - 1);
    const auto& b = ref.frames[r];
    if (b.empty()) continue;

    double frame_cost = 0.0;
    if (a.size() == 1 && b.size() == 1) {
      frame_cost = std::abs(a[0] - b[0]);
      matched_sum += frame_cost;
      ++matched_count;
    } else {
      Eigen::MatrixXd cost(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) cost(i, j) = std::abs(a[i] - b[j]);
      }
      const auto match = hungarian_assign(cost);
      const double sum = assignment_cost(cost, match);
      matched_sum += sum;
      matched_count += static_cast<int>(match.size());
      const int unmatched = static_cast<int>(std::max(a.size(), b.size()) - match.size());
      double numer = sum;
      int denom = static_cast<int>(match.size());
      if (penalize_unmatched && unmatched > 0) {
        numer += unmatched * (matched_sum / matched_count);
        denom += unmatched;
      }
      frame_cost = numer / denom;
    }
    total += frame_cost;
    ++frames_used;
  }
  if (frames_used == 0) return std::numeric_limits<double>::infinity();
  return total / frames_used;
}

SyncResult search_time_offset(const DistanceSignal& ref, const DistanceSignal& sync,
                              int max_offset, bool penalize_unmatched) {
  if (ref.empty() || sync.empty()) throw Error(ErrorCode::kEmptySignal, "empty distance signal");
  if (max_offset < 0) max_offset = sync.size() / 3;

  SyncResult res;
  res.first_offset = 0;
  res.per_offset_costs.resize(max_offset + 1);
  res.score = std::numeric_limits<double>::infinity();
  for (int off = 0; off <= max_offset; ++off) {
    const double c = offset_cost(ref, sync, off, penalize_unmatched);
    res.per_offset_costs[off] = c;
    if (c < res.score) {
      res.score = c;
      res.delta_t = off;
    }
  }
  return res;
}

SyncResult search_time_offset_signed(const DistanceSignal& ref, const DistanceSignal& sync,
                                     int max_offset, bool penalize_unmatched) {
  const SyncResult fwd = search_time_offset(ref, sync, max_offset, penalize_unmatched);
  const SyncResult rev = search_time_offset(sync, ref, max_offset, penalize_unmatched);
  return merge_directions(fwd, rev);
}

namespace {

std::optional<Eigen::Vector2d> mean_in(const FramePoints& points, int lo, int hi) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  std::size_t n = 0;
  for (auto it = points.lower_bound(lo); it != points.end() && it->first <= hi; ++it) {
    for (const auto& p : it->second) {
      sum += p;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return Eigen::Vector2d(sum / static_cast<double>(n));
}

void check_points(const FramePoints& p) {
  for (const auto& [f, pts] : p) {
    if (!pts.empty()) return;
  }
  throw Error(ErrorCode::kEmptySignal, "no plane points");
}

}  // namespace

double offset_cost(const FramePoints& ref, const FramePoints& sync, int offset,
                   bool penalize_unmatched) {
  check_points(ref);
  check_points(sync);
  const int lo = std::max(ref.begin()->first, sync.begin()->first + offset);
  const int hi = std::min(ref.rbegin()->first, sync.rbegin()->first + offset);
  if (lo > hi) return std::numeric_limits<double>::infinity();
  const auto mr = mean_in(ref, lo, hi);
  const auto ms = mean_in(sync, lo - offset, hi - offset);
  if (!mr || !ms) return std::numeric_limits<double>::infinity();
  return offset_cost(center_distance_signal(ref, *mr), center_distance_signal(sync, *ms), offset,
                     penalize_unmatched);
}

SyncResult search_time_offset(const FramePoints& ref, const FramePoints& sync, int max_offset,
                              bool penalize_unmatched) {
  check_points(ref);
  check_points(sync);
  if (max_offset < 0) max_offset = (sync.rbegin()->first - sync.begin()->first + 1) / 3;
  SyncResult res;
  res.per_offset_costs.resize(max_offset + 1);
  res.score = std::numeric_limits<double>::infinity();
  for (int off = 0; off <= max_offset; ++off) {
    const double c = offset_cost(ref, sync, off, penalize_unmatched);
    res.per_offset_costs[off] = c;
    if (c < res.score) {
      res.score = c;
      res.delta_t = off;
    }
  }
  return res;
}

SyncResult search_time_offset_signed(const FramePoints& ref, const FramePoints& sync,
                                     int max_offset, bool penalize_unmatched) {
  const SyncResult fwd = search_time_offset(ref, sync, max_offset, penalize_unmatched);
  const SyncResult rev = search_time_offset(sync, ref, max_offset, penalize_unmatched);
  return merge_directions(fwd, rev);
}

}  // namespace rigcal
