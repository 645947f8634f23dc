#include "rigcal/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rigcal/assignment.hpp"
#include "rigcal/error.hpp"

namespace rigcal {
namespace {

// Points of one cloud grouped by frame, frames sorted.
class FrameIndex {
 public:
  explicit FrameIndex(std::span<const TimedPlanePoint> pts) {
    for (const auto& p : pts) by_frame_[p.frame].push_back(p.xy);
    frames_.reserve(by_frame_.size());
    for (const auto& [f, v] : by_frame_) frames_.push_back(f);
  }

  double nearest(const TimedPlanePoint& p, double w) const {
    const auto same = by_frame_.find(p.frame);
    if (same != by_frame_.end()) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : same->second) best = std::min(best, (q - p.xy).squaredNorm());
      return std::sqrt(best);
    }
    // Walk outward in time; stop once the time gap alone exceeds the best.
    double best = std::numeric_limits<double>::infinity();
    const auto start = std::lower_bound(frames_.begin(), frames_.end(), p.frame);
    auto scan = [&](int f) {
      const double dt = w * (f - p.frame);
      const double dt2 = dt * dt;
      if (dt2 >= best) return false;
      for (const auto& q : by_frame_.at(f)) best = std::min(best, (q - p.xy).squaredNorm() + dt2);
      return true;
    };
    for (auto it = start; it != frames_.end(); ++it) {
      if (!scan(*it)) break;
    }
    for (auto it = start; it != frames_.begin();) {
      --it;
      if (!scan(*it)) break;
    }
    return std::sqrt(best);
  }

 private:
  std::map<int, std::vector<Eigen::Vector2d>> by_frame_;
  std::vector<int> frames_;
};

double directed(std::span<const TimedPlanePoint> a, const FrameIndex& b, double w) {
  double sum = 0.0;
  for (const auto& p : a) sum += b.nearest(p, w);
  return sum;
}

Eigen::Vector2d centroid(std::span<const TimedPlanePoint> pts) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& p : pts) m += p.xy;
  return m / static_cast<double>(pts.size());
}

struct Association {
  std::vector<Eigen::Vector2d> src;
  std::vector<Eigen::Vector2d> dst;
  std::vector<double> sq;  // squared distance under the current transform
};

Association associate(const FramePoints& ref, const FramePoints& sync, const RigidTransform2D& t,
                      int delta_t, double gate2) {
  Association out;
  for (const auto& [sf, spts] : sync) {
    const auto it = ref.find(sf + delta_t);
    if (it == ref.end() || spts.empty() || it->second.empty()) continue;
    const auto& rpts = it->second;
    std::vector<Eigen::Vector2d> moved(spts.size());
    for (std::size_t i = 0; i < spts.size(); ++i) moved[i] = t.apply(spts[i]);
    Eigen::MatrixXd cost(spts.size(), rpts.size());
    for (std::size_t i = 0; i < spts.size(); ++i) {
      for (std::size_t j = 0; j < rpts.size(); ++j) {
        cost(i, j) = std::min((moved[i] - rpts[j]).squaredNorm(), gate2);
      }
    }
    for (const auto& [i, j] : hungarian_assign(cost)) {
      out.src.push_back(spts[i]);
      out.dst.push_back(rpts[j]);
      out.sq.push_back(cost(i, j));
    }
  }
  return out;
}

double truncated_cost(const Association& a, const RigidTransform2D& t, double gate2) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.src.size(); ++i) {
    s += std::min((t.apply(a.src[i]) - a.dst[i]).squaredNorm(), gate2);
  }
  return s;
}

double rms(const Association& a) {
  double s = 0.0;
  for (double v : a.sq) s += v;
  return std::sqrt(s / static_cast<double>(a.sq.size()));
}

}  // namespace

std::vector<TimedPlanePoint> to_timed(const FramePoints& points, int frame_shift) {
  std::vector<TimedPlanePoint> out;
  for (const auto& [f, pts] : points) {
    for (const auto& p : pts) out.push_back({p, f + frame_shift});
  }
  return out;
}

double timed_chamfer(std::span<const TimedPlanePoint> a, std::span<const TimedPlanePoint> b,
                     double time_weight) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptyCloud, "chamfer of an empty cloud");
  const FrameIndex ia(a);
  const FrameIndex ib(b);
  return directed(a, ib, time_weight) + directed(b, ia, time_weight);
}

double median_frame_displacement(const FramePoints& points) {
  std::vector<double> d;
  for (auto it = points.begin(); it != points.end(); ++it) {
    const auto prev = points.find(it->first - 1);
    if (prev == points.end() || prev->second.empty()) continue;
    for (const auto& p : it->second) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : prev->second) best = std::min(best, (p - q).norm());
      d.push_back(best);
    }
  }
  if (d.empty()) return 0.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

AlignmentResult search_rotation(std::span<const TimedPlanePoint> ref,
                                std::span<const TimedPlanePoint> sync, double step_deg,
                                double time_weight) {
  if (ref.empty() || sync.empty()) throw Error(ErrorCode::kEmptyCloud, "empty cloud");
  if (!(step_deg > 0.0 && step_deg <= 90.0)) {
    throw Error(ErrorCode::kInvalidArgument, "rotation step must be in (0, 90] degrees");
  }
  const Eigen::Vector2d mr = centroid(ref);
  const Eigen::Vector2d ms = centroid(sync);
  const FrameIndex ref_index(ref);
  const int steps = static_cast<int>(std::llround(std::floor(360.0 / step_deg + 1e-9)));

  AlignmentResult res;
  res.cost = std::numeric_limits<double>::infinity();
  std::vector<TimedPlanePoint> moved(sync.begin(), sync.end());
  for (int k = 0; k < steps; ++k) {
    const double angle = deg2rad(k * step_deg);
    const Eigen::Matrix2d r = rotation2d(angle);
    for (std::size_t i = 0; i < sync.size(); ++i) moved[i].xy = r * (sync[i].xy - ms) + mr;
    const double c = directed(moved, ref_index, time_weight) +
                     directed(ref, FrameIndex(moved), time_weight);
    res.curve.push_back(c);
    if (c < res.cost) {
      res.cost = c;
      res.transform = RigidTransform2D(angle, mr - r * ms);
    }
  }
  res.iterations = steps;
  return res;
}

RigidTransform2D fit_rigid_2d(std::span<const Eigen::Vector2d> src,
                              std::span<const Eigen::Vector2d> dst,
                              std::span<const double> weights) {
  if (src.size() != dst.size() || src.size() < 2) {
    throw Error(ErrorCode::kTooFewCorrespondences, "need at least two correspondences");
  }
  auto wt = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double wsum = 0.0;
  Eigen::Vector2d ms = Eigen::Vector2d::Zero();
  Eigen::Vector2d md = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    wsum += wt(i);
    ms += wt(i) * src[i];
    md += wt(i) * dst[i];
  }
  if (!(wsum > 0.0)) throw Error(ErrorCode::kTooFewCorrespondences, "all weights are zero");
  ms /= wsum;
  md /= wsum;
  double sdot = 0.0;
  double scross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector2d a = src[i] - ms;
    const Eigen::Vector2d b = dst[i] - md;
    sdot += wt(i) * a.dot(b);
    scross += wt(i) * (a.x() * b.y() - a.y() * b.x());
  }
  const double angle = std::atan2(scross, sdot);
  return RigidTransform2D(angle, md - rotation2d(angle) * ms);
}

std::vector<FrameMatch> associate_frames(const FramePoints& ref, const FramePoints& sync,
                                         const RigidTransform2D& t, int delta_t) {
  std::vector<FrameMatch> out;
  for (const auto& [sf, spts] : sync) {
    const auto it = ref.find(sf + delta_t);
    if (it == ref.end() || spts.empty() || it->second.empty()) continue;
    const auto& rpts = it->second;
    Eigen::MatrixXd cost(spts.size(), rpts.size());
    for (std::size_t i = 0; i < spts.size(); ++i) {
      const Eigen::Vector2d m = t.apply(spts[i]);
      for (std::size_t j = 0; j < rpts.size(); ++j) cost(i, j) = (m - rpts[j]).squaredNorm();
    }
    for (const auto& [i, j] : hungarian_assign(cost)) {
      out.push_back({sf, i, j, std::sqrt(cost(i, j))});
    }
  }
  return out;
}

IcpResult icp_refine(const FramePoints& ref, const FramePoints& sync,
                     const RigidTransform2D& init, int delta_t, const IcpConfig& cfg) {
  const double gate2 = std::isfinite(cfg.gate) ? cfg.gate * cfg.gate
                                               : std::numeric_limits<double>::infinity();
  IcpResult res;
  res.transform = init;
  res.delta_t = delta_t;
  Association assoc = associate(ref, sync, res.transform, res.delta_t, gate2);
  if (assoc.src.size() < 2) {
    throw Error(ErrorCode::kTooFewCorrespondences, "fewer than two time-matched points");
  }
  res.cost = rms(assoc);
  res.history.push_back(res.cost);

  for (int it = 0; it < cfg.max_iter; ++it) {
    // Fit on matches inside the gate; truncated matches carry zero weight.
    std::vector<double> w(assoc.sq.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = assoc.sq[i] < gate2 ? 1.0 : 0.0;
    RigidTransform2D next = res.transform;
    try {
      next = fit_rigid_2d(assoc.src, assoc.dst, w);
    } catch (const Error&) {
      break;
    }
    if (truncated_cost(assoc, next, gate2) > truncated_cost(assoc, res.transform, gate2)) {
      next = res.transform;
    }

    int next_dt = res.delta_t;
    Association next_assoc = associate(ref, sync, next, next_dt, gate2);
    if (cfg.recheck_dt) {
      for (int d = res.delta_t - cfg.dt_window; d <= res.delta_t + cfg.dt_window; ++d) {
        if (d == res.delta_t) continue;
        Association cand = associate(ref, sync, next, d, gate2);
        if (cand.src.size() >= 2 && rms(cand) < rms(next_assoc)) {
          next_assoc = std::move(cand);
          next_dt = d;
        }
      }
    }
    if (next_assoc.src.size() < 2) break;
    const double next_cost = rms(next_assoc);
    ++res.iterations;
    if (next_cost > res.cost) {
      // Round-off can produce a marginally worse fit; keep the previous one.
      res.history.push_back(res.cost);
      break;
    }
    const double improvement = res.cost - next_cost;
    res.transform = next;
    res.delta_t = next_dt;
    res.cost = next_cost;
    assoc = std::move(next_assoc);
    res.history.push_back(res.cost);
    if (improvement < cfg.tol) break;
  }
  return res;
}

CameraExtrinsics compose_extrinsics(const GroundPlaneFrame& plane_ref,
                                    const GroundPlaneFrame& plane_sync,
                                    const RigidTransform2D& t2d) {
  const Eigen::Isometry3d lift = t2d.lifted();
  const Eigen::Matrix3d& r_ref = plane_ref.rot_cam_to_plane;
  const Eigen::Matrix3d& r_sync = plane_sync.rot_cam_to_plane;
  // sync camera -> reference camera
  const Eigen::Matrix3d r_cam = r_ref.transpose() * lift.linear() * r_sync;
  CameraExtrinsics e;
  e.rot_world_to_cam = r_cam.transpose();
  e.position = r_ref.transpose() * (lift.translation() - lift.linear() * r_sync * plane_sync.t_plane) +
               plane_ref.t_plane;
  return e;
}

RigidTransform2D decompose_extrinsics(const GroundPlaneFrame& plane_ref,
                                      const GroundPlaneFrame& plane_sync,
                                      const CameraExtrinsics& extrinsics) {
  const Eigen::Matrix3d rz = plane_ref.rot_cam_to_plane * extrinsics.rot_world_to_cam.transpose() *
                             plane_sync.rot_cam_to_plane.transpose();
  const Eigen::Vector3d t = plane_ref.rot_cam_to_plane * (extrinsics.position - plane_ref.t_plane) +
                            rz * plane_sync.rot_cam_to_plane * plane_sync.t_plane;
  return RigidTransform2D(std::atan2(rz(1, 0), rz(0, 0)), t.head<2>());
}

}  // namespace rigcal
