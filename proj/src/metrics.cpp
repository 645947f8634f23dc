#include "rigcal/metrics.hpp"

#include <cmath>

#include "rigcal/error.hpp"

namespace rigcal {

double metric_focal_pct(double f_pred, double f_gt) {
  if (!(f_gt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ground-truth focal must be positive");
  return 100.0 * std::abs(f_pred - f_gt) / f_gt;
}

double metric_normal_deg(const Eigen::Vector3d& n_pred, const Eigen::Vector3d& n_gt) {
  const double a = n_pred.norm();
  const double b = n_gt.norm();
  if (a == 0.0 || b == 0.0) throw Error(ErrorCode::kInvalidArgument, "zero normal");
  // atan2 keeps precision near zero angle.
  return rad2deg(std::atan2(n_pred.cross(n_gt).norm(), n_pred.dot(n_gt)));
}

double metric_rho_pct(double rho_pred, double rho_gt) {
  if (!(rho_gt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ground-truth height must be positive");
  return 100.0 * std::abs(rho_pred - rho_gt) / rho_gt;
}

double metric_x_pct(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
  if (pred.size() != gt.size() || gt.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "point lists must be non-empty and equal length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += (pred[i] - gt[i]).norm() / gt[i].norm();
  return 100.0 * sum / static_cast<double>(gt.size());
}

RelativePoseError metric_relpose(std::span<const CameraExtrinsics> pred,
                                 std::span<const CameraExtrinsics> gt, int reference) {
  if (pred.size() != gt.size() || pred.size() < 2) {
    throw Error(ErrorCode::kMismatchedRigs, "rigs differ in size or have fewer than 2 cameras");
  }
  if (reference < 0 || reference >= static_cast<int>(gt.size())) {
    throw Error(ErrorCode::kMismatchedRigs, "reference camera out of range");
  }
  auto relative = [reference](std::span<const CameraExtrinsics> rig, std::size_t c) {
    const auto& r0 = rig[reference];
    const Eigen::Matrix3d rot = rig[c].rot_world_to_cam * r0.rot_world_to_cam.transpose();
    const Eigen::Vector3d t = r0.rot_world_to_cam * (rig[c].position - r0.position);
    return std::make_pair(rot, t);
  };
  RelativePoseError e;
  int n = 0;
  for (std::size_t c = 0; c < gt.size(); ++c) {
    if (static_cast<int>(c) == reference) continue;
    const auto [rp, tp] = relative(pred, c);
    const auto [rg, tg] = relative(gt, c);
    e.angle_diff_deg += std::abs(rad2deg(rotation_angle(rp)) - rad2deg(rotation_angle(rg)));
    e.norm_diff_m += std::abs(tp.norm() - tg.norm());
    const double rot = rad2deg(rotation_angle(rp.transpose() * rg));
    const double tr = (tp - tg).norm();
    e.rotation_deg += rot;
    e.translation_m += tr;
    e.per_camera_rotation_deg.push_back(rot);
    e.per_camera_translation_m.push_back(tr);
    ++n;
  }
  e.angle_diff_deg /= n;
  e.norm_diff_m /= n;
  e.rotation_deg /= n;
  e.translation_m /= n;
  return e;
}

double metric_nmpjpe(std::span<const std::vector<Eigen::Vector3d>> pred,
                     std::span<const std::vector<Eigen::Vector3d>> gt) {
  if (pred.size() != gt.size() || gt.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "pose lists must be non-empty and equal length");
  }
  double sum = 0.0;
  int count = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const auto& a = pred[p];
    const auto& b = gt[p];
    if (a.size() != b.size() || b.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "pose joint counts differ");
    }
    Eigen::Vector3d ca = Eigen::Vector3d::Zero();
    Eigen::Vector3d cb = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < b.size(); ++j) {
      ca += a[j];
      cb += b[j];
    }
    ca /= static_cast<double>(a.size());
    cb /= static_cast<double>(b.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      num += (a[j] - ca).dot(b[j] - cb);
      den += (a[j] - ca).squaredNorm();
    }
    const double s = den > 0.0 ? num / den : 1.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      sum += (s * (a[j] - ca) - (b[j] - cb)).norm();
      ++count;
    }
  }
  return sum / count;
}

}  // namespace rigcal
