#include "rigcal/single_view.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "rigcal/error.hpp"

namespace rigcal {
namespace {

double bend(const ImagePoint& a, const ImagePoint& vertex, const ImagePoint& b) {
  const Eigen::Vector2d u = a - vertex;
  const Eigen::Vector2d v = b - vertex;
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return kPi;
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::abs(std::acos(c) - kPi);
}

std::optional<double> side_deviation(const PoseDetection& pose, Joint ankle, Joint knee, Joint hip,
                                     Joint shoulder) {
  if (!pose.has(ankle) || !pose.has(knee) || !pose.has(hip) || !pose.has(shoulder)) {
    return std::nullopt;
  }
  const ImagePoint& a = pose[ankle]->pixel;
  const ImagePoint& k = pose[knee]->pixel;
  const ImagePoint& h = pose[hip]->pixel;
  const ImagePoint& s = pose[shoulder]->pixel;
  return bend(a, k, h) + bend(k, h, s);
}

Eigen::Matrix<double, 2, 3> pair_block(const AnkleShoulderPair& p, const Eigen::Vector2d& o,
                                       Eigen::Vector2d& b) {
  const Eigen::Vector2d a = p.ankle - o;
  const Eigen::Vector2d s = p.shoulder - o;
  const Eigen::Vector2d d = s - a;
  Eigen::Matrix<double, 2, 3> m;
  m << 0.0, -1.0, s.y(), 1.0, 0.0, -s.x();
  b = Eigen::Vector2d(d.y(), -d.x());
  return m;
}

void check_distinct_ankles(std::span<const AnkleShoulderPair> pairs) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      if ((pairs[i].ankle - pairs[j].ankle).norm() < 1e-6) {
        throw Error(ErrorCode::kDegenerateConfiguration, "coincident ankle points");
      }
    }
  }
}

}  // namespace

double standing_deviation(const PoseDetection& pose) {
  const auto left = side_deviation(pose, Joint::kLeftAnkle, Joint::kLeftKnee, Joint::kLeftHip,
                                   Joint::kLeftShoulder);
  const auto right = side_deviation(pose, Joint::kRightAnkle, Joint::kRightKnee, Joint::kRightHip,
                                    Joint::kRightShoulder);
  if (!left && !right) {
    throw Error(ErrorCode::kMissingJoints, "no complete ankle-knee-hip-shoulder side");
  }
  return std::min(left.value_or(std::numeric_limits<double>::infinity()),
                  right.value_or(std::numeric_limits<double>::infinity()));
}

bool filter_standing(const PoseDetection& pose, double threshold) {
  return standing_deviation(pose) <= threshold;
}

Eigen::MatrixXd dlt_constraint_matrix(std::span<const AnkleShoulderPair> pairs,
                                      const Eigen::Vector2d& principal_point) {
  const int m = static_cast<int>(pairs.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2 * m, 3 + m);
  for (int i = 0; i < m; ++i) {
    Eigen::Vector2d b;
    d.block<2, 3>(2 * i, 0) = pair_block(pairs[i], principal_point, b);
    d.block<2, 1>(2 * i, 3 + i) = b;
  }
  return d;
}

Eigen::Matrix<double, 6, 1> solve_dlt(std::span<const AnkleShoulderPair> pairs, double h,
                                      const Eigen::Vector2d& principal_point) {
  if (pairs.size() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "minimal DLT needs exactly three pairs");
  }
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "height must be positive");
  check_distinct_ankles(pairs);

  const Eigen::Matrix<double, 6, 6> d = dlt_constraint_matrix(pairs, principal_point);
  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(d, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(4) <= 1e-6 * s(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "constraint matrix rank below five");
  }
  return svd.matrixV().col(5);
}

Eigen::VectorXd solve_dlt_stacked(std::span<const AnkleShoulderPair> pairs,
                                  const Eigen::Vector2d& principal_point) {
  const int m = static_cast<int>(pairs.size());
  if (m < 3) throw Error(ErrorCode::kInsufficientData, "need at least three pairs");

  // D^T D = [[P, C], [C^T, diag(beta)]] with C column i = A_i^T b_i.
  // Its smallest eigenvalue is the smallest root of
  //   lambda_min(P - sigma I - sum_i c_i c_i^T / (beta_i - sigma)) = 0
  // on [0, min beta), where the Schur complement is strictly decreasing.
  Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
  std::vector<Eigen::Vector3d> c(m);
  std::vector<double> beta(m);
  double beta_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    Eigen::Vector2d b;
    const Eigen::Matrix<double, 2, 3> a = pair_block(pairs[i], principal_point, b);
    p += a.transpose() * a;
    c[i] = a.transpose() * b;
    beta[i] = b.squaredNorm();
    beta_min = std::min(beta_min, beta[i]);
  }

  auto schur = [&](double sigma) {
    Eigen::Matrix3d s = p - sigma * Eigen::Matrix3d::Identity();
    for (int i = 0; i < m; ++i) s -= c[i] * c[i].transpose() / (beta[i] - sigma);
    return s;
  };
  auto min_eig = [&](double sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(schur(sigma), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  };

  bool ok = beta_min > 0.0 && std::isfinite(beta_min);
  double lo = 0.0;
  double hi = beta_min;
  if (ok) {
    if (min_eig(0.0) <= 0.0) {
      hi = 0.0;
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (min_eig(mid) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      ok = hi < beta_min;
    }
  }

  if (!ok) {
    // Root not isolated below the smallest depth block; solve densely.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dlt_constraint_matrix(pairs, principal_point),
                                          Eigen::ComputeThinV);
    return svd.matrixV().col(m + 2);
  }

  const double sigma = hi;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(schur(sigma));
  const Eigen::Vector3d u = es.eigenvectors().col(0);
  Eigen::VectorXd v(3 + m);
  v.head<3>() = u;
  for (int i = 0; i < m; ++i) v(3 + i) = -c[i].dot(u) / (beta[i] - sigma);
  return v.normalized();
}

FocalNormal extract_focal_and_normal(const Eigen::VectorXd& solution,
                                     std::span<const AnkleShoulderPair> pairs,
                                     const Eigen::Vector2d& principal_point, double h,
                                     FocalEstimator estimator) {
  const int m = static_cast<int>(pairs.size());
  if (m < 3 || solution.size() != 3 + m) {
    throw Error(ErrorCode::kInvalidArgument, "solution size does not match pair count");
  }
  const double v0 = solution(0);
  const double v1 = solution(1);
  const double v2 = solution(2);
  const Eigen::VectorXd w = solution.tail(m);

  // Coplanar ankles: n . P_i is the same for every i. In solution units
  //   g * (v0 ax_i + v1 ay_i) w_i + v2 w_i = const,  g = 1 / f^2.
  std::vector<double> q(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::Vector2d a = pairs[i].ankle - principal_point;
    q[i] = (v0 * a.x() + v1 * a.y()) * w(i);
  }

  double f2 = 0.0;
  if (m == 3 || estimator == FocalEstimator::kFirstPair) {
    const double denom = v2 * (w(0) - w(1));
    if (std::abs(denom) < 1e-300) {
      throw Error(ErrorCode::kDegenerateConfiguration, "zero denominator in focal formula");
    }
    f2 = -(q[0] - q[1]) / denom;
  } else {
    Eigen::MatrixXd a(m, 2);
    Eigen::VectorXd rhs(m);
    for (int i = 0; i < m; ++i) {
      a(i, 0) = q[i];
      a(i, 1) = -1.0;
      rhs(i) = -v2 * w(i);
    }
    const Eigen::Vector2d x = a.colPivHouseholderQr().solve(rhs);
    if (!std::isfinite(x(0)) || x(0) == 0.0) {
      throw Error(ErrorCode::kDegenerateConfiguration, "focal least squares is singular");
    }
    f2 = 1.0 / x(0);
  }
  if (!std::isfinite(f2)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "non-finite focal");
  }
  if (!(f2 > 0.0)) throw Error(ErrorCode::kNegativeFocalSquared, "focal length squared <= 0");

  FocalNormal out;
  out.f = std::sqrt(f2);
  const Eigen::Vector3d scaled_normal(v0 / out.f, v1 / out.f, v2);
  const double mu = scaled_normal.norm();
  if (!(mu > 0.0)) throw Error(ErrorCode::kDegenerateConfiguration, "zero normal");
  const double lambda = w.sum() >= 0.0 ? mu : -mu;
  out.normal = scaled_normal / lambda;

  out.depths.resize(m);
  double height_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = h * w(i) / lambda;
    if (!(z > 0.0)) {
      throw Error(ErrorCode::kDegenerateConfiguration, "non-positive ankle depth");
    }
    out.depths[i] = z;
    const Eigen::Vector2d a = pairs[i].ankle - principal_point;
    const Eigen::Vector3d ankle(z * a.x() / out.f, z * a.y() / out.f, z);
    height_sum -= out.normal.dot(ankle);
  }
  out.camera_height = height_sum / m;
  if (!(out.camera_height > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "camera below the ground plane");
  }
  return out;
}

double camera_height_given(const CameraIntrinsics& k, const Eigen::Vector3d& normal,
                           std::span<const AnkleShoulderPair> pairs, double h) {
  const Eigen::Vector2d o = k.principal_point();
  const Eigen::Vector3d u(k.f * normal.x(), k.f * normal.y(), normal.z());
  std::vector<double> heights;
  for (const auto& pr : pairs) {
    Eigen::Vector2d b;
    const Eigen::Matrix<double, 2, 3> a = pair_block(pr, o, b);
    const double bb = b.squaredNorm();
    if (bb <= 0.0) continue;
    const double w = -b.dot(a * u) / bb;
    const double z = h * w;
    if (!(z > 0.0)) continue;
    const Eigen::Vector3d ankle = z * k.unproject(pr.ankle);
    heights.push_back(-normal.dot(ankle));
  }
  if (heights.empty()) throw Error(ErrorCode::kInsufficientData, "no usable pairs for height");
  std::nth_element(heights.begin(), heights.begin() + heights.size() / 2, heights.end());
  return heights[heights.size() / 2];
}

InlierResidual inlier_residual(const AnkleShoulderPair& pair, const CameraIntrinsics& k,
                               const GroundPlaneFrame& plane, double h) {
  InlierResidual r;
  try {
    const CamPoint ankle = backproject_to_plane_cam(pair.ankle, k, plane);
    const ImagePoint predicted = project(ankle + h * plane.normal, k);
    const Eigen::Vector2d detected_vec = pair.shoulder - pair.ankle;
    const Eigen::Vector2d predicted_vec = predicted - pair.ankle;
    const double len = detected_vec.norm();
    if (len <= 0.0 || predicted_vec.norm() <= 0.0) return r;
    r.pixel_error = (predicted - pair.shoulder).norm() / len;
    const double cross = detected_vec.x() * predicted_vec.y() - detected_vec.y() * predicted_vec.x();
    r.angle_error = std::abs(std::atan2(cross, detected_vec.dot(predicted_vec)));
    r.valid = true;
  } catch (const Error&) {
    r.valid = false;
  }
  return r;
}

bool inlier_test(const AnkleShoulderPair& pair, const CameraIntrinsics& k,
                 const GroundPlaneFrame& plane, double h, double angle_thresh,
                 double pixel_thresh) {
  const InlierResidual r = inlier_residual(pair, k, plane, h);
  return r.valid && r.angle_error < angle_thresh && r.pixel_error < pixel_thresh;
}

std::vector<AnkleShoulderPair> collect_standing_pairs(const CameraSequence& seq,
                                                      double standing_thresh,
                                                      double min_confidence) {
  std::vector<AnkleShoulderPair> out;
  for (const auto& frame : seq.frames) {
    for (const auto& pose : frame.poses) {
      const auto ankle = ankle_center(pose, min_confidence);
      const auto shoulder = shoulder_center(pose, min_confidence);
      if (!ankle || !shoulder) continue;
      try {
        if (!filter_standing(pose, standing_thresh)) continue;
      } catch (const Error&) {
        continue;
      }
      out.push_back({*ankle, *shoulder, frame.index, pose.person_id});
    }
  }
  return out;
}

namespace {

struct Hypothesis {
  CameraIntrinsics intrinsics;
  FocalNormal fn;
  GroundPlaneFrame plane;
  std::vector<bool> mask;
  int inliers = 0;
  double mean_pixel_error = std::numeric_limits<double>::infinity();
};

bool score(std::span<const AnkleShoulderPair> pairs, const SingleViewConfig& cfg,
           Hypothesis& hyp) {
  try {
    hyp.plane = plane_basis_from_normal(hyp.fn.normal, hyp.intrinsics, hyp.fn.camera_height);
  } catch (const Error&) {
    return false;
  }
  hyp.mask.assign(pairs.size(), false);
  hyp.inliers = 0;
  double err = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const InlierResidual r = inlier_residual(pairs[i], hyp.intrinsics, hyp.plane, cfg.h);
    if (r.valid && r.angle_error < cfg.angle_thresh && r.pixel_error < cfg.pixel_thresh) {
      hyp.mask[i] = true;
      ++hyp.inliers;
      err += r.pixel_error;
    }
  }
  hyp.mean_pixel_error =
      hyp.inliers > 0 ? err / hyp.inliers : std::numeric_limits<double>::infinity();
  return true;
}

}  // namespace

SingleViewSolution ransac_calibrate(std::span<const AnkleShoulderPair> pairs,
                                    const Eigen::Vector2d& principal_point,
                                    const SingleViewConfig& cfg) {
  const int n = static_cast<int>(pairs.size());
  if (n < 3) throw Error(ErrorCode::kInsufficientData, "fewer than three standing poses");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  SingleViewSolution out;
  Hypothesis best;
  bool have_best = false;
  for (int it = 0; it < cfg.iterations; ++it) {
    int idx[3];
    idx[0] = pick(rng);
    do idx[1] = pick(rng); while (idx[1] == idx[0]);
    do idx[2] = pick(rng); while (idx[2] == idx[0] || idx[2] == idx[1]);
    const std::array<AnkleShoulderPair, 3> sample = {pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]};

    Hypothesis hyp;
    try {
      const Eigen::VectorXd v = solve_dlt(sample, cfg.h, principal_point);
      hyp.fn = extract_focal_and_normal(v, sample, principal_point, cfg.h);
    } catch (const Error&) {
      ++out.failed_hypotheses;
      continue;
    }
    hyp.intrinsics = {hyp.fn.f, principal_point.x(), principal_point.y()};
    if (!score(pairs, cfg, hyp)) {
      ++out.failed_hypotheses;
      continue;
    }
    if (!have_best || hyp.inliers > best.inliers ||
        (hyp.inliers == best.inliers && hyp.mean_pixel_error < best.mean_pixel_error)) {
      best = std::move(hyp);
      have_best = true;
    }
  }
  if (!have_best || best.inliers < 3) {
    throw Error(ErrorCode::kCalibrationFailed, "no hypothesis reached three inliers");
  }

  // Refit on the whole inlier set; keep it only if it does not lose inliers.
  std::vector<AnkleShoulderPair> inliers;
  for (int i = 0; i < n; ++i) {
    if (best.mask[i]) inliers.push_back(pairs[i]);
  }
  Hypothesis refit;
  bool refit_ok = false;
  try {
    const Eigen::VectorXd v = solve_dlt_stacked(inliers, principal_point);
    refit.fn = extract_focal_and_normal(v, inliers, principal_point, cfg.h);
    refit.intrinsics = {refit.fn.f, principal_point.x(), principal_point.y()};
    refit_ok = score(pairs, cfg, refit) && refit.inliers >= best.inliers;
  } catch (const Error&) {
    refit_ok = false;
  }
  const Hypothesis& chosen = refit_ok ? refit : best;
  out.refit_accepted = refit_ok;

  out.intrinsics = chosen.intrinsics;
  out.normal = chosen.fn.normal;
  out.plane = chosen.plane;
  out.inlier_mask = chosen.mask;
  out.num_inliers = chosen.inliers;
  out.pairs.assign(pairs.begin(), pairs.end());
  for (int i = 0; i < n; ++i) {
    if (!chosen.mask[i]) continue;
    const CamPoint a = backproject_to_plane_cam(pairs[i].ankle, chosen.intrinsics, chosen.plane);
    out.depths.push_back(a.z());
  }
  return out;
}

SingleViewSolution ransac_calibrate(const CameraSequence& seq, const SingleViewConfig& cfg) {
  const auto pairs = collect_standing_pairs(seq, cfg.standing_thresh, cfg.min_confidence);
  if (pairs.size() < 3) {
    throw Error(ErrorCode::kInsufficientData,
                "camera " + seq.camera_id + ": fewer than three standing poses");
  }
  return ransac_calibrate(pairs, seq.image_center(), cfg);
}

}  // namespace rigcal
