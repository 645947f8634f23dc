#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "rigcal/alignment.hpp"
#include "rigcal/assignment.hpp"
#include "rigcal/error.hpp"
#include "rigcal/sync.hpp"

using namespace rigcal;

namespace {

double brute_force_min(const Eigen::MatrixXd& cost) {
  const Eigen::MatrixXd c = cost.rows() > cost.cols() ? Eigen::MatrixXd(cost.transpose()) : cost;
  std::vector<int> perm(c.cols());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (int i = 0; i < c.rows(); ++i) s += c(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Four people on smooth non-periodic walks.
FramePoints walks(std::uint64_t seed, int frames) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  FramePoints out;
  for (int p = 0; p < 4; ++p) {
    Eigen::Vector2d pos(6.0 * u(rng) - 3.0, 6.0 * u(rng) - 3.0);
    double heading = 2.0 * kPi * u(rng);
    for (int f = 0; f < frames; ++f) {
      heading += 0.2 * g(rng);
      pos += 0.05 * Eigen::Vector2d(std::cos(heading), std::sin(heading));
      out[f].push_back(pos);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("hungarian on small matrices") {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Ones(4, 4) - Eigen::MatrixXd::Identity(4, 4);
  const auto m = hungarian_assign(eye);
  REQUIRE(m.size() == 4);
  for (const auto& [r, c] : m) CHECK(r == c);
  CHECK(assignment_cost(eye, m) == 0.0);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int s = 0; s < 100; ++s) {
    Eigen::MatrixXd c(4, 4);
    for (int i = 0; i < 16; ++i) c.data()[i] = u(rng);
    CHECK(assignment_cost(c, hungarian_assign(c)) == doctest::Approx(brute_force_min(c)));
  }
  Eigen::MatrixXd rect(2, 3);
  rect << 4, 1, 3, 2, 0, 5;
  const auto rm = hungarian_assign(rect);
  CHECK(rm.size() == 2);
  CHECK(assignment_cost(rect, rm) == doctest::Approx(brute_force_min(rect)));
}

TEST_CASE("hungarian is no worse than random permutations") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd c(7, 7);
  for (int i = 0; i < 49; ++i) c.data()[i] = u(rng);
  const double best = assignment_cost(c, hungarian_assign(c));
  std::vector<int> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = 0; k < 1000; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double s = 0.0;
    for (int i = 0; i < 7; ++i) s += c(i, perm[i]);
    CHECK(best <= s + 1e-12);
  }
}

TEST_CASE("dbscan keeps the largest cluster") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(g(rng), g(rng));
  for (int i = 0; i < 5; ++i) pts.emplace_back(50.0 + g(rng), g(rng));
  const auto keep = dbscan_filter(pts, 0.5, 5);
  for (int i = 0; i < 100; ++i) CHECK(keep[i]);
  for (int i = 100; i < 105; ++i) CHECK_FALSE(keep[i]);
  CHECK_THROWS_AS(dbscan_filter_frames(FramePoints{}, 0.5, 5), Error);
}

TEST_CASE("dbscan ties go to the lowest label") {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 6; ++i) pts.emplace_back(0.01 * i, 0.0);
  for (int i = 0; i < 6; ++i) pts.emplace_back(10.0 + 0.01 * i, 0.0);
  const auto keep = dbscan_filter(pts, 0.5, 3);
  for (int i = 0; i < 6; ++i) CHECK(keep[i]);
  for (int i = 6; i < 12; ++i) CHECK_FALSE(keep[i]);
}

TEST_CASE("center distance signal") {
  FramePoints still;
  for (int f = 0; f < 10; ++f) still[f].push_back(Eigen::Vector2d(2.0, 3.0));
  for (const auto& d : center_distance_signal(still).frames) CHECK(d[0] == doctest::Approx(0.0));

  FramePoints circle;
  for (int f = 0; f < 360; ++f) {
    const double a = deg2rad(f);
    circle[f].push_back(Eigen::Vector2d(1.0 + 2.5 * std::cos(a), -4.0 + 2.5 * std::sin(a)));
  }
  for (const auto& d : center_distance_signal(circle).frames) CHECK(std::abs(d[0] - 2.5) < 1e-9);

  const FramePoints w = walks(9, 50);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  int n = 0;
  for (const auto& [f, pts] : w) {
    for (const auto& p : pts) {
      mean += p;
      ++n;
    }
  }
  mean /= n;
  const DistanceSignal sig = center_distance_signal(w);
  for (const auto& [f, pts] : w) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(sig.frames[f - sig.first_frame][i] == doctest::Approx((pts[i] - mean).norm()));
    }
  }
}

TEST_CASE("distance signal search recovers shifts") {
  const FramePoints w = walks(10, 300);
  const DistanceSignal ref = center_distance_signal(w);
  SyncResult same = search_time_offset(ref, ref);
  CHECK(same.delta_t == 0);
  CHECK(same.score == 0.0);

  DistanceSignal sync;
  sync.frames.assign(ref.frames.begin() + 17, ref.frames.end());
  sync.first_frame = 0;
  const SyncResult r = search_time_offset(ref, sync);
  CHECK(r.delta_t == 17);
  CHECK(r.score == r.cost_at(r.delta_t));
  CHECK_THROWS_AS(search_time_offset(DistanceSignal{}, ref), Error);
}

TEST_CASE("point search finds both signs and ignores a common translation") {
  const FramePoints w = walks(11, 300);
  FramePoints ahead;
  for (const auto& [f, pts] : w) {
    if (f >= 23) ahead[f - 23] = pts;
  }
  CHECK(search_time_offset_signed(w, ahead).delta_t == 23);
  CHECK(search_time_offset_signed(ahead, w).delta_t == -23);

  FramePoints moved_ref, moved_sync;
  const Eigen::Vector2d d(7.0, -3.0);
  for (const auto& [f, pts] : w) {
    for (const auto& p : pts) moved_ref[f].push_back(p + d);
  }
  for (const auto& [f, pts] : ahead) {
    for (const auto& p : pts) moved_sync[f].push_back(p + d);
  }
  const SyncResult a = search_time_offset(w, ahead, 40);
  const SyncResult b = search_time_offset(moved_ref, moved_sync, 40);
  for (std::size_t i = 0; i < a.per_offset_costs.size(); ++i) {
    CHECK(a.per_offset_costs[i] == doctest::Approx(b.per_offset_costs[i]).epsilon(1e-9));
  }
}

TEST_CASE("rigid fit recovers an exact transform") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const RigidTransform2D truth(2.2, Eigen::Vector2d(1.5, -0.5));
  std::vector<Eigen::Vector2d> src, dst;
  for (int i = 0; i < 20; ++i) {
    src.emplace_back(u(rng), u(rng));
    dst.push_back(truth.apply(src.back()));
  }
  const RigidTransform2D fit = fit_rigid_2d(src, dst);
  CHECK(std::abs(wrap_angle_signed(fit.angle - truth.angle)) < 1e-12);
  CHECK((fit.translation - truth.translation).norm() < 1e-12);
}

TEST_CASE("timed chamfer") {
  std::vector<TimedPlanePoint> a = {{{0.0, 0.0}, 0}, {{1.0, 0.0}, 1}};
  CHECK(timed_chamfer(a, a, 1.0) == 0.0);
  std::vector<TimedPlanePoint> b = {{{0.0, 3.0}, 0}, {{1.0, 0.0}, 5}};
  // a0 -> b0 in the same frame: 3. a1 has no frame match: b0 at sqrt(1 + 9 + 1).
  // b0 -> a0: 3. b1 has no frame match: a1 at sqrt(0 + 0 + 16).
  CHECK(timed_chamfer(a, b, 1.0) == doctest::Approx(3.0 + std::sqrt(11.0) + 3.0 + 4.0));
}

TEST_CASE("rotation search and ICP on a rotated copy") {
  const FramePoints ref = walks(13, 150);
  const RigidTransform2D truth(deg2rad(123.4), Eigen::Vector2d(2.0, 1.0));
  const RigidTransform2D inv = truth.inverse();
  FramePoints sync;
  for (const auto& [f, pts] : ref) {
    for (const auto& p : pts) sync[f].push_back(inv.apply(p));
  }
  const auto rot = search_rotation(to_timed(ref), to_timed(sync), 1.0, median_frame_displacement(ref));
  CHECK(rot.curve.size() == 360);
  CHECK(std::abs(rad2deg(wrap_angle_signed(rot.transform.angle - truth.angle))) <= 1.0);
  const IcpResult icp = icp_refine(ref, sync, rot.transform, 0, IcpConfig{});
  CHECK(std::abs(wrap_angle_signed(icp.transform.angle - truth.angle)) < 1e-9);
  CHECK((icp.transform.translation - truth.translation).norm() < 1e-9);
  for (std::size_t i = 1; i < icp.history.size(); ++i) CHECK(icp.history[i] <= icp.history[i - 1]);
}

TEST_CASE("compose and decompose extrinsics are inverse") {
  const CameraIntrinsics k{1000.0, 960.0, 540.0};
  const GroundPlaneFrame a =
      plane_basis_from_normal(Eigen::Vector3d(0.0, -0.8, -0.6).normalized(), k, 4.0);
  const GroundPlaneFrame b =
      plane_basis_from_normal(Eigen::Vector3d(0.1, -0.7, -0.7).normalized(), k, 3.0);
  const RigidTransform2D t(0.9, Eigen::Vector2d(-3.0, 5.0));
  const CameraExtrinsics e = compose_extrinsics(a, b, t);
  CHECK(orthonormality_residual(e.rot_world_to_cam) < 1e-12);
  const RigidTransform2D back = decompose_extrinsics(a, b, e);
  CHECK(std::abs(wrap_angle_signed(back.angle - t.angle)) < 1e-12);
  CHECK((back.translation - t.translation).norm() < 1e-9);
  // A point on the sync plane lands on the mapped reference plane point.
  const Eigen::Vector2d q(1.0, 2.0);
  const WorldPoint w = e.to_world(b.to_camera(PlanePoint(q.x(), q.y(), 0.0)));
  const PlanePoint on_ref = a.to_plane(w);
  CHECK((on_ref.head<2>() - t.apply(q)).norm() < 1e-9);
  CHECK(std::abs(on_ref.z()) < 1e-9);
}
