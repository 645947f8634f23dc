#include "rigcal/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <unsupported/Eigen/AutoDiff>

#include "rigcal/error.hpp"

namespace rigcal {
namespace {

constexpr int kMaxLocal = 20;
using Deriv = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLocal, 1>;
using Jet = Eigen::AutoDiffScalar<Deriv>;

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

inline double val(double x) { return x; }
inline double val(const Jet& x) { return x.value(); }

template <typename T>
T abs_t(const T& x) {
  return val(x) < 0.0 ? T(-x) : x;
}

// Norm with a zero derivative at the origin.
template <typename T>
T safe_norm(const Vec3<T>& v) {
  using std::sqrt;
  const T s = v.squaredNorm();
  if (val(s) <= 0.0) return T(0.0 * s);
  return sqrt(s);
}

template <typename T>
Mat3<T> exp_so3(const Vec3<T>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  Mat3<T> k;
  k << T(0.0), T(-w(2)), w(1), w(2), T(0.0), T(-w(0)), T(-w(1)), w(0), T(0.0);
  const T theta2 = w.squaredNorm();
  Mat3<T> r = Mat3<T>::Identity();
  if (val(theta2) < 1e-16) {
    r += k + T(0.5) * (k * k);
    return r;
  }
  const T theta = sqrt(theta2);
  r += (sin(theta) / theta) * k + ((T(1.0) - cos(theta)) / theta2) * (k * k);
  return r;
}

template <typename T>
struct CamT {
  Mat3<T> r;  // world -> camera
  Vec3<T> c;  // center in world
  T f, o1, o2, dt;
};

template <typename T>
CamT<T> make_cam(const Camera& base, double base_dt, const BundleObjective::Layout& lay,
                 double angular, const T* p) {
  CamT<T> cam;
  cam.r = base.extrinsics.rot_world_to_cam.cast<T>();
  cam.c = base.extrinsics.position.cast<T>();
  cam.f = T(base.intrinsics.f);
  cam.o1 = T(base.intrinsics.o1);
  cam.o2 = T(base.intrinsics.o2);
  cam.dt = T(base_dt);
  if (lay.rotation >= 0) {
    const Vec3<T> w(angular * p[lay.rotation], angular * p[lay.rotation + 1],
                    angular * p[lay.rotation + 2]);
    cam.r = exp_so3<T>(w) * cam.r;
  }
  if (lay.position >= 0) {
    cam.c += Vec3<T>(p[lay.position], p[lay.position + 1], p[lay.position + 2]);
  }
  if (lay.log_focal >= 0) {
    using std::exp;
    cam.f = T(base.intrinsics.f) * exp(angular * p[lay.log_focal]);
  }
  if (lay.principal >= 0) {
    cam.o1 = T(base.intrinsics.o1) + T(base.intrinsics.f * angular) * p[lay.principal];
    cam.o2 = T(base.intrinsics.o2) + T(base.intrinsics.f * angular) * p[lay.principal + 1];
  }
  if (lay.delta_t >= 0) cam.dt = T(base_dt) + p[lay.delta_t];
  return cam;
}

template <typename T>
using PixelsT = std::array<std::optional<Vec2<T>>, kNumJoints>;

template <typename T>
PixelsT<T> view_pixels(const ViewObservation& v, const MatchedPose& pose, const CamT<T>& cam,
                       const Track* track) {
  PixelsT<T> out;
  for (int j = 0; j < kNumJoints; ++j) {
    if (v.joints[j]) out[j] = v.joints[j]->pixel.cast<T>();
  }
  if (track == nullptr) return out;
  // Continuous delta_t: sample the track at t = frame_ref - delta_t.
  const T t = T(static_cast<double>(pose.frame)) - cam.dt;
  const int base = static_cast<int>(std::floor(val(t)));
  const T alpha = t - T(static_cast<double>(base));
  const auto f0 = track->find(base);
  const auto f1 = track->find(base + 1);
  for (int j = 0; j < kNumJoints; ++j) {
    const bool has0 = f0 != track->end() && f0->second[j].has_value();
    const bool has1 = f1 != track->end() && f1->second[j].has_value();
    if (has0 && has1) {
      const Vec2<T> a = f0->second[j]->pixel.cast<T>();
      const Vec2<T> b = f1->second[j]->pixel.cast<T>();
      out[j] = Vec2<T>(a + alpha * (b - a));
    } else if (has0) {
      out[j] = f0->second[j]->pixel.cast<T>();
    } else if (has1 && !out[j]) {
      out[j] = f1->second[j]->pixel.cast<T>();
    }
  }
  return out;
}

template <typename T>
struct RayT {
  Vec3<T> origin;
  Vec3<T> direction;
};

template <typename T>
RayT<T> ray_of(const CamT<T>& cam, const Vec2<T>& px) {
  const Vec3<T> d((px(0) - cam.o1) / cam.f, (px(1) - cam.o2) / cam.f, T(1.0));
  return {cam.c, cam.r.transpose() * d};
}

template <typename T>
std::tuple<Vec3<T>, Vec3<T>, bool> closest_t(const RayT<T>& r1, const RayT<T>& r2) {
  const Vec3<T> w0 = r1.origin - r2.origin;
  const T a = r1.direction.dot(r1.direction);
  const T b = r1.direction.dot(r2.direction);
  const T c = r2.direction.dot(r2.direction);
  const T d = r1.direction.dot(w0);
  const T e = r2.direction.dot(w0);
  const T denom = a * c - b * b;
  T k1, k2;
  bool parallel = false;
  if (val(denom) <= 1e-12 * val(a) * val(c)) {
    parallel = true;
    k1 = T(1.0);
    k2 = (b + e) / c;
  } else {
    k1 = (b * e - c * d) / denom;
    k2 = (a * e - b * d) / denom;
  }
  return {Vec3<T>(r1.origin + k1 * r1.direction), Vec3<T>(r2.origin + k2 * r2.direction),
          parallel};
}

template <typename T>
struct Sums {
  T inter = T(0.0), sym = T(0.0), height = T(0.0), plane = T(0.0);
  int n_inter = 0, n_sym = 0, n_height = 0, n_plane = 0;
};

constexpr std::array<std::pair<Joint, Joint>, 3> kLeftBones = {{
    {Joint::kLeftShoulder, Joint::kLeftHip},
    {Joint::kLeftHip, Joint::kLeftKnee},
    {Joint::kLeftKnee, Joint::kLeftAnkle},
}};
constexpr std::array<std::pair<Joint, Joint>, 3> kRightBones = {{
    {Joint::kRightShoulder, Joint::kRightHip},
    {Joint::kRightHip, Joint::kRightKnee},
    {Joint::kRightKnee, Joint::kRightAnkle},
}};

template <typename T>
Sums<T> pair_sums(const CamT<T>& ca, const PixelsT<T>& pa, const CamT<T>& cb,
                  const PixelsT<T>& pb, const BundleProblem& prob,
                  std::array<std::optional<Vec3<T>>, kNumJoints>* mids_out = nullptr) {
  Sums<T> s;
  std::array<std::optional<Vec3<T>>, kNumJoints> mid;
  const Vec3<T> n = prob.plane_normal.cast<T>();
  const Vec3<T> q = prob.plane_point.cast<T>();
  for (int j = 0; j < kNumJoints; ++j) {
    if (!is_body_joint(static_cast<Joint>(j)) || !pa[j] || !pb[j]) continue;
    const auto [p1, p2, parallel] = closest_t<T>(ray_of(ca, *pa[j]), ray_of(cb, *pb[j]));
    if (parallel) continue;
    s.inter += safe_norm<T>(p1 - p2);
    ++s.n_inter;
    mid[j] = Vec3<T>(T(0.5) * (p1 + p2));
    if (j == static_cast<int>(Joint::kLeftAnkle) || j == static_cast<int>(Joint::kRightAnkle)) {
      s.plane += abs_t<T>(n.dot(p1 - q)) + abs_t<T>(n.dot(p2 - q));
      s.n_plane += 2;
    }
  }
  auto bone = [&](Joint a, Joint b) -> std::optional<T> {
    const auto& ma = mid[static_cast<int>(a)];
    const auto& mb = mid[static_cast<int>(b)];
    if (!ma || !mb) return std::nullopt;
    return safe_norm<T>(Vec3<T>(*ma - *mb));
  };
  std::optional<T> chain[2] = {T(0.0), T(0.0)};
  for (int i = 0; i < 3; ++i) {
    const auto l = bone(kLeftBones[i].first, kLeftBones[i].second);
    const auto r = bone(kRightBones[i].first, kRightBones[i].second);
    if (l && r) {
      s.sym += abs_t<T>(T(*l - *r));
      ++s.n_sym;
    }
    if (chain[0]) chain[0] = l ? std::optional<T>(T(*chain[0] + *l)) : std::nullopt;
    if (chain[1]) chain[1] = r ? std::optional<T>(T(*chain[1] + *r)) : std::nullopt;
  }
  if (chain[0] || chain[1]) {
    T len = T(0.0);
    if (chain[0] && chain[1]) {
      len = T(0.5) * (*chain[0] + *chain[1]);
    } else {
      len = chain[0] ? *chain[0] : *chain[1];
    }
    s.height += abs_t<T>(T(len - T(prob.h)));
    ++s.n_height;
  }
  if (mids_out) *mids_out = mid;
  return s;
}

const Track* track_for(const BundleProblem& prob, const ViewObservation& v, bool optimize_dt) {
  if (!optimize_dt || v.camera == prob.reference_camera) return nullptr;
  if (v.camera >= static_cast<int>(prob.tracks.size())) return nullptr;
  const auto it = prob.tracks[v.camera].find(v.track_id);
  return it == prob.tracks[v.camera].end() ? nullptr : &it->second;
}

LossTerms finish(double inter, double sym, double height, double plane, int ni, int ns, int nh,
                 int np, const BundleWeights& w) {
  LossTerms t;
  t.intersection_count = ni;
  t.symmetry_count = ns;
  t.height_count = nh;
  t.plane_count = np;
  t.intersection = ni > 0 ? inter / ni : 0.0;
  t.symmetry = ns > 0 ? sym / ns : 0.0;
  t.height = nh > 0 ? height / nh : 0.0;
  t.plane = np > 0 ? plane / np : 0.0;
  t.total = w.intersection * t.intersection + w.symmetry * t.symmetry + w.height * t.height +
            w.plane * t.plane;
  return t;
}

double base_dt(const BundleProblem& prob, int cam) {
  return cam < static_cast<int>(prob.delta_t.size()) ? prob.delta_t[cam] : 0.0;
}

}  // namespace

Ray build_ray(const ImagePoint& p, const Camera& cam) {
  Ray r;
  r.origin = cam.extrinsics.position;
  r.direction = cam.extrinsics.rot_world_to_cam.transpose() * cam.intrinsics.unproject(p);
  return r;
}

Ray build_ray(const ImagePoint& p, const CameraIntrinsics& k, const GroundPlaneFrame& plane,
              const Eigen::Isometry3d& plane_to_world) {
  Ray r;
  r.origin = plane_to_world * plane.camera_center();
  r.direction = plane_to_world.linear() * plane.rot_cam_to_plane * k.unproject(p);
  return r;
}

ClosestPoints closest_points(const Ray& r1, const Ray& r2) {
  const auto [p1, p2, parallel] =
      closest_t<double>({r1.origin, r1.direction}, {r2.origin, r2.direction});
  return {p1, p2, (p1 - p2).norm(), parallel};
}

double MatchedPose::mean_confidence() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : views) {
    for (const auto& k : v.joints) {
      if (k) {
        sum += k->confidence;
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : sum / n;
}

std::vector<MatchedPose> select_top_k(std::vector<MatchedPose> poses, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) keyed.emplace_back(poses[i].mean_confidence(), i);
  std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    const auto& pa = poses[a.second];
    const auto& pb = poses[b.second];
    return std::tie(pa.frame, pa.person_id) < std::tie(pb.frame, pb.person_id);
  });
  std::vector<MatchedPose> out;
  const std::size_t n = std::min<std::size_t>(keyed.size(), static_cast<std::size_t>(k));
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::move(poses[keyed[i].second]));
  return out;
}

BundleObjective::BundleObjective(const BundleProblem& prob, const BundleConfig& cfg)
    : prob_(prob), cfg_(cfg) {
  const int n = static_cast<int>(prob.cameras.size());
  double height = 0.0;
  for (const auto& cam : prob.cameras)
    height += std::abs(prob.plane_normal.dot(cam.extrinsics.position - prob.plane_point));
  if (n > 0 && height > 0.0) angular_scale_ = n / height;
  layouts_.resize(n);
  offsets_.resize(n);
  for (int c = 0; c < n; ++c) {
    Layout& l = layouts_[c];
    int k = 0;
    if (c != prob.reference_camera) {
      l.rotation = k;
      k += 3;
      l.position = k;
      k += 3;
    }
    if (cfg.optimize_intrinsics) l.log_focal = k++;
    if (cfg.optimize_principal_point) {
      l.principal = k;
      k += 2;
    }
    if (cfg.optimize_dt && c != prob.reference_camera) l.delta_t = k++;
    l.size = k;
    offsets_[c] = num_params_;
    num_params_ += k;
  }
}

LossTerms BundleObjective::terms(const Eigen::VectorXd& x) const {
  double inter = 0, sym = 0, height = 0, plane = 0;
  int ni = 0, ns = 0, nh = 0, np = 0;
  const int ncam = static_cast<int>(prob_.cameras.size());
  std::vector<CamT<double>> cams(ncam);
  for (int c = 0; c < ncam; ++c) {
    cams[c] = make_cam<double>(prob_.cameras[c], base_dt(prob_, c), layouts_[c],
                               angular_scale_, x.data() + offsets_[c]);
  }
  for (const auto& pose : prob_.poses) {
    std::vector<PixelsT<double>> px(pose.views.size());
    for (std::size_t v = 0; v < pose.views.size(); ++v) {
      const auto& view = pose.views[v];
      px[v] = view_pixels<double>(view, pose, cams[view.camera],
                                  track_for(prob_, view, cfg_.optimize_dt));
    }
    for (std::size_t a = 0; a < pose.views.size(); ++a) {
      for (std::size_t b = a + 1; b < pose.views.size(); ++b) {
        const int ca = pose.views[a].camera;
        const int cb = pose.views[b].camera;
        if (ca == cb) continue;
        const auto s = pair_sums<double>(cams[ca], px[a], cams[cb], px[b], prob_);
        inter += s.inter;
        sym += s.sym;
        height += s.height;
        plane += s.plane;
        ni += s.n_inter;
        ns += s.n_sym;
        nh += s.n_height;
        np += s.n_plane;
      }
    }
  }
  return finish(inter, sym, height, plane, ni, ns, nh, np, prob_.weights);
}

double BundleObjective::value(const Eigen::VectorXd& x) const { return terms(x).total; }

double BundleObjective::value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  std::array<Eigen::VectorXd, 4> g;
  for (auto& v : g) v = Eigen::VectorXd::Zero(num_params_);
  double sums[4] = {0, 0, 0, 0};
  int counts[4] = {0, 0, 0, 0};

  for (const auto& pose : prob_.poses) {
    for (std::size_t a = 0; a < pose.views.size(); ++a) {
      for (std::size_t b = a + 1; b < pose.views.size(); ++b) {
        const auto& va = pose.views[a];
        const auto& vb = pose.views[b];
        if (va.camera == vb.camera) continue;
        const Layout& la = layouts_[va.camera];
        const Layout& lb = layouts_[vb.camera];
        const int nloc = la.size + lb.size;
        if (nloc > kMaxLocal) {
          throw Error(ErrorCode::kInvalidArgument, "too many parameters per camera pair");
        }
        std::array<Jet, kMaxLocal> local;
        for (int i = 0; i < la.size; ++i) {
          local[i] = Jet(x(offsets_[va.camera] + i), nloc, i);
        }
        for (int i = 0; i < lb.size; ++i) {
          local[la.size + i] = Jet(x(offsets_[vb.camera] + i), nloc, la.size + i);
        }
        const CamT<Jet> ca =
            make_cam<Jet>(prob_.cameras[va.camera], base_dt(prob_, va.camera), la,
                          angular_scale_, local.data());
        const CamT<Jet> cb = make_cam<Jet>(prob_.cameras[vb.camera], base_dt(prob_, vb.camera), lb,
                                           angular_scale_, local.data() + la.size);
        const auto pa = view_pixels<Jet>(va, pose, ca, track_for(prob_, va, cfg_.optimize_dt));
        const auto pb = view_pixels<Jet>(vb, pose, cb, track_for(prob_, vb, cfg_.optimize_dt));
        const auto s = pair_sums<Jet>(ca, pa, cb, pb, prob_);

        const Jet* jets[4] = {&s.inter, &s.sym, &s.height, &s.plane};
        const int ns[4] = {s.n_inter, s.n_sym, s.n_height, s.n_plane};
        for (int t = 0; t < 4; ++t) {
          sums[t] += jets[t]->value();
          counts[t] += ns[t];
          const Deriv& d = jets[t]->derivatives();
          if (d.size() == 0) continue;
          for (int i = 0; i < la.size; ++i) g[t](offsets_[va.camera] + i) += d(i);
          for (int i = 0; i < lb.size; ++i) g[t](offsets_[vb.camera] + i) += d(la.size + i);
        }
      }
    }
  }
  const BundleWeights& w = prob_.weights;
  const double weights[4] = {w.intersection, w.symmetry, w.height, w.plane};
  grad = Eigen::VectorXd::Zero(num_params_);
  for (int t = 0; t < 4; ++t) {
    if (counts[t] > 0) grad += (weights[t] / counts[t]) * g[t];
  }
  return finish(sums[0], sums[1], sums[2], sums[3], counts[0], counts[1], counts[2], counts[3], w)
      .total;
}

BundleProblem BundleObjective::apply(const Eigen::VectorXd& x) const {
  BundleProblem out = prob_;
  out.delta_t.resize(prob_.cameras.size(), 0.0);
  for (std::size_t c = 0; c < prob_.cameras.size(); ++c) {
    const auto cam = make_cam<double>(prob_.cameras[c], base_dt(prob_, static_cast<int>(c)),
                                      layouts_[c], angular_scale_, x.data() + offsets_[c]);
    out.cameras[c].extrinsics.rot_world_to_cam = orthonormalize(cam.r);
    out.cameras[c].extrinsics.position = cam.c;
    out.cameras[c].intrinsics = {cam.f, cam.o1, cam.o2};
    out.delta_t[c] = cam.dt;
  }
  return out;
}

std::vector<WorldPoint> triangulate_poses(const BundleProblem& prob) {
  std::vector<WorldPoint> out;
  for (const auto& pose : prob.poses) {
    if (pose.views.size() < 2) continue;
    const auto& va = pose.views[0];
    const auto& vb = pose.views[1];
    const Camera& ca = prob.cameras[va.camera];
    const Camera& cb = prob.cameras[vb.camera];
    for (int j = 0; j < kNumJoints; ++j) {
      if (!is_body_joint(static_cast<Joint>(j)) || !va.joints[j] || !vb.joints[j]) continue;
      const auto cp = closest_points(build_ray(va.joints[j]->pixel, ca),
                                     build_ray(vb.joints[j]->pixel, cb));
      if (!cp.parallel) out.push_back(0.5 * (cp.on_first + cp.on_second));
    }
  }
  return out;
}

LossTerms bundle_loss(const BundleProblem& prob) {
  BundleObjective obj(prob, BundleConfig{});
  const LossTerms t = obj.terms(Eigen::VectorXd::Zero(obj.num_parameters()));
  if (t.intersection_count == 0) {
    throw Error(ErrorCode::kNoSharedObservations, "no joint is seen by two cameras");
  }
  return t;
}

BundleResult optimize_bundle(const BundleProblem& prob, const BundleConfig& cfg) {
  BundleProblem current = prob;
  current.delta_t.resize(prob.cameras.size(), 0.0);
  BundleResult res;

  double loss = bundle_loss(current).total;
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kInvalidArgument, "initial bundle loss is not finite");
  }
  const double initial = loss;
  res.loss_history.push_back(loss);
  double step = cfg.lr;

  for (int it = 0; it < cfg.max_iter; ++it) {
    const BundleObjective obj(current, cfg);
    if (obj.num_parameters() == 0) break;
    Eigen::VectorXd grad;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(obj.num_parameters());
    obj.value_and_gradient(zero, grad);
    if (!grad.allFinite() || grad.squaredNorm() == 0.0) break;

    bool accepted = false;
    double trial = step;
    double next_loss = loss;
    Eigen::VectorXd x;
    for (int halving = 0; halving <= 20; ++halving) {
      x = -trial * grad;
      next_loss = obj.value(x);
      if (std::isfinite(next_loss) && next_loss < loss) {
        accepted = true;
        break;
      }
      if (std::isfinite(next_loss) && next_loss > 10.0 * initial) res.diverged = true;
      trial *= 0.5;
    }
    if (!accepted) break;
    BundleProblem next = obj.apply(x);
    // Re-orthonormalizing can nudge the loss; never take a step that ends higher.
    const double applied = bundle_loss(next).total;
    if (!(applied < loss)) break;
    current = std::move(next);
    loss = applied;
    res.loss_history.push_back(loss);
    ++res.iterations;
    step = 2.0 * trial;
  }

  res.cameras = current.cameras;
  res.delta_t = current.delta_t;
  res.triangulated_points = triangulate_poses(current);
  return res;
}

}  // namespace rigcal
