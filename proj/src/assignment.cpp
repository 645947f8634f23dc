#include "rigcal/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

#include "rigcal/error.hpp"

namespace rigcal {

std::vector<std::pair<int, int>> hungarian_assign(const Eigen::MatrixXd& cost) {
  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  if (n == 0 || m == 0) return {};

  // 1-based potentials formulation; column 0 is a virtual start node.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::pair<int, int>> out;
  out.reserve(n);
  for (int j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) {
      out.emplace_back(j - 1, p[j] - 1);
    } else {
      out.emplace_back(p[j] - 1, j - 1);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double assignment_cost(const Eigen::MatrixXd& cost, std::span<const std::pair<int, int>> pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(r, c);
  return total;
}

namespace {

struct CellHash {
  std::size_t operator()(const std::pair<long long, long long>& c) const noexcept {
    return std::hash<long long>()(c.first * 73856093LL ^ c.second * 19349663LL);
  }
};

}  // namespace

std::vector<int> dbscan_labels(std::span<const Eigen::Vector2d> points, double eps, int min_pts) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "no points to cluster");
  if (!(eps > 0.0) || min_pts < 1) {
    throw Error(ErrorCode::kInvalidArgument, "DBSCAN needs eps > 0 and min_pts >= 1");
  }
  const int n = static_cast<int>(points.size());

  // Uniform grid with eps-sized cells; neighbors lie in the 3x3 block.
  std::unordered_map<std::pair<long long, long long>, std::vector<int>, CellHash> grid;
  auto cell_of = [eps](const Eigen::Vector2d& p) {
    return std::make_pair(static_cast<long long>(std::floor(p.x() / eps)),
                          static_cast<long long>(std::floor(p.y() / eps)));
  };
  for (int i = 0; i < n; ++i) grid[cell_of(points[i])].push_back(i);

  const double eps2 = eps * eps;
  auto neighbors = [&](int i) {
    std::vector<int> out;
    const auto [cx, cy] = cell_of(points[i]);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (int j : it->second) {
          if ((points[j] - points[i]).squaredNorm() <= eps2) out.push_back(j);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    const auto seeds = neighbors(i);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[i] = kNoise;
      continue;
    }
    const int label = next++;
    labels[i] = label;
    std::deque<int> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const int j = queue.front();
      queue.pop_front();
      if (labels[j] == kNoise) labels[j] = label;
      if (labels[j] != kUnvisited) continue;
      labels[j] = label;
      const auto nb = neighbors(j);
      if (static_cast<int>(nb.size()) >= min_pts) {
        queue.insert(queue.end(), nb.begin(), nb.end());
      }
    }
  }
  return labels;
}

std::vector<bool> dbscan_filter(std::span<const Eigen::Vector2d> points, double eps, int min_pts) {
  const auto labels = dbscan_labels(points, eps, min_pts);
  const int num_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<bool> keep(points.size(), false);
  if (num_clusters <= 0) return keep;
  std::vector<int> sizes(num_clusters, 0);
  for (int l : labels) {
    if (l >= 0) ++sizes[l];
  }
  const int largest =
      static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < labels.size(); ++i) keep[i] = labels[i] == largest;
  return keep;
}

}  // namespace rigcal
