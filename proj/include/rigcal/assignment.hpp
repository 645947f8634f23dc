#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rigcal {

// Minimum-cost matching of size min(rows, cols) (Kuhn-Munkres with
// potentials, O(n^2 m)). Pairs are returned sorted by row.
std::vector<std::pair<int, int>> hungarian_assign(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost, std::span<const std::pair<int, int>> pairs);

inline constexpr int kNoise = -1;

// DBSCAN cluster labels (kNoise for noise). Clusters are numbered in order of
// discovery when scanning points in input order.
std::vector<int> dbscan_labels(std::span<const Eigen::Vector2d> points, double eps, int min_pts);

// Members of the largest DBSCAN cluster; ties go to the lowest label.
std::vector<bool> dbscan_filter(std::span<const Eigen::Vector2d> points, double eps, int min_pts);

}  // namespace rigcal
