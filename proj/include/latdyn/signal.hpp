#pragma once

// Numerical utilities on scalar series: Savitzky-Golay smoothing, finite
// difference derivatives, Pearson correlation, Gaussian KDE on a lattice and
// mean-square displacement.

#include <Eigen/Dense>

#include <optional>
#include <span>

namespace latdyn {
struct TrajectorySet;
}

namespace latdyn::signal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Series {
  Vector values;
  double dt = 1.0;  // sample spacing; frames are unit time

  Eigen::Index size() const { return values.size(); }
};

struct SgConfig {
  int window = 51;  // odd
  int order = 1;    // 0 <= order < window

  void validate() const;
};

// Least-squares polynomial smoothing over a symmetric window. Points within
// half a window of either end take the value of the fit over the first or
// last full window evaluated at their position.
Series sg_filter(const Series& s, const SgConfig& cfg);

// Central differences inside, second-order one-sided differences at the ends.
Series estimate_derivative(const Series& s);

double pearson(std::span<const double> a, std::span<const double> b);
inline double pearson(const Series& a, const Series& b) {
  return pearson(std::span<const double>(a.values.data(), static_cast<std::size_t>(a.size())),
                 std::span<const double>(b.values.data(), static_cast<std::size_t>(b.size())));
}

// Square lattice of size x size nodes spanning [x_min, x_max] x [y_min, y_max].
struct Grid {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  int size = 64;

  double x_at(int i) const { return x_min + (x_max - x_min) * i / (size - 1); }
  double y_at(int j) const { return y_min + (y_max - y_min) * j / (size - 1); }
  double cell_area() const {
    return (x_max - x_min) / (size - 1) * (y_max - y_min) / (size - 1);
  }
};

// Scott's rule n^(-1/6) times the mean of the per-axis sample standard
// deviations. Falls back to 5% of the smaller grid extent when the spread is
// zero (a single point or coincident points).
double scott_bandwidth(std::span<const Eigen::Vector2d> positions, const Grid& grid);

// Isotropic Gaussian KDE evaluated on the lattice. Row index is y, column
// index is x. An empty bandwidth selects Scott's rule.
Matrix kde_density(std::span<const Eigen::Vector2d> positions, const Grid& grid,
                   std::optional<double> bandwidth = std::nullopt);

// MSD(t) = (1/k) sum_i |p_i(t) - p_i(0)|^2.
Series mean_square_displacement(const TrajectorySet& t);

}  // namespace latdyn::signal
