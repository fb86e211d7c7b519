#include "latdyn/signal.hpp"

#include "latdyn/errors.hpp"
#include "latdyn/trajkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace latdyn::signal {

void SgConfig::validate() const {
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("Savitzky-Golay window must be a positive odd number, got " + std::to_string(window));
  }
  if (order < 0 || order >= window) {
    throw ConfigError("Savitzky-Golay order must satisfy 0 <= order < window, got order " +
                      std::to_string(order) + " with window " + std::to_string(window));
  }
}

namespace {

// Hat matrix of the windowed polynomial fit: row i evaluates the fit at
// window position i as a linear combination of the window samples.
Matrix sg_hat_matrix(int window, int order) {
  const int half = window / 2;
  const double unit = half > 0 ? static_cast<double>(half) : 1.0;
  Matrix design(window, order + 1);
  for (int i = 0; i < window; ++i) {
    const double u = (i - half) / unit;
    double power = 1.0;
    for (int k = 0; k <= order; ++k) {
      design(i, k) = power;
      power *= u;
    }
  }
  Eigen::HouseholderQR<Matrix> qr(design);
  const Matrix q = qr.householderQ() * Matrix::Identity(window, order + 1);
  return q * q.transpose();
}

}  // namespace

Series sg_filter(const Series& s, const SgConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = s.size();
  if (cfg.window > n) {
    throw ConfigError("Savitzky-Golay window " + std::to_string(cfg.window) +
                      " exceeds series length " + std::to_string(n));
  }
  const Matrix hat = sg_hat_matrix(cfg.window, cfg.order);
  const Eigen::Index m = cfg.window;
  const Eigen::Index half = m / 2;
  Series out{Vector(n), s.dt};
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index start;
    Eigen::Index row;
    if (i < half) {
      start = 0;
      row = i;
    } else if (i >= n - half) {
      start = n - m;
      row = i - start;
    } else {
      start = i - half;
      row = half;
    }
    out.values(i) = hat.row(row).dot(s.values.segment(start, m));
  }
  return out;
}

Series estimate_derivative(const Series& s) {
  const Eigen::Index n = s.size();
  if (n < 3) throw ConfigError("derivative estimation needs at least 3 samples, got " + std::to_string(n));
  if (!(s.dt > 0.0)) throw ConfigError("derivative estimation needs dt > 0");
  const Vector& z = s.values;
  Series d{Vector(n), s.dt};
  const double inv2dt = 1.0 / (2.0 * s.dt);
  for (Eigen::Index i = 1; i + 1 < n; ++i) d.values(i) = (z(i + 1) - z(i - 1)) * inv2dt;
  d.values(0) = (-3.0 * z(0) + 4.0 * z(1) - z(2)) * inv2dt;
  d.values(n - 1) = (3.0 * z(n - 1) - 4.0 * z(n - 2) + z(n - 3)) * inv2dt;
  return d;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("pearson: length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() < 2) throw UndefinedCorrelationError("pearson: need at least 2 samples");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) throw UndefinedCorrelationError("pearson: zero-variance input");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedCorrelationError("pearson: zero-variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double scott_bandwidth(std::span<const Eigen::Vector2d> positions, const Grid& grid) {
  const double n = static_cast<double>(positions.size());
  double spread = 0.0;
  if (positions.size() >= 2) {
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (const auto& p : positions) m += p;
    m /= n;
    Eigen::Vector2d var = Eigen::Vector2d::Zero();
    for (const auto& p : positions) var += (p - m).cwiseAbs2();
    var /= (n - 1.0);
    spread = 0.5 * (std::sqrt(var.x()) + std::sqrt(var.y()));
  }
  if (spread > 0.0) return std::pow(n, -1.0 / 6.0) * spread;
  return 0.05 * std::min(grid.x_max - grid.x_min, grid.y_max - grid.y_min);
}

Matrix kde_density(std::span<const Eigen::Vector2d> positions, const Grid& grid,
                   std::optional<double> bandwidth) {
  if (positions.empty()) throw InputError("kde_density: no positions");
  if (grid.size < 2 || !(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) {
    throw ConfigError("kde_density: grid needs size >= 2 and positive extent");
  }
  const double h = bandwidth ? *bandwidth : scott_bandwidth(positions, grid);
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("kde_density: bandwidth must be positive");
  const double norm = 1.0 / (2.0 * std::numbers::pi * h * h * static_cast<double>(positions.size()));
  const double inv2h2 = 1.0 / (2.0 * h * h);
  Matrix density = Matrix::Zero(grid.size, grid.size);
  for (int j = 0; j < grid.size; ++j) {
    const double y = grid.y_at(j);
    for (int i = 0; i < grid.size; ++i) {
      const double x = grid.x_at(i);
      double acc = 0.0;
      for (const auto& p : positions) {
        const double dx = x - p.x();
        const double dy = y - p.y();
        acc += std::exp(-(dx * dx + dy * dy) * inv2h2);
      }
      density(j, i) = acc * norm;
    }
  }
  return density;
}

Series mean_square_displacement(const TrajectorySet& t) {
  const Eigen::Index steps = t.steps();
  const std::size_t k = t.particles();
  if (steps < 1 || k == 0) throw InputError("mean_square_displacement: empty trajectory set");
  Series msd{Vector::Zero(steps), 1.0};
  for (Eigen::Index s = 0; s < steps; ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += (t.position(s, i) - t.position(0, i)).squaredNorm();
    msd.values(s) = acc / static_cast<double>(k);
  }
  return msd;
}

}  // namespace latdyn::signal
