#include "latdyn/errors.hpp"
#include "latdyn/random.hpp"
#include "latdyn/signal.hpp"
#include "latdyn/trajkit.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

using namespace latdyn;
using namespace latdyn::signal;

namespace {

Vector random_series(std::uint64_t seed, Eigen::Index n) {
  Rng rng(seed);
  Vector v(n);
  double walk = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    walk += rng.normal();
    v(i) = walk + 0.3 * rng.normal();
  }
  return v;
}

// Independent oracle: for every index, fit a polynomial by least squares to
// the window that the filter uses and evaluate it at that index.
Vector brute_force_sg(const Vector& y, int window, int order) {
  const Eigen::Index n = y.size();
  const int half = window / 2;
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index start = i - half;
    if (start < 0) start = 0;
    if (start + window > n) start = n - window;
    const double centre = static_cast<double>(start + half);
    Eigen::MatrixXd a(window, order + 1);
    Eigen::VectorXd b(window);
    for (int r = 0; r < window; ++r) {
      const double x = static_cast<double>(start + r) - centre;
      for (int c = 0; c <= order; ++c) a(r, c) = std::pow(x, c);
      b(r) = y(start + r);
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
    const double x = static_cast<double>(i) - centre;
    double v = 0.0;
    for (int c = order; c >= 0; --c) v = v * x + coef(c);
    out(i) = v;
  }
  return out;
}

}  // namespace

TEST_CASE("Savitzky-Golay output equals a brute-force local polynomial fit") {
  const std::pair<int, int> settings[] = {{51, 1}, {31, 2}, {5, 3}};
  std::uint64_t seed = 1;
  for (const auto& [window, order] : settings) {
    CAPTURE(window);
    CAPTURE(order);
    const Vector y = random_series(seed++, 400);
    const Vector got = sg_filter(Series{y}, SgConfig{window, order}).values;
    const Vector want = brute_force_sg(y, window, order);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("Savitzky-Golay reproduces polynomials up to its order") {
  Vector y(60);
  for (int i = 0; i < 60; ++i) y(i) = 0.5 - 0.1 * i + 0.003 * i * i;
  const Vector got = sg_filter(Series{y}, SgConfig{11, 2}).values;
  CHECK((got - y).cwiseAbs().maxCoeff() < 1e-10);
  // A window equal to the series length is a single global fit.
  const Vector whole = sg_filter(Series{y}, SgConfig{59, 2}).values;
  CHECK((whole.head(59) - y.head(59)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("Savitzky-Golay configuration is validated") {
  const Series s{Vector::Zero(10)};
  CHECK_THROWS_AS(sg_filter(s, SgConfig{4, 1}), ConfigError);
  CHECK_THROWS_AS(sg_filter(s, SgConfig{5, 5}), ConfigError);
  CHECK_THROWS_AS(sg_filter(s, SgConfig{11, 1}), ConfigError);
  CHECK_NOTHROW(sg_filter(s, SgConfig{1, 0}));
}

TEST_CASE("derivative estimate is exact on quadratics including the ends") {
  const double dt = 0.25;
  Vector y(20);
  for (int i = 0; i < 20; ++i) {
    const double t = i * dt;
    y(i) = 2.0 - 3.0 * t + 0.5 * t * t;
  }
  const Series d = estimate_derivative(Series{y, dt});
  for (int i = 0; i < 20; ++i) CHECK(d.values(i) == doctest::Approx(-3.0 + i * dt).epsilon(1e-12));
  CHECK(d.dt == dt);
  CHECK_THROWS_AS(estimate_derivative(Series{Vector::Zero(2)}), ConfigError);
}

TEST_CASE("derivative estimate converges at second order on smooth data") {
  auto max_err = [](double dt) {
    const int n = static_cast<int>(std::round(2.0 / dt)) + 1;
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = std::sin(i * dt);
    const Series d = estimate_derivative(Series{y, dt});
    double e = 0.0;
    for (int i = 0; i < n; ++i) e = std::max(e, std::abs(d.values(i) - std::cos(i * dt)));
    return e;
  };
  const double ratio = max_err(0.02) / max_err(0.01);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("Pearson correlation") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{2, 4, 6, 8, 10};
  const std::vector<double> c{5, 4, 3, 2, 1};
  const std::vector<double> d{1, 3, 2, 5, 4};
  CHECK(pearson(a, b) == doctest::Approx(1.0));
  CHECK(pearson(a, c) == doctest::Approx(-1.0));
  // Hand computation: deviations (-2..2) and (-2, 0, -1, 2, 1) give 8 / 10.
  CHECK(pearson(a, d) == doctest::Approx(0.8));
  CHECK(pearson(d, a) == doctest::Approx(pearson(a, d)));
  const std::vector<double> flat{3, 3, 3, 3, 3};
  CHECK_THROWS_AS(pearson(a, flat), UndefinedCorrelationError);
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("Pearson is bounded and invariant to affine maps") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x(i) = rng.normal();
      y(i) = 0.3 * x(i) + rng.normal();
    }
    const double r = pearson(Series{x}, Series{y});
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    const Vector y2 = (2.5 * y.array() - 7.0).matrix();
    CHECK(pearson(Series{x}, Series{y2}) == doctest::Approx(r).epsilon(1e-12));
    CHECK(pearson(Series{x}, Series{Vector(-y)}) == doctest::Approx(-r).epsilon(1e-12));
  }
}

TEST_CASE("Scott bandwidth follows the closed form") {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {1, 0}, {0, 2}, {1, 2}};
  // Sample std (n - 1) per axis: x -> sqrt(1/3), y -> sqrt(4/3).
  const double expected = std::pow(4.0, -1.0 / 6.0) * 0.5 * (std::sqrt(1.0 / 3.0) + std::sqrt(4.0 / 3.0));
  CHECK(scott_bandwidth(pts, Grid{}) == doctest::Approx(expected));
  const std::vector<Eigen::Vector2d> one{{0.3, 0.3}};
  CHECK(scott_bandwidth(one, Grid{0, 2, 0, 1, 16}) == doctest::Approx(0.05));
}

TEST_CASE("KDE is a nonnegative density that integrates to one") {
  const std::vector<Eigen::Vector2d> pts{{0.4, 0.5}, {0.6, 0.45}, {0.5, 0.6}};
  const Grid g{-1.0, 2.0, -1.0, 2.0, 121};
  const Matrix d = kde_density(pts, g, 0.1);
  CHECK(d.minCoeff() >= 0.0);
  // Rectangle rule over a grid that covers the kernels.
  CHECK(d.sum() * g.cell_area() == doctest::Approx(1.0).epsilon(1e-3));
  // Row index is y: the value at (x=0.5, y=0.6) dominates the value at (0.6, 0.5)
  // by symmetry only when axes are not swapped.
  const double by = d(static_cast<int>(std::lround((0.6 + 1.0) / 0.025)), static_cast<int>(std::lround(1.5 / 0.025)));
  const double bx = d(static_cast<int>(std::lround(1.5 / 0.025)), static_cast<int>(std::lround((0.6 + 1.0) / 0.025)));
  CHECK(by != doctest::Approx(bx));
  CHECK_THROWS_AS(kde_density(std::vector<Eigen::Vector2d>{}, g), InputError);
}

TEST_CASE("coincident positions give a single peak at that point") {
  const std::vector<Eigen::Vector2d> pts(5, Eigen::Vector2d(0.25, 0.75));
  const Grid g{0, 1, 0, 1, 41};
  const Matrix d = kde_density(pts, g);
  Eigen::Index r = 0, c = 0;
  d.maxCoeff(&r, &c);
  CHECK(g.x_at(static_cast<int>(c)) == doctest::Approx(0.25));
  CHECK(g.y_at(static_cast<int>(r)) == doctest::Approx(0.75));
  int local_maxima = 0;
  for (int i = 1; i + 1 < g.size; ++i) {
    for (int j = 1; j + 1 < g.size; ++j) {
      const double v = d(i, j);
      if (v > d(i - 1, j) && v > d(i + 1, j) && v > d(i, j - 1) && v > d(i, j + 1)) ++local_maxima;
    }
  }
  CHECK(local_maxima == 1);
}

TEST_CASE("mean square displacement of ballistic motion is quadratic") {
  TrajectorySet t;
  t.features.resize(10, 4);
  for (int s = 0; s < 10; ++s) t.features.row(s) << 0.1 * s, 0.0, 1.0, -0.2 * s;
  t.particle_ids = {"1", "2"};
  const Series msd = mean_square_displacement(t);
  REQUIRE(msd.size() == 10);
  CHECK(msd.values(0) == 0.0);
  for (int s = 0; s < 10; ++s) CHECK(msd.values(s) == doctest::Approx(0.5 * (0.01 + 0.04) * s * s));
}
