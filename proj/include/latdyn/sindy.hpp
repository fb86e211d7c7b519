#pragma once

// Sparse identification of a scalar autonomous ODE dz/dt = f(z) with a
// monomial candidate library and sequentially thresholded least squares.

#include "latdyn/signal.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace latdyn::sindy {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Terms [1, z, z^2, ..., z^degree].
struct CandidateLibrary {
  int degree = 3;

  int size() const { return degree + 1; }
  std::string term_name(int j) const;
};

// Row t = [1, z_t, ..., z_t^n].
Matrix build_library(const Vector& z, int degree);

struct StlsqResult {
  Vector coefficients;
  int iterations = 0;
  double residual = 0.0;  // RMS of dz/dt - theta * xi
  bool rank_deficient = false;
  bool empty = false;  // every coefficient thresholded away
  bool converged = false;
};

StlsqResult stlsq(const Matrix& theta, const Vector& dzdt, double threshold, int max_iter = 20);

struct SindyModel {
  CandidateLibrary library;
  Vector coefficients;  // length degree + 1, ascending degree
  double threshold = 0.1;
  // Flat provenance record (source, filter settings, fit diagnostics).
  std::vector<std::pair<std::string, std::string>> provenance;
  std::vector<std::string> warnings;

  // f(z) = sum_j xi_j z^j (Horner).
  double rate(double z) const;
  bool operator==(const SindyModel& other) const;
};

struct DiscoverConfig {
  signal::SgConfig sg{51, 1};
  int degree = 3;
  double threshold = 0.1;
  int max_iter = 20;
};

// sg_filter -> estimate_derivative -> build_library -> stlsq.
SindyModel discover(const signal::Series& z, const DiscoverConfig& cfg);

struct OdeSolution {
  Vector z;  // z(0) = z0; n_steps + 1 samples unless diverged
  double dt = 1.0;
  double z0 = 0.0;
  bool diverged = false;
  long diverged_at = -1;  // step index at which |z| exceeded the guard
};

inline constexpr double kDivergenceBound = 1e6;

// Classical fixed-step RK4. Stops with `diverged` set once |z| > 1e6 or a
// stage turns non-finite; the partial solution excludes the offending step.
OdeSolution integrate(const SindyModel& model, double z0, double dt, long n_steps);

// "dz/dt = c0 + c1 z + c2 z^2 ..." omitting zero terms, three decimals.
std::string model_to_text(const SindyModel& model);

std::string model_to_json(const SindyModel& model);
SindyModel model_from_json(const std::string& text);

}  // namespace latdyn::sindy
