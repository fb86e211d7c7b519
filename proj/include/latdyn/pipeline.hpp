#pragma once

// End-to-end discovery workflow and the procedures built on a discovered
// latent model: extrapolation validation, anomaly scoring, state repair and
// density reports.

#include "latdyn/lstmvae.hpp"
#include "latdyn/run_config.hpp"
#include "latdyn/signal.hpp"
#include "latdyn/sindy.hpp"
#include "latdyn/trajkit.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace latdyn::pipeline {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// --- Extrapolation validation ---------------------------------------------

// Comparison after flipping the candidate's sign when that raises the
// correlation. Only the common prefix of both series is used.
struct AlignedComparison {
  double pearson = 0.0;
  double rmse = 0.0;
  bool flipped = false;
  long samples = 0;
};

// Throws UndefinedCorrelationError when either prefix has zero variance and
// InputError when the common prefix is shorter than 2.
AlignedComparison compare_aligned(const Vector& candidate, const Vector& reference);

struct ExtrapolationMetrics {
  AlignedComparison comparison;
  Vector solution;   // ODE solution, up to t_extrapolate samples
  Vector reference;  // long-horizon latent
  bool diverged = false;
};

// Integrates `model` from z0 for t_extrapolate samples and compares it with
// the latent that `long_params` assigns to `data_long`.
ExtrapolationMetrics validate_extrapolation(const sindy::SindyModel& model, double z0, double dt,
                                            const vae::VaeParams& long_params, const Matrix& data_long,
                                            int t_train, int t_extrapolate);

// --- Anomaly scoring -------------------------------------------------------

struct AnomalyConfig {
  signal::SgConfig sg{51, 1};
  double threshold = 3.0;
  double residual_floor = 1e-3;  // lower bound on the baseline spread
  long baseline_length = 0;      // leading samples forming the baseline; 0 = all
};

struct AnomalyReport {
  Vector residual;  // |dz/dt - f(z)| on the filtered latent
  Vector zscore;    // trailing-window mean of residual, standardized; 0 outside the scored range
  std::vector<long> flagged;
  long first_flag = -1;
  double baseline_mean = 0.0;
  double baseline_std = 0.0;
  int window = 0;  // effective window after shrinking to the series length
  long scored_begin = 0;  // [scored_begin, scored_end) excludes half a window at each end
  long scored_end = 0;
};

// Residuals and a rolling z-score of the observed latent against the model.
// The filter window shrinks to the largest odd length that fits short series.
// Samples within half a window of either end are not scored.
AnomalyReport anomaly_score(const signal::Series& z_obs, const sindy::SindyModel& model,
                            const AnomalyConfig& cfg = {});

// Adds `magnitude` to every sample from `at` onward.
Vector inject_step(const Vector& z, long at, double magnitude);

// --- Repair ----------------------------------------------------------------

struct RepairResult {
  Vector latent;             // ODE solution actually decoded
  TrajectorySet states;      // data units when a scaler was given
  Matrix scaled;             // decoder output in model units
  bool diverged = false;
  long diverged_at = -1;
};

// Integrates the model for `samples` samples from z0 and decodes the result.
// A divergent solution is decoded up to the last finite sample.
RepairResult repair_states(const sindy::SindyModel& model, const vae::VaeParams& decoder, double z0,
                           long samples, double dt, const ScalerParams* scaler = nullptr);

struct PrematureRepairReport {
  int epochs = 0;             // epochs the premature model was trained for
  long horizon = 0;           // samples compared
  double own_mse = 0.0;       // premature decode of its own latent
  double repaired_mse = 0.0;  // premature decode of the ODE latent
  bool flipped = false;       // ODE latent sign-flipped to match the premature latent
  bool diverged = false;
  std::vector<vae::LossRecord> history;
};

// Repeats the long-horizon training on `data` (same seed and settings) but
// stops after premature_fraction of the configured epochs, then decodes both
// its own latent and the ODE solution (sign-aligned to that latent) and
// reports the reconstruction errors over the same horizon.
PrematureRepairReport premature_repair(const RunConfig& cfg, const Matrix& data,
                                       const sindy::SindyModel& model, double z0, double dt);

// --- Density ---------------------------------------------------------------

struct DensityFrame {
  long frame = 0;
  Matrix density;  // rows are y, columns are x
  double peak = 0.0;
  double bandwidth = 0.0;
};

struct DensityReport {
  signal::Grid grid;
  std::vector<DensityFrame> frames;
};

// One KDE grid per requested frame number on a lattice covering every
// position of the run padded by 10%. Throws InputError for frames outside
// the recorded range.
DensityReport density_report(const TrajectorySet& t, std::span<const long> frames, int grid_size = 64,
                             std::optional<double> bandwidth = std::nullopt);

std::string density_to_csv(const DensityFrame& f, const signal::Grid& grid,
                           const std::vector<std::string>& comments = {});

// --- Full run --------------------------------------------------------------

struct Metrics {
  double pearson = 0.0;
  double rmse = 0.0;
  double recon_mse = 0.0;
  std::string model_text;
  bool flipped = false;
  bool diverged = false;
  long compared = 0;
};

struct RunArtifacts {
  std::string config_hash;
  std::uint64_t seed = 0;
  TrajectorySet data;  // after smoothing, before scaling
  TrajectorySet scaled;
  ScalerParams scaler;
  vae::VaeParams params;
  vae::LatentSeries latent;
  Vector latent_filtered;
  sindy::SindyModel model;
  sindy::OdeSolution solution_train;
  sindy::OdeSolution solution_extrapolate;
  vae::VaeParams params_long;
  vae::LatentSeries latent_long;
  Metrics metrics;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

// Progress lines go to `log` when set.
using LogFn = std::function<void(const std::string&)>;

// Runs simulate/ingest, preprocessing, training, discovery, integration and
// validation, writing every artifact under cfg.out_dir. On failure a FAILED
// file holding the error is written and the error is rethrown.
RunArtifacts run_discovery(const RunConfig& cfg, const LogFn& log = {});

// The first horizon.extrapolate rows of the simulated or loaded data. Throws
// InputError when a CSV source is shorter than that.
TrajectorySet acquire_data(const RunConfig& cfg);

// Smooths (when configured) and scales (when enabled). With scaling off the
// returned params are the identity map.
trajkit::Scaled preprocess(const RunConfig& cfg, const TrajectorySet& t);

// Comment lines stamping an artifact with the run identity.
std::vector<std::string> stamp(const RunConfig& cfg);

// Sample spacing of the latent series: sindy.dt, or 1 / horizon.train.
double latent_spacing(const RunConfig& cfg);

// Writes the latent CSV (t, z, mu, logvar[, z_filtered]).
std::string latent_to_csv(const vae::LatentSeries& l, const Vector* filtered,
                          const std::vector<std::string>& comments);
vae::LatentSeries latent_from_csv(const std::string& text, Vector* filtered = nullptr);

std::string solution_to_csv(const sindy::OdeSolution& s, const std::vector<std::string>& comments);

}  // namespace latdyn::pipeline
