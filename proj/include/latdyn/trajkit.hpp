#pragma once

#include "latdyn/signal.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace latdyn {

// Time-ordered particle positions. Row t holds x_1, y_1, ..., x_k, y_k.
struct TrajectorySet {
  Eigen::MatrixXd features;
  std::vector<std::string> particle_ids;
  double frame_rate = 30.0;  // metadata only; time is measured in frames
  long first_frame = 0;

  Eigen::Index steps() const { return features.rows(); }
  std::size_t particles() const { return static_cast<std::size_t>(features.cols() / 2); }
  Eigen::Vector2d position(Eigen::Index step, std::size_t particle) const {
    const auto c = static_cast<Eigen::Index>(2 * particle);
    return {features(step, c), features(step, c + 1)};
  }

  // Throws InputError unless the set is non-empty, has an even column count,
  // one id per particle, and only finite values.
  void validate() const;

  // Positions and ids only; frame_rate is not persisted.
  bool same_data(const TrajectorySet& other) const {
    return features == other.features && particle_ids == other.particle_ids &&
           first_frame == other.first_frame;
  }
};

// Default labels "1".."k".
std::vector<std::string> default_particle_ids(std::size_t k);

struct ScalerParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

namespace trajkit {

enum class CsvFormat { Auto, Long, Wide };

// Long format: header exactly `frame,id,x,y`. Wide format: `frame,x_<id>,y_<id>,...`.
// Lines starting with '#' are comments.
TrajectorySet load_trajectories(const std::filesystem::path& path, CsvFormat format = CsvFormat::Auto);
TrajectorySet parse_trajectories(const std::string& text, CsvFormat format = CsvFormat::Auto);

// Canonical writer (long format), exact round trip with load_trajectories.
// Optional comment lines are emitted before the header.
std::string format_trajectories(const TrajectorySet& t, const std::vector<std::string>& comments = {});
void write_trajectories(const TrajectorySet& t, const std::filesystem::path& path,
                        const std::vector<std::string>& comments = {});

struct Scaled {
  TrajectorySet data;
  ScalerParams params;
};

// Per-column (x - min) / (max - min); constant columns map to 0.
Scaled minmax_scale(const TrajectorySet& t);
// Applies previously fitted params to new data (values may leave [0, 1]).
TrajectorySet apply_scale(const TrajectorySet& t, const ScalerParams& s);
TrajectorySet inverse_scale(const TrajectorySet& t, const ScalerParams& s);
Eigen::MatrixXd inverse_scale(const Eigen::MatrixXd& scaled, const ScalerParams& s);

// Savitzky-Golay filter applied to every column independently.
TrajectorySet smooth_trajectories(const TrajectorySet& t, int window, int order);

std::string scaler_to_json(const ScalerParams& s);
ScalerParams scaler_from_json(const std::string& text);

}  // namespace trajkit
}  // namespace latdyn
