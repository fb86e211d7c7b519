#pragma once

#include "latdyn/collisim.hpp"
#include "latdyn/lstmvae.hpp"
#include "latdyn/signal.hpp"
#include "latdyn/trajkit.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace latdyn {

enum class DataSource { Simulate, Csv };

// Every setting of a discovery run. The canonical text form (to_text) lists
// each key once in a fixed order, except the output directory, so runs that
// differ only in where they write share a hash. The hash stamps all artifacts.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "latdyn_run";

  // [data]
  DataSource source = DataSource::Simulate;
  std::filesystem::path csv_path;
  trajkit::CsvFormat csv_format = trajkit::CsvFormat::Auto;

  // [simulate]; n_steps is used by the standalone simulate command, a full
  // run simulates horizon.extrapolate steps. Runs start clustered
  // (init_spread 0.3) so the system disperses over the horizon.
  collisim::SimConfig sim;

  // [preprocess]; smooth_window 0 disables trajectory smoothing, which
  // happens before scaling.
  int smooth_window = 0;
  int smooth_order = 2;
  bool scale = true;

  // [vae]
  vae::VaeArch arch;
  vae::TrainConfig train;

  // [sindy]
  signal::SgConfig latent_sg{51, 1};
  int degree = 3;
  double threshold = 0.1;
  int max_iter = 20;
  double latent_dt = 0.0;  // 0 = 1 / horizon.train, so the training horizon spans unit time

  // [horizon]
  int t_train = 500;
  int t_extrapolate = 750;

  // [anomaly]
  double anomaly_threshold = 3.0;
  double residual_floor = 1e-3;

  // [repair]
  double premature_fraction = 0.3;

  RunConfig();

  void validate() const;
  std::string to_text() const;
  // 16 hex digits (FNV-1a 64) of to_text().
  std::string hash() const;

  // Sets one "section.key" (or top-level "key") from its text value.
  void set(const std::string& key, const std::string& value);
  // Text value of one key, unquoted.
  std::string get(const std::string& key) const;
  // Every settable key in canonical order.
  static std::vector<std::string> keys();
};

// Parses `key = value` lines grouped under `[section]` headers; '#' starts a
// comment. Strings may be double-quoted. Unknown keys are errors.
RunConfig parse_run_config(const std::string& text, RunConfig base = RunConfig());
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = RunConfig());

}  // namespace latdyn
