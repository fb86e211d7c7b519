#include "latdyn/pipeline.hpp"

#include "latdyn/collisim.hpp"
#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace latdyn::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

double mse(const Matrix& a, const Matrix& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

std::string stamped_json(const std::string& body, const RunConfig& cfg) {
  json j = json::parse(body);
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

std::string comment_block(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "# " + l + "\n";
  return out;
}

// Largest odd window <= requested that fits `n` samples and exceeds the order.
signal::SgConfig fit_window(signal::SgConfig sg, Eigen::Index n) {
  if (sg.window > n) sg.window = static_cast<int>(n % 2 == 1 ? n : n - 1);
  if (sg.order >= sg.window) sg.order = sg.window - 1;
  return sg;
}

}  // namespace

// --- Extrapolation validation ---------------------------------------------

AlignedComparison compare_aligned(const Vector& candidate, const Vector& reference) {
  const Eigen::Index n = std::min(candidate.size(), reference.size());
  if (n < 2) throw InputError("comparison needs at least 2 common samples, got " + std::to_string(n));
  const Vector a = candidate.head(n);
  const Vector b = reference.head(n);
  AlignedComparison out;
  out.samples = static_cast<long>(n);
  out.pearson = signal::pearson(signal::Series{a}, signal::Series{b});
  out.flipped = out.pearson < 0.0;
  const Vector aligned = out.flipped ? Vector(-a) : a;
  if (out.flipped) out.pearson = -out.pearson;
  out.rmse = std::sqrt((aligned - b).squaredNorm() / static_cast<double>(n));
  return out;
}

ExtrapolationMetrics validate_extrapolation(const sindy::SindyModel& model, double z0, double dt,
                                            const vae::VaeParams& long_params, const Matrix& data_long,
                                            int t_train, int t_extrapolate) {
  if (t_train < 2 || t_extrapolate < t_train) {
    throw ConfigError("validate_extrapolation: need 2 <= t_train <= t_extrapolate");
  }
  if (data_long.rows() < t_extrapolate) {
    throw InputError("validate_extrapolation: long data has " + std::to_string(data_long.rows()) +
                     " rows, fewer than " + std::to_string(t_extrapolate));
  }
  ExtrapolationMetrics m;
  const sindy::OdeSolution sol = sindy::integrate(model, z0, dt, t_extrapolate - 1);
  m.solution = sol.z;
  m.diverged = sol.diverged;
  m.reference = vae::encode_latent(long_params, data_long.topRows(t_extrapolate)).z;
  m.comparison = compare_aligned(m.solution, m.reference);
  return m;
}

// --- Anomaly scoring -------------------------------------------------------

AnomalyReport anomaly_score(const signal::Series& z_obs, const sindy::SindyModel& model,
                            const AnomalyConfig& cfg) {
  const Eigen::Index n = z_obs.size();
  if (n < 2) throw InputError("anomaly_score: need at least 2 samples");
  if (!(cfg.residual_floor > 0.0)) throw ConfigError("anomaly_score: residual_floor must be > 0");
  cfg.sg.validate();
  const signal::SgConfig sg = fit_window(cfg.sg, n);

  const signal::Series filtered = signal::sg_filter(z_obs, sg);
  signal::Series rate;
  if (n >= 3) {
    rate = signal::estimate_derivative(filtered);
  } else {
    const double d = (filtered.values(1) - filtered.values(0)) / z_obs.dt;
    rate = signal::Series{Vector::Constant(2, d), z_obs.dt};
  }

  AnomalyReport r;
  r.window = sg.window;
  r.residual.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) r.residual(t) = std::abs(rate.values(t) - model.rate(filtered.values(t)));

  // Within half a window of either end the filter extrapolates a one-sided
  // fit, so those samples are neither scored nor part of the baseline.
  Eigen::Index edge = sg.window / 2;
  if (n - 2 * edge < 1) edge = 0;
  r.scored_begin = static_cast<long>(edge);
  r.scored_end = static_cast<long>(n - edge);
  const Eigen::Index limit = cfg.baseline_length > 0 ? std::min<Eigen::Index>(cfg.baseline_length, n - edge) : n - edge;
  const Eigen::Index base = std::max<Eigen::Index>(limit - edge, 1);
  const auto head = r.residual.segment(edge, base).array();
  r.baseline_mean = head.mean();
  r.baseline_std = std::sqrt((head - r.baseline_mean).square().mean());
  const double spread = std::max(r.baseline_std, cfg.residual_floor);

  r.zscore = Vector::Zero(n);
  double acc = 0.0;
  for (Eigen::Index t = edge; t < n - edge; ++t) {
    acc += r.residual(t);
    if (t - edge >= sg.window) acc -= r.residual(t - sg.window);
    const Eigen::Index count = std::min<Eigen::Index>(t - edge + 1, sg.window);
    r.zscore(t) = (acc / static_cast<double>(count) - r.baseline_mean) / spread;
    if (r.zscore(t) > cfg.threshold) r.flagged.push_back(static_cast<long>(t));
  }
  if (!r.flagged.empty()) r.first_flag = r.flagged.front();
  return r;
}

Vector inject_step(const Vector& z, long at, double magnitude) {
  if (at < 0 || at >= z.size()) throw InputError("inject_step: index out of range");
  Vector out = z;
  out.tail(z.size() - at).array() += magnitude;
  return out;
}

// --- Repair ----------------------------------------------------------------

RepairResult repair_states(const sindy::SindyModel& model, const vae::VaeParams& decoder, double z0,
                           long samples, double dt, const ScalerParams* scaler) {
  if (samples < 1) throw ConfigError("repair_states: samples must be >= 1");
  const sindy::OdeSolution sol = sindy::integrate(model, z0, dt, samples - 1);
  RepairResult r;
  r.latent = sol.z;
  r.diverged = sol.diverged;
  r.diverged_at = sol.diverged ? sol.diverged_at : -1;
  r.scaled = vae::decode(decoder, sol.z);
  r.states.features = scaler != nullptr ? trajkit::inverse_scale(r.scaled, *scaler) : r.scaled;
  r.states.particle_ids = default_particle_ids(static_cast<std::size_t>(r.scaled.cols() / 2));
  return r;
}

PrematureRepairReport premature_repair(const RunConfig& cfg, const Matrix& data,
                                       const sindy::SindyModel& model, double z0, double dt) {
  PrematureRepairReport rep;
  vae::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.epochs = std::max(1, static_cast<int>(std::lround(cfg.premature_fraction * cfg.train.epochs)));
  rep.epochs = tc.epochs;
  vae::VaeArch arch = cfg.arch;
  arch.input_size = static_cast<int>(data.cols());
  const vae::TrainResult early = vae::train(arch, data, tc);
  rep.history = early.history;

  const sindy::OdeSolution sol = sindy::integrate(model, z0, dt, data.rows() - 1);
  rep.diverged = sol.diverged;
  const Eigen::Index n = sol.z.size();
  rep.horizon = static_cast<long>(n);
  const Vector own = early.latent.z.head(n);
  Vector solved = sol.z;
  if (n >= 2) {
    try {
      rep.flipped = signal::pearson(signal::Series{solved}, signal::Series{own}) < 0.0;
    } catch (const UndefinedCorrelationError&) {
      rep.flipped = false;
    }
  }
  if (rep.flipped) solved = -solved;
  const Matrix target = data.topRows(n);
  rep.own_mse = mse(vae::decode(early.params, own), target);
  rep.repaired_mse = mse(vae::decode(early.params, solved), target);
  return rep;
}

// --- Density ---------------------------------------------------------------

DensityReport density_report(const TrajectorySet& t, std::span<const long> frames, int grid_size,
                             std::optional<double> bandwidth) {
  t.validate();
  if (grid_size < 2) throw ConfigError("density grid size must be >= 2");
  if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("density bandwidth must be > 0");
  DensityReport out;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (Eigen::Index c = 0; c < t.features.cols(); c += 2) {
    x_lo = std::min(x_lo, t.features.col(c).minCoeff());
    x_hi = std::max(x_hi, t.features.col(c).maxCoeff());
    y_lo = std::min(y_lo, t.features.col(c + 1).minCoeff());
    y_hi = std::max(y_hi, t.features.col(c + 1).maxCoeff());
  }
  const double px = x_hi > x_lo ? 0.1 * (x_hi - x_lo) : 0.5;
  const double py = y_hi > y_lo ? 0.1 * (y_hi - y_lo) : 0.5;
  out.grid = signal::Grid{x_lo - px, x_hi + px, y_lo - py, y_hi + py, grid_size};

  for (const long frame : frames) {
    const long row = frame - t.first_frame;
    if (row < 0 || row >= t.steps()) {
      throw InputError("frame " + std::to_string(frame) + " outside recorded range [" +
                       std::to_string(t.first_frame) + ", " + std::to_string(t.first_frame + t.steps() - 1) +
                       "]");
    }
    std::vector<Eigen::Vector2d> pos;
    for (std::size_t i = 0; i < t.particles(); ++i) pos.push_back(t.position(row, i));
    DensityFrame f;
    f.frame = frame;
    f.bandwidth = bandwidth ? *bandwidth : signal::scott_bandwidth(pos, out.grid);
    f.density = signal::kde_density(pos, out.grid, f.bandwidth);
    f.peak = f.density.maxCoeff();
    out.frames.push_back(std::move(f));
  }
  return out;
}

std::string density_to_csv(const DensityFrame& f, const signal::Grid& grid,
                           const std::vector<std::string>& comments) {
  std::vector<std::string> header{"y"};
  for (int i = 0; i < grid.size; ++i) header.push_back(csv::format_double(grid.x_at(i)));
  Matrix body(grid.size, grid.size + 1);
  for (int j = 0; j < grid.size; ++j) {
    body(j, 0) = grid.y_at(j);
    body.row(j).tail(grid.size) = f.density.row(j);
  }
  std::vector<std::string> c = comments;
  c.push_back("frame: " + std::to_string(f.frame));
  c.push_back("bandwidth: " + csv::format_double(f.bandwidth));
  c.push_back("peak: " + csv::format_double(f.peak));
  return csv::format_table(header, body, c);
}

// --- CSV helpers -----------------------------------------------------------

std::vector<std::string> stamp(const RunConfig& cfg) {
  return {"config_hash: " + cfg.hash(), "seed: " + std::to_string(cfg.seed)};
}

double latent_spacing(const RunConfig& cfg) {
  return cfg.latent_dt > 0.0 ? cfg.latent_dt : 1.0 / static_cast<double>(cfg.t_train);
}

std::string latent_to_csv(const vae::LatentSeries& l, const Vector* filtered,
                          const std::vector<std::string>& comments) {
  std::vector<std::string> header{"t", "z", "mu", "logvar"};
  if (filtered != nullptr) header.push_back("z_filtered");
  Matrix m(l.z.size(), static_cast<Eigen::Index>(header.size()));
  for (Eigen::Index t = 0; t < l.z.size(); ++t) m(t, 0) = static_cast<double>(t);
  m.col(1) = l.z;
  m.col(2) = l.mu;
  m.col(3) = l.logvar;
  if (filtered != nullptr) m.col(4) = *filtered;
  return csv::format_table(header, m, comments);
}

vae::LatentSeries latent_from_csv(const std::string& text, Vector* filtered) {
  const csv::Table table = csv::parse_table(text);
  const Eigen::Index zc = table.column("z");
  if (zc < 0) throw InputError("latent CSV: missing column 'z'");
  vae::LatentSeries l;
  l.z = table.values.col(zc);
  const Eigen::Index mc = table.column("mu");
  const Eigen::Index vc = table.column("logvar");
  l.mu = mc >= 0 ? Vector(table.values.col(mc)) : l.z;
  l.logvar = vc >= 0 ? Vector(table.values.col(vc)) : Vector::Zero(l.z.size());
  if (filtered != nullptr) {
    const Eigen::Index fc = table.column("z_filtered");
    *filtered = fc >= 0 ? Vector(table.values.col(fc)) : Vector();
  }
  return l;
}

std::string solution_to_csv(const sindy::OdeSolution& s, const std::vector<std::string>& comments) {
  Matrix m(s.z.size(), 3);
  for (Eigen::Index i = 0; i < s.z.size(); ++i) {
    m(i, 0) = static_cast<double>(i);
    m(i, 1) = static_cast<double>(i) * s.dt;
    m(i, 2) = s.z(i);
  }
  std::vector<std::string> c = comments;
  c.push_back("dt: " + csv::format_double(s.dt));
  if (s.diverged) c.push_back("diverged_at: " + std::to_string(s.diverged_at));
  return csv::format_table({"step", "time", "z"}, m, c);
}

// --- Full run --------------------------------------------------------------

TrajectorySet acquire_data(const RunConfig& cfg) {
  if (cfg.source == DataSource::Simulate) {
    collisim::SimConfig sim = cfg.sim;
    sim.seed = cfg.seed;
    sim.n_steps = cfg.t_extrapolate;
    return collisim::run(sim);
  }
  TrajectorySet t = trajkit::load_trajectories(cfg.csv_path, cfg.csv_format);
  if (t.steps() < cfg.t_extrapolate) {
    throw InputError(cfg.csv_path.string() + ": " + std::to_string(t.steps()) + " frames, horizon.extrapolate needs " +
                     std::to_string(cfg.t_extrapolate));
  }
  t.features = Matrix(t.features.topRows(cfg.t_extrapolate));
  return t;
}

trajkit::Scaled preprocess(const RunConfig& cfg, const TrajectorySet& t) {
  TrajectorySet src = cfg.smooth_window > 0 ? trajkit::smooth_trajectories(t, cfg.smooth_window, cfg.smooth_order) : t;
  if (cfg.scale) return trajkit::minmax_scale(src);
  trajkit::Scaled out;
  out.params.min = Vector::Zero(src.features.cols());
  out.params.max = Vector::Ones(src.features.cols());
  out.data = std::move(src);
  return out;
}

namespace {

class RunWriter {
 public:
  RunWriter(const RunConfig& cfg, RunArtifacts& art) : cfg_(cfg), art_(art), stamp_(stamp(cfg)) {}

  void write(const std::string& name, const std::string& contents) {
    const fs::path p = cfg_.out_dir / name;
    csv::write_file(p, contents);
    art_.files.push_back(p);
  }
  const std::vector<std::string>& stamp_lines() const { return stamp_; }
  std::string json(const std::string& body) const { return stamped_json(body, cfg_); }

 private:
  const RunConfig& cfg_;
  RunArtifacts& art_;
  std::vector<std::string> stamp_;
};

vae::TrainResult train_logged(const vae::VaeArch& arch, const Matrix& data, const vae::TrainConfig& tc,
                              const std::string& label, const LogFn& log) {
  const int every = std::max(1, tc.epochs / 10);
  return vae::train(arch, data, tc, nullptr, [&](const vae::LossRecord& r) {
    if (log && (r.epoch % every == 0 || r.epoch == tc.epochs)) {
      log(label + " epoch " + std::to_string(r.epoch) + "/" + std::to_string(tc.epochs) +
          " recon " + csv::format_double(r.recon) + " kl " + csv::format_double(r.kl));
    }
    return true;
  });
}

std::string train_extra(const RunConfig& cfg, int horizon) {
  json j;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["horizon"] = horizon;
  return j.dump();
}

void run_steps(const RunConfig& cfg, RunArtifacts& art, const LogFn& log) {
  RunWriter w(cfg, art);
  const auto& st = w.stamp_lines();
  auto note = [&](const std::string& s) {
    if (log) log(s);
  };

  w.write("config.toml", comment_block(st) + cfg.to_text());

  art.data = acquire_data(cfg);
  note("data: " + std::to_string(art.data.steps()) + " frames, " + std::to_string(art.data.particles()) + " particles");
  w.write("trajectories.csv", trajkit::format_trajectories(art.data, st));

  const trajkit::Scaled sc = preprocess(cfg, art.data);
  art.scaled = sc.data;
  art.scaler = sc.params;
  w.write("scaled.csv", trajkit::format_trajectories(art.scaled, st));
  w.write("scaler.json", w.json(trajkit::scaler_to_json(art.scaler)));

  vae::VaeArch arch = cfg.arch;
  arch.input_size = static_cast<int>(art.scaled.features.cols());
  vae::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  const Matrix train_data = art.scaled.features.topRows(cfg.t_train);
  vae::TrainResult short_run = train_logged(arch, train_data, tc, "train", log);
  art.params = std::move(short_run.params);
  art.latent = std::move(short_run.latent);
  for (auto& warn : short_run.warnings) art.warnings.push_back(warn);
  art.metrics.recon_mse = vae::reconstruction_mse(art.params, train_data);
  w.write("vae_train.json", vae::params_to_json(art.params, &tc, train_extra(cfg, cfg.t_train)));
  w.write("loss_train.csv", vae::history_to_csv(short_run.history, st));

  const double dt = latent_spacing(cfg);
  const signal::Series z{art.latent.z, dt};
  art.latent_filtered = signal::sg_filter(z, cfg.latent_sg).values;
  w.write("latent_train.csv", latent_to_csv(art.latent, &art.latent_filtered, st));

  sindy::DiscoverConfig dc;
  dc.sg = cfg.latent_sg;
  dc.degree = cfg.degree;
  dc.threshold = cfg.threshold;
  dc.max_iter = cfg.max_iter;
  art.model = sindy::discover(z, dc);
  for (const auto& warn : art.model.warnings) art.warnings.push_back(warn);
  art.metrics.model_text = sindy::model_to_text(art.model);
  note("model: " + art.metrics.model_text);
  w.write("model.json", w.json(sindy::model_to_json(art.model)));
  w.write("model.txt", comment_block(st) + art.metrics.model_text + "\n");

  const double z0 = art.latent_filtered(0);
  art.solution_train = sindy::integrate(art.model, z0, dt, cfg.t_train - 1);
  art.solution_extrapolate = sindy::integrate(art.model, z0, dt, cfg.t_extrapolate - 1);
  w.write("solution_train.csv", solution_to_csv(art.solution_train, st));
  w.write("solution_extrapolate.csv", solution_to_csv(art.solution_extrapolate, st));
  if (art.solution_extrapolate.diverged) {
    art.warnings.push_back("extrapolation diverged at step " + std::to_string(art.solution_extrapolate.diverged_at));
  }

  if (cfg.t_extrapolate == cfg.t_train) {
    art.params_long = art.params;
    art.latent_long = art.latent;
    w.write("vae_long.json", vae::params_to_json(art.params_long, &tc, train_extra(cfg, cfg.t_extrapolate)));
    w.write("loss_long.csv", vae::history_to_csv(short_run.history, st));
  } else {
    vae::TrainResult long_run = train_logged(arch, art.scaled.features, tc, "long", log);
    art.params_long = std::move(long_run.params);
    art.latent_long = std::move(long_run.latent);
    w.write("vae_long.json", vae::params_to_json(art.params_long, &tc, train_extra(cfg, cfg.t_extrapolate)));
    w.write("loss_long.csv", vae::history_to_csv(long_run.history, st));
  }
  w.write("latent_long.csv", latent_to_csv(art.latent_long, nullptr, st));

  const AlignedComparison cmp = compare_aligned(art.solution_extrapolate.z, art.latent_long.z);
  art.metrics.pearson = cmp.pearson;
  art.metrics.rmse = cmp.rmse;
  art.metrics.flipped = cmp.flipped;
  art.metrics.compared = cmp.samples;
  art.metrics.diverged = art.solution_extrapolate.diverged;
  note("pearson " + csv::format_double(cmp.pearson) + " rmse " + csv::format_double(cmp.rmse));

  json m;
  m["pearson"] = art.metrics.pearson;
  m["rmse"] = art.metrics.rmse;
  m["recon_mse"] = art.metrics.recon_mse;
  m["model_text"] = art.metrics.model_text;
  m["config_hash"] = art.config_hash;
  m["seed"] = art.seed;
  m["sign_flipped"] = art.metrics.flipped;
  m["compared_samples"] = art.metrics.compared;
  m["diverged"] = art.metrics.diverged;
  m["latent_dt"] = dt;
  m["warnings"] = art.warnings;
  w.write("metrics.json", m.dump(2) + "\n");
}

}  // namespace

RunArtifacts run_discovery(const RunConfig& cfg, const LogFn& log) {
  cfg.validate();
  RunArtifacts art;
  art.config_hash = cfg.hash();
  art.seed = cfg.seed;
  fs::create_directories(cfg.out_dir);
  const fs::path failed = cfg.out_dir / "FAILED";
  fs::remove(failed);
  try {
    run_steps(cfg, art, log);
  } catch (const std::exception& e) {
    csv::write_file(failed, comment_block(stamp(cfg)) + e.what() + "\n");
    throw;
  }
  return art;
}

}  // namespace latdyn::pipeline
