#include "latdyn/latdyn.h"

#include "latdyn/collisim.hpp"
#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"
#include "latdyn/lstmvae.hpp"
#include "latdyn/pipeline.hpp"
#include "latdyn/run_config.hpp"
#include "latdyn/sindy.hpp"
#include "latdyn/trajkit.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <new>
#include <string>

struct ld_config {
  latdyn::RunConfig cfg;
  std::string text;
  std::string hash;
  std::string value;
};

struct ld_trajectory {
  latdyn::TrajectorySet data;
};

struct ld_model {
  latdyn::sindy::SindyModel model;
  std::string text;
};

namespace {

namespace fs = std::filesystem;
using namespace latdyn;
using json = nlohmann::ordered_json;

thread_local std::string g_last_error;

ld_status from_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return LD_ERR_CONFIG;
    case ErrorKind::Input: return LD_ERR_INPUT;
    case ErrorKind::Shape: return LD_ERR_SHAPE;
    case ErrorKind::Numerical: return LD_ERR_NUMERICAL;
    case ErrorKind::Geometry: return LD_ERR_GEOMETRY;
    case ErrorKind::Contract: return LD_ERR_CONTRACT;
    case ErrorKind::Correlation: return LD_ERR_CORRELATION;
  }
  return LD_ERR_INTERNAL;
}

ld_status fail(ld_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
ld_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    return fail(from_kind(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(LD_ERR_INPUT, std::string("JSON: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(LD_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LD_ERR_INTERNAL, "unknown error");
  }
}

ld_status null_arg(const char* name) { return fail(LD_ERR_CONTRACT, std::string(name) + " must not be NULL"); }

pipeline::LogFn logger(ld_log_fn log, void* user) {
  if (log == nullptr) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

std::string stamped(const RunConfig& cfg, const std::string& body) {
  json j = json::parse(body);
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

signal::Series latent_series(const RunConfig& cfg, const char* path) {
  const vae::LatentSeries l = pipeline::latent_from_csv(csv::read_file(path));
  return {l.z, pipeline::latent_spacing(cfg)};
}

sindy::SindyModel read_model(const char* path) { return sindy::model_from_json(csv::read_file(path)); }

vae::TrainConfig train_config(const RunConfig& cfg) {
  vae::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  return tc;
}

std::vector<std::string> stamp_lines(const RunConfig& cfg) { return pipeline::stamp(cfg); }

}  // namespace

extern "C" {

const char* ld_version(void) { return "0.1.0"; }

const char* ld_last_error(void) { return g_last_error.c_str(); }

const char* ld_status_name(ld_status s) {
  switch (s) {
    case LD_OK: return "ok";
    case LD_ERR_CONFIG: return "config";
    case LD_ERR_INPUT: return "input";
    case LD_ERR_SHAPE: return "shape";
    case LD_ERR_NUMERICAL: return "numerical";
    case LD_ERR_GEOMETRY: return "geometry";
    case LD_ERR_CONTRACT: return "contract";
    case LD_ERR_CORRELATION: return "correlation";
    case LD_ERR_IO: return "io";
    case LD_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int ld_exit_code(ld_status s) {
  switch (s) {
    case LD_OK: return 0;
    case LD_ERR_NUMERICAL:
    case LD_ERR_GEOMETRY:
    case LD_ERR_CORRELATION: return 2;
    default: return 1;
  }
}

// --- Run configuration -------------------------------------------------------

ld_config* ld_config_new(void) {
  try {
    return new ld_config();
  } catch (...) {
    g_last_error = "out of memory";
    return nullptr;
  }
}

void ld_config_free(ld_config* c) { delete c; }

ld_status ld_config_load(ld_config* c, const char* path) {
  if (c == nullptr || path == nullptr) return null_arg("config and path");
  return guarded([&] {
    c->cfg = load_run_config(path, c->cfg);
    return LD_OK;
  });
}

ld_status ld_config_parse(ld_config* c, const char* text) {
  if (c == nullptr || text == nullptr) return null_arg("config and text");
  return guarded([&] {
    c->cfg = parse_run_config(text, c->cfg);
    return LD_OK;
  });
}

ld_status ld_config_set(ld_config* c, const char* key, const char* value) {
  if (c == nullptr || key == nullptr || value == nullptr) return null_arg("config, key and value");
  return guarded([&] {
    c->cfg.set(key, value);
    return LD_OK;
  });
}

ld_status ld_config_get(ld_config* c, const char* key, const char** value) {
  if (c == nullptr || key == nullptr || value == nullptr) return null_arg("config, key and value");
  return guarded([&] {
    c->value = c->cfg.get(key);
    *value = c->value.c_str();
    return LD_OK;
  });
}

ld_status ld_config_validate(const ld_config* c) {
  if (c == nullptr) return null_arg("config");
  return guarded([&] {
    c->cfg.validate();
    return LD_OK;
  });
}

const char* ld_config_text(ld_config* c) {
  if (c == nullptr) return "";
  c->text = c->cfg.to_text();
  return c->text.c_str();
}

const char* ld_config_hash(ld_config* c) {
  if (c == nullptr) return "";
  c->hash = c->cfg.hash();
  return c->hash.c_str();
}

size_t ld_config_key_count(void) { return RunConfig::keys().size(); }

const char* ld_config_key(size_t index) {
  static const std::vector<std::string> keys = RunConfig::keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

// --- Trajectories --------------------------------------------------------------

ld_status ld_trajectory_load(const char* path, ld_csv_format format, ld_trajectory** out) {
  if (path == nullptr || out == nullptr) return null_arg("path and out");
  *out = nullptr;
  return guarded([&] {
    auto t = std::make_unique<ld_trajectory>();
    t->data = trajkit::load_trajectories(path, static_cast<trajkit::CsvFormat>(format));
    *out = t.release();
    return LD_OK;
  });
}

ld_status ld_trajectory_save(const ld_trajectory* t, const char* path) {
  if (t == nullptr || path == nullptr) return null_arg("trajectory and path");
  return guarded([&] {
    trajkit::write_trajectories(t->data, path);
    return LD_OK;
  });
}

ld_status ld_trajectory_simulate(const ld_config* c, ld_trajectory** out) {
  if (c == nullptr || out == nullptr) return null_arg("config and out");
  *out = nullptr;
  return guarded([&] {
    collisim::SimConfig sim = c->cfg.sim;
    sim.seed = c->cfg.seed;
    auto t = std::make_unique<ld_trajectory>();
    t->data = collisim::run(sim);
    *out = t.release();
    return LD_OK;
  });
}

void ld_trajectory_free(ld_trajectory* t) { delete t; }

size_t ld_trajectory_steps(const ld_trajectory* t) {
  return t == nullptr ? 0 : static_cast<size_t>(t->data.steps());
}

size_t ld_trajectory_particles(const ld_trajectory* t) { return t == nullptr ? 0 : t->data.particles(); }

ld_status ld_trajectory_features(const ld_trajectory* t, double* out, size_t n) {
  if (t == nullptr || out == nullptr) return null_arg("trajectory and out");
  const auto& f = t->data.features;
  if (n < static_cast<size_t>(f.size())) return fail(LD_ERR_SHAPE, "output buffer too small");
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, f.rows(), f.cols()) = f;
  return LD_OK;
}

// --- Models --------------------------------------------------------------------

ld_status ld_model_load(const char* path, ld_model** out) {
  if (path == nullptr || out == nullptr) return null_arg("path and out");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<ld_model>();
    m->model = read_model(path);
    *out = m.release();
    return LD_OK;
  });
}

void ld_model_free(ld_model* m) { delete m; }

int ld_model_degree(const ld_model* m) { return m == nullptr ? 0 : m->model.library.degree; }

ld_status ld_model_coefficients(const ld_model* m, double* out, size_t n) {
  if (m == nullptr || out == nullptr) return null_arg("model and out");
  const auto& c = m->model.coefficients;
  if (n < static_cast<size_t>(c.size())) return fail(LD_ERR_SHAPE, "output buffer too small");
  for (Eigen::Index i = 0; i < c.size(); ++i) out[i] = c(i);
  return LD_OK;
}

double ld_model_rate(const ld_model* m, double z) { return m == nullptr ? NAN : m->model.rate(z); }

const char* ld_model_text(ld_model* m) {
  if (m == nullptr) return "";
  m->text = sindy::model_to_text(m->model);
  return m->text.c_str();
}

ld_status ld_model_integrate(const ld_model* m, double z0, double dt, size_t samples, double* out, size_t n,
                             size_t* written) {
  if (m == nullptr || out == nullptr || written == nullptr) return null_arg("model, out and written");
  *written = 0;
  if (samples == 0) return fail(LD_ERR_CONFIG, "samples must be >= 1");
  return guarded([&] {
    const auto sol = sindy::integrate(m->model, z0, dt, static_cast<long>(samples) - 1);
    const size_t k = std::min(n, static_cast<size_t>(sol.z.size()));
    for (size_t i = 0; i < k; ++i) out[i] = sol.z(static_cast<Eigen::Index>(i));
    *written = k;
    if (sol.diverged) return fail(LD_ERR_NUMERICAL, "solution diverged at step " + std::to_string(sol.diverged_at));
    return LD_OK;
  });
}

// --- Workflow steps ---------------------------------------------------------

ld_status ld_cmd_simulate(const ld_config* c, const char* out_csv) {
  if (c == nullptr || out_csv == nullptr) return null_arg("config and out_csv");
  return guarded([&] {
    collisim::SimConfig sim = c->cfg.sim;
    sim.seed = c->cfg.seed;
    trajkit::write_trajectories(collisim::run(sim), out_csv, stamp_lines(c->cfg));
    return LD_OK;
  });
}

ld_status ld_cmd_ingest(const ld_config* c, const char* in_csv, const char* out_dir) {
  if (c == nullptr || in_csv == nullptr || out_dir == nullptr) return null_arg("config, in_csv and out_dir");
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const TrajectorySet raw = trajkit::load_trajectories(in_csv, cfg.csv_format);
    const trajkit::Scaled sc = pipeline::preprocess(cfg, raw);
    const fs::path dir(out_dir);
    const auto st = stamp_lines(cfg);
    trajkit::write_trajectories(raw, dir / "trajectories.csv", st);
    trajkit::write_trajectories(sc.data, dir / "scaled.csv", st);
    csv::write_file(dir / "scaler.json", stamped(cfg, trajkit::scaler_to_json(sc.params)));
    return LD_OK;
  });
}

ld_status ld_cmd_train(const ld_config* c, const char* scaled_csv, const char* out_dir, size_t rows,
                       const char* tag, ld_log_fn log, void* user) {
  if (c == nullptr || scaled_csv == nullptr || out_dir == nullptr) return null_arg("config, scaled_csv and out_dir");
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const TrajectorySet t = trajkit::load_trajectories(scaled_csv);
    const size_t n = rows == 0 ? static_cast<size_t>(cfg.t_train) : rows;
    if (n > static_cast<size_t>(t.steps())) {
      throw InputError(std::string(scaled_csv) + ": " + std::to_string(t.steps()) + " rows, " + std::to_string(n) +
                       " requested");
    }
    const Eigen::MatrixXd data = t.features.topRows(static_cast<Eigen::Index>(n));
    vae::VaeArch arch = cfg.arch;
    arch.input_size = static_cast<int>(data.cols());
    const vae::TrainConfig tc = train_config(cfg);
    const auto lg = logger(log, user);
    const int every = std::max(1, tc.epochs / 10);
    const vae::TrainResult r = vae::train(arch, data, tc, nullptr, [&](const vae::LossRecord& rec) {
      if (lg && (rec.epoch % every == 0 || rec.epoch == tc.epochs)) {
        lg("epoch " + std::to_string(rec.epoch) + " recon " + csv::format_double(rec.recon) + " kl " +
           csv::format_double(rec.kl));
      }
      return true;
    });
    const std::string name = tag != nullptr && *tag != '\0' ? tag : "train";
    const fs::path dir(out_dir);
    const auto st = stamp_lines(cfg);
    json extra;
    extra["config_hash"] = cfg.hash();
    extra["seed"] = cfg.seed;
    extra["horizon"] = n;
    csv::write_file(dir / ("vae_" + name + ".json"), vae::params_to_json(r.params, &tc, extra.dump()));
    csv::write_file(dir / ("loss_" + name + ".csv"), vae::history_to_csv(r.history, st));
    Eigen::VectorXd filtered;
    const bool filt = r.latent.z.size() >= cfg.latent_sg.window;
    if (filt) filtered = signal::sg_filter(signal::Series{r.latent.z}, cfg.latent_sg).values;
    csv::write_file(dir / ("latent_" + name + ".csv"), pipeline::latent_to_csv(r.latent, filt ? &filtered : nullptr, st));
    if (lg) lg("recon_mse " + csv::format_double(vae::reconstruction_mse(r.params, data)));
    return LD_OK;
  });
}

ld_status ld_cmd_encode(const ld_config* c, const char* vae_json, const char* data_csv, const char* out_csv) {
  if (c == nullptr || vae_json == nullptr || data_csv == nullptr || out_csv == nullptr) {
    return null_arg("config, vae_json, data_csv and out_csv");
  }
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const vae::VaeParams p = vae::params_from_json(csv::read_file(vae_json));
    const TrajectorySet t = trajkit::load_trajectories(data_csv);
    const vae::LatentSeries l = vae::encode_latent(p, t.features);
    Eigen::VectorXd filtered;
    const bool filt = l.z.size() >= cfg.latent_sg.window;
    if (filt) filtered = signal::sg_filter(signal::Series{l.z}, cfg.latent_sg).values;
    csv::write_file(out_csv, pipeline::latent_to_csv(l, filt ? &filtered : nullptr, stamp_lines(cfg)));
    return LD_OK;
  });
}

ld_status ld_cmd_discover(const ld_config* c, const char* latent_csv, const char* out_dir) {
  if (c == nullptr || latent_csv == nullptr || out_dir == nullptr) return null_arg("config, latent_csv and out_dir");
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    sindy::DiscoverConfig dc;
    dc.sg = cfg.latent_sg;
    dc.degree = cfg.degree;
    dc.threshold = cfg.threshold;
    dc.max_iter = cfg.max_iter;
    const sindy::SindyModel m = sindy::discover(latent_series(cfg, latent_csv), dc);
    const fs::path dir(out_dir);
    csv::write_file(dir / "model.json", stamped(cfg, sindy::model_to_json(m)));
    std::string txt;
    for (const auto& line : stamp_lines(cfg)) txt += "# " + line + "\n";
    csv::write_file(dir / "model.txt", txt + sindy::model_to_text(m) + "\n");
    return LD_OK;
  });
}

ld_status ld_latent_z0(const ld_config* c, const char* latent_csv, double* z0) {
  if (c == nullptr || latent_csv == nullptr || z0 == nullptr) return null_arg("config, latent_csv and z0");
  return guarded([&] {
    Eigen::VectorXd filtered;
    const vae::LatentSeries l = pipeline::latent_from_csv(csv::read_file(latent_csv), &filtered);
    if (filtered.size() > 0) {
      *z0 = filtered(0);
    } else {
      *z0 = signal::sg_filter(signal::Series{l.z}, c->cfg.latent_sg).values(0);
    }
    return LD_OK;
  });
}

ld_status ld_cmd_solve(const ld_config* c, const char* model_json, double z0, size_t samples, const char* out_csv) {
  if (c == nullptr || model_json == nullptr || out_csv == nullptr) return null_arg("config, model_json and out_csv");
  if (samples == 0) return fail(LD_ERR_CONFIG, "samples must be >= 1");
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const auto sol =
        sindy::integrate(read_model(model_json), z0, pipeline::latent_spacing(cfg), static_cast<long>(samples) - 1);
    csv::write_file(out_csv, pipeline::solution_to_csv(sol, stamp_lines(cfg)));
    if (sol.diverged) return fail(LD_ERR_NUMERICAL, "solution diverged at step " + std::to_string(sol.diverged_at));
    return LD_OK;
  });
}

ld_status ld_cmd_validate(const ld_config* c, const char* solution_csv, const char* latent_csv, const char* out_json,
                          double* pearson, double* rmse) {
  if (c == nullptr || solution_csv == nullptr || latent_csv == nullptr) {
    return null_arg("config, solution_csv and latent_csv");
  }
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const auto sol = latent_series(cfg, solution_csv);
    const auto ref = latent_series(cfg, latent_csv);
    const auto cmp = pipeline::compare_aligned(sol.values, ref.values);
    if (pearson != nullptr) *pearson = cmp.pearson;
    if (rmse != nullptr) *rmse = cmp.rmse;
    if (out_json != nullptr) {
      json j;
      j["pearson"] = cmp.pearson;
      j["rmse"] = cmp.rmse;
      j["sign_flipped"] = cmp.flipped;
      j["compared_samples"] = cmp.samples;
      j["config_hash"] = cfg.hash();
      j["seed"] = cfg.seed;
      csv::write_file(out_json, j.dump(2) + "\n");
    }
    return LD_OK;
  });
}

ld_status ld_cmd_anomaly(const ld_config* c, const char* latent_csv, const char* model_json, const char* out_csv,
                         long* first_flag) {
  if (c == nullptr || latent_csv == nullptr || model_json == nullptr || out_csv == nullptr) {
    return null_arg("config, latent_csv, model_json and out_csv");
  }
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const auto z = latent_series(cfg, latent_csv);
    pipeline::AnomalyConfig ac;
    ac.sg = cfg.latent_sg;
    ac.threshold = cfg.anomaly_threshold;
    ac.residual_floor = cfg.residual_floor;
    ac.baseline_length = cfg.t_train;
    const auto rep = pipeline::anomaly_score(z, read_model(model_json), ac);
    Eigen::MatrixXd m(z.size(), 5);
    for (Eigen::Index t = 0; t < z.size(); ++t) {
      m(t, 0) = static_cast<double>(t);
      m(t, 1) = z.values(t);
      m(t, 2) = rep.residual(t);
      m(t, 3) = rep.zscore(t);
      m(t, 4) = rep.zscore(t) > ac.threshold ? 1.0 : 0.0;
    }
    auto st = stamp_lines(cfg);
    st.push_back("window: " + std::to_string(rep.window));
    st.push_back("baseline_mean: " + csv::format_double(rep.baseline_mean));
    st.push_back("baseline_std: " + csv::format_double(rep.baseline_std));
    st.push_back("first_flag: " + std::to_string(rep.first_flag));
    csv::write_file(out_csv, csv::format_table({"t", "z", "residual", "zscore", "flag"}, m, st));
    if (first_flag != nullptr) *first_flag = rep.first_flag;
    return LD_OK;
  });
}

ld_status ld_cmd_repair(const ld_config* c, const char* model_json, const char* vae_json, double z0, size_t samples,
                        const char* scaler_json, const char* out_csv) {
  if (c == nullptr || model_json == nullptr || vae_json == nullptr || out_csv == nullptr) {
    return null_arg("config, model_json, vae_json and out_csv");
  }
  if (samples == 0) return fail(LD_ERR_CONFIG, "samples must be >= 1");
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const vae::VaeParams p = vae::params_from_json(csv::read_file(vae_json));
    ScalerParams scaler;
    if (scaler_json != nullptr) scaler = trajkit::scaler_from_json(csv::read_file(scaler_json));
    const auto r = pipeline::repair_states(read_model(model_json), p, z0, static_cast<long>(samples),
                                           pipeline::latent_spacing(cfg), scaler_json != nullptr ? &scaler : nullptr);
    auto st = stamp_lines(cfg);
    if (r.diverged) st.push_back("diverged_at: " + std::to_string(r.diverged_at));
    trajkit::write_trajectories(r.states, out_csv, st);
    if (r.diverged) return fail(LD_ERR_NUMERICAL, "solution diverged at step " + std::to_string(r.diverged_at));
    return LD_OK;
  });
}

ld_status ld_cmd_repair_premature(const ld_config* c, const char* run_dir, double* own_mse, double* repaired_mse,
                                  ld_log_fn log, void* user) {
  if (c == nullptr || run_dir == nullptr) return null_arg("config and run_dir");
  return guarded([&] {
    const RunConfig& cfg = c->cfg;
    const fs::path dir(run_dir);
    const TrajectorySet scaled = trajkit::load_trajectories(dir / "scaled.csv");
    const auto model = sindy::model_from_json(csv::read_file(dir / "model.json"));
    double z0 = 0.0;
    const std::string latent_path = (dir / "latent_train.csv").string();
    if (ld_status s = ld_latent_z0(c, latent_path.c_str(), &z0); s != LD_OK) return s;
    const Eigen::Index rows = std::min<Eigen::Index>(scaled.steps(), cfg.t_extrapolate);
    const auto lg = logger(log, user);
    if (lg) lg("premature training on " + std::to_string(rows) + " rows");
    const auto rep = pipeline::premature_repair(cfg, scaled.features.topRows(rows), model, z0,
                                                pipeline::latent_spacing(cfg));
    if (own_mse != nullptr) *own_mse = rep.own_mse;
    if (repaired_mse != nullptr) *repaired_mse = rep.repaired_mse;
    json j;
    j["premature_epochs"] = rep.epochs;
    j["horizon"] = rep.horizon;
    j["own_mse"] = rep.own_mse;
    j["repaired_mse"] = rep.repaired_mse;
    j["repaired_lower"] = rep.repaired_mse < rep.own_mse;
    j["sign_flipped"] = rep.flipped;
    j["diverged"] = rep.diverged;
    j["config_hash"] = cfg.hash();
    j["seed"] = cfg.seed;
    csv::write_file(dir / "repair_report.json", j.dump(2) + "\n");
    if (lg) lg("own_mse " + csv::format_double(rep.own_mse) + " repaired_mse " + csv::format_double(rep.repaired_mse));
    return LD_OK;
  });
}

ld_status ld_cmd_density(const char* traj_csv, const long* frames, size_t n_frames, int grid_size, double bandwidth,
                         const char* out_dir) {
  if (traj_csv == nullptr || out_dir == nullptr || (frames == nullptr && n_frames > 0)) {
    return null_arg("traj_csv, frames and out_dir");
  }
  return guarded([&] {
    const TrajectorySet t = trajkit::load_trajectories(traj_csv);
    const std::span<const long> fs_span(frames, n_frames);
    const auto rep = pipeline::density_report(t, fs_span, grid_size,
                                              bandwidth > 0.0 ? std::optional<double>(bandwidth) : std::nullopt);
    const fs::path dir(out_dir);
    json j;
    j["grid"] = {{"x_min", rep.grid.x_min}, {"x_max", rep.grid.x_max}, {"y_min", rep.grid.y_min},
                 {"y_max", rep.grid.y_max}, {"size", rep.grid.size}};
    j["frames"] = json::array();
    for (const auto& f : rep.frames) {
      csv::write_file(dir / ("density_" + std::to_string(f.frame) + ".csv"), pipeline::density_to_csv(f, rep.grid));
      j["frames"].push_back({{"frame", f.frame}, {"peak", f.peak}, {"bandwidth", f.bandwidth}});
    }
    csv::write_file(dir / "density.json", j.dump(2) + "\n");
    return LD_OK;
  });
}

ld_status ld_cmd_run(const ld_config* c, ld_log_fn log, void* user) {
  if (c == nullptr) return null_arg("config");
  return guarded([&] {
    const auto art = pipeline::run_discovery(c->cfg, logger(log, user));
    if (art.metrics.diverged) {
      return fail(LD_ERR_NUMERICAL, "extrapolation diverged at step " +
                                        std::to_string(art.solution_extrapolate.diverged_at));
    }
    return LD_OK;
  });
}

}  // extern "C"
