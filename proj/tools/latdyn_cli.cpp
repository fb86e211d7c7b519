// Command-line front end. Talks to the library only through the C API.

#include "latdyn/latdyn.h"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct ConfigDeleter {
  void operator()(ld_config* c) const { ld_config_free(c); }
};
using ConfigPtr = std::unique_ptr<ld_config, ConfigDeleter>;

// Exit code after printing the library error for a failed call.
int report(ld_status s, const char* what) {
  if (s == LD_OK) return 0;
  std::fprintf(stderr, "latdyn %s: %s error: %s\n", what, ld_status_name(s), ld_last_error());
  return ld_exit_code(s);
}

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

struct Globals {
  std::string config_path;
  std::optional<unsigned long long> seed;
  std::string out;
  std::map<std::string, std::string> overrides;
};

// Defaults, then the config file, then per-key flags, then --seed and --out.
ld_status build_config(const Globals& g, ConfigPtr& cfg) {
  cfg.reset(ld_config_new());
  if (!cfg) return LD_ERR_INTERNAL;
  if (!g.config_path.empty()) {
    if (ld_status s = ld_config_load(cfg.get(), g.config_path.c_str()); s != LD_OK) return s;
  }
  for (const auto& [key, value] : g.overrides) {
    if (ld_status s = ld_config_set(cfg.get(), key.c_str(), value.c_str()); s != LD_OK) return s;
  }
  if (g.seed) {
    const std::string v = std::to_string(*g.seed);
    if (ld_status s = ld_config_set(cfg.get(), "seed", v.c_str()); s != LD_OK) return s;
  }
  if (!g.out.empty()) {
    if (ld_status s = ld_config_set(cfg.get(), "out", g.out.c_str()); s != LD_OK) return s;
  }
  return LD_OK;
}

std::string out_dir(ld_config* cfg) {
  const char* v = nullptr;
  ld_config_get(cfg, "out", &v);
  return v != nullptr ? v : ".";
}

long config_long(ld_config* cfg, const char* key) {
  const char* v = nullptr;
  if (ld_config_get(cfg, key, &v) != LD_OK || v == nullptr) return 0;
  return std::stol(v);
}

std::string in_out(const std::string& given, const std::string& dir, const char* name) {
  return given.empty() ? (fs::path(dir) / name).string() : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent dynamics discovery: simulate or ingest trajectories, learn a scalar latent, "
               "fit a sparse ODE to it and use the ODE for extrapolation, anomaly scoring and repair."};
  app.require_subcommand(1);
  app.set_version_flag("--version", ld_version());

  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for simulation and training (overrides the config)");
  app.add_option("--out", g.out, "output directory");
  std::vector<std::string> raw_overrides;
  app.add_option("--set", raw_overrides, "section.key=value override (repeatable)");
  std::map<std::string, std::string> key_flags;
  for (size_t i = 0; i < ld_config_key_count(); ++i) {
    const std::string key = ld_config_key(i);
    if (key == "seed" || key == "out") continue;
    app.add_option("--" + key, key_flags[key], "config key " + key)->group("Configuration keys");
  }

  auto* sim = app.add_subcommand("simulate", "simulate elastic collisions and write a trajectory CSV");
  std::string sim_output;
  sim->add_option("-o,--output", sim_output, "trajectory CSV (default OUT/trajectories.csv)");

  auto* ingest = app.add_subcommand("ingest", "load a trajectory CSV, smooth and scale it");
  std::string ingest_input;
  ingest->add_option("-i,--input", ingest_input, "trajectory CSV (long or wide)")->required()->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "train the VAE on scaled trajectories");
  std::string train_data, train_tag = "train";
  size_t train_rows = 0;
  train->add_option("--data", train_data, "scaled trajectory CSV (default OUT/scaled.csv)");
  train->add_option("--rows", train_rows, "leading rows to train on (default horizon.train)");
  train->add_option("--tag", train_tag, "artifact name suffix")->capture_default_str();

  auto* encode = app.add_subcommand("encode", "encode trajectories with a trained VAE");
  std::string enc_vae, enc_data, enc_output;
  encode->add_option("--vae", enc_vae, "VAE JSON (default OUT/vae_train.json)");
  encode->add_option("--data", enc_data, "scaled trajectory CSV (default OUT/scaled.csv)");
  encode->add_option("-o,--output", enc_output, "latent CSV (default OUT/latent.csv)");

  auto* discover = app.add_subcommand("discover", "fit a sparse polynomial ODE to a latent series");
  std::string disc_latent;
  discover->add_option("--latent", disc_latent, "latent CSV (default OUT/latent_train.csv)");

  // Shared by solve and repair: z0 directly or from a latent CSV.
  std::optional<double> z0_opt;
  std::string z0_latent;
  auto add_z0 = [&](CLI::App* sub) {
    sub->add_option("--z0", z0_opt, "initial latent value");
    sub->add_option("--latent", z0_latent, "take z0 from this latent CSV (default OUT/latent_train.csv)");
  };

  auto* solve = app.add_subcommand("solve", "integrate a discovered model");
  std::string solve_model, solve_output;
  size_t solve_samples = 0;
  solve->add_option("--model", solve_model, "model JSON (default OUT/model.json)");
  solve->add_option("--samples", solve_samples, "samples to produce (default horizon.extrapolate)");
  solve->add_option("-o,--output", solve_output, "solution CSV (default OUT/solution.csv)");
  add_z0(solve);

  auto* validate = app.add_subcommand("validate", "compare an ODE solution with a latent series");
  std::string val_solution, val_latent, val_output;
  validate->add_option("--solution", val_solution, "solution CSV (default OUT/solution_extrapolate.csv)");
  validate->add_option("--reference", val_latent, "latent CSV (default OUT/latent_long.csv)");
  validate->add_option("-o,--output", val_output, "metrics JSON (default OUT/validation.json)");

  auto* anomaly = app.add_subcommand("anomaly", "score a latent series against a model");
  std::string an_latent, an_model, an_output;
  anomaly->add_option("--latent", an_latent, "latent CSV (default OUT/latent_long.csv)");
  anomaly->add_option("--model", an_model, "model JSON (default OUT/model.json)");
  anomaly->add_option("-o,--output", an_output, "scores CSV (default OUT/anomaly.csv)");

  auto* repair = app.add_subcommand("repair", "decode model-solved latents into trajectories");
  std::string rep_model, rep_vae, rep_scaler, rep_output;
  size_t rep_samples = 0;
  bool rep_premature = false;
  repair->add_option("--model", rep_model, "model JSON (default OUT/model.json)");
  repair->add_option("--vae", rep_vae, "VAE JSON whose decoder is used (default OUT/vae_train.json)");
  repair->add_option("--scaler", rep_scaler, "scaler JSON for data units (default OUT/scaler.json when present)");
  repair->add_option("--samples", rep_samples, "samples to decode (default horizon.extrapolate)");
  repair->add_option("-o,--output", rep_output, "trajectory CSV (default OUT/repaired.csv)");
  repair->add_flag("--premature", rep_premature,
                   "run the premature-stop comparison on the completed run in OUT instead");
  add_z0(repair);

  auto* density = app.add_subcommand("density", "Gaussian KDE of particle positions per frame");
  std::string den_input;
  std::vector<long> den_frames;
  int den_grid = 64;
  double den_bw = 0.0;
  density->add_option("-i,--input", den_input, "trajectory CSV (default OUT/trajectories.csv)");
  density->add_option("--frames", den_frames, "frame numbers")->required();
  density->add_option("--grid", den_grid, "lattice size")->capture_default_str();
  density->add_option("--bandwidth", den_bw, "kernel bandwidth; 0 selects Scott's rule")->capture_default_str();

  auto* run = app.add_subcommand("run", "full pipeline: data, VAE, discovery, extrapolation, metrics");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; usage errors are configuration errors.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  for (const auto& [key, value] : key_flags) {
    if (!value.empty()) g.overrides[key] = value;
  }
  for (const auto& kv : raw_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "latdyn: --set expects key=value, got '%s'\n", kv.c_str());
      return 1;
    }
    g.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }

  ConfigPtr cfg;
  if (int rc = report(build_config(g, cfg), "config"); rc != 0) return rc;
  ld_config* c = cfg.get();
  const std::string dir = out_dir(c);

  auto resolve_z0 = [&](double& z0) -> ld_status {
    if (z0_opt) {
      z0 = *z0_opt;
      return LD_OK;
    }
    const std::string path = in_out(z0_latent, dir, "latent_train.csv");
    return ld_latent_z0(c, path.c_str(), &z0);
  };

  if (sim->parsed()) {
    const std::string path = in_out(sim_output, dir, "trajectories.csv");
    if (int rc = report(ld_cmd_simulate(c, path.c_str()), "simulate"); rc != 0) return rc;
    std::printf("%s\n", path.c_str());
    return 0;
  }
  if (ingest->parsed()) {
    if (int rc = report(ld_cmd_ingest(c, ingest_input.c_str(), dir.c_str()), "ingest"); rc != 0) return rc;
    std::printf("%s\n", dir.c_str());
    return 0;
  }
  if (train->parsed()) {
    const std::string data = in_out(train_data, dir, "scaled.csv");
    return report(ld_cmd_train(c, data.c_str(), dir.c_str(), train_rows, train_tag.c_str(), log_line, nullptr),
                  "train");
  }
  if (encode->parsed()) {
    const std::string vae = in_out(enc_vae, dir, "vae_train.json");
    const std::string data = in_out(enc_data, dir, "scaled.csv");
    const std::string out = in_out(enc_output, dir, "latent.csv");
    if (int rc = report(ld_cmd_encode(c, vae.c_str(), data.c_str(), out.c_str()), "encode"); rc != 0) return rc;
    std::printf("%s\n", out.c_str());
    return 0;
  }
  if (discover->parsed()) {
    const std::string latent = in_out(disc_latent, dir, "latent_train.csv");
    if (int rc = report(ld_cmd_discover(c, latent.c_str(), dir.c_str()), "discover"); rc != 0) return rc;
    const std::string model = (fs::path(dir) / "model.json").string();
    ld_model* m = nullptr;
    if (ld_model_load(model.c_str(), &m) == LD_OK) {
      std::printf("%s\n", ld_model_text(m));
      ld_model_free(m);
    }
    return 0;
  }
  if (solve->parsed()) {
    double z0 = 0.0;
    if (int rc = report(resolve_z0(z0), "solve"); rc != 0) return rc;
    const std::string model = in_out(solve_model, dir, "model.json");
    const std::string out = in_out(solve_output, dir, "solution.csv");
    const size_t n = solve_samples > 0 ? solve_samples : static_cast<size_t>(config_long(c, "horizon.extrapolate"));
    return report(ld_cmd_solve(c, model.c_str(), z0, n, out.c_str()), "solve");
  }
  if (validate->parsed()) {
    const std::string sol = in_out(val_solution, dir, "solution_extrapolate.csv");
    const std::string ref = in_out(val_latent, dir, "latent_long.csv");
    const std::string out = in_out(val_output, dir, "validation.json");
    double r = 0.0, rmse = 0.0;
    if (int rc = report(ld_cmd_validate(c, sol.c_str(), ref.c_str(), out.c_str(), &r, &rmse), "validate"); rc != 0) {
      return rc;
    }
    std::printf("pearson %.6f rmse %.6f\n", r, rmse);
    return 0;
  }
  if (anomaly->parsed()) {
    const std::string latent = in_out(an_latent, dir, "latent_long.csv");
    const std::string model = in_out(an_model, dir, "model.json");
    const std::string out = in_out(an_output, dir, "anomaly.csv");
    long first = -1;
    if (int rc = report(ld_cmd_anomaly(c, latent.c_str(), model.c_str(), out.c_str(), &first), "anomaly"); rc != 0) {
      return rc;
    }
    if (first >= 0) {
      std::printf("anomaly first flagged at t=%ld\n", first);
    } else {
      std::printf("no anomaly flagged\n");
    }
    return 0;
  }
  if (repair->parsed()) {
    if (rep_premature) {
      double own = 0.0, repaired = 0.0;
      if (int rc = report(ld_cmd_repair_premature(c, dir.c_str(), &own, &repaired, log_line, nullptr), "repair");
          rc != 0) {
        return rc;
      }
      std::printf("own_mse %.6g repaired_mse %.6g\n", own, repaired);
      return 0;
    }
    double z0 = 0.0;
    if (int rc = report(resolve_z0(z0), "repair"); rc != 0) return rc;
    const std::string model = in_out(rep_model, dir, "model.json");
    const std::string vae = in_out(rep_vae, dir, "vae_train.json");
    std::string scaler = rep_scaler;
    if (scaler.empty() && fs::exists(fs::path(dir) / "scaler.json")) scaler = (fs::path(dir) / "scaler.json").string();
    const std::string out = in_out(rep_output, dir, "repaired.csv");
    const size_t n = rep_samples > 0 ? rep_samples : static_cast<size_t>(config_long(c, "horizon.extrapolate"));
    return report(ld_cmd_repair(c, model.c_str(), vae.c_str(), z0, n, scaler.empty() ? nullptr : scaler.c_str(),
                                out.c_str()),
                  "repair");
  }
  if (density->parsed()) {
    const std::string in = in_out(den_input, dir, "trajectories.csv");
    return report(ld_cmd_density(in.c_str(), den_frames.data(), den_frames.size(), den_grid, den_bw, dir.c_str()),
                  "density");
  }
  if (run->parsed()) {
    if (int rc = report(ld_cmd_run(c, log_line, nullptr), "run"); rc != 0) return rc;
    std::printf("%s\n", dir.c_str());
    return 0;
  }
  return 1;
}
