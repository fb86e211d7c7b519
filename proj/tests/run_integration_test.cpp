#include "latdyn/collisim.hpp"
#include "latdyn/errors.hpp"
#include "latdyn/pipeline.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace latdyn;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

RunConfig small_run(const fs::path& out) {
  RunConfig c;
  c.out_dir = out;
  c.seed = 5;
  c.train.epochs = 40;
  c.arch.encoder_hidden = 8;
  c.arch.decoder_hidden = 8;
  c.t_train = 60;
  c.t_extrapolate = 90;
  c.latent_sg = {21, 1};
  return c;
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / "latdyn_run_test" / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("a run writes every artifact stamped with the config identity") {
  const RunConfig cfg = small_run(scratch("stamped"));
  const pipeline::RunArtifacts art = pipeline::run_discovery(cfg);
  const char* expected[] = {"config.toml",     "trajectories.csv", "scaled.csv",       "scaler.json",
                            "vae_train.json",  "loss_train.csv",   "latent_train.csv", "model.json",
                            "model.txt",       "solution_train.csv", "solution_extrapolate.csv",
                            "vae_long.json",   "loss_long.csv",    "latent_long.csv",  "metrics.json"};
  for (const char* name : expected) {
    CAPTURE(name);
    REQUIRE(fs::exists(cfg.out_dir / name));
    const std::string body = slurp(cfg.out_dir / name);
    CHECK(body.find(cfg.hash()) != std::string::npos);
  }
  CHECK_FALSE(fs::exists(cfg.out_dir / "FAILED"));
  CHECK(art.config_hash == cfg.hash());
  CHECK(art.data.steps() == 90);
  CHECK(art.latent.z.size() == 60);
  CHECK(art.latent_long.z.size() == 90);
  CHECK(art.metrics.compared <= 90);
  CHECK(art.params.arch.input_size == 10);

  // The saved configuration reproduces the hash.
  const RunConfig back = load_run_config(cfg.out_dir / "config.toml");
  CHECK(back.hash() == cfg.hash());
  const std::string metrics = slurp(cfg.out_dir / "metrics.json");
  for (const char* key : {"pearson", "rmse", "recon_mse", "model_text", "seed", "latent_dt"}) {
    CHECK(metrics.find(std::string("\"") + key + "\"") != std::string::npos);
  }
}

TEST_CASE("identical configurations give byte-identical artifacts") {
  const RunConfig a = small_run(scratch("twin_a"));
  const RunConfig b = small_run(scratch("twin_b"));
  pipeline::run_discovery(a);
  pipeline::run_discovery(b);
  const auto sa = snapshot(a.out_dir);
  const auto sb = snapshot(b.out_dir);
  REQUIRE(sa.size() == sb.size());
  for (const auto& [name, body] : sa) {
    CAPTURE(name);
    REQUIRE(sb.count(name) == 1);
    CHECK(body == sb.at(name));
  }
}

TEST_CASE("a different seed changes the data") {
  RunConfig a = small_run(scratch("seed_a"));
  RunConfig b = small_run(scratch("seed_b"));
  b.seed = 6;
  a.train.epochs = b.train.epochs = 2;
  pipeline::run_discovery(a);
  pipeline::run_discovery(b);
  CHECK(slurp(a.out_dir / "trajectories.csv") != slurp(b.out_dir / "trajectories.csv"));
}

TEST_CASE("equal horizons reuse the training model for validation") {
  RunConfig cfg = small_run(scratch("equal"));
  cfg.t_extrapolate = cfg.t_train;
  cfg.train.epochs = 5;
  const pipeline::RunArtifacts art = pipeline::run_discovery(cfg);
  CHECK(art.latent_long.z == art.latent.z);
}

TEST_CASE("failures leave a FAILED marker and a stale marker is cleared") {
  RunConfig cfg = small_run(scratch("failing"));
  cfg.source = DataSource::Csv;
  cfg.csv_path = cfg.out_dir.parent_path() / "short.csv";
  fs::create_directories(cfg.out_dir.parent_path());
  std::ofstream(cfg.csv_path) << "frame,id,x,y\n0,1,0.1,0.1\n1,1,0.2,0.2\n";
  CHECK_THROWS_AS(pipeline::run_discovery(cfg), InputError);
  REQUIRE(fs::exists(cfg.out_dir / "FAILED"));
  const std::string msg = slurp(cfg.out_dir / "FAILED");
  CHECK(msg.find(cfg.hash()) != std::string::npos);
  CHECK(msg.find("horizon.extrapolate") != std::string::npos);

  RunConfig ok = small_run(cfg.out_dir);
  ok.train.epochs = 2;
  pipeline::run_discovery(ok);
  CHECK_FALSE(fs::exists(cfg.out_dir / "FAILED"));
}

TEST_CASE("csv input drives the run like simulated input") {
  const fs::path dir = scratch("from_csv");
  fs::create_directories(dir);
  collisim::SimConfig sim;
  sim.n_steps = 90;
  sim.seed = 5;
  sim.init_spread = 0.3;
  trajkit::write_trajectories(collisim::run(sim), dir / "input.csv");
  RunConfig cfg = small_run(dir / "out");
  cfg.source = DataSource::Csv;
  cfg.csv_path = dir / "input.csv";
  cfg.train.epochs = 2;
  const pipeline::RunArtifacts art = pipeline::run_discovery(cfg);
  CHECK(art.data.steps() == 90);
}
