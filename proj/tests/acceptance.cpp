// Acceptance checks. Each invocation evaluates one criterion and prints a
// single PASS or FAIL line with the measured value and its pinned tolerance;
// lines starting with "info" are diagnostics that do not affect the verdict.
//
//   acceptance --criterion N --work DIR

#include "latdyn/collisim.hpp"
#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"
#include "latdyn/gradcore.hpp"
#include "latdyn/lstmvae.hpp"
#include "latdyn/pipeline.hpp"
#include "latdyn/random.hpp"
#include "latdyn/run_config.hpp"
#include "latdyn/signal.hpp"
#include "latdyn/sindy.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace latdyn;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void info(const std::string& line) { std::cout << "info: " << line << "\n" << std::flush; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

grad::Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  grad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// --- 1. autodiff ------------------------------------------------------------

Verdict autodiff() {
  using namespace latdyn::grad;
  const auto t0 = Clock::now();
  Rng rng(101);
  Parameter a(random_matrix(rng, 3, 4)), b(random_matrix(rng, 3, 4)), m(random_matrix(rng, 4, 2));
  Parameter row(random_matrix(rng, 1, 4)), wide(random_matrix(rng, 3, 4, -3.0, 3.0));
  Parameter* ab[] = {&a, &b};
  auto weighted = [](Graph& g, Var out, std::uint64_t seed) {
    Rng w(seed);
    return sum(mul(out, g.constant(random_matrix(w, out.rows(), out.cols()))));
  };
  std::vector<std::pair<std::string, double>> ops;
  auto check = [&](const std::string& name, const std::function<Var(Graph&)>& f, std::span<Parameter* const> ps) {
    ops.emplace_back(name, grad_check(f, ps));
  };
  const std::array<Parameter*, 2> am{&a, &m};
  const std::array<Parameter*, 2> arow{&a, &row};
  const std::array<Parameter*, 1> only_a{&a};
  const std::array<Parameter*, 2> wb{&wide, &b};
  check("matmul", [&](Graph& g) { return weighted(g, matmul(g.parameter(a), g.parameter(m)), 1); }, am);
  check("add", [&](Graph& g) { return weighted(g, add(g.parameter(a), g.parameter(b)), 2); }, ab);
  check("add_broadcast", [&](Graph& g) { return weighted(g, add(g.parameter(a), g.parameter(row)), 3); }, arow);
  check("sub", [&](Graph& g) { return weighted(g, sub(g.parameter(a), g.parameter(b)), 4); }, ab);
  check("mul", [&](Graph& g) { return weighted(g, mul(g.parameter(a), g.parameter(b)), 5); }, ab);
  check("scale", [&](Graph& g) { return weighted(g, scale(g.parameter(a), -1.7), 6); }, only_a);
  check("add_scalar", [&](Graph& g) { return weighted(g, add_scalar(g.parameter(a), 0.3), 7); }, only_a);
  check("sigmoid", [&](Graph& g) { return weighted(g, sigmoid(g.parameter(a)), 8); }, only_a);
  check("tanh", [&](Graph& g) { return weighted(g, grad::tanh(g.parameter(a)), 9); }, only_a);
  check("exp", [&](Graph& g) { return weighted(g, grad::exp(g.parameter(a)), 10); }, only_a);
  check("transpose", [&](Graph& g) { return weighted(g, transpose(g.parameter(a)), 11); }, only_a);
  check("concat_cols", [&](Graph& g) {
    const Var p[] = {g.parameter(a), g.parameter(b)};
    return weighted(g, concat_cols(p), 12);
  }, ab);
  check("concat_rows", [&](Graph& g) {
    const Var p[] = {g.parameter(a), g.parameter(b)};
    return weighted(g, concat_rows(p), 13);
  }, ab);
  check("slice_cols", [&](Graph& g) { return weighted(g, slice_cols(g.parameter(a), 1, 2), 14); }, only_a);
  check("slice_rows", [&](Graph& g) { return weighted(g, slice_rows(g.parameter(a), 1, 2), 15); }, only_a);
  check("sum", [&](Graph& g) { return sum(mul(g.parameter(a), g.parameter(a))); }, only_a);
  check("mean", [&](Graph& g) { return mean(grad::exp(g.parameter(a))); }, only_a);
  check("mse_loss", [&](Graph& g) { return mse_loss(g.parameter(a), g.parameter(b)); }, ab);
  check("smooth_l1_loss", [&](Graph& g) { return smooth_l1_loss(g.parameter(wide), g.parameter(b)); }, wb);

  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& [name, err] : ops) {
    if (err > worst_op) {
      worst_op = err;
      worst_name = name;
    }
  }

  vae::VaeArch arch;
  arch.input_size = 4;
  arch.encoder_hidden = 5;
  arch.decoder_hidden = 5;
  vae::VaeParams p = vae::init_params(arch, 7);
  grad::Matrix x = random_matrix(rng, 8, 4, 0.0, 1.0);
  grad::Matrix eps(8, 1);
  for (int t = 0; t < 8; ++t) eps(t, 0) = rng.normal();
  vae::TrainConfig tc;
  tc.kl_weight = 0.1;
  const auto params = p.parameters();
  const auto vae_loss = [&](Graph& g) {
    const auto f = vae::forward(g, p, x, eps);
    return vae::elbo_loss(g, g.constant(x), f.recon, f.mu, f.logvar, tc).total;
  };
  // The composite loss has coordinates with gradients near 1e-8, where a
  // 1e-5 step is dominated by rounding in the loss; 1e-4 keeps truncation
  // error near 1e-8 relative while staying clear of it.
  constexpr double kVaeStep = 1e-4;
  const double vae_err = grad_check(vae_loss, params, kVaeStep);
  for (const double step : {1e-3, 1e-5}) {
    info("whole-model check with step " + fmt("%.0e", step) + ": " + fmt("%.2e", grad_check(vae_loss, params, step)));
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worst_op < 1e-6 && vae_err < 1e-4 && secs < 60.0;
  v.detail = "max per-op error " + fmt("%.2e", worst_op) + " (" + worst_name + ") < 1e-6, VAE loss error " +
             fmt("%.2e", vae_err) + " < 1e-4 (step 1e-4), " + fmt("%.1f", secs) + " s < 60 s";
  return v;
}

// --- 2. simulator conservation ---------------------------------------------

Verdict conservation() {
  const auto t0 = Clock::now();
  collisim::SimConfig c;
  c.n_particles = 5;
  c.seed = 2;
  c.init_spread = 1.0;
  collisim::SimState s = collisim::init_state(c);
  const double e0 = collisim::kinetic_energy(s.particles);
  double worst_p = 0.0, worst_e = 0.0;
  long collisions = 0;
  const collisim::CollisionObserver obs = [&](const collisim::CollisionEvent& e) {
    ++collisions;
    const double scale_p = e.u1.norm() + e.u2.norm();
    const double ke = 0.5 * (e.u1.squaredNorm() + e.u2.squaredNorm());
    worst_p = std::max(worst_p, ((e.v1 + e.v2) - (e.u1 + e.u2)).norm() / scale_p);
    worst_e = std::max(worst_e, std::abs(0.5 * (e.v1.squaredNorm() + e.v2.squaredNorm()) - ke) / ke);
  };
  for (int i = 0; i < 10000; ++i) collisim::step(s, c, obs);
  const double drift = std::abs(collisim::kinetic_energy(s.particles) - e0) / e0;
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = collisions > 0 && worst_p < 1e-12 && worst_e < 1e-12 && drift < 1e-9 && secs < 10.0;
  v.detail = std::to_string(collisions) + " collisions; per-collision momentum " + fmt("%.2e", worst_p) +
             ", energy " + fmt("%.2e", worst_e) + " < 1e-12; KE drift " + fmt("%.2e", drift) + " < 1e-9; " +
             fmt("%.2f", secs) + " s < 10 s";
  return v;
}

// --- 3. SINDy oracle ----------------------------------------------------------

struct Recovery {
  bool exact_support = false;
  double const_err = INFINITY;
  double quad_err = INFINITY;
  std::string text;
};

Recovery recover(const signal::Series& z, signal::SgConfig sg) {
  Recovery r;
  sindy::DiscoverConfig dc;
  dc.sg = sg;
  dc.degree = 3;
  dc.threshold = 0.1;
  const sindy::SindyModel m = sindy::discover(z, dc);
  r.text = sindy::model_to_text(m);
  const auto& c = m.coefficients;
  r.exact_support = c(0) != 0.0 && c(1) == 0.0 && c(2) != 0.0 && c(3) == 0.0;
  r.const_err = std::abs(c(0) - -3.266) / 3.266;
  r.quad_err = std::abs(c(2) - -1.232) / 1.232;
  return r;
}

signal::Series with_noise(signal::Series s, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.values(i) += 0.01 * rng.normal();
  return s;
}

std::string describe(const Recovery& r) {
  return r.text + " (support " + (r.exact_support ? "exact" : "wrong") + ", constant " +
         fmt("%.2f%%", 100 * r.const_err) + ", z^2 " + fmt("%.2f%%", 100 * r.quad_err) + ")";
}

Verdict sindy_oracle() {
  const auto t0 = Clock::now();
  sindy::SindyModel truth;
  truth.library.degree = 3;
  truth.coefficients = Eigen::Vector4d(-3.266, 0.0, -1.232, 0.0);
  const signal::SgConfig identity{1, 0};
  const signal::SgConfig sg51{51, 1};

  const double dt = 0.01;
  const sindy::OdeSolution sol = sindy::integrate(truth, 1.0, dt, 499);
  const long produced = sol.z.size();
  Verdict v;
  bool ok = !sol.diverged && produced == 500;
  Recovery clean, noisy;
  if (ok) {
    const signal::Series z{sol.z, dt};
    clean = recover(z, identity);
    noisy = recover(with_noise(z, 3), sg51);
    ok = clean.exact_support && clean.const_err < 0.05 && clean.quad_err < 0.05 && noisy.exact_support &&
         noisy.const_err < 0.15 && noisy.quad_err < 0.15;
  }
  const double secs = seconds_since(t0);
  v.pass = ok && secs < 5.0;
  if (sol.diverged) {
    v.detail = "trajectory from z0=1 with dt=0.01 escapes to infinity at step " + std::to_string(sol.diverged_at) +
               " (t=" + fmt("%.2f", sol.diverged_at * dt) + "), only " + std::to_string(produced) +
               " of 500 samples exist; recovery not attempted";
  } else {
    v.detail = "clean: " + describe(clean) + " within 5%; noisy: " + describe(noisy) + " within 15%; " +
               fmt("%.2f", secs) + " s < 5 s";
  }

  // Diagnostics on trajectories that stay finite.
  const double blowup = (std::atan(1.0 * std::sqrt(1.232 / 3.266)) + M_PI / 2) / std::sqrt(1.232 * 3.266);
  info("closed-form blow-up time from z0=1: t=" + fmt("%.4f", blowup));
  if (sol.diverged && produced > 60) {
    const signal::Series prefix{sol.z, dt};
    info("pre-divergence prefix (" + std::to_string(produced) + " samples, dt=0.01), no filter: " +
         describe(recover(prefix, identity)));
  }
  const double fine = 0.001;
  const sindy::OdeSolution short_sol = sindy::integrate(truth, 1.0, fine, 499);
  if (!short_sol.diverged) {
    const signal::Series z{short_sol.z, fine};
    info("500 samples at dt=0.001 (t in [0, 0.499]), no filter: " + describe(recover(z, identity)));
    info("500 samples at dt=0.001, noise 0.01 + SG(51,1): " + describe(recover(with_noise(z, 3), sg51)));
  }
  return v;
}

// --- 4. Savitzky-Golay oracle -------------------------------------------------

Eigen::VectorXd brute_force_sg(const Eigen::VectorXd& y, int window, int order) {
  const Eigen::Index n = y.size();
  const int half = window / 2;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index start = std::clamp<Eigen::Index>(i - half, 0, n - window);
    const double centre = static_cast<double>(start + half);
    Eigen::MatrixXd a(window, order + 1);
    for (int r = 0; r < window; ++r) {
      for (int c = 0; c <= order; ++c) a(r, c) = std::pow(static_cast<double>(start + r) - centre, c);
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y.segment(start, window));
    const double x = static_cast<double>(i) - centre;
    double v = 0.0;
    for (int c = order; c >= 0; --c) v = v * x + coef(c);
    out(i) = v;
  }
  return out;
}

Verdict sg_oracle() {
  const auto t0 = Clock::now();
  const std::pair<int, int> settings[] = {{51, 1}, {31, 2}, {5, 3}};
  double worst = 0.0;
  std::string parts;
  for (const auto& [window, order] : settings) {
    Rng rng(400 + static_cast<std::uint64_t>(window));
    Eigen::VectorXd y(1000);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
    const Eigen::VectorXd got = signal::sg_filter(signal::Series{y}, {window, order}).values;
    const double err = (got - brute_force_sg(y, window, order)).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    parts += " (" + std::to_string(window) + "," + std::to_string(order) + ") " + fmt("%.1e", err);
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worst < 1e-9 && secs < 5.0;
  v.detail = "max abs difference" + parts + " < 1e-9; " + fmt("%.2f", secs) + " s < 5 s";
  return v;
}

// --- 5. RK4 order -------------------------------------------------------------

Verdict rk4_order() {
  sindy::SindyModel decay;
  decay.library.degree = 1;
  decay.coefficients = Eigen::Vector2d(0.0, -1.0);
  auto err = [&](double dt) {
    const long n = std::lround(1.0 / dt);
    return std::abs(sindy::integrate(decay, 1.0, dt, n).z(n) - std::exp(-1.0));
  };
  const double e1 = err(0.1);
  const double ratio = e1 / err(0.05);
  Verdict v;
  v.pass = ratio >= 12.0 && ratio <= 20.0 && e1 < 1e-5;
  v.detail = "error ratio dt=0.1 / dt=0.05 " + fmt("%.2f", ratio) + " in [12, 20]; |z(1) - e^-1| at dt=0.1 " +
             fmt("%.2e", e1) + " < 1e-5";
  return v;
}

// --- 6. end-to-end pipeline ---------------------------------------------------

RunConfig default_run(const fs::path& work) {
  RunConfig cfg;
  cfg.out_dir = work / "pipeline";
  return cfg;
}

Verdict end_to_end(const fs::path& work) {
  const RunConfig cfg = default_run(work);
  const auto t0 = Clock::now();
  const pipeline::RunArtifacts art = pipeline::run_discovery(cfg, [](const std::string& l) { info(l); });
  const double secs = seconds_since(t0);
  const auto& m = art.metrics;
  Verdict v;
  v.pass = m.recon_mse < 0.01 && m.pearson > 0.9 && !m.diverged && secs < 900.0;
  v.detail = "recon MSE " + fmt("%.4g", m.recon_mse) + " < 0.01; sign-aligned Pearson " + fmt("%.4f", m.pearson) +
             " > 0.9 over " + std::to_string(m.compared) + " samples" + (m.diverged ? " (diverged)" : "") +
             "; model " + m.model_text + "; " + fmt("%.0f", secs) + " s < 900 s";
  return v;
}

// --- 7. anomaly detection -----------------------------------------------------

Verdict anomaly() {
  struct Case {
    const char* name;
    Eigen::VectorXd coefficients;
    double z0;
  };
  const std::vector<Case> cases = {
      {"linear decay", Eigen::Vector2d(0.0, -1.0), 1.0},
      {"logistic", Eigen::Vector3d(1.0, 0.0, -1.0), -0.9},
      {"cubic", Eigen::Vector4d(-2.691, 0.458, 0.0, -0.685), 0.5},
  };
  const double dt = 1.0 / 500.0;
  const long n = 750, baseline = 500;
  const int window = 51;
  pipeline::AnomalyConfig ac;
  ac.sg = {window, 1};
  ac.threshold = 3.0;
  ac.baseline_length = baseline;

  long clean_flags = 0, missed = 0, worst_delay = 0, faults = 0;
  for (const auto& c : cases) {
    sindy::SindyModel m;
    m.library.degree = static_cast<int>(c.coefficients.size()) - 1;
    m.coefficients = c.coefficients;
    const Eigen::VectorXd z = sindy::integrate(m, c.z0, dt, n - 1).z;
    const double range = z.maxCoeff() - z.minCoeff();
    const auto clean = pipeline::anomaly_score({z, dt}, m, ac);
    clean_flags += static_cast<long>(clean.flagged.size());
    for (const long at : {550L, 600L, 650L, 700L}) {
      for (const double frac : {0.05, 0.2}) {
        ++faults;
        const auto r = pipeline::anomaly_score({pipeline::inject_step(z, at, frac * range), dt}, m, ac);
        if (r.first_flag < 0 || std::abs(r.first_flag - at) > window) {
          ++missed;
          info(std::string(c.name) + ": step of " + fmt("%.2f", frac) + " x range at " + std::to_string(at) +
               " first flagged at " + std::to_string(r.first_flag));
        } else {
          worst_delay = std::max(worst_delay, std::abs(r.first_flag - at));
        }
      }
    }
  }
  Verdict v;
  v.pass = clean_flags == 0 && missed == 0;
  v.detail = std::to_string(faults - missed) + "/" + std::to_string(faults) +
             " step faults flagged within one window (" + std::to_string(window) + " samples, worst offset " +
             std::to_string(worst_delay) + "); " + std::to_string(clean_flags) +
             " flags on clean model latents (required 0); z-score threshold 3";
  return v;
}

// --- 8. premature repair ------------------------------------------------------

Verdict premature(const fs::path& work) {
  const RunConfig cfg = default_run(work);
  const fs::path dir = cfg.out_dir;
  bool reuse = fs::exists(dir / "metrics.json") && !fs::exists(dir / "FAILED");
  if (reuse) reuse = slurp(dir / "metrics.json").find(cfg.hash()) != std::string::npos;
  if (!reuse) {
    info("no finished run with hash " + cfg.hash() + " in " + dir.string() + "; running the pipeline");
    pipeline::run_discovery(cfg, [](const std::string& l) { info(l); });
  }
  const TrajectorySet scaled = trajkit::load_trajectories(dir / "scaled.csv");
  const sindy::SindyModel model = sindy::model_from_json(slurp(dir / "model.json"));
  Eigen::VectorXd filtered;
  pipeline::latent_from_csv(slurp(dir / "latent_train.csv"), &filtered);
  const double z0 = filtered(0);
  const double dt = pipeline::latent_spacing(cfg);

  const auto rep = pipeline::premature_repair(cfg, scaled.features, model, z0, dt);
  Verdict v;
  v.pass = rep.repaired_mse < rep.own_mse;
  v.detail = "decoder stopped at " + std::to_string(rep.epochs) + "/" + std::to_string(cfg.train.epochs) +
             " epochs: ODE-latent decode MSE " + fmt("%.4g", rep.repaired_mse) + " < own-latent decode MSE " +
             fmt("%.4g", rep.own_mse) + " over " + std::to_string(rep.horizon) + " samples" +
             (rep.flipped ? " (ODE latent sign-flipped)" : "");

  for (const double frac : {0.02, 0.05, 0.1}) {
    RunConfig early = cfg;
    early.premature_fraction = frac;
    const auto r = pipeline::premature_repair(early, scaled.features, model, z0, dt);
    info("stopped at " + std::to_string(r.epochs) + " epochs: repaired " + fmt("%.4g", r.repaired_mse) +
         ", own " + fmt("%.4g", r.own_mse));
  }
  return v;
}

// --- 9. determinism -----------------------------------------------------------

Verdict determinism(const fs::path& work) {
  auto config = [&](const char* name) {
    RunConfig c;
    c.out_dir = work / name;
    c.seed = 12;
    c.train.epochs = 60;
    c.arch.encoder_hidden = 16;
    c.arch.decoder_hidden = 16;
    c.t_train = 120;
    c.t_extrapolate = 180;
    return c;
  };
  std::map<std::string, std::string> runs[2];
  const char* names[] = {"determinism_a", "determinism_b"};
  for (int k = 0; k < 2; ++k) {
    const RunConfig c = config(names[k]);
    fs::remove_all(c.out_dir);
    pipeline::run_discovery(c);
    for (const auto& e : fs::directory_iterator(c.out_dir)) runs[k][e.path().filename().string()] = slurp(e.path());
  }
  long differing = 0;
  std::string first_diff;
  for (const auto& [name, body] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != body) {
      if (differing++ == 0) first_diff = name;
    }
  }
  if (runs[0].size() != runs[1].size()) ++differing;
  Verdict v;
  v.pass = differing == 0 && !runs[0].empty();
  v.detail = std::to_string(runs[0].size()) + " artifact files compared byte for byte, " +
             std::to_string(differing) + " differ (required 0)" + (first_diff.empty() ? "" : ", first " + first_diff);
  return v;
}

const char* kTitles[] = {
    "",
    "autodiff gradients match finite differences",
    "simulator conserves momentum and energy",
    "sparse regression recovers the reference model",
    "Savitzky-Golay filter matches brute-force fits",
    "RK4 converges at fourth order",
    "end-to-end pipeline reconstructs and extrapolates",
    "anomaly scoring flags step faults only",
    "prematurely stopped decoder is repaired by the model latent",
    "identical configurations give identical artifacts",
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("latdyn acceptance checks");
  int criterion = 0;
  std::string work = "acceptance_run";
  app.add_option("--criterion", criterion, "criterion number 1-9")->required()->check(CLI::Range(1, 9));
  app.add_option("--work", work, "scratch directory for pipeline runs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  Verdict v;
  try {
    switch (criterion) {
      case 1: v = autodiff(); break;
      case 2: v = conservation(); break;
      case 3: v = sindy_oracle(); break;
      case 4: v = sg_oracle(); break;
      case 5: v = rk4_order(); break;
      case 6: v = end_to_end(work); break;
      case 7: v = anomaly(); break;
      case 8: v = premature(work); break;
      default: v = determinism(work); break;
    }
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("error: ") + e.what();
  }
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << criterion << ": " << kTitles[criterion] << " -- "
            << v.detail << "\n";
  return v.pass ? 0 : 1;
}
