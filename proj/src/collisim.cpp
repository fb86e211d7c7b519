#include "latdyn/collisim.hpp"

#include "latdyn/errors.hpp"

#include <cmath>
#include <numbers>

namespace latdyn::collisim {

namespace {

constexpr double kCoincident = 1e-12;
constexpr int kPlacementAttempts = 10000;

// Reflects the normal velocity of a wall contact and clamps the position.
void apply_walls(Particle& p, const SimConfig& c) {
  const double r = p.radius;
  if (p.position.x() < r) {
    p.position.x() = r;
    p.velocity.x() = std::abs(p.velocity.x());
  } else if (p.position.x() > c.box_w - r) {
    p.position.x() = c.box_w - r;
    p.velocity.x() = -std::abs(p.velocity.x());
  }
  if (p.position.y() < r) {
    p.position.y() = r;
    p.velocity.y() = std::abs(p.velocity.y());
  } else if (p.position.y() > c.box_h - r) {
    p.position.y() = c.box_h - r;
    p.velocity.y() = -std::abs(p.velocity.y());
  }
}

}  // namespace

void SimConfig::validate() const {
  if (n_particles < 1) throw ConfigError("n_particles must be >= 1");
  if (!(radius > 0.0)) throw ConfigError("radius must be > 0");
  if (!(box_w > 4.0 * radius) || !(box_h > 4.0 * radius)) {
    throw ConfigError("box dimensions must exceed 4 * radius");
  }
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (!(speed_scale >= 0.0)) throw ConfigError("speed_scale must be >= 0");
  if (!(init_spread > 0.0 && init_spread <= 1.0)) throw ConfigError("init_spread must be in (0, 1]");
}

SimState init_state(const SimConfig& config) {
  config.validate();
  SimState state;
  state.rng = Rng::stream(config.seed, 2);
  Rng rng = Rng::stream(config.seed, 1);
  const double r = config.radius;
  auto span_for = [&](double extent) {
    const double lo = r + 0.5 * (1.0 - config.init_spread) * (extent - 2.0 * r);
    return std::pair{lo, extent - lo};
  };
  const auto [x_lo, x_hi] = span_for(config.box_w);
  const auto [y_lo, y_hi] = span_for(config.box_h);
  for (int n = 0; n < config.n_particles; ++n) {
    Particle p;
    p.radius = r;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      p.position = {rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)};
      placed = true;
      for (const auto& q : state.particles) {
        if ((q.position - p.position).norm() <= 2.0 * r) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      throw ConfigError("could not place particle " + std::to_string(n + 1) + " of " +
                        std::to_string(config.n_particles) + " without overlap; box too crowded");
    }
    state.particles.push_back(p);
  }
  // Velocities are drawn after placement so they do not depend on retries.
  for (auto& p : state.particles) {
    p.velocity = {rng.uniform(-config.speed_scale, config.speed_scale),
                  rng.uniform(-config.speed_scale, config.speed_scale)};
  }
  return state;
}

std::pair<Particle, Particle> resolve_pair_collision(const Particle& p1, const Particle& p2) {
  const Eigen::Vector2d d = p2.position - p1.position;
  const double dist = d.norm();
  if (dist < kCoincident) throw DegenerateGeometryError("coincident particle centres");
  if (dist > (p1.radius + p2.radius) * (1.0 + 1e-9)) {
    throw InputError("particles are not in contact");
  }
  const Eigen::Vector2d n = d / dist;
  const double exchange = (p1.velocity - p2.velocity).dot(n);
  Particle a = p1;
  Particle b = p2;
  a.velocity = p1.velocity - exchange * n;
  b.velocity = p2.velocity + exchange * n;
  return {a, b};
}

void step(SimState& state, const SimConfig& config, const CollisionObserver& observer) {
  auto& ps = state.particles;
  for (auto& p : ps) {
    p.position += p.velocity * config.dt;
    apply_walls(p, config);
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      Particle& a = ps[i];
      Particle& b = ps[j];
      const double contact = a.radius + b.radius;
      Eigen::Vector2d d = b.position - a.position;
      double dist = d.norm();
      if (dist >= contact) continue;
      if (dist < kCoincident) {
        const double angle = state.rng.uniform(0.0, 2.0 * std::numbers::pi);
        b.position += 1e-6 * contact * Eigen::Vector2d(std::cos(angle), std::sin(angle));
        d = b.position - a.position;
        dist = d.norm();
      }
      const Eigen::Vector2d n = d / dist;
      // Only approaching pairs exchange momentum; separating ones are just pushed apart.
      if ((a.velocity - b.velocity).dot(n) > 0.0) {
        const CollisionEvent before{state.step, i, j, a.velocity, b.velocity, {}, {}};
        auto [na, nb] = resolve_pair_collision(a, b);
        a.velocity = na.velocity;
        b.velocity = nb.velocity;
        if (observer) {
          CollisionEvent e = before;
          e.v1 = a.velocity;
          e.v2 = b.velocity;
          observer(e);
        }
      }
      const double push = 0.5 * (contact - dist);
      a.position -= push * n;
      b.position += push * n;
    }
  }
  for (auto& p : ps) apply_walls(p, config);
  ++state.step;
}

double kinetic_energy(const std::vector<Particle>& particles) {
  double e = 0.0;
  for (const auto& p : particles) e += 0.5 * p.mass * p.velocity.squaredNorm();
  return e;
}

Eigen::Vector2d momentum(const std::vector<Particle>& particles) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& p : particles) m += p.mass * p.velocity;
  return m;
}

TrajectorySet run(const SimConfig& config, const CollisionObserver& observer) {
  SimState state = init_state(config);
  TrajectorySet t;
  const auto k = static_cast<Eigen::Index>(config.n_particles);
  t.features.resize(config.n_steps, 2 * k);
  t.particle_ids = default_particle_ids(static_cast<std::size_t>(k));
  for (int s = 0; s < config.n_steps; ++s) {
    if (s > 0) step(state, config, observer);
    for (Eigen::Index i = 0; i < k; ++i) {
      t.features(s, 2 * i) = state.particles[static_cast<std::size_t>(i)].position.x();
      t.features(s, 2 * i + 1) = state.particles[static_cast<std::size_t>(i)].position.y();
    }
  }
  return t;
}

}  // namespace latdyn::collisim
