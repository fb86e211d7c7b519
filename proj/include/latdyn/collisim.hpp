#pragma once

// Equal-mass elastic collisions of discs in a rectangular box, stepped with a
// fixed timestep and post-step overlap resolution.

#include "latdyn/random.hpp"
#include "latdyn/trajkit.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace latdyn::collisim {

struct Particle {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double radius = 0.04;
  double mass = 1.0;
};

struct SimConfig {
  int n_particles = 5;
  double box_w = 1.0;
  double box_h = 1.0;
  double radius = 0.04;
  double speed_scale = 0.005;  // per-component velocity drawn from U(-s, s)
  double dt = 1.0;
  int n_steps = 500;
  std::uint64_t seed = 0;
  // Fraction of the box (centred) in which particles start; 1 = whole box.
  double init_spread = 1.0;

  void validate() const;
};

struct SimState {
  std::vector<Particle> particles;
  Rng rng{0};  // jitter source for coincident centres
  long step = 0;
};

// Velocities and positions immediately before and after one pair resolution.
struct CollisionEvent {
  long step;
  std::size_t i, j;
  Eigen::Vector2d u1, u2;  // before
  Eigen::Vector2d v1, v2;  // after
};

using CollisionObserver = std::function<void(const CollisionEvent&)>;

// Places particles without overlap; throws ConfigError when the box is too
// crowded to place them within a bounded number of attempts.
SimState init_state(const SimConfig& config);

// Exchanges the velocity components along the line of centres. Tangential
// components are unchanged. Throws DegenerateGeometryError on coincident
// centres and InputError if the discs are not in contact.
std::pair<Particle, Particle> resolve_pair_collision(const Particle& p1, const Particle& p2);

// Advances one step: free flight, wall reflection, then pairwise resolution
// in ascending (i, j) order with symmetric positional separation.
void step(SimState& state, const SimConfig& config, const CollisionObserver& observer = {});

double kinetic_energy(const std::vector<Particle>& particles);
Eigen::Vector2d momentum(const std::vector<Particle>& particles);

// Row 0 holds the initial positions; n_steps rows in total.
TrajectorySet run(const SimConfig& config, const CollisionObserver& observer = {});

}  // namespace latdyn::collisim
