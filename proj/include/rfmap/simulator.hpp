#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rfmap/types.hpp"

namespace rfmap {

// Stationary Gaussian random field with N(0, sigma^2) marginals and a smooth
// squared-exponential spatial correlation, realized as a random-Fourier sum.
// Shadowing is a property of place (walls, furniture, people density), so two
// receivers at the same spot must see the same offset; an independent draw per
// snapshot would make fingerprints unrepeatable.
class ShadowField {
 public:
  ShadowField() = default;
  ShadowField(double sigma, double corr_length, std::mt19937_64& rng);

  double sample(double x, double y) const;

 private:
  std::vector<double> wx_, wy_, phase_;
  double amplitude_ = 0.0;
};

struct AccessPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  double tx_power = -40.0;          // dBm at the reference distance
  double path_loss_exponent = 2.5;
  ShadowField shadowing;            // receiver-position dependent offset
};

struct EnvironmentParams {
  double extent_x = 100.0;  // m
  double extent_y = 50.0;   // m
  int floors = 1;
  int aps_per_floor = 30;
  double tx_power = -40.0;
  double path_loss_exponent = 2.5;
  double d0 = 1.0;                // reference distance, m
  double shadowing_sigma = 4.0;   // dBm
  double shadowing_corr_m = 8.0;  // correlation length of the shadowing field
  double dropout_floor = -95.0;   // readings weaker than this are dropped
  double p_drop = 0.1;            // independent per-source dropout
  double floor_penalty = 15.0;    // dB attenuation per floor crossed
  double floor_height = 4.0;      // m, enters the 3D distance

  void validate() const;
};

struct Environment {
  EnvironmentParams params;
  std::vector<AccessPoint> aps;
};

// Uniform AP placement per floor, ids prefixed per floor ("f0_ap012") so the
// per-floor id sets are disjoint. Deterministic for a given seed. Throws
// ConfigError when the parameter set allows zero access points.
Environment generate_environment(const EnvironmentParams& params, std::uint64_t seed);

// Log-distance path loss with Gaussian shadowing and per-floor attenuation:
//   rssi = P0 - 10 n log10(max(d3, d0) / d0) + shadow(x, y) - penalty * |dfloor|
// where d3 includes the floor-height offset and shadow is the access point's
// field (marginally N(0, sigma) at every position). Readings below
// dropout_floor and an independent p_drop fraction are omitted; the result
// may be empty.
RfObservation simulate_observation(const Environment& env, double x, double y, int floor,
                                   std::mt19937_64& rng);

// Seed convenience wrapper around the stream version.
RfObservation simulate_observation(const Environment& env, double x, double y, int floor,
                                   std::uint64_t seed);

struct TrajectoryParams {
  int n_trajectories = 40;
  int steps = 300;
  double step_len = 0.7;              // m per step
  double turn_sigma_deg = 8.0;        // heading random-walk of the true path
  double pos_noise = 0.05;            // m per axis per step on the measured increment
  double heading_noise_deg = 0.3;     // per step on the measured turn
  double heading_bias_max_deg = 0.2;  // constant per-trajectory bias magnitude bound
  int rf_period = 4;                  // every rf_period-th step takes a snapshot

  void validate() const;
};

// A generated walk: ground truth in the shared frame plus the trace a
// dead-reckoning frontend would produce (noisy increments integrated from the
// origin, snapshots taken at the true positions).
struct SimTrajectory {
  std::vector<Pose2D> truth;
  Trajectory trajectory;
};

// Bounded random walks with wall reflection. Per-trajectory seeds are derived
// from the base seed, so generation is order-independent and reproducible.
std::vector<SimTrajectory> generate_trajectories(const Environment& env,
                                                 const TrajectoryParams& params,
                                                 std::uint64_t seed);

// A held-out evaluation point: a snapshot labeled with where it was taken.
struct QuerySample {
  std::string id;
  RfObservation readings;
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
};

// Uniform positions over the extent (1 m margin), floors round-robin.
std::vector<QuerySample> generate_queries(const Environment& env, int count, std::uint64_t seed);

}  // namespace rfmap
