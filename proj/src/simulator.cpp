#include "rfmap/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "rfmap/errors.hpp"
#include "rfmap/graph.hpp"
#include "rfmap/rng.hpp"

namespace rfmap {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string ap_name(int floor, int idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "f%d_ap%03d", floor, idx);
  return buf;
}

}  // namespace

ShadowField::ShadowField(double sigma, double corr_length, std::mt19937_64& rng) {
  // Random-Fourier realization of a squared-exponential Gaussian process:
  // frequencies ~ N(0, 1/corr^2) per axis, phases uniform. The amplitude
  // sqrt(2/K)*sigma makes the pointwise variance exactly sigma^2 for any K.
  constexpr int kComponents = 48;
  if (!(sigma > 0.0)) {
    return;
  }
  const double freq_sigma = corr_length > 0.0 ? 1.0 / corr_length : 0.0;
  std::normal_distribution<double> freq(0.0, freq_sigma);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  wx_.resize(kComponents);
  wy_.resize(kComponents);
  phase_.resize(kComponents);
  for (int k = 0; k < kComponents; ++k) {
    wx_[k] = freq(rng);
    wy_[k] = freq(rng);
    phase_[k] = phase(rng);
  }
  amplitude_ = sigma * std::sqrt(2.0 / kComponents);
}

double ShadowField::sample(double x, double y) const {
  if (amplitude_ == 0.0) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < wx_.size(); ++k) {
    sum += std::cos(wx_[k] * x + wy_[k] * y + phase_[k]);
  }
  return amplitude_ * sum;
}

void EnvironmentParams::validate() const {
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) {
    throw ConfigError("environment extent must be positive");
  }
  if (floors < 1) {
    throw ConfigError("environment needs at least one floor");
  }
  if (aps_per_floor < 1) {
    throw ConfigError("environment needs at least one access point per floor");
  }
  if (!(d0 > 0.0)) {
    throw ConfigError("reference distance d0 must be positive");
  }
  if (shadowing_sigma < 0.0 || p_drop < 0.0 || p_drop > 1.0 || !(shadowing_corr_m > 0.0)) {
    throw ConfigError("invalid radio noise parameters");
  }
  if (!(floor_height > 0.0)) {
    throw ConfigError("floor height must be positive");
  }
}

void TrajectoryParams::validate() const {
  if (n_trajectories < 1 || steps < 2) {
    throw ConfigError("need at least one trajectory of at least two steps");
  }
  if (!(step_len > 0.0)) {
    throw ConfigError("step length must be positive");
  }
  if (rf_period < 1) {
    throw ConfigError("rf_period must be at least 1");
  }
  if (pos_noise < 0.0 || heading_noise_deg < 0.0 || heading_bias_max_deg < 0.0 ||
      turn_sigma_deg < 0.0) {
    throw ConfigError("noise parameters must be non-negative");
  }
}

Environment generate_environment(const EnvironmentParams& params, std::uint64_t seed) {
  params.validate();
  Environment env;
  env.params = params;
  env.aps.reserve(static_cast<std::size_t>(params.floors) * params.aps_per_floor);
  for (int f = 0; f < params.floors; ++f) {
    std::mt19937_64 rng(mix_seed(seed, 0xA11CE000ULL + static_cast<std::uint64_t>(f)));
    std::uniform_real_distribution<double> ux(0.0, params.extent_x);
    std::uniform_real_distribution<double> uy(0.0, params.extent_y);
    for (int a = 0; a < params.aps_per_floor; ++a) {
      AccessPoint ap;
      ap.id = ap_name(f, a);
      ap.x = ux(rng);
      ap.y = uy(rng);
      ap.floor = f;
      ap.tx_power = params.tx_power;
      ap.path_loss_exponent = params.path_loss_exponent;
      ap.shadowing = ShadowField(params.shadowing_sigma, params.shadowing_corr_m, rng);
      env.aps.push_back(std::move(ap));
    }
  }
  return env;
}

RfObservation simulate_observation(const Environment& env, double x, double y, int floor,
                                   std::mt19937_64& rng) {
  const EnvironmentParams& p = env.params;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RfObservation::Reading> readings;
  for (const AccessPoint& ap : env.aps) {
    const int dfloor = std::abs(ap.floor - floor);
    const double d3 = std::hypot(x - ap.x, y - ap.y, dfloor * p.floor_height);
    const double d = std::max(d3, p.d0);
    double rssi = ap.tx_power - 10.0 * ap.path_loss_exponent * std::log10(d / p.d0);
    rssi += ap.shadowing.sample(x, y);
    rssi -= p.floor_penalty * dfloor;
    const bool dropped = unit(rng) < p.p_drop;
    if (rssi < p.dropout_floor || dropped) {
      continue;
    }
    readings.emplace_back(ap.id, rssi);
  }
  return RfObservation(std::move(readings));
}

RfObservation simulate_observation(const Environment& env, double x, double y, int floor,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x0B5ULL));
  return simulate_observation(env, x, y, floor, rng);
}

std::vector<SimTrajectory> generate_trajectories(const Environment& env,
                                                 const TrajectoryParams& params,
                                                 std::uint64_t seed) {
  env.params.validate();
  params.validate();
  const EnvironmentParams& ep = env.params;
  const double margin = std::min(2.0, 0.25 * std::min(ep.extent_x, ep.extent_y));

  std::vector<SimTrajectory> out;
  out.reserve(static_cast<std::size_t>(params.n_trajectories));
  for (int t = 0; t < params.n_trajectories; ++t) {
    std::mt19937_64 rng(mix_seed(seed, 0x77A1ULL + static_cast<std::uint64_t>(t)));
    std::uniform_real_distribution<double> ux(margin, ep.extent_x - margin);
    std::uniform_real_distribution<double> uy(margin, ep.extent_y - margin);
    std::uniform_real_distribution<double> uh(-std::numbers::pi, std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> ubias(-params.heading_bias_max_deg * kDegToRad,
                                                 params.heading_bias_max_deg * kDegToRad);

    SimTrajectory sim;
    char name[32];
    std::snprintf(name, sizeof(name), "sim%03d", t);
    sim.trajectory.id = name;
    sim.trajectory.floor = t % ep.floors;
    const double bias = ubias(rng);

    // Ground-truth bounded random walk with wall reflection.
    std::vector<Pose2D>& truth = sim.truth;
    truth.reserve(static_cast<std::size_t>(params.steps));
    double x = ux(rng);
    double y = uy(rng);
    double heading = uh(rng);
    truth.emplace_back(x, y, heading);
    for (int k = 1; k < params.steps; ++k) {
      heading = wrap_angle(heading + params.turn_sigma_deg * kDegToRad * gauss(rng));
      for (int attempt = 0; attempt < 8; ++attempt) {
        const double nx = x + params.step_len * std::cos(heading);
        const double ny = y + params.step_len * std::sin(heading);
        const bool x_out = nx < 0.0 || nx > ep.extent_x;
        const bool y_out = ny < 0.0 || ny > ep.extent_y;
        if (!x_out && !y_out) {
          x = nx;
          y = ny;
          break;
        }
        if (x_out) {
          heading = wrap_angle(std::numbers::pi - heading);
        }
        if (y_out) {
          heading = wrap_angle(-heading);
        }
      }
      truth.emplace_back(x, y, heading);
    }

    // Measured increments: the exact increment plus noise plus the constant
    // heading-rate bias, then re-integrated from the origin into the local
    // frame the trace actually reports.
    std::vector<TrajectoryStep>& steps = sim.trajectory.steps;
    steps.resize(static_cast<std::size_t>(params.steps));
    Pose2D local(0.0, 0.0, 0.0);
    steps[0].pose = local;
    steps[0].timestamp = 0.0;
    for (int k = 1; k < params.steps; ++k) {
      Eigen::Vector3d z = imu_predict(truth[k - 1], truth[k]);
      z.x() += params.pos_noise * gauss(rng);
      z.y() += params.pos_noise * gauss(rng);
      z.z() = wrap_angle(z.z() + params.heading_noise_deg * kDegToRad * gauss(rng) + bias);
      const double c = std::cos(-local.theta);
      const double s = std::sin(-local.theta);
      local = Pose2D(local.x - (c * z.x() - s * z.y()), local.y - (s * z.x() + c * z.y()),
                     local.theta - z.z());
      steps[k].pose = local;
      steps[k].timestamp = static_cast<double>(k);
    }
    for (int k = 0; k < params.steps; ++k) {
      if (k % params.rf_period == 0) {
        steps[k].observation =
            simulate_observation(env, truth[k].x, truth[k].y, sim.trajectory.floor, rng);
      }
    }
    out.push_back(std::move(sim));
  }
  return out;
}

std::vector<QuerySample> generate_queries(const Environment& env, int count, std::uint64_t seed) {
  if (count < 1) {
    throw ConfigError("query count must be positive");
  }
  const EnvironmentParams& ep = env.params;
  const double margin = std::min(1.0, 0.1 * std::min(ep.extent_x, ep.extent_y));
  std::vector<QuerySample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int q = 0; q < count; ++q) {
    std::mt19937_64 rng(mix_seed(seed, 0x9E47ULL + static_cast<std::uint64_t>(q)));
    std::uniform_real_distribution<double> ux(margin, ep.extent_x - margin);
    std::uniform_real_distribution<double> uy(margin, ep.extent_y - margin);
    QuerySample sample;
    char name[32];
    std::snprintf(name, sizeof(name), "q%04d", q);
    sample.id = name;
    sample.x = ux(rng);
    sample.y = uy(rng);
    sample.floor = q % ep.floors;
    sample.readings = simulate_observation(env, sample.x, sample.y, sample.floor, rng);
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace rfmap
