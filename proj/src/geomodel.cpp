#include "rfmap/geomodel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

#include "rfmap/errors.hpp"
#include "rfmap/rng.hpp"

namespace rfmap {

std::string to_string(ZetaMethod method) {
  return method == ZetaMethod::kMle ? "mle" : "kde";
}

ZetaMethod zeta_method_from_string(const std::string& name) {
  if (name == "mle") {
    return ZetaMethod::kMle;
  }
  if (name == "kde") {
    return ZetaMethod::kKde;
  }
  throw ConfigError("unknown scale estimator '" + name + "' (expected mle or kde)");
}

DistanceEstimate GeoModel::predict(double similarity) const {
  const double zeta = std::exp(w0 + w1 * similarity);
  DistanceEstimate out;
  out.mu_d = zeta * std::sqrt(std::numbers::pi / 2.0);
  out.var_d = (4.0 - std::numbers::pi) / 2.0 * zeta * zeta;
  return out;
}

std::vector<PairSample> sample_pairs(std::span<const Trajectory> trajectories, int n_per_traj,
                                     const SimilarityConfig& sim_cfg, std::uint64_t seed) {
  if (n_per_traj <= 0) {
    throw ConfigError("n_per_traj must be positive");
  }
  sim_cfg.validate();
  std::vector<PairSample> out;
  out.reserve(trajectories.size() * static_cast<std::size_t>(n_per_traj));
  for (const Trajectory& traj : trajectories) {
    std::vector<std::size_t> obs_steps;
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      if (traj.steps[k].observation.has_value()) {
        obs_steps.push_back(k);
      }
    }
    if (obs_steps.size() < 2) {
      std::cerr << "[warn] trajectory '" << traj.id
                << "' has fewer than 2 observation-bearing steps; skipped in pair sampling\n";
      continue;
    }
    std::mt19937_64 rng(mix_seed(seed, hash_name(traj.id)));
    std::uniform_int_distribution<std::size_t> pick(0, obs_steps.size() - 1);
    for (int n = 0; n < n_per_traj; ++n) {
      std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      while (j == i) {
        j = pick(rng);
      }
      const TrajectoryStep& a = traj.steps[obs_steps[i]];
      const TrajectoryStep& b = traj.steps[obs_steps[j]];
      PairSample s;
      s.similarity = compound_similarity(*a.observation, *b.observation, sim_cfg);
      s.distance = euclidean_distance(a.pose, b.pose);
      out.push_back(s);
    }
  }
  return out;
}

std::vector<SimilarityBin> bin_samples(std::span<const PairSample> samples, int n_bins,
                                       int min_count) {
  if (n_bins <= 0) {
    throw ConfigError("bin count must be positive");
  }
  std::vector<SimilarityBin> bins(static_cast<std::size_t>(n_bins));
  for (int i = 0; i < n_bins; ++i) {
    bins[i].center = (i + 0.5) / n_bins;
    bins[i].half_width = 0.5 / n_bins;
  }
  for (const PairSample& s : samples) {
    if (s.similarity < 0.0 || s.similarity > 1.0) {
      throw DataError("similarity outside [0, 1] in pair samples");
    }
    auto idx = static_cast<std::size_t>(s.similarity * n_bins);
    if (idx >= static_cast<std::size_t>(n_bins)) {
      idx = static_cast<std::size_t>(n_bins) - 1;  // similarity exactly 1.0
    }
    bins[idx].distances.push_back(s.distance);
  }
  std::vector<SimilarityBin> kept;
  for (SimilarityBin& b : bins) {
    if (static_cast<int>(b.distances.size()) >= min_count) {
      kept.push_back(std::move(b));
    }
  }
  if (kept.empty()) {
    throw DataError("insufficient data for model fit");
  }
  return kept;
}

namespace {

double estimate_zeta_mle(std::span<const double> distances) {
  double sum_sq = 0.0;
  for (double d : distances) {
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq / (2.0 * static_cast<double>(distances.size())));
}

// Mode of a Gaussian KDE over the distances; for the radial model the mode
// equals the scale parameter directly. Bandwidth is Silverman's rule of
// thumb, 0.9 * min(sd, iqr / 1.34) * n^(-1/5).
double estimate_zeta_kde(std::span<const double> distances) {
  const std::size_t n = distances.size();
  std::vector<double> sorted(distances.begin(), distances.end());
  std::sort(sorted.begin(), sorted.end());
  const double d_max = sorted.back();

  double mean = 0.0;
  for (double d : sorted) {
    mean += d;
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double d : sorted) {
    var += (d - mean) * (d - mean);
  }
  var /= static_cast<double>(n > 1 ? n - 1 : 1);
  const double sd = std::sqrt(var);
  const double iqr =
      sorted[static_cast<std::size_t>(0.75 * (n - 1))] - sorted[static_cast<std::size_t>(0.25 * (n - 1))];
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) {
    spread = sd;
  }
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (!(h > 0.0)) {
    return sorted[n / 2];  // all values identical: density peaks there
  }

  constexpr int kGridPoints = 512;
  double best_x = 0.0;
  double best_density = -1.0;
  for (int g = 0; g < kGridPoints; ++g) {
    const double x = d_max * g / (kGridPoints - 1);
    double density = 0.0;
    for (double d : sorted) {
      const double u = (x - d) / h;
      density += std::exp(-0.5 * u * u);
    }
    if (density > best_density) {
      best_density = density;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

double estimate_zeta(std::span<const double> distances, ZetaMethod method) {
  if (distances.empty()) {
    throw DataError("cannot estimate scale from an empty bin");
  }
  bool all_zero = true;
  for (double d : distances) {
    if (!std::isfinite(d) || d < 0.0) {
      throw DataError("distances must be finite and non-negative");
    }
    if (d > 0.0) {
      all_zero = false;
    }
  }
  if (all_zero) {
    std::cerr << "[warn] all distances in bin are zero; scale estimate degenerate\n";
    return 0.0;
  }
  return method == ZetaMethod::kMle ? estimate_zeta_mle(distances) : estimate_zeta_kde(distances);
}

GeoModel fit_log_linear(std::span<const SimilarityBin> bins, ZetaMethod method) {
  // Count-weighted OLS of ln(zeta_hat) on the bin center.
  double sw = 0.0;
  double swc = 0.0;
  double swcc = 0.0;
  double swy = 0.0;
  double swcy = 0.0;
  int used = 0;
  std::int64_t samples = 0;
  for (const SimilarityBin& b : bins) {
    const double zeta = estimate_zeta(b.distances, method);
    if (!(zeta > 0.0)) {
      std::cerr << "[warn] bin at center " << b.center << " has zero scale estimate; excluded\n";
      continue;
    }
    const double w = static_cast<double>(b.distances.size());
    const double y = std::log(zeta);
    sw += w;
    swc += w * b.center;
    swcc += w * b.center * b.center;
    swy += w * y;
    swcy += w * b.center * y;
    ++used;
    samples += static_cast<std::int64_t>(b.distances.size());
  }
  if (used < 2) {
    throw DataError("fewer than 2 usable bins for model fit");
  }
  const double denom = sw * swcc - swc * swc;
  if (std::abs(denom) < 1e-12 * sw * sw) {
    throw NumericalError("degenerate bin centers in model fit");
  }
  GeoModel model;
  model.w1 = (sw * swcy - swc * swy) / denom;
  model.w0 = (swy - model.w1 * swc) / sw;
  model.bins_used = used;
  model.sample_count = samples;
  model.method = method;
  return model;
}

}  // namespace rfmap
