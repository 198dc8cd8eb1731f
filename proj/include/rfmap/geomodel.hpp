#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfmap/similarity.hpp"
#include "rfmap/types.hpp"

namespace rfmap {

// One self-supervised training sample: compound similarity of two snapshots
// from the same trajectory and their dead-reckoned planar separation.
struct PairSample {
  double similarity = 0.0;
  double distance = 0.0;
};

// Distances collected for one similarity bin. center = (i + 0.5) / C,
// half_width = 1 / (2C) for C equal-width bins over [0, 1].
struct SimilarityBin {
  double center = 0.0;
  double half_width = 0.0;
  std::vector<double> distances;
};

enum class ZetaMethod {
  kMle,
  kKde,
};

std::string to_string(ZetaMethod method);
ZetaMethod zeta_method_from_string(const std::string& name);

struct GeoModelParams {
  int n_per_traj = 100;   // sampled pairs per trajectory
  int bins = 20;          // equal-width similarity bins
  int min_count = 30;     // bins thinner than this are dropped
  ZetaMethod method = ZetaMethod::kMle;
};

// Per-similarity distance statistics under the single-parameter radial model:
// mean = zeta * sqrt(pi / 2), variance = (4 - pi) / 2 * zeta^2.
struct DistanceEstimate {
  double mu_d = 0.0;
  double var_d = 0.0;
};

// Log-linear scale model: zeta(s) = exp(w0 + w1 * s).
struct GeoModel {
  double w0 = 0.0;
  double w1 = 0.0;
  int bins_used = 0;           // provenance: bins that survived fitting
  std::int64_t sample_count = 0;  // provenance: distances behind the fit
  ZetaMethod method = ZetaMethod::kMle;

  DistanceEstimate predict(double similarity) const;
};

// Draws n_per_traj random unordered pairs of observation-bearing steps per
// trajectory (i != j, repeats across draws allowed) and records (similarity,
// local-frame distance). Trajectories with fewer than two observation-bearing
// steps are skipped with a warning on stderr. Deterministic for a given seed
// and input order; per-trajectory streams are derived so results do not
// depend on evaluation order.
std::vector<PairSample> sample_pairs(std::span<const Trajectory> trajectories, int n_per_traj,
                                     const SimilarityConfig& sim_cfg, std::uint64_t seed);

// Partitions samples into n_bins equal-width similarity bins over [0, 1]
// (similarity 1.0 folds into the top bin) and drops bins with fewer than
// min_count samples. Throws DataError("insufficient data for model fit")
// when nothing survives.
std::vector<SimilarityBin> bin_samples(std::span<const PairSample> samples, int n_bins,
                                       int min_count);

// Scale estimate for one bin. MLE: sqrt(sum d^2 / (2N)). KDE: argmax of a
// Gaussian kernel density (Silverman bandwidth) on a 512-point grid, using
// the mode = zeta identity. Empty input throws DataError; an all-zero bin
// returns 0 with a warning (degenerate, excluded from fitting).
double estimate_zeta(std::span<const double> distances, ZetaMethod method);

// Count-weighted least squares of ln(zeta_hat) on bin centers. Bins whose
// estimate is zero are excluded; fewer than two usable bins throws DataError.
GeoModel fit_log_linear(std::span<const SimilarityBin> bins, ZetaMethod method);

}  // namespace rfmap
