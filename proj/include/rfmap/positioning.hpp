#pragma once

#include <span>
#include <vector>

#include "rfmap/similarity.hpp"
#include "rfmap/types.hpp"

namespace rfmap {

// One fingerprint of the reference map: a position, its floor, and the radio
// snapshot taken there. Observations are non-empty by construction.
struct RfmEntry {
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  RfObservation readings;
};

using Rfm = std::vector<RfmEntry>;

// Collects every observation-bearing step of the (typically fused) input
// trajectories into map entries. Steps without a non-empty observation are
// skipped; nothing is deduplicated.
Rfm build_rfm(std::span<const Trajectory> trajectories);

struct KnnConfig {
  int k = 5;
  bool weighted = false;  // similarity-weighted mean instead of plain mean
};

struct LocateResult {
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  bool truncated_k = false;  // k exceeded the map size and was clamped
};

// k-nearest-neighbor lookup under distance 1 - g. Ties in distance resolve by
// entry index, so results are permutation-stable for a fixed map order. The
// estimate is the (optionally similarity-weighted) mean of the neighbor
// positions; the floor is the majority vote, ties going to the floor of the
// single nearest neighbor. k larger than the map clamps with a warning. An
// empty map throws DataError; a non-positive k throws ConfigError.
LocateResult knn_locate(const Rfm& rfm, const RfObservation& query,
                        const SimilarityConfig& sim_cfg, const KnnConfig& knn_cfg);

}  // namespace rfmap
