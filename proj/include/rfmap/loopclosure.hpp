#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfmap/geomodel.hpp"
#include "rfmap/graph.hpp"
#include "rfmap/similarity.hpp"
#include "rfmap/types.hpp"

namespace rfmap {

struct ClosureConfig {
  double threshold = 0.45;       // minimum compound similarity for an edge
  int max_edges_per_node = 10;   // degree cap, strongest first
  int min_intra_step_gap = 30;   // same-trajectory pairs closer than this are odometry, not closures
  double jaccard_floor = 0.0;    // optional extra prefilter; 0 disables
  std::uint64_t seed = 0;        // reserved for candidate subsampling; generation is exhaustive
};

// A scored node pair (from < to) before distance modeling.
struct ClosureCandidate {
  NodeId from = 0;
  NodeId to = 0;
  double similarity = 0.0;
};

// Scores every admissible observation-bearing pair with compound similarity
// and keeps those >= min_similarity. Admissible: different trajectories, or
// the same trajectory at least min_intra_step_gap steps apart. A threshold-
// derived Jaccard bound skips pairs that cannot reach min_similarity, so the
// result is exact. Output is sorted by (from, to).
std::vector<ClosureCandidate> score_candidates(std::span<const Trajectory> trajectories,
                                               const NodeIndex& index,
                                               const SimilarityConfig& sim_cfg,
                                               const ClosureConfig& cfg, double min_similarity);

// Degree-capped selection: candidates are visited strongest first (ties by
// node-id pair) and kept while both endpoints have capacity. Raising the
// threshold never adds edges, because decisions for surviving candidates do
// not depend on weaker ones.
std::vector<ClosureCandidate> select_candidates(std::span<const ClosureCandidate> candidates,
                                                double threshold, int max_edges_per_node);

// Turns selected candidates into range edges via the distance model
// (info_scalar = 1 / predicted variance). Sorted by (from, to).
std::vector<RfEdge> make_edges(std::span<const ClosureCandidate> candidates,
                               const GeoModel& model);

// score + select + model in one call.
std::vector<RfEdge> build_closures(std::span<const Trajectory> trajectories,
                                   const NodeIndex& index, const GeoModel& model,
                                   const SimilarityConfig& sim_cfg, const ClosureConfig& cfg);

// Intra-trajectory (similarity, distance) pairs drawn by the same policy
// that admits closures: per trajectory, admissible pairs are scored,
// thresholded, and degree-capped strongest first, and the dead-reckoned
// local poses supply the distance. Fitting the distance model on these
// pairs keeps it calibrated for the edges the graph will actually carry;
// capped strongest-first selection favours pairs whose similarity noise is
// high and whose true distance is low, so a model fitted on uniformly
// random pairs systematically over-predicts selected-edge distances.
std::vector<PairSample> selected_pair_samples(std::span<const Trajectory> trajectories,
                                              const SimilarityConfig& sim_cfg,
                                              const ClosureConfig& cfg);

}  // namespace rfmap
