#include "rfmap/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "rfmap/errors.hpp"

namespace rfmap {

Rfm build_rfm(std::span<const Trajectory> trajectories) {
  Rfm rfm;
  for (const Trajectory& traj : trajectories) {
    for (const TrajectoryStep& step : traj.steps) {
      if (step.observation.has_value() && !step.observation->empty()) {
        rfm.push_back({step.pose.x, step.pose.y, traj.floor, *step.observation});
      }
    }
  }
  return rfm;
}

LocateResult knn_locate(const Rfm& rfm, const RfObservation& query,
                        const SimilarityConfig& sim_cfg, const KnnConfig& knn_cfg) {
  if (rfm.empty()) {
    throw DataError("reference map is empty");
  }
  if (knn_cfg.k <= 0) {
    throw ConfigError("k must be positive");
  }
  sim_cfg.validate();

  LocateResult result;
  std::size_t k = static_cast<std::size_t>(knn_cfg.k);
  if (k > rfm.size()) {
    std::cerr << "[warn] k=" << knn_cfg.k << " exceeds map size " << rfm.size()
              << "; using all entries\n";
    k = rfm.size();
    result.truncated_k = true;
  }

  struct Scored {
    double dist;
    std::size_t idx;
  };
  std::vector<Scored> scored;
  scored.reserve(rfm.size());
  for (std::size_t i = 0; i < rfm.size(); ++i) {
    scored.push_back({1.0 - compound_similarity(query, rfm[i].readings, sim_cfg), i});
  }
  auto by_dist_then_index = [](const Scored& a, const Scored& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.idx < b.idx;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    by_dist_then_index);

  double sx = 0.0;
  double sy = 0.0;
  double sw = 0.0;
  std::map<int, std::size_t> votes;
  for (std::size_t i = 0; i < k; ++i) {
    const RfmEntry& entry = rfm[scored[i].idx];
    const double w = knn_cfg.weighted ? std::max(1.0 - scored[i].dist, 0.0) : 1.0;
    sx += w * entry.x;
    sy += w * entry.y;
    sw += w;
    ++votes[entry.floor];
  }
  if (sw <= 0.0) {
    // All weights vanished (every neighbor fully dissimilar): plain mean.
    sx = sy = sw = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      sx += rfm[scored[i].idx].x;
      sy += rfm[scored[i].idx].y;
      sw += 1.0;
    }
  }
  result.x = sx / sw;
  result.y = sy / sw;

  std::size_t best_count = 0;
  bool tie = false;
  int best_floor = rfm[scored[0].idx].floor;
  for (const auto& [floor, count] : votes) {
    if (count > best_count) {
      best_count = count;
      best_floor = floor;
      tie = false;
    } else if (count == best_count) {
      tie = true;
    }
  }
  result.floor = tie ? rfm[scored[0].idx].floor : best_floor;
  return result;
}

}  // namespace rfmap
