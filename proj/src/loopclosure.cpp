#include "rfmap/loopclosure.hpp"

#include <algorithm>
#include <cmath>

#include "rfmap/errors.hpp"

namespace rfmap {

namespace {

void validate_closure_config(const ClosureConfig& cfg) {
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0) {
    throw ConfigError("closure threshold must lie in [0, 1]");
  }
  if (cfg.max_edges_per_node <= 0) {
    throw ConfigError("max_edges_per_node must be positive");
  }
  if (cfg.min_intra_step_gap < 0) {
    throw ConfigError("min_intra_step_gap must be non-negative");
  }
}

}  // namespace

std::vector<ClosureCandidate> score_candidates(std::span<const Trajectory> trajectories,
                                               const NodeIndex& index,
                                               const SimilarityConfig& sim_cfg,
                                               const ClosureConfig& cfg, double min_similarity) {
  validate_closure_config(cfg);
  sim_cfg.validate();

  struct ObsNode {
    NodeId id;
    std::size_t traj;
    std::size_t step;
    const RfObservation* obs;
  };
  std::vector<ObsNode> nodes;
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const Trajectory& traj = trajectories[t];
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      if (traj.steps[k].observation.has_value() && !traj.steps[k].observation->empty()) {
        nodes.push_back({index.at(t, k), t, k, &*traj.steps[k].observation});
      }
    }
  }

  // The compound score is bounded by (1 + b^2) * jac / (b^2 * jac + 1), so a
  // pair can reach min_similarity only when jac >= T / (1 + b^2 (1 - T)).
  const double b2 = sim_cfg.beta * sim_cfg.beta;
  const double jac_bound =
      std::max(min_similarity / (1.0 + b2 * (1.0 - min_similarity)), cfg.jaccard_floor);

  std::vector<ClosureCandidate> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const ObsNode& a = nodes[i];
      const ObsNode& b = nodes[j];
      if (a.traj == b.traj &&
          b.step - a.step < static_cast<std::size_t>(cfg.min_intra_step_gap)) {
        continue;
      }
      const double g_jac = jaccard(*a.obs, *b.obs);
      if (g_jac < jac_bound || g_jac == 0.0) {
        continue;
      }
      const double g =
          compound_from_components(g_jac, kernelized_l1(*a.obs, *b.obs, sim_cfg), sim_cfg.beta);
      if (g >= min_similarity) {
        out.push_back({a.id, b.id, g});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const ClosureCandidate& x, const ClosureCandidate& y) {
    return x.from != y.from ? x.from < y.from : x.to < y.to;
  });
  return out;
}

std::vector<ClosureCandidate> select_candidates(std::span<const ClosureCandidate> candidates,
                                                double threshold, int max_edges_per_node) {
  std::vector<ClosureCandidate> pool;
  NodeId max_node = 0;
  for (const ClosureCandidate& c : candidates) {
    if (c.similarity >= threshold) {
      pool.push_back(c);
      max_node = std::max({max_node, c.from, c.to});
    }
  }
  std::sort(pool.begin(), pool.end(), [](const ClosureCandidate& x, const ClosureCandidate& y) {
    if (x.similarity != y.similarity) {
      return x.similarity > y.similarity;
    }
    return x.from != y.from ? x.from < y.from : x.to < y.to;
  });

  std::vector<int> capacity(static_cast<std::size_t>(max_node) + 1, max_edges_per_node);
  std::vector<ClosureCandidate> kept;
  for (const ClosureCandidate& c : pool) {
    if (capacity[c.from] > 0 && capacity[c.to] > 0) {
      --capacity[c.from];
      --capacity[c.to];
      kept.push_back(c);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const ClosureCandidate& x, const ClosureCandidate& y) {
    return x.from != y.from ? x.from < y.from : x.to < y.to;
  });
  return kept;
}

std::vector<RfEdge> make_edges(std::span<const ClosureCandidate> candidates,
                               const GeoModel& model) {
  std::vector<RfEdge> edges;
  edges.reserve(candidates.size());
  for (const ClosureCandidate& c : candidates) {
    const DistanceEstimate est = model.predict(c.similarity);
    if (!(est.var_d > 0.0) || !std::isfinite(est.var_d) || !std::isfinite(est.mu_d)) {
      throw NumericalError("distance model produced a degenerate variance");
    }
    RfEdge e;
    e.from = c.from;
    e.to = c.to;
    e.mu_d = est.mu_d;
    e.info_scalar = 1.0 / est.var_d;
    e.similarity = c.similarity;
    edges.push_back(e);
  }
  return edges;
}

std::vector<RfEdge> build_closures(std::span<const Trajectory> trajectories,
                                   const NodeIndex& index, const GeoModel& model,
                                   const SimilarityConfig& sim_cfg, const ClosureConfig& cfg) {
  const auto candidates = score_candidates(trajectories, index, sim_cfg, cfg, cfg.threshold);
  const auto selected = select_candidates(candidates, cfg.threshold, cfg.max_edges_per_node);
  return make_edges(selected, model);
}

std::vector<PairSample> selected_pair_samples(std::span<const Trajectory> trajectories,
                                              const SimilarityConfig& sim_cfg,
                                              const ClosureConfig& cfg) {
  std::vector<PairSample> out;
  for (const Trajectory& traj : trajectories) {
    const std::span<const Trajectory> one(&traj, 1);
    const NodeIndex index = NodeIndex::build(one);
    const auto candidates = score_candidates(one, index, sim_cfg, cfg, cfg.threshold);
    const auto selected = select_candidates(candidates, cfg.threshold, cfg.max_edges_per_node);
    for (const ClosureCandidate& c : selected) {
      PairSample s;
      s.similarity = c.similarity;
      s.distance = euclidean_distance(traj.steps[c.from].pose, traj.steps[c.to].pose);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace rfmap
