#include "rfmap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <unordered_map>

#include "rfmap/errors.hpp"

namespace rfmap {

std::vector<Pose2D> register_trajectories(std::span<const Trajectory> trajectories,
                                          const NodeIndex& index,
                                          std::span<const RfEdge> closures) {
  const std::size_t n_traj = trajectories.size();
  if (n_traj == 0) {
    throw DataError("nothing to register");
  }

  std::size_t seed_traj = 0;
  for (std::size_t t = 1; t < n_traj; ++t) {
    if (trajectories[t].steps.size() > trajectories[seed_traj].steps.size()) {
      seed_traj = t;
    }
  }

  std::vector<char> placed(n_traj, 0);
  std::vector<double> off_x(n_traj, 0.0);
  std::vector<double> off_y(n_traj, 0.0);
  std::vector<double> rot(n_traj, 0.0);
  placed[seed_traj] = 1;

  // Strongest-first greedy attachment over closures that bridge the placed
  // and unplaced sets. The strongest closure pins the unplaced endpoint at
  // the modeled distance along the current bearing; the trajectory's gauge
  // rotation is then chosen from a coarse candidate grid by the robustified
  // residual of every bridging closure, so a lone closure (which any
  // rotation satisfies) keeps the dead-reckoned heading.
  std::vector<std::size_t> order(closures.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (closures[a].similarity != closures[b].similarity) {
      return closures[a].similarity > closures[b].similarity;
    }
    return a < b;
  });

  auto local_pose = [&](NodeId id) {
    const auto [t, k] = index.locate(id);
    return std::make_pair(t, trajectories[t].steps[k].pose);
  };
  auto global_xy = [&](NodeId id) {
    const auto [t, p] = local_pose(id);
    const double c = std::cos(rot[t]);
    const double s = std::sin(rot[t]);
    return std::make_pair(c * p.x - s * p.y + off_x[t], s * p.x + c * p.y + off_y[t]);
  };

  constexpr int kRotationCandidates = 24;
  constexpr double kHuberDelta = 1.0;

  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i : order) {
      const RfEdge& e = closures[i];
      const auto [ta, pa] = local_pose(e.from);
      const auto [tb, pb] = local_pose(e.to);
      if (placed[ta] == placed[tb]) {
        continue;
      }
      const std::size_t t_new = placed[ta] ? tb : ta;
      const NodeId anchor_id = placed[ta] ? e.from : e.to;
      const Pose2D& new_local = placed[ta] ? pb : pa;

      const auto [ax, ay] = global_xy(anchor_id);

      // Closures that tie t_new to the already-placed set, for scoring.
      struct Bridge {
        double lx, ly;  // local endpoint on t_new
        double gx, gy;  // global endpoint on the placed side
        double mu_d, info;
      };
      std::vector<Bridge> bridges;
      for (const RfEdge& c : closures) {
        const auto [ca, qa] = local_pose(c.from);
        const auto [cb, qb] = local_pose(c.to);
        if (ca == t_new && placed[cb]) {
          const auto [gx, gy] = global_xy(c.to);
          bridges.push_back({qa.x, qa.y, gx, gy, c.mu_d, c.info_scalar});
        } else if (cb == t_new && placed[ca]) {
          const auto [gx, gy] = global_xy(c.from);
          bridges.push_back({qb.x, qb.y, gx, gy, c.mu_d, c.info_scalar});
        }
      }

      double best_alpha = 0.0;
      double best_score = std::numeric_limits<double>::infinity();
      double best_ox = 0.0;
      double best_oy = 0.0;
      for (int k = 0; k < kRotationCandidates; ++k) {
        const double alpha = 2.0 * std::numbers::pi * k / kRotationCandidates;
        const double c = std::cos(alpha);
        const double s = std::sin(alpha);
        // Rotated but untranslated endpoint of the pinning closure.
        const double nx = c * new_local.x - s * new_local.y;
        const double ny = s * new_local.x + c * new_local.y;
        double dx = nx - ax;
        double dy = ny - ay;
        const double len = std::hypot(dx, dy);
        if (len < 1e-9) {
          dx = 1.0;
          dy = 0.0;
        } else {
          dx /= len;
          dy /= len;
        }
        const double ox = (ax + dx * e.mu_d) - nx;
        const double oy = (ay + dy * e.mu_d) - ny;

        double score = 0.0;
        for (const Bridge& b : bridges) {
          const double bx = c * b.lx - s * b.ly + ox;
          const double by = s * b.lx + c * b.ly + oy;
          const double r = std::hypot(bx - b.gx, by - b.gy) - b.mu_d;
          const double w = b.info * r * r;
          score += w <= kHuberDelta * kHuberDelta
                       ? w
                       : 2.0 * kHuberDelta * std::sqrt(w) - kHuberDelta * kHuberDelta;
        }
        if (score + 1e-12 < best_score) {
          best_score = score;
          best_alpha = alpha;
          best_ox = ox;
          best_oy = oy;
        }
      }

      rot[t_new] = best_alpha;
      off_x[t_new] = best_ox;
      off_y[t_new] = best_oy;
      placed[t_new] = 1;
      progress = true;
      break;  // restart: the placed set changed
    }
  }

  std::vector<Pose2D> initial(index.node_count());
  for (std::size_t t = 0; t < n_traj; ++t) {
    const double c = std::cos(rot[t]);
    const double s = std::sin(rot[t]);
    for (std::size_t k = 0; k < trajectories[t].steps.size(); ++k) {
      const Pose2D& p = trajectories[t].steps[k].pose;
      initial[index.at(t, k)] = Pose2D(c * p.x - s * p.y + off_x[t], s * p.x + c * p.y + off_y[t],
                                       p.theta - rot[t]);
    }
  }
  return initial;
}

PoseGraph build_pose_graph(std::span<const Trajectory> trajectories, const NodeIndex& index,
                           std::span<const Pose2D> initial, std::span<const RfEdge> closures,
                           const FusionConfig& cfg) {
  if (initial.size() != index.node_count()) {
    throw DataError("initial pose count does not match the node index");
  }
  PoseGraph graph;
  for (const Pose2D& p : initial) {
    graph.add_node(p);
  }
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const Trajectory& traj = trajectories[t];
    for (std::size_t k = 1; k < traj.steps.size(); ++k) {
      ImuEdge e;
      e.from = index.at(t, k - 1);
      e.to = index.at(t, k);
      e.z = imu_predict(traj.steps[k - 1].pose, traj.steps[k].pose);
      e.info_a = cfg.imu_info_a;
      e.info_b = cfg.imu_info_b;
      graph.add_imu_edge(e);
    }
  }
  for (const RfEdge& e : closures) {
    graph.add_rf_edge(e);
  }

  std::size_t longest = 0;
  for (std::size_t t = 1; t < trajectories.size(); ++t) {
    if (trajectories[t].steps.size() > trajectories[longest].steps.size()) {
      longest = t;
    }
  }
  graph.anchor(index.at(longest, 0));
  return graph;
}

FloorFusionResult fuse_floor(std::span<const Trajectory> trajectories, const GeoModel& model,
                             const FusionConfig& cfg) {
  if (trajectories.empty()) {
    throw DataError("no trajectories to fuse");
  }
  for (const Trajectory& traj : trajectories) {
    validate_trajectory(traj);
    if (traj.floor != trajectories.front().floor) {
      throw DataError("fuse_floor received trajectories from different floors");
    }
  }

  FloorFusionResult result;
  result.floor = trajectories.front().floor;
  result.index = NodeIndex::build(trajectories);
  result.closures =
      build_closures(trajectories, result.index, model, cfg.sim, cfg.closure);
  const std::vector<Pose2D> initial =
      register_trajectories(trajectories, result.index, result.closures);
  result.graph = build_pose_graph(trajectories, result.index, initial, result.closures, cfg);
  result.first_pass = optimize(result.graph, cfg.solver);
  result.pruned = prune_edges(result.graph, cfg.prune_chi2);
  result.second_pass = optimize(result.graph, cfg.solver);

  result.aligned.assign(trajectories.begin(), trajectories.end());
  for (std::size_t t = 0; t < result.aligned.size(); ++t) {
    for (std::size_t k = 0; k < result.aligned[t].steps.size(); ++k) {
      result.aligned[t].steps[k].pose = result.graph.pose(result.index.at(t, k));
    }
  }
  return result;
}

std::vector<FloorFusionResult> fuse_all(std::span<const Trajectory> trajectories,
                                        const GeoModel& model, const FusionConfig& cfg) {
  std::map<int, std::vector<std::size_t>> by_floor;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    by_floor[trajectories[i].floor].push_back(i);
  }
  std::vector<FloorFusionResult> out;
  out.reserve(by_floor.size());
  for (const auto& [floor, indices] : by_floor) {
    std::vector<Trajectory> group;
    group.reserve(indices.size());
    for (std::size_t i : indices) {
      group.push_back(trajectories[i]);
    }
    FloorFusionResult r = fuse_floor(group, model, cfg);
    r.source_indices = indices;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepPoint> sweep_thresholds(std::span<const Trajectory> trajectories,
                                         const GeoModel& model, const FusionConfig& cfg,
                                         std::span<const double> thresholds) {
  if (thresholds.empty()) {
    throw ConfigError("threshold sweep needs at least one threshold");
  }
  const double t_min = *std::min_element(thresholds.begin(), thresholds.end());

  std::map<int, std::vector<std::size_t>> by_floor;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    by_floor[trajectories[i].floor].push_back(i);
  }

  struct FloorInput {
    int floor;
    std::vector<std::size_t> indices;
    std::vector<Trajectory> group;
    NodeIndex index;
    std::vector<ClosureCandidate> candidates;  // scored once at t_min
  };
  std::vector<FloorInput> floors;
  for (const auto& [floor, indices] : by_floor) {
    FloorInput fi;
    fi.floor = floor;
    fi.indices = indices;
    for (std::size_t i : indices) {
      fi.group.push_back(trajectories[i]);
    }
    fi.index = NodeIndex::build(fi.group);
    fi.candidates = score_candidates(fi.group, fi.index, cfg.sim, cfg.closure, t_min);
    floors.push_back(std::move(fi));
  }

  std::vector<SweepPoint> out;
  out.reserve(thresholds.size());
  for (double threshold : thresholds) {
    SweepPoint point;
    point.threshold = threshold;
    for (const FloorInput& fi : floors) {
      const auto selected =
          select_candidates(fi.candidates, threshold, cfg.closure.max_edges_per_node);
      const auto closures = make_edges(selected, model);
      point.edges_built += closures.size();

      FloorFusionResult r;
      r.floor = fi.floor;
      r.source_indices = fi.indices;
      r.index = fi.index;
      r.closures = closures;
      const auto initial = register_trajectories(fi.group, fi.index, closures);
      r.graph = build_pose_graph(fi.group, fi.index, initial, closures, cfg);
      r.first_pass = optimize(r.graph, cfg.solver);
      r.pruned = prune_edges(r.graph, cfg.prune_chi2);
      r.second_pass = optimize(r.graph, cfg.solver);
      r.aligned = fi.group;
      for (std::size_t t = 0; t < r.aligned.size(); ++t) {
        for (std::size_t k = 0; k < r.aligned[t].steps.size(); ++k) {
          r.aligned[t].steps[k].pose = r.graph.pose(r.index.at(t, k));
        }
      }
      point.floors.push_back(std::move(r));
    }
    out.push_back(std::move(point));
  }
  return out;
}

TrajectoryAte evaluate_ate(std::span<const FloorFusionResult> fusions,
                           std::span<const TruthPoint> truth) {
  std::unordered_map<std::string, std::vector<const TruthPoint*>> truth_by_traj;
  for (const TruthPoint& p : truth) {
    truth_by_traj[p.traj_id].push_back(&p);
  }

  TrajectoryAte result;
  double pooled_sq = 0.0;
  for (const FloorFusionResult& fusion : fusions) {
    std::vector<PlanarPoint> est;
    std::vector<PlanarPoint> ref;
    for (const Trajectory& traj : fusion.aligned) {
      auto it = truth_by_traj.find(traj.id);
      if (it == truth_by_traj.end()) {
        continue;
      }
      const auto& points = it->second;
      if (points.size() != traj.steps.size()) {
        throw DataError("truth step count differs for trajectory '" + traj.id + "'");
      }
      for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        if (std::abs(points[k]->t - traj.steps[k].timestamp) > 1e-9) {
          throw DataError("truth timestamps differ for trajectory '" + traj.id + "'");
        }
        est.push_back({traj.steps[k].pose.x, traj.steps[k].pose.y});
        ref.push_back({points[k]->x, points[k]->y});
      }
    }
    if (est.size() < 3) {
      continue;
    }
    const AteResult a = ate(est, ref);
    result.per_floor.push_back(a);
    pooled_sq += a.rmse * a.rmse * static_cast<double>(est.size());
    result.matched += est.size();
  }
  if (result.matched == 0) {
    throw DataError("no fused nodes matched the ground truth");
  }
  result.rmse = std::sqrt(pooled_sq / static_cast<double>(result.matched));
  return result;
}

}  // namespace rfmap
