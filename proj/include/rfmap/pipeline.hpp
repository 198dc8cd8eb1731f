#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rfmap/eval.hpp"
#include "rfmap/geomodel.hpp"
#include "rfmap/graph.hpp"
#include "rfmap/io.hpp"
#include "rfmap/loopclosure.hpp"
#include "rfmap/similarity.hpp"
#include "rfmap/types.hpp"

namespace rfmap {

struct FusionConfig {
  SimilarityConfig sim;
  ClosureConfig closure;
  SolverConfig solver;
  double imu_info_a = 500.0;  // planar component of the odometry information
  double imu_info_b = 70.0;   // angular component
  double prune_chi2 = 5.99;   // robustified chi^2 cutoff for closure pruning
};

// Greedy seeding of a shared frame: the longest trajectory stays put; each
// remaining trajectory is translated so that its strongest closure to the
// already-placed set meets the modeled distance along the current bearing,
// and its gauge rotation is picked from a coarse grid by the robustified
// residual of all its closures into the placed set (positions rotate by
// alpha, headings shift by -alpha, so odometry terms are unaffected). A
// trajectory with a single usable closure keeps its dead-reckoned heading;
// trajectories reachable by no closure stay at their dead-reckoned poses.
// Returns one pose per node in NodeIndex order.
std::vector<Pose2D> register_trajectories(std::span<const Trajectory> trajectories,
                                          const NodeIndex& index,
                                          std::span<const RfEdge> closures);

// Builds the pose graph for one floor: odometry edges between consecutive
// steps (measured increments recomputed from the local poses), the given
// closure edges, initial node poses, and an anchor on the first node of the
// longest trajectory.
PoseGraph build_pose_graph(std::span<const Trajectory> trajectories, const NodeIndex& index,
                           std::span<const Pose2D> initial, std::span<const RfEdge> closures,
                           const FusionConfig& cfg);

struct FloorFusionResult {
  int floor = 0;
  std::vector<std::size_t> source_indices;  // into the fuse_all input
  std::vector<Trajectory> aligned;          // shared-frame poses, observations kept
  PoseGraph graph;                          // post-optimization state
  NodeIndex index;                          // over `aligned`
  std::vector<RfEdge> closures;             // as built, before pruning
  std::size_t pruned = 0;
  OptimizeReport first_pass;
  OptimizeReport second_pass;
};

// Full single-floor fusion: closures, registration, optimize, prune,
// re-optimize. Trajectories must share one floor.
FloorFusionResult fuse_floor(std::span<const Trajectory> trajectories, const GeoModel& model,
                             const FusionConfig& cfg);

// Groups trajectories by floor and fuses each group independently; each
// floor keeps its own gauge. Results are ordered by floor.
std::vector<FloorFusionResult> fuse_all(std::span<const Trajectory> trajectories,
                                        const GeoModel& model, const FusionConfig& cfg);

// Threshold sweep over one fusion scenario. Candidates are scored once at the
// smallest threshold and re-selected per threshold, so the sweep costs one
// scoring pass plus one optimization per point.
struct SweepPoint {
  double threshold = 0.0;
  std::size_t edges_built = 0;  // closures after selection, before pruning
  std::vector<FloorFusionResult> floors;
};
std::vector<SweepPoint> sweep_thresholds(std::span<const Trajectory> trajectories,
                                         const GeoModel& model, const FusionConfig& cfg,
                                         std::span<const double> thresholds);

// Alignment error of fused trajectories against ground truth, matched by
// (trajectory id, timestamp). The alignment is estimated per floor fusion
// (each has its own gauge); the returned RMSE pools all matched nodes.
struct TrajectoryAte {
  double rmse = 0.0;
  std::size_t matched = 0;
  std::vector<AteResult> per_floor;
};
TrajectoryAte evaluate_ate(std::span<const FloorFusionResult> fusions,
                           std::span<const TruthPoint> truth);

}  // namespace rfmap
