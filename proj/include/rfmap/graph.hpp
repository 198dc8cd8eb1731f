#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "rfmap/types.hpp"

namespace rfmap {

// Dense node handle. Nodes are trajectory steps; the mapping back to
// (trajectory, step) lives in NodeIndex so edges stay small.
using NodeId = std::uint32_t;

// Bidirectional map between (trajectory index, step index) and dense NodeIds,
// laid out trajectory-major in input order.
class NodeIndex {
 public:
  NodeIndex() = default;
  static NodeIndex build(std::span<const Trajectory> trajectories);

  NodeId at(std::size_t traj_idx, std::size_t step) const;
  // Returns (trajectory index, step index).
  std::pair<std::size_t, std::size_t> locate(NodeId id) const;
  std::size_t node_count() const { return total_; }
  std::size_t trajectory_count() const { return offsets_.size(); }
  std::size_t steps_of(std::size_t traj_idx) const;

 private:
  std::vector<std::size_t> offsets_;  // first NodeId of each trajectory
  std::size_t total_ = 0;
};

// Odometry constraint between consecutive steps of one trajectory. z is the
// measured increment in the convention of imu_predict; the information matrix
// is diag(a, a, b).
struct ImuEdge {
  NodeId from = 0;
  NodeId to = 0;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
  double info_a = 500.0;
  double info_b = 70.0;
};

// Similarity-derived range constraint: the planar distance between the two
// nodes should be mu_d, weighted by info_scalar = 1 / var_d.
struct RfEdge {
  NodeId from = 0;
  NodeId to = 0;
  double mu_d = 0.0;
  double info_scalar = 1.0;
  double similarity = 0.0;
  // Robustified chi^2 from the most recent optimize(); negative until then.
  double last_chi2 = -1.0;
};

class PoseGraph {
 public:
  NodeId add_node(const Pose2D& pose);
  void add_imu_edge(const ImuEdge& edge);
  void add_rf_edge(const RfEdge& edge);
  void anchor(NodeId id);

  std::size_t node_count() const { return nodes_.size(); }
  const Pose2D& pose(NodeId id) const { return nodes_.at(id); }
  void set_pose(NodeId id, const Pose2D& pose) { nodes_.at(id) = pose; }
  const std::vector<Pose2D>& poses() const { return nodes_; }

  const std::vector<ImuEdge>& imu_edges() const { return imu_edges_; }
  const std::vector<RfEdge>& rf_edges() const { return rf_edges_; }
  std::vector<RfEdge>& mutable_rf_edges() { return rf_edges_; }
  const std::unordered_set<NodeId>& anchored() const { return anchored_; }
  bool is_anchored(NodeId id) const { return anchored_.count(id) > 0; }

 private:
  void check_node(NodeId id) const;

  std::vector<Pose2D> nodes_;
  std::vector<ImuEdge> imu_edges_;
  std::vector<RfEdge> rf_edges_;
  std::unordered_set<NodeId> anchored_;
};

// Measurement model for one odometry increment:
//   h(p_i, p_j) = [ R(theta_i) * (xy_i - xy_j) ; wrap(theta_i - theta_j) ]
// with R the plain (non-transposed) planar rotation. The sign/orientation
// choice is unusual but harmless: the simulator, the trace format, and the
// solver all share it, and it leaves the increment invariant under the
// gauge symmetry (rotate positions by alpha, shift headings by -alpha).
Eigen::Vector3d imu_predict(const Pose2D& pi, const Pose2D& pj);

// h(p_i, p_j) - z with the angular component wrapped.
Eigen::Vector3d imu_residual(const ImuEdge& edge, const Pose2D& pi, const Pose2D& pj);

// Planar distance minus the modeled distance.
double rf_residual(const RfEdge& edge, const Pose2D& pi, const Pose2D& pj);

// Analytic Jacobians of the residuals w.r.t. (x, y, theta) of each endpoint.
void imu_jacobians(const Pose2D& pi, const Pose2D& pj, Eigen::Matrix3d& d_pi,
                   Eigen::Matrix3d& d_pj);
// Near-coincident endpoints fall back to a fixed unit direction so the
// Jacobian stays bounded.
void rf_jacobians(const Pose2D& pi, const Pose2D& pj, Eigen::RowVector3d& d_pi,
                  Eigen::RowVector3d& d_pj);

struct SolverConfig {
  int max_iterations = 100;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;    // applied when a step is rejected
  double lambda_down = 0.5;   // applied when a step is accepted
  double cost_tol = 1e-9;     // relative cost decrease below this terminates
  double step_tol = 1e-10;    // accepted step norm below this terminates
  double cost_floor = 1e-18;  // absolute cost considered fully converged
  double huber_delta = 1.0;   // on whitened range residuals; odometry stays quadratic
  // Anchor the lowest node of any component that has no anchor, instead of
  // rejecting the graph as underconstrained.
  bool auto_anchor_components = true;
};

struct OptimizeReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
  std::string termination;
  std::vector<double> cost_history;  // cost after each accepted step, starting at initial
  std::vector<double> imu_chi2;      // per edge, at the final estimate
  std::vector<double> rf_chi2;       // robustified, also stored on the edges
};

// Damped Gauss-Newton on the sparse normal equations. Anchored nodes are held
// fixed; every connected component must contain one, else DataError
// ("underconstrained graph") unless auto-anchoring is enabled. Throws
// NumericalError on non-finite costs (naming the edge) or if the damped
// system stays singular.
OptimizeReport optimize(PoseGraph& graph, const SolverConfig& cfg);

// Removes range edges whose robustified chi^2 from the last optimize()
// strictly exceeds the threshold. Odometry edges are never touched.
// Returns the number of removed edges.
std::size_t prune_edges(PoseGraph& graph, double chi2_threshold);

}  // namespace rfmap
