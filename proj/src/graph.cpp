#include "rfmap/graph.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfmap/errors.hpp"

namespace rfmap {

NodeIndex NodeIndex::build(std::span<const Trajectory> trajectories) {
  NodeIndex idx;
  idx.offsets_.reserve(trajectories.size());
  for (const Trajectory& traj : trajectories) {
    idx.offsets_.push_back(idx.total_);
    idx.total_ += traj.steps.size();
  }
  return idx;
}

NodeId NodeIndex::at(std::size_t traj_idx, std::size_t step) const {
  return static_cast<NodeId>(offsets_.at(traj_idx) + step);
}

std::pair<std::size_t, std::size_t> NodeIndex::locate(NodeId id) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), static_cast<std::size_t>(id));
  const std::size_t traj_idx = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {traj_idx, static_cast<std::size_t>(id) - offsets_[traj_idx]};
}

std::size_t NodeIndex::steps_of(std::size_t traj_idx) const {
  const std::size_t end = traj_idx + 1 < offsets_.size() ? offsets_[traj_idx + 1] : total_;
  return end - offsets_.at(traj_idx);
}

NodeId PoseGraph::add_node(const Pose2D& pose) {
  nodes_.push_back(pose);
  return static_cast<NodeId>(nodes_.size() - 1);
}

void PoseGraph::check_node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw DataError("edge references unknown node " + std::to_string(id));
  }
}

void PoseGraph::add_imu_edge(const ImuEdge& edge) {
  check_node(edge.from);
  check_node(edge.to);
  if (edge.from == edge.to) {
    throw DataError("odometry edge with identical endpoints");
  }
  imu_edges_.push_back(edge);
}

void PoseGraph::add_rf_edge(const RfEdge& edge) {
  check_node(edge.from);
  check_node(edge.to);
  if (edge.from == edge.to) {
    throw DataError("range edge with identical endpoints");
  }
  if (!(edge.info_scalar > 0.0) || !std::isfinite(edge.info_scalar)) {
    throw DataError("range edge information must be positive");
  }
  rf_edges_.push_back(edge);
}

void PoseGraph::anchor(NodeId id) {
  check_node(id);
  anchored_.insert(id);
}

Eigen::Vector3d imu_predict(const Pose2D& pi, const Pose2D& pj) {
  const double c = std::cos(pi.theta);
  const double s = std::sin(pi.theta);
  const double dx = pi.x - pj.x;
  const double dy = pi.y - pj.y;
  return {c * dx - s * dy, s * dx + c * dy, wrap_angle(pi.theta - pj.theta)};
}

Eigen::Vector3d imu_residual(const ImuEdge& edge, const Pose2D& pi, const Pose2D& pj) {
  Eigen::Vector3d r = imu_predict(pi, pj) - edge.z;
  r.z() = wrap_angle(r.z());
  return r;
}

double rf_residual(const RfEdge& edge, const Pose2D& pi, const Pose2D& pj) {
  return euclidean_distance(pi, pj) - edge.mu_d;
}

void imu_jacobians(const Pose2D& pi, const Pose2D& pj, Eigen::Matrix3d& d_pi,
                   Eigen::Matrix3d& d_pj) {
  const double c = std::cos(pi.theta);
  const double s = std::sin(pi.theta);
  const double dx = pi.x - pj.x;
  const double dy = pi.y - pj.y;
  d_pi << c, -s, -s * dx - c * dy,
          s,  c,  c * dx - s * dy,
          0,  0,  1;
  d_pj << -c,  s, 0,
          -s, -c, 0,
           0,  0, -1;
}

void rf_jacobians(const Pose2D& pi, const Pose2D& pj, Eigen::RowVector3d& d_pi,
                  Eigen::RowVector3d& d_pj) {
  const double dx = pi.x - pj.x;
  const double dy = pi.y - pj.y;
  const double dist = std::hypot(dx, dy);
  double ux = 1.0;
  double uy = 0.0;
  if (dist >= 1e-6) {
    ux = dx / dist;
    uy = dy / dist;
  }
  d_pi << ux, uy, 0.0;
  d_pj << -ux, -uy, 0.0;
}

namespace {

// Huber on the whitened squared residual s = info * r^2: quadratic inside
// delta, linear outside. Returns the robustified cost and the weight that
// scales the edge's contribution to the normal equations.
struct RobustResult {
  double cost;
  double weight;
};

RobustResult huber(double s, double delta) {
  const double d2 = delta * delta;
  if (s <= d2) {
    return {s, 1.0};
  }
  const double u = std::sqrt(s);
  return {2.0 * delta * u - d2, delta / u};
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::vector<std::size_t> parent;
};

double evaluate_cost(const PoseGraph& graph, const std::vector<Pose2D>& poses, double huber_delta) {
  double cost = 0.0;
  for (std::size_t e = 0; e < graph.imu_edges().size(); ++e) {
    const ImuEdge& edge = graph.imu_edges()[e];
    const Eigen::Vector3d r = imu_residual(edge, poses[edge.from], poses[edge.to]);
    const double c =
        edge.info_a * (r.x() * r.x() + r.y() * r.y()) + edge.info_b * r.z() * r.z();
    if (!std::isfinite(c)) {
      throw NumericalError("non-finite cost at odometry edge " + std::to_string(e) + " (nodes " +
                           std::to_string(edge.from) + "-" + std::to_string(edge.to) + ")");
    }
    cost += c;
  }
  for (std::size_t e = 0; e < graph.rf_edges().size(); ++e) {
    const RfEdge& edge = graph.rf_edges()[e];
    const double r = rf_residual(edge, poses[edge.from], poses[edge.to]);
    const double s = edge.info_scalar * r * r;
    if (!std::isfinite(s)) {
      throw NumericalError("non-finite cost at range edge " + std::to_string(e) + " (nodes " +
                           std::to_string(edge.from) + "-" + std::to_string(edge.to) + ")");
    }
    cost += huber(s, huber_delta).cost;
  }
  return cost;
}

}  // namespace

OptimizeReport optimize(PoseGraph& graph, const SolverConfig& cfg) {
  const std::size_t n = graph.node_count();
  if (n == 0) {
    throw DataError("cannot optimize an empty graph");
  }

  // Every connected component needs a gauge anchor. Auto-anchoring pins the
  // lowest node of an unanchored component at its current pose.
  UnionFind uf(n);
  for (const ImuEdge& e : graph.imu_edges()) {
    uf.unite(e.from, e.to);
  }
  for (const RfEdge& e : graph.rf_edges()) {
    uf.unite(e.from, e.to);
  }
  std::unordered_set<NodeId> anchored(graph.anchored().begin(), graph.anchored().end());
  {
    std::vector<char> has_anchor(n, 0);
    for (NodeId a : anchored) {
      has_anchor[uf.find(a)] = 1;
    }
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t root = uf.find(v);
      if (!has_anchor[root]) {
        if (!cfg.auto_anchor_components) {
          throw DataError("underconstrained graph");
        }
        anchored.insert(static_cast<NodeId>(v));  // lowest node: first hit wins
        has_anchor[root] = 1;
      }
    }
  }

  // Variable layout: 3 consecutive slots per non-anchored node.
  std::vector<std::ptrdiff_t> var_of(n, -1);
  std::ptrdiff_t nv = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (!anchored.count(static_cast<NodeId>(v))) {
      var_of[v] = nv;
      nv += 3;
    }
  }

  std::vector<Pose2D> poses = graph.poses();
  OptimizeReport report;
  double cost = evaluate_cost(graph, poses, cfg.huber_delta);
  report.initial_cost = cost;
  report.cost_history.push_back(cost);

  auto finalize = [&](const std::string& reason) {
    report.termination = reason;
    report.final_cost = cost;
    for (std::size_t v = 0; v < n; ++v) {
      graph.set_pose(static_cast<NodeId>(v), poses[v]);
    }
    report.imu_chi2.reserve(graph.imu_edges().size());
    for (const ImuEdge& e : graph.imu_edges()) {
      const Eigen::Vector3d r = imu_residual(e, poses[e.from], poses[e.to]);
      report.imu_chi2.push_back(e.info_a * (r.x() * r.x() + r.y() * r.y()) +
                                e.info_b * r.z() * r.z());
    }
    report.rf_chi2.reserve(graph.rf_edges().size());
    for (RfEdge& e : graph.mutable_rf_edges()) {
      const double r = rf_residual(e, poses[e.from], poses[e.to]);
      e.last_chi2 = huber(e.info_scalar * r * r, cfg.huber_delta).cost;
      report.rf_chi2.push_back(e.last_chi2);
    }
    return report;
  };

  if (nv == 0) {
    return finalize("all_nodes_anchored");
  }
  if (cost <= cfg.cost_floor) {
    return finalize("converged_cost");
  }

  // Small systems go through an exact sparse Cholesky. Large graphs densify
  // under elimination because range edges couple arbitrary node pairs, so
  // beyond a few thousand variables an incomplete-Cholesky preconditioned
  // conjugate gradient is used instead; each solve then stays linear in the
  // number of nonzeros. A failed or non-converged solve is treated like a
  // rejected step, which raises lambda and makes the system easier.
  constexpr std::ptrdiff_t kDirectSolveMaxVars = 6000;
  const bool use_direct = nv <= kDirectSolveMaxVars;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> direct;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>>>
      iterative;
  iterative.setTolerance(1e-8);
  iterative.setMaxIterations(600);
  bool pattern_analyzed = false;
  std::vector<Eigen::Triplet<double>> triplets;
  double lambda = cfg.lambda_init;
  constexpr double kLambdaMax = 1e16;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    // Assemble J^T W J and J^T W r at the current linearization point.
    triplets.clear();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(nv);

    auto add_block = [&](std::ptrdiff_t row, std::ptrdiff_t col, const Eigen::Matrix3d& m) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          triplets.emplace_back(static_cast<int>(row + a), static_cast<int>(col + b), m(a, b));
        }
      }
    };

    for (const ImuEdge& e : graph.imu_edges()) {
      Eigen::Matrix3d ji;
      Eigen::Matrix3d jj;
      imu_jacobians(poses[e.from], poses[e.to], ji, jj);
      const Eigen::Vector3d r = imu_residual(e, poses[e.from], poses[e.to]);
      const Eigen::Vector3d omega(e.info_a, e.info_a, e.info_b);
      const std::ptrdiff_t vi = var_of[e.from];
      const std::ptrdiff_t vj = var_of[e.to];
      if (vi >= 0) {
        add_block(vi, vi, ji.transpose() * omega.asDiagonal() * ji);
        g.segment<3>(vi) += ji.transpose() * (omega.asDiagonal() * r);
      }
      if (vj >= 0) {
        add_block(vj, vj, jj.transpose() * omega.asDiagonal() * jj);
        g.segment<3>(vj) += jj.transpose() * (omega.asDiagonal() * r);
      }
      if (vi >= 0 && vj >= 0) {
        const Eigen::Matrix3d off = ji.transpose() * omega.asDiagonal() * jj;
        add_block(vi, vj, off);
        add_block(vj, vi, off.transpose());
      }
    }
    for (const RfEdge& e : graph.rf_edges()) {
      Eigen::RowVector3d ji;
      Eigen::RowVector3d jj;
      rf_jacobians(poses[e.from], poses[e.to], ji, jj);
      const double r = rf_residual(e, poses[e.from], poses[e.to]);
      const double w = huber(e.info_scalar * r * r, cfg.huber_delta).weight * e.info_scalar;
      const std::ptrdiff_t vi = var_of[e.from];
      const std::ptrdiff_t vj = var_of[e.to];
      if (vi >= 0) {
        add_block(vi, vi, w * ji.transpose() * ji);
        g.segment<3>(vi) += w * r * ji.transpose();
      }
      if (vj >= 0) {
        add_block(vj, vj, w * jj.transpose() * jj);
        g.segment<3>(vj) += w * r * jj.transpose();
      }
      if (vi >= 0 && vj >= 0) {
        add_block(vi, vj, w * ji.transpose() * jj);
        add_block(vj, vi, w * jj.transpose() * ji);
      }
    }

    Eigen::SparseMatrix<double> h(nv, nv);
    h.setFromTriplets(triplets.begin(), triplets.end());
    for (std::ptrdiff_t k = 0; k < nv; ++k) {
      diag[k] = h.coeff(k, k);
    }

    bool accepted = false;
    while (!accepted) {
      // Marquardt scaling plus a tiny absolute term so zero-information
      // directions still pick up damping as lambda grows.
      Eigen::SparseMatrix<double> damped = h;
      for (std::ptrdiff_t k = 0; k < nv; ++k) {
        damped.coeffRef(k, k) = diag[k] * (1.0 + lambda) + lambda * 1e-8;
      }
      bool step_ok = false;
      Eigen::VectorXd delta;
      if (use_direct) {
        if (!pattern_analyzed) {
          direct.analyzePattern(damped);
          pattern_analyzed = true;
        }
        direct.factorize(damped);
        step_ok = direct.info() == Eigen::Success;
        if (step_ok) {
          delta = direct.solve(-g);
          step_ok = delta.allFinite();
        }
      } else {
        iterative.compute(damped);
        step_ok = iterative.info() == Eigen::Success;
        if (step_ok) {
          delta = iterative.solve(-g);
          step_ok = iterative.info() == Eigen::Success && delta.allFinite();
        }
      }
      double new_cost = 0.0;
      std::vector<Pose2D> candidate;
      if (step_ok) {
        candidate = poses;
        for (std::size_t v = 0; v < n; ++v) {
          const std::ptrdiff_t off = var_of[v];
          if (off >= 0) {
            candidate[v] = Pose2D(candidate[v].x + delta[off], candidate[v].y + delta[off + 1],
                                  candidate[v].theta + delta[off + 2]);
          }
        }
        new_cost = evaluate_cost(graph, candidate, cfg.huber_delta);
        step_ok = new_cost < cost;
      }
      if (step_ok) {
        accepted = true;
        poses.swap(candidate);
        const double rel_decrease = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        lambda = std::max(lambda * cfg.lambda_down, 1e-12);
        ++report.iterations;
        report.cost_history.push_back(cost);
        if (cost <= cfg.cost_floor || rel_decrease < cfg.cost_tol) {
          return finalize("converged_cost");
        }
        if (delta.norm() < cfg.step_tol) {
          return finalize("converged_step");
        }
      } else {
        lambda *= cfg.lambda_up;
        if (lambda > kLambdaMax) {
          const bool solve_failed =
              use_direct ? direct.info() != Eigen::Success : iterative.info() != Eigen::Success;
          if (solve_failed) {
            throw NumericalError("normal equations singular after damping");
          }
          return finalize("stalled");
        }
      }
    }
  }
  return finalize("max_iterations");
}

std::size_t prune_edges(PoseGraph& graph, double chi2_threshold) {
  auto& edges = graph.mutable_rf_edges();
  for (const RfEdge& e : edges) {
    if (e.last_chi2 < 0.0) {
      throw DataError("prune_edges requires a preceding optimize() to score edges");
    }
  }
  const std::size_t before = edges.size();
  edges.erase(std::remove_if(edges.begin(), edges.end(),
                             [&](const RfEdge& e) { return e.last_chi2 > chi2_threshold; }),
              edges.end());
  return before - edges.size();
}

}  // namespace rfmap
