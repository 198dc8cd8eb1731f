#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "rfmap/errors.hpp"
#include "rfmap/graph.hpp"
#include "rfmap/types.hpp"

using namespace rfmap;

namespace {

constexpr double kPi = std::numbers::pi;

// Residual cost with the same conventions as the solver: un-halved quadratic
// odometry terms, Huber on the whitened squared range residual. Reimplemented
// here so grid-search results do not depend on solver internals.
double reference_cost(const PoseGraph& g, const std::vector<Pose2D>& poses, double delta) {
  double cost = 0.0;
  for (const ImuEdge& e : g.imu_edges()) {
    Eigen::Vector3d r = imu_residual(e, poses[e.from], poses[e.to]);
    cost += e.info_a * (r.x() * r.x() + r.y() * r.y()) + e.info_b * r.z() * r.z();
  }
  for (const RfEdge& e : g.rf_edges()) {
    double r = rf_residual(e, poses[e.from], poses[e.to]);
    double s = e.info_scalar * r * r;
    cost += s <= delta * delta ? s : 2.0 * delta * std::sqrt(s) - delta * delta;
  }
  return cost;
}

Pose2D nudged(const Pose2D& p, int axis, double h) {
  Pose2D q = p;
  if (axis == 0) q.x += h;
  if (axis == 1) q.y += h;
  if (axis == 2) q.theta = wrap_angle(q.theta + h);
  return q;
}

}  // namespace

TEST_CASE("imu_predict worked values") {
  SUBCASE("identity rotation reduces to coordinate differences") {
    Pose2D pi(2.0, -1.0, 0.0), pj(0.5, 3.0, 0.7);
    Eigen::Vector3d h = imu_predict(pi, pj);
    CHECK(h.x() == doctest::Approx(1.5));
    CHECK(h.y() == doctest::Approx(-4.0));
    CHECK(h.z() == doctest::Approx(-0.7));
  }
  SUBCASE("identical poses give zero") {
    Pose2D p(1.0, 2.0, 0.4);
    CHECK(imu_predict(p, p).norm() == doctest::Approx(0.0));
  }
  SUBCASE("quarter-turn example") {
    Eigen::Vector3d h = imu_predict(Pose2D(0, 0, kPi / 2), Pose2D(1, 0, kPi / 2));
    CHECK(h.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(h.y() == doctest::Approx(-1.0));
    CHECK(h.z() == doctest::Approx(0.0));
  }
  SUBCASE("invariant under the gauge symmetry") {
    // Rotating positions by alpha while shifting headings by -alpha must not
    // change the predicted increment.
    Pose2D pi(1.2, -0.3, 0.9), pj(2.0, 0.8, 1.4);
    double alpha = 0.77;
    double c = std::cos(alpha), s = std::sin(alpha);
    auto gauge = [&](const Pose2D& p) {
      return Pose2D(c * p.x - s * p.y, s * p.x + c * p.y, p.theta - alpha);
    };
    Eigen::Vector3d a = imu_predict(pi, pj);
    Eigen::Vector3d b = imu_predict(gauge(pi), gauge(pj));
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("imu_residual consistency and wrapping") {
  Pose2D pi(0.4, 1.1, 0.3), pj(1.5, 0.2, -0.8);
  ImuEdge e;
  e.from = 0;
  e.to = 1;
  e.z = imu_predict(pi, pj);
  CHECK(imu_residual(e, pi, pj).norm() == doctest::Approx(0.0).epsilon(1e-15));

  // A full-turn angular gap wraps to zero.
  Pose2D pj_wrapped(pj.x, pj.y, pj.theta + 2.0 * kPi);
  CHECK(imu_residual(e, pi, pj_wrapped).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rf_residual geometry") {
  RfEdge e;
  e.from = 0;
  e.to = 1;
  e.mu_d = 2.5;
  CHECK(rf_residual(e, Pose2D(0, 0, 0), Pose2D(2.5, 0, 0)) == doctest::Approx(0.0));
  CHECK(rf_residual(e, Pose2D(1, 1, 0), Pose2D(1, 1, 0.9)) == doctest::Approx(-2.5));

  e.mu_d = 2.50663;
  CHECK(rf_residual(e, Pose2D(0, 0, 0), Pose2D(5, 0, 0)) == doctest::Approx(2.49337));
}

TEST_CASE("analytic Jacobians match finite differences") {
  std::mt19937_64 rng(314);
  std::uniform_real_distribution<double> pos(-4.0, 4.0);
  std::uniform_real_distribution<double> ang(-2.0, 2.0);  // stays clear of the wrap seam
  const double h = 1e-6;

  for (int trial = 0; trial < 25; ++trial) {
    Pose2D pi(pos(rng), pos(rng), ang(rng));
    Pose2D pj(pos(rng), pos(rng), ang(rng));

    Eigen::Matrix3d d_pi, d_pj;
    imu_jacobians(pi, pj, d_pi, d_pj);
    ImuEdge e;
    e.z = Eigen::Vector3d(0.3, -0.2, 0.1);
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d fd_i =
          (imu_residual(e, nudged(pi, axis, h), pj) - imu_residual(e, nudged(pi, axis, -h), pj)) /
          (2.0 * h);
      Eigen::Vector3d fd_j =
          (imu_residual(e, pi, nudged(pj, axis, h)) - imu_residual(e, pi, nudged(pj, axis, -h))) /
          (2.0 * h);
      for (int r = 0; r < 3; ++r) {
        CHECK(std::abs(d_pi(r, axis) - fd_i(r)) < 1e-6);
        CHECK(std::abs(d_pj(r, axis) - fd_j(r)) < 1e-6);
      }
    }

    RfEdge re;
    re.mu_d = 1.7;
    Eigen::RowVector3d r_pi, r_pj;
    rf_jacobians(pi, pj, r_pi, r_pj);
    for (int axis = 0; axis < 3; ++axis) {
      double fd_i = (rf_residual(re, nudged(pi, axis, h), pj) -
                     rf_residual(re, nudged(pi, axis, -h), pj)) /
                    (2.0 * h);
      double fd_j = (rf_residual(re, pi, nudged(pj, axis, h)) -
                     rf_residual(re, pi, nudged(pj, axis, -h))) /
                    (2.0 * h);
      CHECK(std::abs(r_pi(axis) - fd_i) < 1e-6);
      CHECK(std::abs(r_pj(axis) - fd_j) < 1e-6);
    }
  }
}

TEST_CASE("noiseless odometry chain is already optimal") {
  // Integrate a wiggly chain, feed exact increments, and start at the answer.
  std::vector<Pose2D> truth;
  truth.emplace_back(0.0, 0.0, 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> turn(-0.3, 0.3);
  for (int k = 1; k < 12; ++k) {
    const Pose2D& prev = truth.back();
    double th = wrap_angle(prev.theta + turn(rng));
    truth.emplace_back(prev.x + 0.7 * std::cos(th), prev.y + 0.7 * std::sin(th), th);
  }

  PoseGraph g;
  for (const Pose2D& p : truth) g.add_node(p);
  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    ImuEdge e;
    e.from = static_cast<NodeId>(k);
    e.to = static_cast<NodeId>(k + 1);
    e.z = imu_predict(truth[k], truth[k + 1]);
    g.add_imu_edge(e);
  }
  g.anchor(0);

  SolverConfig cfg;
  OptimizeReport rep = optimize(g, cfg);
  CHECK(rep.initial_cost == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rep.final_cost <= 1e-18);
  CHECK(rep.iterations == 0);

  SUBCASE("perturbed start recovers the chain exactly") {
    std::normal_distribution<double> n(0.0, 0.2);
    for (std::size_t k = 1; k < truth.size(); ++k) {
      g.set_pose(static_cast<NodeId>(k),
                 Pose2D(truth[k].x + n(rng), truth[k].y + n(rng), truth[k].theta + 0.3 * n(rng)));
    }
    OptimizeReport rec = optimize(g, cfg);
    CHECK(rec.final_cost < 1e-16);
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const Pose2D& p = g.pose(static_cast<NodeId>(k));
      CHECK(std::abs(p.x - truth[k].x) < 1e-9);
      CHECK(std::abs(p.y - truth[k].y) < 1e-9);
      CHECK(std::abs(wrap_angle(p.theta - truth[k].theta)) < 1e-9);
    }
  }
}

TEST_CASE("three-node graph matches a grid-search oracle") {
  // Nodes 0 and 2 are anchored with deliberately inconsistent measurements,
  // so the free middle node must settle at a nontrivial compromise. The
  // oracle minimizes the same robustified cost by recursive grid refinement,
  // never touching the solver.
  PoseGraph g;
  g.add_node(Pose2D(0, 0, 0));
  g.add_node(Pose2D(1.2, 0.3, 0.1));
  g.add_node(Pose2D(2, 0, 0));
  g.anchor(0);
  g.anchor(2);

  ImuEdge e01;
  e01.from = 0;
  e01.to = 1;
  e01.z = imu_predict(Pose2D(0, 0, 0), Pose2D(1.0, 0.1, 0.05));
  e01.info_a = 60.0;
  e01.info_b = 25.0;
  g.add_imu_edge(e01);

  ImuEdge e12;
  e12.from = 1;
  e12.to = 2;
  e12.z = imu_predict(Pose2D(1.0, 0.1, 0.05), Pose2D(2.1, -0.2, -0.02));
  e12.info_a = 60.0;
  e12.info_b = 25.0;
  g.add_imu_edge(e12);

  RfEdge rf;
  rf.from = 0;
  rf.to = 1;
  rf.mu_d = 1.4;  // disagrees with the odometry, forcing a tradeoff
  rf.info_scalar = 2.0;
  g.add_rf_edge(rf);

  SolverConfig cfg;
  cfg.max_iterations = 200;
  OptimizeReport rep = optimize(g, cfg);
  Pose2D solved = g.pose(1);

  // Grid refine: three passes, each 41^3 evaluations around the current best.
  std::vector<Pose2D> probe = g.poses();
  Pose2D best(1.0, 0.0, 0.0);
  double span = 1.0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 4; ++pass) {
    Pose2D center = best;
    for (int ix = -20; ix <= 20; ++ix) {
      for (int iy = -20; iy <= 20; ++iy) {
        for (int it = -20; it <= 20; ++it) {
          Pose2D cand(center.x + span * ix / 20.0, center.y + span * iy / 20.0,
                      center.theta + span * it / 20.0);
          probe[1] = cand;
          double c = reference_cost(g, probe, cfg.huber_delta);
          if (c < best_cost) {
            best_cost = c;
            best = cand;
          }
        }
      }
    }
    span /= 20.0;
  }

  CHECK(std::abs(solved.x - best.x) < 1e-3);
  CHECK(std::abs(solved.y - best.y) < 1e-3);
  CHECK(std::abs(wrap_angle(solved.theta - best.theta)) < 1e-3);
  CHECK(rep.final_cost <= best_cost + 1e-9);
}

TEST_CASE("optimize cost history never increases") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  PoseGraph g;
  std::vector<Pose2D> truth;
  for (int k = 0; k < 15; ++k) {
    truth.emplace_back(0.8 * k, 0.5 * n(rng), 0.1 * n(rng));
    g.add_node(Pose2D(0.8 * k + 0.4 * n(rng), 0.4 * n(rng), 0.2 * n(rng)));
  }
  for (int k = 0; k + 1 < 15; ++k) {
    ImuEdge e;
    e.from = static_cast<NodeId>(k);
    e.to = static_cast<NodeId>(k + 1);
    e.z = imu_predict(truth[k], truth[k + 1]) + Eigen::Vector3d(0.05 * n(rng), 0.05 * n(rng), 0.02 * n(rng));
    g.add_imu_edge(e);
  }
  for (auto [i, j] : {std::pair<int, int>{0, 7}, {3, 12}, {5, 14}}) {
    RfEdge e;
    e.from = static_cast<NodeId>(i);
    e.to = static_cast<NodeId>(j);
    e.mu_d = euclidean_distance(truth[i], truth[j]) + 0.3 * n(rng);
    e.info_scalar = 0.5;
    g.add_rf_edge(e);
  }
  g.anchor(0);

  SolverConfig cfg;
  OptimizeReport rep = optimize(g, cfg);
  REQUIRE(rep.cost_history.size() >= 2);
  for (std::size_t i = 1; i < rep.cost_history.size(); ++i) {
    CHECK(rep.cost_history[i] <= rep.cost_history[i - 1] + 1e-12);
  }
  CHECK(rep.final_cost <= rep.initial_cost);
  CHECK(rep.rf_chi2.size() == g.rf_edges().size());
  for (const RfEdge& e : g.rf_edges()) CHECK(e.last_chi2 >= 0.0);
}

TEST_CASE("anchoring fixes the gauge without distorting shape") {
  // Optimize the same two-node problem under two different anchor poses and
  // check the relative transform between the solutions is rigid.
  auto build = [](const Pose2D& anchor_pose) {
    PoseGraph g;
    g.add_node(anchor_pose);
    g.add_node(Pose2D(anchor_pose.x + 0.5, anchor_pose.y + 0.5, anchor_pose.theta));
    ImuEdge e;
    e.from = 0;
    e.to = 1;
    e.z = imu_predict(Pose2D(0, 0, 0), Pose2D(1, 0.2, 0.1));
    g.add_imu_edge(e);
    g.anchor(0);
    return g;
  };

  SolverConfig cfg;
  PoseGraph a = build(Pose2D(0, 0, 0));
  PoseGraph b = build(Pose2D(3, -2, 0.6));
  optimize(a, cfg);
  optimize(b, cfg);

  // Anchored nodes must not move.
  CHECK(a.pose(0).x == doctest::Approx(0.0));
  CHECK(b.pose(0).x == doctest::Approx(3.0));
  CHECK(b.pose(0).theta == doctest::Approx(0.6));

  // Both solutions satisfy their edge exactly, so the local increments match.
  Eigen::Vector3d ha = imu_predict(a.pose(0), a.pose(1));
  Eigen::Vector3d hb = imu_predict(b.pose(0), b.pose(1));
  CHECK((ha - hb).norm() < 1e-9);
}

TEST_CASE("auto anchoring keeps disconnected components solvable") {
  PoseGraph g;
  g.add_node(Pose2D(0, 0, 0));
  g.add_node(Pose2D(1, 0, 0));
  g.add_node(Pose2D(10, 10, 0));
  g.add_node(Pose2D(11, 10, 0));
  for (int k : {0, 2}) {
    ImuEdge e;
    e.from = static_cast<NodeId>(k);
    e.to = static_cast<NodeId>(k + 1);
    e.z = Eigen::Vector3d(1.0, 0.0, 0.0);
    g.add_imu_edge(e);
  }
  g.anchor(0);

  SolverConfig cfg;
  CHECK_NOTHROW(optimize(g, cfg));

  SUBCASE("disabling auto-anchor rejects the floating component") {
    PoseGraph h;
    h.add_node(Pose2D(0, 0, 0));
    h.add_node(Pose2D(1, 0, 0));
    ImuEdge e;
    e.from = 0;
    e.to = 1;
    e.z = Eigen::Vector3d(1.0, 0.0, 0.0);
    h.add_imu_edge(e);
    SolverConfig strict;
    strict.auto_anchor_components = false;
    CHECK_THROWS_AS(optimize(h, strict), DataError);
  }
}

TEST_CASE("prune_edges honors the chi-square threshold") {
  // A consistent square of nodes plus one wildly wrong range edge.
  std::vector<Pose2D> truth = {{0, 0, 0}, {2, 0, 0}, {2, 2, 0}, {0, 2, 0}};
  PoseGraph g;
  for (const Pose2D& p : truth) g.add_node(p);
  for (int k = 0; k < 3; ++k) {
    ImuEdge e;
    e.from = static_cast<NodeId>(k);
    e.to = static_cast<NodeId>(k + 1);
    e.z = imu_predict(truth[k], truth[k + 1]);
    g.add_imu_edge(e);
  }
  auto add_rf = [&](NodeId i, NodeId j, double mu) {
    RfEdge e;
    e.from = i;
    e.to = j;
    e.mu_d = mu;
    e.info_scalar = 1.0;
    g.add_rf_edge(e);
  };
  add_rf(0, 2, euclidean_distance(truth[0], truth[2]));
  add_rf(1, 3, euclidean_distance(truth[1], truth[3]));
  add_rf(0, 3, euclidean_distance(truth[0], truth[3]) + 50.0);  // the outlier
  g.anchor(0);

  SolverConfig cfg;
  optimize(g, cfg);

  SUBCASE("infinite threshold removes nothing") {
    CHECK(prune_edges(g, std::numeric_limits<double>::infinity()) == 0);
    CHECK(g.rf_edges().size() == 3);
  }
  SUBCASE("moderate threshold removes exactly the planted outlier") {
    CHECK(prune_edges(g, 5.99) == 1);
    REQUIRE(g.rf_edges().size() == 2);
    for (const RfEdge& e : g.rf_edges()) {
      CHECK(!(e.from == 0 && e.to == 3));
    }
  }
  SUBCASE("zero threshold removes every range edge") {
    CHECK(prune_edges(g, 0.0) == 3);
    CHECK(g.rf_edges().empty());
    CHECK(g.imu_edges().size() == 3);
  }
}

TEST_CASE("NodeIndex round-trips trajectory-major layout") {
  std::vector<Trajectory> trajs(3);
  for (int t = 0; t < 3; ++t) {
    trajs[t].id = "t" + std::to_string(t);
    for (int k = 0; k < 4 + t; ++k) {
      trajs[t].steps.push_back({Pose2D(k, 0, 0), std::nullopt, double(k)});
    }
  }
  NodeIndex idx = NodeIndex::build(trajs);
  CHECK(idx.node_count() == 4 + 5 + 6);
  CHECK(idx.trajectory_count() == 3);
  CHECK(idx.steps_of(1) == 5);
  NodeId id = idx.at(1, 2);
  auto [t, k] = idx.locate(id);
  CHECK(t == 1);
  CHECK(k == 2);
  CHECK(idx.at(0, 0) == 0);
  CHECK(idx.at(2, 5) == idx.node_count() - 1);
}
