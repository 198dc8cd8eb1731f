#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfmap/eval.hpp"
#include "rfmap/geomodel.hpp"
#include "rfmap/graph.hpp"
#include "rfmap/positioning.hpp"
#include "rfmap/similarity.hpp"
#include "rfmap/simulator.hpp"
#include "rfmap/types.hpp"

namespace rfmap {

// Trace files are JSONL, one step per line:
//   {"traj_id": ..., "floor": ..., "t": ..., "dx": ..., "dy": ..., "dth": ..., "rf": {...}|null}
// (dx, dy, dth) is the measured increment from the previous step in the
// imu_predict convention; the first step of a trajectory carries zeros.
// Loading integrates increments from the origin into local poses and
// validates the result. Writing inverts exactly.
void write_traces(const std::string& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_traces(const std::string& path);

// Ground truth, JSONL: {"traj_id", "floor", "t", "x", "y", "theta"}.
struct TruthPoint {
  std::string traj_id;
  int floor = 0;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};
void write_truth(const std::string& path, std::span<const SimTrajectory> sims);
void write_truth_points(const std::string& path, std::span<const TruthPoint> points);
std::vector<TruthPoint> read_truth(const std::string& path);

// Fused trajectories in the shared frame, JSONL:
//   {"traj_id", "floor", "t", "x", "y", "theta", "rf": {...}|null}
void write_aligned(const std::string& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_aligned(const std::string& path);

// Reference map, JSONL: {"x", "y", "floor", "readings": {...}}.
void write_rfm(const std::string& path, const Rfm& rfm);
Rfm read_rfm(const std::string& path);

// Held-out queries, JSONL: {"qid", "rf": {...}, "truth": {"x","y","floor"}|null}.
void write_queries(const std::string& path, std::span<const QuerySample> queries);
std::vector<QuerySample> read_queries(const std::string& path);

// Distance model document; carries the similarity settings it was fit under.
void save_geomodel(const std::string& path, const GeoModel& model, const SimilarityConfig& sim);
std::pair<GeoModel, SimilarityConfig> load_geomodel(const std::string& path);

// Plain-text graph dump, line oriented, versioned:
//   RFGRAPH 1
//   FIX id
//   NODE id x y theta
//   EDGE_IMU i j dx dy dth a b
//   EDGE_RF i j mu info sim
void dump_graph(const std::string& path, const PoseGraph& graph);
PoseGraph load_graph(const std::string& path);

// Closure diagnostics: from_traj,from_step,to_traj,to_step,similarity,mu_d,var_d
void write_closures_csv(const std::string& path, std::span<const RfEdge> edges,
                        const NodeIndex& index, std::span<const Trajectory> trajectories);

// Two-column ECDF: error,fraction.
void write_ecdf_csv(const std::string& path, std::span<const std::pair<double, double>> points);

void write_summary_json(const std::string& path, const ErrorSummary& summary);

// Model-fit diagnostics: center,zeta,count per surviving bin.
void write_bins_csv(const std::string& path, std::span<const SimilarityBin> bins,
                    ZetaMethod method);

}  // namespace rfmap
