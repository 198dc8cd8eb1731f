#include "rfmap/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "rfmap/errors.hpp"

namespace rfmap {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open '" + path + "' for writing");
  }
  out.precision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "' for reading");
  }
  return in;
}

json parse_line(const std::string& line, const std::string& path, std::size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON record");
  }
  return j;
}

json observation_to_json(const RfObservation& obs) {
  json j = json::object();
  for (const auto& [id, rssi] : obs.readings()) {
    j[id] = rssi;
  }
  return j;
}

RfObservation observation_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) {
    throw DataError(where + ": readings must be a JSON object");
  }
  std::vector<RfObservation::Reading> readings;
  readings.reserve(j.size());
  for (const auto& [id, value] : j.items()) {
    if (!value.is_number()) {
      throw DataError(where + ": reading for '" + id + "' is not a number");
    }
    readings.emplace_back(id, value.get<double>());
  }
  return RfObservation(std::move(readings));
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw DataError(where + ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

void write_traces(const std::string& path, std::span<const Trajectory> trajectories) {
  std::ofstream out = open_out(path);
  for (const Trajectory& traj : trajectories) {
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      const TrajectoryStep& step = traj.steps[k];
      Eigen::Vector3d z = Eigen::Vector3d::Zero();
      if (k > 0) {
        z = imu_predict(traj.steps[k - 1].pose, step.pose);
      }
      json j;
      j["traj_id"] = traj.id;
      j["floor"] = traj.floor;
      j["t"] = step.timestamp;
      j["dx"] = z.x();
      j["dy"] = z.y();
      j["dth"] = z.z();
      if (step.observation.has_value()) {
        j["rf"] = observation_to_json(*step.observation);
      } else {
        j["rf"] = nullptr;
      }
      out << j.dump() << '\n';
    }
  }
}

std::vector<Trajectory> read_traces(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const json j = parse_line(line, path, lineno);
    const auto traj_id = require<std::string>(j, "traj_id", where);
    auto [it, inserted] = by_id.try_emplace(traj_id, out.size());
    if (inserted) {
      Trajectory traj;
      traj.id = traj_id;
      traj.floor = require<int>(j, "floor", where);
      out.push_back(std::move(traj));
    }
    Trajectory& traj = out[it->second];

    TrajectoryStep step;
    step.timestamp = require<double>(j, "t", where);
    const double dx = require<double>(j, "dx", where);
    const double dy = require<double>(j, "dy", where);
    const double dth = require<double>(j, "dth", where);
    if (!std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(dth)) {
      throw DataError(where + ": non-finite increment");
    }
    if (traj.steps.empty()) {
      step.pose = Pose2D(0.0, 0.0, 0.0);
    } else {
      // Invert the increment model: z = R(th) (p_prev - p), th_prev - th.
      const Pose2D& prev = traj.steps.back().pose;
      const double c = std::cos(-prev.theta);
      const double s = std::sin(-prev.theta);
      step.pose = Pose2D(prev.x - (c * dx - s * dy), prev.y - (s * dx + c * dy),
                         prev.theta - dth);
    }
    auto rf = j.find("rf");
    if (rf == j.end()) {
      throw DataError(where + ": missing field 'rf'");
    }
    if (!rf->is_null()) {
      step.observation = observation_from_json(*rf, where);
    }
    traj.steps.push_back(std::move(step));
  }
  for (const Trajectory& traj : out) {
    validate_trajectory(traj);
  }
  return out;
}

void write_truth(const std::string& path, std::span<const SimTrajectory> sims) {
  std::vector<TruthPoint> points;
  for (const SimTrajectory& sim : sims) {
    for (std::size_t k = 0; k < sim.truth.size(); ++k) {
      points.push_back({sim.trajectory.id, sim.trajectory.floor,
                        sim.trajectory.steps[k].timestamp, sim.truth[k].x, sim.truth[k].y,
                        sim.truth[k].theta});
    }
  }
  write_truth_points(path, points);
}

void write_truth_points(const std::string& path, std::span<const TruthPoint> points) {
  std::ofstream out = open_out(path);
  for (const TruthPoint& p : points) {
    json j;
    j["traj_id"] = p.traj_id;
    j["floor"] = p.floor;
    j["t"] = p.t;
    j["x"] = p.x;
    j["y"] = p.y;
    j["theta"] = p.theta;
    out << j.dump() << '\n';
  }
}

std::vector<TruthPoint> read_truth(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<TruthPoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const json j = parse_line(line, path, lineno);
    TruthPoint p;
    p.traj_id = require<std::string>(j, "traj_id", where);
    p.floor = require<int>(j, "floor", where);
    p.t = require<double>(j, "t", where);
    p.x = require<double>(j, "x", where);
    p.y = require<double>(j, "y", where);
    p.theta = require<double>(j, "theta", where);
    out.push_back(std::move(p));
  }
  return out;
}

void write_aligned(const std::string& path, std::span<const Trajectory> trajectories) {
  std::ofstream out = open_out(path);
  for (const Trajectory& traj : trajectories) {
    for (const TrajectoryStep& step : traj.steps) {
      json j;
      j["traj_id"] = traj.id;
      j["floor"] = traj.floor;
      j["t"] = step.timestamp;
      j["x"] = step.pose.x;
      j["y"] = step.pose.y;
      j["theta"] = step.pose.theta;
      if (step.observation.has_value()) {
        j["rf"] = observation_to_json(*step.observation);
      } else {
        j["rf"] = nullptr;
      }
      out << j.dump() << '\n';
    }
  }
}

std::vector<Trajectory> read_aligned(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const json j = parse_line(line, path, lineno);
    const auto traj_id = require<std::string>(j, "traj_id", where);
    auto [it, inserted] = by_id.try_emplace(traj_id, out.size());
    if (inserted) {
      Trajectory traj;
      traj.id = traj_id;
      traj.floor = require<int>(j, "floor", where);
      out.push_back(std::move(traj));
    }
    TrajectoryStep step;
    step.timestamp = require<double>(j, "t", where);
    step.pose = Pose2D(require<double>(j, "x", where), require<double>(j, "y", where),
                       require<double>(j, "theta", where));
    auto rf = j.find("rf");
    if (rf != j.end() && !rf->is_null()) {
      step.observation = observation_from_json(*rf, where);
    }
    out[it->second].steps.push_back(std::move(step));
  }
  for (const Trajectory& traj : out) {
    validate_trajectory(traj);
  }
  return out;
}

void write_rfm(const std::string& path, const Rfm& rfm) {
  std::ofstream out = open_out(path);
  for (const RfmEntry& e : rfm) {
    json j;
    j["x"] = e.x;
    j["y"] = e.y;
    j["floor"] = e.floor;
    j["readings"] = observation_to_json(e.readings);
    out << j.dump() << '\n';
  }
}

Rfm read_rfm(const std::string& path) {
  std::ifstream in = open_in(path);
  Rfm out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const json j = parse_line(line, path, lineno);
    RfmEntry e;
    e.x = require<double>(j, "x", where);
    e.y = require<double>(j, "y", where);
    e.floor = require<int>(j, "floor", where);
    auto readings = j.find("readings");
    if (readings == j.end()) {
      throw DataError(where + ": missing field 'readings'");
    }
    e.readings = observation_from_json(*readings, where);
    if (e.readings.empty()) {
      throw DataError(where + ": reference map entry with empty readings");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_queries(const std::string& path, std::span<const QuerySample> queries) {
  std::ofstream out = open_out(path);
  for (const QuerySample& q : queries) {
    json j;
    j["qid"] = q.id;
    j["rf"] = observation_to_json(q.readings);
    j["truth"] = {{"x", q.x}, {"y", q.y}, {"floor", q.floor}};
    out << j.dump() << '\n';
  }
}

std::vector<QuerySample> read_queries(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<QuerySample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const json j = parse_line(line, path, lineno);
    QuerySample q;
    q.id = require<std::string>(j, "qid", where);
    auto rf = j.find("rf");
    if (rf == j.end()) {
      throw DataError(where + ": missing field 'rf'");
    }
    q.readings = observation_from_json(*rf, where);
    auto truth = j.find("truth");
    if (truth == j.end() || truth->is_null()) {
      throw DataError(where + ": queries without truth labels are not supported");
    }
    q.x = require<double>(*truth, "x", where);
    q.y = require<double>(*truth, "y", where);
    q.floor = require<int>(*truth, "floor", where);
    out.push_back(std::move(q));
  }
  return out;
}

void save_geomodel(const std::string& path, const GeoModel& model, const SimilarityConfig& sim) {
  std::ofstream out = open_out(path);
  json j;
  j["w0"] = model.w0;
  j["w1"] = model.w1;
  j["C"] = model.bins_used;
  j["N"] = model.sample_count;
  j["method"] = to_string(model.method);
  j["beta"] = sim.beta;
  j["sigma_kernel"] = sim.sigma_kernel;
  j["missing_value"] = sim.missing_value;
  out << j.dump(2) << '\n';
}

std::pair<GeoModel, SimilarityConfig> load_geomodel(const std::string& path) {
  std::ifstream in = open_in(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError(path + ": malformed model document");
  }
  GeoModel model;
  model.w0 = require<double>(j, "w0", path);
  model.w1 = require<double>(j, "w1", path);
  model.bins_used = require<int>(j, "C", path);
  model.sample_count = require<std::int64_t>(j, "N", path);
  model.method = zeta_method_from_string(require<std::string>(j, "method", path));
  SimilarityConfig sim;
  sim.beta = require<double>(j, "beta", path);
  sim.sigma_kernel = require<double>(j, "sigma_kernel", path);
  sim.missing_value = require<double>(j, "missing_value", path);
  sim.validate();
  return {model, sim};
}

void dump_graph(const std::string& path, const PoseGraph& graph) {
  std::ofstream out = open_out(path);
  out << "RFGRAPH 1\n";
  std::vector<NodeId> anchors(graph.anchored().begin(), graph.anchored().end());
  std::sort(anchors.begin(), anchors.end());
  for (NodeId a : anchors) {
    out << "FIX " << a << '\n';
  }
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const Pose2D& p = graph.pose(static_cast<NodeId>(i));
    out << "NODE " << i << ' ' << p.x << ' ' << p.y << ' ' << p.theta << '\n';
  }
  for (const ImuEdge& e : graph.imu_edges()) {
    out << "EDGE_IMU " << e.from << ' ' << e.to << ' ' << e.z.x() << ' ' << e.z.y() << ' '
        << e.z.z() << ' ' << e.info_a << ' ' << e.info_b << '\n';
  }
  for (const RfEdge& e : graph.rf_edges()) {
    out << "EDGE_RF " << e.from << ' ' << e.to << ' ' << e.mu_d << ' ' << e.info_scalar << ' '
        << e.similarity << '\n';
  }
}

PoseGraph load_graph(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("RFGRAPH 1", 0) != 0) {
    throw DataError(path + ": not a version-1 graph dump");
  }
  PoseGraph graph;
  std::vector<NodeId> anchors;
  std::vector<ImuEdge> imu;
  std::vector<RfEdge> rf;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    const std::string where = path + ":" + std::to_string(lineno);
    if (tag == "FIX") {
      NodeId id;
      if (!(ss >> id)) {
        throw DataError(where + ": malformed FIX line");
      }
      anchors.push_back(id);
    } else if (tag == "NODE") {
      NodeId id;
      double x;
      double y;
      double theta;
      if (!(ss >> id >> x >> y >> theta)) {
        throw DataError(where + ": malformed NODE line");
      }
      if (id != graph.node_count()) {
        throw DataError(where + ": NODE ids must be dense and in order");
      }
      graph.add_node(Pose2D(x, y, theta));
    } else if (tag == "EDGE_IMU") {
      ImuEdge e;
      if (!(ss >> e.from >> e.to >> e.z.x() >> e.z.y() >> e.z.z() >> e.info_a >> e.info_b)) {
        throw DataError(where + ": malformed EDGE_IMU line");
      }
      imu.push_back(e);
    } else if (tag == "EDGE_RF") {
      RfEdge e;
      if (!(ss >> e.from >> e.to >> e.mu_d >> e.info_scalar >> e.similarity)) {
        throw DataError(where + ": malformed EDGE_RF line");
      }
      rf.push_back(e);
    } else {
      throw DataError(where + ": unknown record '" + tag + "'");
    }
  }
  for (const ImuEdge& e : imu) {
    graph.add_imu_edge(e);
  }
  for (const RfEdge& e : rf) {
    graph.add_rf_edge(e);
  }
  for (NodeId a : anchors) {
    graph.anchor(a);
  }
  return graph;
}

void write_closures_csv(const std::string& path, std::span<const RfEdge> edges,
                        const NodeIndex& index, std::span<const Trajectory> trajectories) {
  std::ofstream out = open_out(path);
  out << "from_traj,from_step,to_traj,to_step,similarity,mu_d,var_d\n";
  for (const RfEdge& e : edges) {
    const auto [ti, si] = index.locate(e.from);
    const auto [tj, sj] = index.locate(e.to);
    out << trajectories[ti].id << ',' << si << ',' << trajectories[tj].id << ',' << sj << ','
        << e.similarity << ',' << e.mu_d << ',' << 1.0 / e.info_scalar << '\n';
  }
}

void write_ecdf_csv(const std::string& path, std::span<const std::pair<double, double>> points) {
  std::ofstream out = open_out(path);
  out << "error,fraction\n";
  for (const auto& [error, fraction] : points) {
    out << error << ',' << fraction << '\n';
  }
}

void write_summary_json(const std::string& path, const ErrorSummary& summary) {
  std::ofstream out = open_out(path);
  json j;
  j["n"] = summary.n;
  j["min_m"] = summary.min_m;
  j["mean_m"] = summary.mean_m;
  j["cep68_m"] = summary.cep68_m;
  j["cep95_m"] = summary.cep95_m;
  j["floor_accuracy"] = summary.floor_accuracy;
  out << j.dump(2) << '\n';
}

void write_bins_csv(const std::string& path, std::span<const SimilarityBin> bins,
                    ZetaMethod method) {
  std::ofstream out = open_out(path);
  out << "center,zeta,count\n";
  for (const SimilarityBin& b : bins) {
    out << b.center << ',' << estimate_zeta(b.distances, method) << ',' << b.distances.size()
        << '\n';
  }
}

}  // namespace rfmap
