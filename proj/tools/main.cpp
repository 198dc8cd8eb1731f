// Command-line front end: simulate traces, fit the similarity-distance model,
// fuse trajectories into a shared frame, build and query reference maps, and
// evaluate the results. Every subcommand writes its outputs plus a manifest
// into a run directory. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfmap/config.hpp"
#include "rfmap/errors.hpp"
#include "rfmap/eval.hpp"
#include "rfmap/geomodel.hpp"
#include "rfmap/io.hpp"
#include "rfmap/loopclosure.hpp"
#include "rfmap/pipeline.hpp"
#include "rfmap/positioning.hpp"
#include "rfmap/rng.hpp"
#include "rfmap/similarity.hpp"
#include "rfmap/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Option bundles. Each mirrors a library config; values resolve in the order
// defaults < config file < command-line flag.

struct ScenarioOptions {
  rfmap::EnvironmentParams env;
  rfmap::TrajectoryParams walk;
  int queries = 200;
  std::uint64_t seed = 1;
};

struct FitOptions {
  rfmap::GeoModelParams params;
  std::string method = "mle";
  std::uint64_t seed = 1;
};

void apply_config_similarity(const rfmap::Config& cfg, rfmap::SimilarityConfig& sim) {
  sim.beta = cfg.get_double("similarity", "beta").value_or(sim.beta);
  sim.sigma_kernel = cfg.get_double("similarity", "sigma_kernel").value_or(sim.sigma_kernel);
  sim.missing_value = cfg.get_double("similarity", "missing_value").value_or(sim.missing_value);
}

void apply_config_fit(const rfmap::Config& cfg, FitOptions& fit) {
  fit.params.n_per_traj =
      static_cast<int>(cfg.get_int("geomodel", "n_per_traj").value_or(fit.params.n_per_traj));
  fit.params.bins = static_cast<int>(cfg.get_int("geomodel", "bins").value_or(fit.params.bins));
  fit.params.min_count =
      static_cast<int>(cfg.get_int("geomodel", "min_count").value_or(fit.params.min_count));
  fit.method = cfg.get_string("geomodel", "method").value_or(fit.method);
}

void apply_config_closure(const rfmap::Config& cfg, rfmap::ClosureConfig& closure) {
  closure.threshold = cfg.get_double("closure", "threshold").value_or(closure.threshold);
  closure.max_edges_per_node = static_cast<int>(
      cfg.get_int("closure", "max_edges_per_node").value_or(closure.max_edges_per_node));
  closure.min_intra_step_gap = static_cast<int>(
      cfg.get_int("closure", "min_intra_step_gap").value_or(closure.min_intra_step_gap));
  closure.jaccard_floor = cfg.get_double("closure", "jaccard_floor").value_or(closure.jaccard_floor);
}

void apply_config_solver(const rfmap::Config& cfg, rfmap::FusionConfig& fusion) {
  rfmap::SolverConfig& s = fusion.solver;
  s.max_iterations =
      static_cast<int>(cfg.get_int("solver", "max_iterations").value_or(s.max_iterations));
  s.lambda_init = cfg.get_double("solver", "lambda_init").value_or(s.lambda_init);
  s.cost_tol = cfg.get_double("solver", "cost_tol").value_or(s.cost_tol);
  s.step_tol = cfg.get_double("solver", "step_tol").value_or(s.step_tol);
  s.huber_delta = cfg.get_double("solver", "huber_delta").value_or(s.huber_delta);
  fusion.imu_info_a = cfg.get_double("fusion", "imu_info_a").value_or(fusion.imu_info_a);
  fusion.imu_info_b = cfg.get_double("fusion", "imu_info_b").value_or(fusion.imu_info_b);
  fusion.prune_chi2 = cfg.get_double("fusion", "prune_chi2").value_or(fusion.prune_chi2);
}

void apply_config_scenario(const rfmap::Config& cfg, ScenarioOptions& sc) {
  auto& e = sc.env;
  e.extent_x = cfg.get_double("simulator", "extent_x").value_or(e.extent_x);
  e.extent_y = cfg.get_double("simulator", "extent_y").value_or(e.extent_y);
  e.floors = static_cast<int>(cfg.get_int("simulator", "floors").value_or(e.floors));
  e.aps_per_floor =
      static_cast<int>(cfg.get_int("simulator", "aps_per_floor").value_or(e.aps_per_floor));
  e.tx_power = cfg.get_double("simulator", "tx_power").value_or(e.tx_power);
  e.path_loss_exponent =
      cfg.get_double("simulator", "path_loss_exponent").value_or(e.path_loss_exponent);
  e.d0 = cfg.get_double("simulator", "d0").value_or(e.d0);
  e.shadowing_sigma = cfg.get_double("simulator", "shadowing_sigma").value_or(e.shadowing_sigma);
  e.dropout_floor = cfg.get_double("simulator", "dropout_floor").value_or(e.dropout_floor);
  e.p_drop = cfg.get_double("simulator", "p_drop").value_or(e.p_drop);
  e.floor_penalty = cfg.get_double("simulator", "floor_penalty").value_or(e.floor_penalty);
  e.floor_height = cfg.get_double("simulator", "floor_height").value_or(e.floor_height);
  auto& w = sc.walk;
  w.n_trajectories =
      static_cast<int>(cfg.get_int("simulator", "n_trajectories").value_or(w.n_trajectories));
  w.steps = static_cast<int>(cfg.get_int("simulator", "steps").value_or(w.steps));
  w.step_len = cfg.get_double("simulator", "step_len").value_or(w.step_len);
  w.turn_sigma_deg = cfg.get_double("simulator", "turn_sigma_deg").value_or(w.turn_sigma_deg);
  w.pos_noise = cfg.get_double("simulator", "pos_noise").value_or(w.pos_noise);
  w.heading_noise_deg =
      cfg.get_double("simulator", "heading_noise_deg").value_or(w.heading_noise_deg);
  w.heading_bias_max_deg =
      cfg.get_double("simulator", "heading_bias_max_deg").value_or(w.heading_bias_max_deg);
  w.rf_period = static_cast<int>(cfg.get_int("simulator", "rf_period").value_or(w.rf_period));
  sc.queries = static_cast<int>(cfg.get_int("run", "queries").value_or(sc.queries));
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("run", "seed").value_or(sc.seed));
}

// ---------------------------------------------------------------------------
// Run directory plumbing.

fs::path ensure_run_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw rfmap::DataError("cannot create run directory '" + out + "': " + ec.message());
  }
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& inputs,
                    const json& params, const std::vector<std::string>& outputs) {
  json manifest;
  manifest["command"] = command;
  manifest["inputs"] = inputs;
  manifest["params"] = params;
  manifest["outputs"] = outputs;
  manifest["config_hash"] = rfmap::fnv1a_hex(params.dump());
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw rfmap::DataError("cannot write manifest in '" + dir.string() + "'");
  }
  out << manifest.dump(2) << '\n';
}

json scenario_params(const ScenarioOptions& sc) {
  json j;
  j["extent_x"] = sc.env.extent_x;
  j["extent_y"] = sc.env.extent_y;
  j["floors"] = sc.env.floors;
  j["aps_per_floor"] = sc.env.aps_per_floor;
  j["tx_power"] = sc.env.tx_power;
  j["path_loss_exponent"] = sc.env.path_loss_exponent;
  j["d0"] = sc.env.d0;
  j["shadowing_sigma"] = sc.env.shadowing_sigma;
  j["dropout_floor"] = sc.env.dropout_floor;
  j["p_drop"] = sc.env.p_drop;
  j["floor_penalty"] = sc.env.floor_penalty;
  j["floor_height"] = sc.env.floor_height;
  j["n_trajectories"] = sc.walk.n_trajectories;
  j["steps"] = sc.walk.steps;
  j["step_len"] = sc.walk.step_len;
  j["turn_sigma_deg"] = sc.walk.turn_sigma_deg;
  j["pos_noise"] = sc.walk.pos_noise;
  j["heading_noise_deg"] = sc.walk.heading_noise_deg;
  j["heading_bias_max_deg"] = sc.walk.heading_bias_max_deg;
  j["rf_period"] = sc.walk.rf_period;
  j["queries"] = sc.queries;
  j["seed"] = sc.seed;
  return j;
}

json summary_json(const rfmap::ErrorSummary& s) {
  json j;
  j["n"] = s.n;
  j["min_m"] = s.min_m;
  j["mean_m"] = s.mean_m;
  j["cep68_m"] = s.cep68_m;
  j["cep95_m"] = s.cep95_m;
  j["floor_accuracy"] = s.floor_accuracy;
  return j;
}

// ---------------------------------------------------------------------------
// Shared stage helpers (used by both the single-step commands and `pipeline`).

struct SimulationArtifacts {
  rfmap::Environment env;
  std::vector<rfmap::SimTrajectory> sims;
  std::vector<rfmap::QuerySample> queries;
};

SimulationArtifacts run_simulation(const ScenarioOptions& sc) {
  SimulationArtifacts art;
  art.env = rfmap::generate_environment(sc.env, sc.seed);
  art.sims = rfmap::generate_trajectories(art.env, sc.walk, rfmap::mix_seed(sc.seed, 0x70ULL));
  art.queries =
      rfmap::generate_queries(art.env, sc.queries, rfmap::mix_seed(sc.seed, 0x9ULL));
  return art;
}

rfmap::GeoModel fit_model_stage(const std::vector<rfmap::Trajectory>& traces,
                                const rfmap::SimilarityConfig& sim, const FitOptions& fit,
                                std::vector<rfmap::SimilarityBin>* bins_out) {
  const auto samples =
      rfmap::sample_pairs(traces, fit.params.n_per_traj, sim, fit.seed);
  auto bins = rfmap::bin_samples(samples, fit.params.bins, fit.params.min_count);
  const auto method = rfmap::zeta_method_from_string(fit.method);
  rfmap::GeoModel model = rfmap::fit_log_linear(bins, method);
  if (bins_out != nullptr) {
    *bins_out = std::move(bins);
  }
  return model;
}

struct PositioningRun {
  std::vector<rfmap::FloorPosition> estimates;
  std::vector<rfmap::FloorPosition> truth;
  rfmap::PositionErrors errors;
  rfmap::ErrorSummary summary;
};

PositioningRun run_positioning(const rfmap::Rfm& rfm,
                               const std::vector<rfmap::QuerySample>& queries,
                               const rfmap::SimilarityConfig& sim, const rfmap::KnnConfig& knn) {
  PositioningRun run;
  run.estimates.reserve(queries.size());
  run.truth.reserve(queries.size());
  for (const rfmap::QuerySample& q : queries) {
    const rfmap::LocateResult loc = rfmap::knn_locate(rfm, q.readings, sim, knn);
    run.estimates.push_back({loc.x, loc.y, loc.floor});
    run.truth.push_back({q.x, q.y, q.floor});
  }
  run.errors = rfmap::positioning_errors(run.estimates, run.truth);
  run.summary = rfmap::summarize(run.errors);
  return run;
}

void write_estimates(const fs::path& path, const std::vector<rfmap::QuerySample>& queries,
                     const std::vector<rfmap::FloorPosition>& estimates) {
  std::ofstream out(path);
  if (!out) {
    throw rfmap::DataError("cannot open '" + path.string() + "' for writing");
  }
  out.precision(17);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    json j;
    j["qid"] = queries[i].id;
    j["x"] = estimates[i].x;
    j["y"] = estimates[i].y;
    j["floor"] = estimates[i].floor;
    j["truth"] = {{"x", queries[i].x}, {"y", queries[i].y}, {"floor", queries[i].floor}};
    out << j.dump() << '\n';
  }
}

// Aligns every fused floor into the truth frame (per-floor rigid transform
// from the trajectory correspondences) and returns the pooled map.
rfmap::Rfm aligned_rfm(const std::vector<rfmap::FloorFusionResult>& fusions,
                       const std::vector<rfmap::TruthPoint>& truth) {
  rfmap::Rfm pooled;
  std::map<std::string, std::vector<const rfmap::TruthPoint*>> by_traj;
  for (const rfmap::TruthPoint& p : truth) {
    by_traj[p.traj_id].push_back(&p);
  }
  for (const rfmap::FloorFusionResult& fusion : fusions) {
    std::vector<rfmap::PlanarPoint> est;
    std::vector<rfmap::PlanarPoint> ref;
    for (const rfmap::Trajectory& traj : fusion.aligned) {
      auto it = by_traj.find(traj.id);
      if (it == by_traj.end()) {
        continue;
      }
      for (std::size_t k = 0; k < traj.steps.size() && k < it->second.size(); ++k) {
        est.push_back({traj.steps[k].pose.x, traj.steps[k].pose.y});
        ref.push_back({it->second[k]->x, it->second[k]->y});
      }
    }
    const rfmap::AteResult alignment = rfmap::ate(est, ref);
    rfmap::Rfm rfm = rfmap::build_rfm(fusion.aligned);
    for (rfmap::RfmEntry& e : rfm) {
      const rfmap::PlanarPoint p = rfmap::apply_alignment(alignment, {e.x, e.y});
      e.x = p.x;
      e.y = p.y;
      pooled.push_back(std::move(e));
    }
  }
  return pooled;
}

json ate_json(const rfmap::TrajectoryAte& a) {
  json j;
  j["rmse_m"] = a.rmse;
  j["matched_nodes"] = a.matched;
  json floors = json::array();
  for (const rfmap::AteResult& f : a.per_floor) {
    floors.push_back({{"rmse_m", f.rmse},
                      {"rotation_rad", f.rotation},
                      {"tx_m", f.tx},
                      {"ty_m", f.ty}});
  }
  j["per_floor"] = floors;
  return j;
}

json fusion_report_json(const std::vector<rfmap::FloorFusionResult>& fusions) {
  json floors = json::array();
  for (const rfmap::FloorFusionResult& f : fusions) {
    json j;
    j["floor"] = f.floor;
    j["trajectories"] = f.aligned.size();
    j["nodes"] = f.graph.node_count();
    j["closures_built"] = f.closures.size();
    j["closures_pruned"] = f.pruned;
    j["first_pass"] = {{"initial_cost", f.first_pass.initial_cost},
                       {"final_cost", f.first_pass.final_cost},
                       {"iterations", f.first_pass.iterations},
                       {"termination", f.first_pass.termination}};
    j["second_pass"] = {{"initial_cost", f.second_pass.initial_cost},
                        {"final_cost", f.second_pass.final_cost},
                        {"iterations", f.second_pass.iterations},
                        {"termination", f.second_pass.termination}};
    floors.push_back(std::move(j));
  }
  return floors;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_simulate(const ScenarioOptions& sc, const std::string& out_dir) {
  const fs::path dir = ensure_run_dir(out_dir);
  const SimulationArtifacts art = run_simulation(sc);

  std::vector<rfmap::Trajectory> traces;
  traces.reserve(art.sims.size());
  for (const rfmap::SimTrajectory& sim : art.sims) {
    traces.push_back(sim.trajectory);
  }
  rfmap::write_traces((dir / "traces.jsonl").string(), traces);
  rfmap::write_truth((dir / "truth.jsonl").string(), art.sims);
  rfmap::write_queries((dir / "queries.jsonl").string(), art.queries);
  write_manifest(dir, "simulate", json::object(), scenario_params(sc),
                 {"traces.jsonl", "truth.jsonl", "queries.jsonl"});
  std::cout << "simulated " << traces.size() << " trajectories, " << art.queries.size()
            << " queries -> " << dir.string() << '\n';
  return 0;
}

int cmd_fit_model(const std::string& traces_path, const std::string& out_dir,
                  const rfmap::SimilarityConfig& sim, const FitOptions& fit) {
  const fs::path dir = ensure_run_dir(out_dir);
  const auto traces = rfmap::read_traces(traces_path);
  std::vector<rfmap::SimilarityBin> bins;
  const rfmap::GeoModel model = fit_model_stage(traces, sim, fit, &bins);
  rfmap::save_geomodel((dir / "geomodel.json").string(), model, sim);
  rfmap::write_bins_csv((dir / "bins.csv").string(), bins, model.method);

  json params;
  params["n_per_traj"] = fit.params.n_per_traj;
  params["bins"] = fit.params.bins;
  params["min_count"] = fit.params.min_count;
  params["method"] = fit.method;
  params["seed"] = fit.seed;
  params["beta"] = sim.beta;
  params["sigma_kernel"] = sim.sigma_kernel;
  params["missing_value"] = sim.missing_value;
  write_manifest(dir, "fit-model", {{"traces", traces_path}}, params,
                 {"geomodel.json", "bins.csv"});
  std::cout << "model: w0=" << model.w0 << " w1=" << model.w1 << " (" << model.bins_used
            << " bins, " << model.sample_count << " samples) -> " << dir.string() << '\n';
  return 0;
}

int cmd_fuse(const std::string& traces_path, const std::string& model_path,
             const std::string& truth_path, const std::string& out_dir,
             rfmap::FusionConfig fusion, bool sweep) {
  const fs::path dir = ensure_run_dir(out_dir);
  const auto traces = rfmap::read_traces(traces_path);
  const auto [model, model_sim] = rfmap::load_geomodel(model_path);
  fusion.sim = model_sim;  // closures must use the similarity the model was fit under

  std::vector<rfmap::TruthPoint> truth;
  if (!truth_path.empty()) {
    truth = rfmap::read_truth(truth_path);
  }

  if (sweep) {
    // Same grid as the calibration study: 0.05 .. 0.95 step 0.1.
    std::vector<double> thresholds;
    for (double t = 0.05; t < 1.0; t += 0.1) {
      thresholds.push_back(t);
    }
    const auto points = rfmap::sweep_thresholds(traces, model, fusion, thresholds);
    std::ofstream csv(dir / "sweep.csv");
    csv.precision(17);
    csv << "threshold,edges,ate_rmse\n";
    for (const rfmap::SweepPoint& p : points) {
      csv << p.threshold << ',' << p.edges_built << ',';
      if (!truth.empty()) {
        csv << rfmap::evaluate_ate(p.floors, truth).rmse;
      }
      csv << '\n';
    }
  }

  const auto fusions = rfmap::fuse_all(traces, model, fusion);
  std::vector<rfmap::Trajectory> aligned;
  for (const rfmap::FloorFusionResult& f : fusions) {
    aligned.insert(aligned.end(), f.aligned.begin(), f.aligned.end());
  }
  rfmap::write_aligned((dir / "aligned.jsonl").string(), aligned);
  rfmap::write_rfm((dir / "rfm.jsonl").string(), rfmap::build_rfm(aligned));
  for (const rfmap::FloorFusionResult& f : fusions) {
    const std::string suffix =
        fusions.size() == 1 ? "" : "_f" + std::to_string(f.floor);
    rfmap::dump_graph((dir / ("graph" + suffix + ".txt")).string(), f.graph);
    std::vector<rfmap::Trajectory> group;
    for (const rfmap::Trajectory& t : f.aligned) {
      group.push_back(t);
    }
    rfmap::write_closures_csv((dir / ("closures" + suffix + ".csv")).string(), f.closures,
                              f.index, group);
  }

  json report;
  report["floors"] = fusion_report_json(fusions);
  if (!truth.empty()) {
    const rfmap::TrajectoryAte a = rfmap::evaluate_ate(fusions, truth);
    report["ate"] = ate_json(a);
    rfmap::write_rfm((dir / "rfm_aligned.jsonl").string(), aligned_rfm(fusions, truth));
  }
  std::ofstream rep(dir / "report.json");
  rep << report.dump(2) << '\n';

  json params;
  params["threshold"] = fusion.closure.threshold;
  params["max_edges_per_node"] = fusion.closure.max_edges_per_node;
  params["min_intra_step_gap"] = fusion.closure.min_intra_step_gap;
  params["prune_chi2"] = fusion.prune_chi2;
  params["imu_info_a"] = fusion.imu_info_a;
  params["imu_info_b"] = fusion.imu_info_b;
  params["sweep"] = sweep;
  json inputs;
  inputs["traces"] = traces_path;
  inputs["model"] = model_path;
  if (!truth_path.empty()) {
    inputs["truth"] = truth_path;
  }
  write_manifest(dir, "fuse", inputs, params, {"aligned.jsonl", "rfm.jsonl", "report.json"});
  std::cout << "fused " << traces.size() << " trajectories on " << fusions.size()
            << " floor(s) -> " << dir.string() << '\n';
  return 0;
}

int cmd_position(const std::string& rfm_path, const std::string& mss_rfm_path,
                 const std::string& queries_path, const std::string& out_dir,
                 const rfmap::SimilarityConfig& sim, const rfmap::KnnConfig& knn) {
  const fs::path dir = ensure_run_dir(out_dir);
  const auto queries = rfmap::read_queries(queries_path);
  const rfmap::Rfm rfm = rfmap::read_rfm(rfm_path);

  const PositioningRun main_run = run_positioning(rfm, queries, sim, knn);
  write_estimates(dir / "estimates.jsonl", queries, main_run.estimates);
  rfmap::write_summary_json((dir / "summary.json").string(), main_run.summary);
  rfmap::write_ecdf_csv((dir / "ecdf.csv").string(), rfmap::ecdf(main_run.errors.planar));

  if (!mss_rfm_path.empty()) {
    // Comparison mode: the main map plays the crowdsourced role, the second
    // map is the surveyed baseline; both answer the same queries.
    const rfmap::Rfm mss = rfmap::read_rfm(mss_rfm_path);
    const PositioningRun mss_run = run_positioning(mss, queries, sim, knn);
    write_estimates(dir / "estimates_mss.jsonl", queries, mss_run.estimates);
    json cmp;
    cmp["ccs"] = summary_json(main_run.summary);
    cmp["mss"] = summary_json(mss_run.summary);
    std::ofstream out(dir / "comparison.json");
    out << cmp.dump(2) << '\n';
  }

  json params;
  params["k"] = knn.k;
  params["weighted"] = knn.weighted;
  params["beta"] = sim.beta;
  params["sigma_kernel"] = sim.sigma_kernel;
  json inputs;
  inputs["rfm"] = rfm_path;
  inputs["queries"] = queries_path;
  if (!mss_rfm_path.empty()) {
    inputs["rfm_mss"] = mss_rfm_path;
  }
  write_manifest(dir, "position", inputs, params, {"estimates.jsonl", "summary.json", "ecdf.csv"});
  std::cout << "positioned " << queries.size() << " queries (cep68 " << main_run.summary.cep68_m
            << " m) -> " << dir.string() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& estimates_path, const std::string& aligned_path,
                 const std::string& truth_path, const std::string& out_dir) {
  const fs::path dir = ensure_run_dir(out_dir);
  json inputs;
  std::vector<std::string> outputs;

  if (!estimates_path.empty()) {
    std::ifstream in(estimates_path);
    if (!in) {
      throw rfmap::DataError("cannot open '" + estimates_path + "' for reading");
    }
    std::vector<rfmap::FloorPosition> est;
    std::vector<rfmap::FloorPosition> truth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) {
        continue;
      }
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("truth")) {
        throw rfmap::DataError(estimates_path + ":" + std::to_string(lineno) +
                               ": malformed estimate record");
      }
      est.push_back({j.at("x").get<double>(), j.at("y").get<double>(), j.at("floor").get<int>()});
      truth.push_back({j.at("truth").at("x").get<double>(), j.at("truth").at("y").get<double>(),
                       j.at("truth").at("floor").get<int>()});
    }
    const rfmap::PositionErrors errors = rfmap::positioning_errors(est, truth);
    rfmap::write_summary_json((dir / "summary.json").string(), rfmap::summarize(errors));
    rfmap::write_ecdf_csv((dir / "ecdf.csv").string(), rfmap::ecdf(errors.planar));
    inputs["estimates"] = estimates_path;
    outputs.insert(outputs.end(), {"summary.json", "ecdf.csv"});
  }

  if (!aligned_path.empty()) {
    const auto aligned = rfmap::read_aligned(aligned_path);
    const auto truth = rfmap::read_truth(truth_path);
    // Group by floor: each fused floor has its own gauge.
    std::map<int, std::vector<rfmap::Trajectory>> by_floor;
    for (const rfmap::Trajectory& t : aligned) {
      by_floor[t.floor].push_back(t);
    }
    std::vector<rfmap::FloorFusionResult> pseudo;
    for (auto& [floor, group] : by_floor) {
      rfmap::FloorFusionResult f;
      f.floor = floor;
      f.aligned = std::move(group);
      pseudo.push_back(std::move(f));
    }
    const rfmap::TrajectoryAte a = rfmap::evaluate_ate(pseudo, truth);
    std::ofstream out(dir / "ate.json");
    out << ate_json(a).dump(2) << '\n';
    inputs["aligned"] = aligned_path;
    inputs["truth"] = truth_path;
    outputs.push_back("ate.json");
  }

  if (outputs.empty()) {
    throw rfmap::ConfigError("evaluate needs --estimates and/or --aligned with --truth");
  }
  write_manifest(dir, "evaluate", inputs, json::object(), outputs);
  std::cout << "evaluated -> " << dir.string() << '\n';
  return 0;
}

int cmd_pipeline(const ScenarioOptions& sc, const rfmap::SimilarityConfig& sim,
                 const FitOptions& fit, rfmap::FusionConfig fusion, const rfmap::KnnConfig& knn,
                 const std::string& out_dir) {
  const fs::path dir = ensure_run_dir(out_dir);
  fusion.sim = sim;

  const SimulationArtifacts art = run_simulation(sc);
  std::vector<rfmap::Trajectory> traces;
  for (const rfmap::SimTrajectory& s : art.sims) {
    traces.push_back(s.trajectory);
  }
  rfmap::write_traces((dir / "traces.jsonl").string(), traces);
  rfmap::write_truth((dir / "truth.jsonl").string(), art.sims);
  rfmap::write_queries((dir / "queries.jsonl").string(), art.queries);

  std::vector<rfmap::SimilarityBin> bins;
  const rfmap::GeoModel model = fit_model_stage(traces, sim, fit, &bins);
  rfmap::save_geomodel((dir / "geomodel.json").string(), model, sim);
  rfmap::write_bins_csv((dir / "bins.csv").string(), bins, model.method);

  const auto fusions = rfmap::fuse_all(traces, model, fusion);
  std::vector<rfmap::Trajectory> aligned;
  for (const rfmap::FloorFusionResult& f : fusions) {
    aligned.insert(aligned.end(), f.aligned.begin(), f.aligned.end());
  }
  rfmap::write_aligned((dir / "aligned.jsonl").string(), aligned);

  const auto truth = rfmap::read_truth((dir / "truth.jsonl").string());
  const rfmap::TrajectoryAte fusion_ate = rfmap::evaluate_ate(fusions, truth);

  // Surveyed baseline: snapshots at their true positions.
  std::vector<rfmap::Trajectory> truth_trajs = traces;
  {
    std::size_t idx = 0;
    for (const rfmap::SimTrajectory& s : art.sims) {
      for (std::size_t k = 0; k < s.truth.size(); ++k) {
        truth_trajs[idx].steps[k].pose = s.truth[k];
      }
      ++idx;
    }
  }
  const rfmap::Rfm rfm_mss = rfmap::build_rfm(truth_trajs);
  const rfmap::Rfm rfm_ccs = aligned_rfm(fusions, truth);
  rfmap::write_rfm((dir / "rfm_mss.jsonl").string(), rfm_mss);
  rfmap::write_rfm((dir / "rfm_ccs.jsonl").string(), rfm_ccs);

  const PositioningRun mss_run = run_positioning(rfm_mss, art.queries, sim, knn);
  const PositioningRun ccs_run = run_positioning(rfm_ccs, art.queries, sim, knn);
  write_estimates(dir / "estimates_mss.jsonl", art.queries, mss_run.estimates);
  write_estimates(dir / "estimates_ccs.jsonl", art.queries, ccs_run.estimates);
  rfmap::write_ecdf_csv((dir / "ecdf_mss.csv").string(), rfmap::ecdf(mss_run.errors.planar));
  rfmap::write_ecdf_csv((dir / "ecdf_ccs.csv").string(), rfmap::ecdf(ccs_run.errors.planar));

  json cmp;
  cmp["mss"] = summary_json(mss_run.summary);
  cmp["ccs"] = summary_json(ccs_run.summary);
  cmp["fusion_ate"] = ate_json(fusion_ate);
  cmp["fusion"] = fusion_report_json(fusions);
  cmp["model"] = {{"w0", model.w0}, {"w1", model.w1}, {"bins", model.bins_used},
                  {"samples", model.sample_count}};
  std::ofstream out(dir / "comparison.json");
  out << cmp.dump(2) << '\n';

  json params = scenario_params(sc);
  params["k"] = knn.k;
  params["threshold"] = fusion.closure.threshold;
  params["method"] = fit.method;
  write_manifest(dir, "pipeline", json::object(), params,
                 {"traces.jsonl", "truth.jsonl", "queries.jsonl", "geomodel.json",
                  "aligned.jsonl", "rfm_mss.jsonl", "rfm_ccs.jsonl", "comparison.json"});

  std::cout << "pipeline: ate " << fusion_ate.rmse << " m | mss cep68 " << mss_run.summary.cep68_m
            << " m | ccs cep68 " << ccs_run.summary.cep68_m << " m -> " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdsourced radio-map construction and positioning"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "sectioned key=value config file")
      ->check(CLI::ExistingFile);

  ScenarioOptions sc;
  rfmap::SimilarityConfig sim;
  FitOptions fit;
  rfmap::FusionConfig fusion;
  rfmap::KnnConfig knn;

  std::string out_dir;
  std::string traces_path;
  std::string model_path;
  std::string truth_path;
  std::string rfm_path;
  std::string mss_rfm_path;
  std::string queries_path;
  std::string estimates_path;
  std::string aligned_path;
  bool sweep = false;

  auto add_scenario_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", sc.seed, "base seed");
    cmd->add_option("--extent-x", sc.env.extent_x, "site width, m");
    cmd->add_option("--extent-y", sc.env.extent_y, "site depth, m");
    cmd->add_option("--floors", sc.env.floors, "floor count");
    cmd->add_option("--aps-per-floor", sc.env.aps_per_floor, "access points per floor");
    cmd->add_option("--shadowing", sc.env.shadowing_sigma, "shadowing sigma, dBm");
    cmd->add_option("--p-drop", sc.env.p_drop, "per-source dropout probability");
    cmd->add_option("--floor-penalty", sc.env.floor_penalty, "attenuation per floor, dB");
    cmd->add_option("--dropout", sc.env.dropout_floor, "sensitivity floor, dBm");
    cmd->add_option("--n-traj", sc.walk.n_trajectories, "trajectory count");
    cmd->add_option("--steps", sc.walk.steps, "steps per trajectory");
    cmd->add_option("--rf-period", sc.walk.rf_period, "steps between snapshots");
    cmd->add_option("--queries", sc.queries, "held-out query count");
  };
  auto add_similarity_flags = [&](CLI::App* cmd) {
    cmd->add_option("--beta", sim.beta, "compound similarity beta");
    cmd->add_option("--sigma-kernel", sim.sigma_kernel, "value kernel sigma, dBm");
    cmd->add_option("--missing", sim.missing_value, "missing-reading placeholder, dBm");
  };
  auto add_fit_flags = [&](CLI::App* cmd) {
    cmd->add_option("--n-per-traj", fit.params.n_per_traj, "sampled pairs per trajectory");
    cmd->add_option("--bins", fit.params.bins, "similarity bins");
    cmd->add_option("--min-count", fit.params.min_count, "minimum samples per bin");
    cmd->add_option("--method", fit.method, "scale estimator: mle or kde")
        ->check(CLI::IsMember({"mle", "kde"}));
    cmd->add_option("--fit-seed", fit.seed, "pair sampling seed");
  };
  auto add_fusion_flags = [&](CLI::App* cmd) {
    cmd->add_option("--threshold", fusion.closure.threshold, "closure similarity threshold");
    cmd->add_option("--max-edges", fusion.closure.max_edges_per_node, "closure degree cap");
    cmd->add_option("--min-gap", fusion.closure.min_intra_step_gap,
                    "minimum intra-trajectory step gap");
    cmd->add_option("--prune-chi2", fusion.prune_chi2, "closure pruning chi^2 cutoff");
    cmd->add_option("--max-iterations", fusion.solver.max_iterations, "solver iteration cap");
  };
  auto add_knn_flags = [&](CLI::App* cmd) {
    cmd->add_option("-k,--k", knn.k, "neighbor count");
    cmd->add_flag("--weighted", knn.weighted, "similarity-weighted neighbor mean");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic traces and queries");
  simulate->add_option("--out", out_dir, "run directory")->required();
  add_scenario_flags(simulate);

  CLI::App* fit_model = app.add_subcommand("fit-model", "fit the similarity-distance model");
  fit_model->add_option("--traces", traces_path, "trace file")->required();
  fit_model->add_option("--out", out_dir, "run directory")->required();
  add_similarity_flags(fit_model);
  add_fit_flags(fit_model);

  CLI::App* fuse = app.add_subcommand("fuse", "fuse traces into a shared frame");
  fuse->add_option("--traces", traces_path, "trace file")->required();
  fuse->add_option("--model", model_path, "distance model file")->required();
  fuse->add_option("--out", out_dir, "run directory")->required();
  fuse->add_option("--truth", truth_path, "ground-truth file (enables alignment metrics)");
  CLI::Option* sweep_opt =
      fuse->add_flag("--sweep", sweep, "run the closure-threshold sweep (needs --truth)");
  add_fusion_flags(fuse);
  sweep_opt->needs(fuse->get_option("--truth"));

  CLI::App* position = app.add_subcommand("position", "answer queries against a reference map");
  position->add_option("--rfm", rfm_path, "reference map file")->required();
  position->add_option("--rfm-mss", mss_rfm_path, "surveyed baseline map (comparison mode)");
  position->add_option("--queries", queries_path, "query file")->required();
  position->add_option("--out", out_dir, "run directory")->required();
  add_similarity_flags(position);
  add_knn_flags(position);

  CLI::App* evaluate = app.add_subcommand("evaluate", "recompute metrics from run outputs");
  evaluate->add_option("--estimates", estimates_path, "estimates file from position");
  evaluate->add_option("--aligned", aligned_path, "fused trajectories file");
  evaluate->add_option("--truth", truth_path, "ground-truth file");
  evaluate->add_option("--out", out_dir, "run directory")->required();
  evaluate->get_option("--aligned")->needs(evaluate->get_option("--truth"));

  CLI::App* pipeline = app.add_subcommand("pipeline", "simulate, fit, fuse, and evaluate");
  pipeline->add_option("--out", out_dir, "run directory")->required();
  add_scenario_flags(pipeline);
  add_similarity_flags(pipeline);
  add_fit_flags(pipeline);
  add_fusion_flags(pipeline);
  add_knn_flags(pipeline);

  CLI11_PARSE(app, argc, argv);

  try {
    // Config file fills in whatever the command line left untouched.
    if (!config_path.empty()) {
      const rfmap::Config cfg = rfmap::Config::load(config_path);
      CLI::App* active = app.get_subcommands().front();
      auto untouched = [&](const std::string& flag) {
        const CLI::Option* opt = active->get_option_no_throw(flag);
        return opt == nullptr || opt->count() == 0;
      };
      ScenarioOptions sc_file = sc;
      apply_config_scenario(cfg, sc_file);
      if (untouched("--seed")) sc.seed = sc_file.seed;
      if (untouched("--extent-x")) sc.env.extent_x = sc_file.env.extent_x;
      if (untouched("--extent-y")) sc.env.extent_y = sc_file.env.extent_y;
      if (untouched("--floors")) sc.env.floors = sc_file.env.floors;
      if (untouched("--aps-per-floor")) sc.env.aps_per_floor = sc_file.env.aps_per_floor;
      if (untouched("--shadowing")) sc.env.shadowing_sigma = sc_file.env.shadowing_sigma;
      if (untouched("--p-drop")) sc.env.p_drop = sc_file.env.p_drop;
      if (untouched("--floor-penalty")) sc.env.floor_penalty = sc_file.env.floor_penalty;
      if (untouched("--dropout")) sc.env.dropout_floor = sc_file.env.dropout_floor;
      if (untouched("--n-traj")) sc.walk.n_trajectories = sc_file.walk.n_trajectories;
      if (untouched("--steps")) sc.walk.steps = sc_file.walk.steps;
      if (untouched("--rf-period")) sc.walk.rf_period = sc_file.walk.rf_period;
      if (untouched("--queries")) sc.queries = sc_file.queries;
      sc.env.tx_power = sc_file.env.tx_power;
      sc.env.path_loss_exponent = sc_file.env.path_loss_exponent;
      sc.env.d0 = sc_file.env.d0;
      sc.env.floor_height = sc_file.env.floor_height;
      sc.walk.step_len = sc_file.walk.step_len;
      sc.walk.turn_sigma_deg = sc_file.walk.turn_sigma_deg;
      sc.walk.pos_noise = sc_file.walk.pos_noise;
      sc.walk.heading_noise_deg = sc_file.walk.heading_noise_deg;
      sc.walk.heading_bias_max_deg = sc_file.walk.heading_bias_max_deg;

      rfmap::SimilarityConfig sim_file = sim;
      apply_config_similarity(cfg, sim_file);
      if (untouched("--beta")) sim.beta = sim_file.beta;
      if (untouched("--sigma-kernel")) sim.sigma_kernel = sim_file.sigma_kernel;
      if (untouched("--missing")) sim.missing_value = sim_file.missing_value;

      FitOptions fit_file = fit;
      apply_config_fit(cfg, fit_file);
      if (untouched("--n-per-traj")) fit.params.n_per_traj = fit_file.params.n_per_traj;
      if (untouched("--bins")) fit.params.bins = fit_file.params.bins;
      if (untouched("--min-count")) fit.params.min_count = fit_file.params.min_count;
      if (untouched("--method")) fit.method = fit_file.method;

      rfmap::FusionConfig fusion_file = fusion;
      apply_config_closure(cfg, fusion_file.closure);
      apply_config_solver(cfg, fusion_file);
      if (untouched("--threshold")) fusion.closure.threshold = fusion_file.closure.threshold;
      if (untouched("--max-edges")) {
        fusion.closure.max_edges_per_node = fusion_file.closure.max_edges_per_node;
      }
      if (untouched("--min-gap")) {
        fusion.closure.min_intra_step_gap = fusion_file.closure.min_intra_step_gap;
      }
      fusion.closure.jaccard_floor = fusion_file.closure.jaccard_floor;
      if (untouched("--prune-chi2")) fusion.prune_chi2 = fusion_file.prune_chi2;
      if (untouched("--max-iterations")) {
        fusion.solver.max_iterations = fusion_file.solver.max_iterations;
      }
      fusion.solver.lambda_init = fusion_file.solver.lambda_init;
      fusion.solver.cost_tol = fusion_file.solver.cost_tol;
      fusion.solver.step_tol = fusion_file.solver.step_tol;
      fusion.solver.huber_delta = fusion_file.solver.huber_delta;
      fusion.imu_info_a = fusion_file.imu_info_a;
      fusion.imu_info_b = fusion_file.imu_info_b;

      rfmap::KnnConfig knn_file = knn;
      knn_file.k = static_cast<int>(cfg.get_int("positioning", "k").value_or(knn_file.k));
      knn_file.weighted = cfg.get_bool("positioning", "weighted").value_or(knn_file.weighted);
      if (untouched("--k")) knn.k = knn_file.k;
      if (untouched("--weighted")) knn.weighted = knn_file.weighted;

      cfg.ensure_fully_consumed();
    }
    sim.validate();

    if (simulate->parsed()) {
      return cmd_simulate(sc, out_dir);
    }
    if (fit_model->parsed()) {
      return cmd_fit_model(traces_path, out_dir, sim, fit);
    }
    if (fuse->parsed()) {
      return cmd_fuse(traces_path, model_path, truth_path, out_dir, fusion, sweep);
    }
    if (position->parsed()) {
      return cmd_position(rfm_path, mss_rfm_path, queries_path, out_dir, sim, knn);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(estimates_path, aligned_path, truth_path, out_dir);
    }
    if (pipeline->parsed()) {
      return cmd_pipeline(sc, sim, fit, fusion, knn, out_dir);
    }
  } catch (const rfmap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rfmap::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const rfmap::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
