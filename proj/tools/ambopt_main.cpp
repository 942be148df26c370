#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ambopt/batch_opt.hpp"
#include "ambopt/experiment.hpp"

namespace fs = std::filesystem;
using namespace ambopt;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct SimulateArgs {
  std::string config_file;
  std::string policies;
  std::string base_rules;
  std::string fleet_sizes;
  int replications = -1;
  long long seed = -1;
  std::string out_dir;
  double delta_seconds = -1.0;
  double alpha = -1.0;
  bool trips = false;
};

ExperimentConfig resolve_config(const SimulateArgs& args) {
  ExperimentConfig cfg = load_experiment_config(args.config_file);
  if (!args.policies.empty()) cfg.policies = split_list(args.policies);
  if (!args.base_rules.empty()) cfg.base_rules = split_list(args.base_rules);
  if (!args.fleet_sizes.empty()) {
    cfg.fleet_sizes.clear();
    for (const auto& s : split_list(args.fleet_sizes))
      cfg.fleet_sizes.push_back(std::stoi(s));
  }
  if (args.replications > 0) cfg.replications = args.replications;
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.delta_seconds > 0) cfg.bbr.delta = args.delta_seconds;
  if (args.alpha > 0) cfg.bbr.alpha = args.alpha;
  cfg.write_trips = cfg.write_trips || args.trips;
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

void write_trip_log(const ExperimentConfig& cfg) {
  // One replication of the first grid cell, for inspection.
  ExperimentConfig one = cfg;
  one.replications = 1;
  const std::vector<std::vector<Call>> calls = [&] {
    ExperimentConfig tmp = one;
    ExperimentResult r;
    if (!tmp.calls_file.empty()) {
      return std::vector<std::vector<Call>>{load_calls(tmp.calls_file)};
    }
    std::mt19937_64 rng(derive_seed(tmp.seed, 0));
    return std::vector<std::vector<Call>>{
        sample_scenario(tmp.intensity, tmp.service, 0.0, tmp.horizon, rng)};
  }();
  const int n = cfg.fleet_sizes.empty()
                    ? static_cast<int>(cfg.instance.fleet.size())
                    : cfg.fleet_sizes.front();
  Instance sub = cfg.instance;
  sub.fleet.resize(n);
  Simulator sim(sub);
  auto policy = make_policy(cfg.policies.front(), sub);
  BestBaseConfig bc = cfg.bbr;
  BaseIntensity bi;
  const Reassigner* unused = nullptr;
  (void)unused;
  std::unique_ptr<Reassigner> reassigner;
  if (cfg.base_rules.front() == "bbr") {
    std::vector<Location> centroids;
    for (int c = 0; c < cfg.intensity.grid.cells(); ++c)
      centroids.push_back(cfg.intensity.grid.cell_centroid(c));
    bi = aggregate_to_bases(sub, cfg.intensity.table, centroids);
    reassigner = make_reassigner("bbr", sub, &bi, bc);
  } else {
    reassigner = make_reassigner(cfg.base_rules.front(), sub, nullptr, bc);
  }
  SimResult res = sim.run(*policy, *reassigner, calls[0], cfg.horizon);
  write_file(fs::path(cfg.out_dir) / "trips.jsonl", trips_to_jsonl(res.state));
}

int cmd_simulate(const SimulateArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const ExperimentResult result = run_experiment(cfg);
  write_file(fs::path(cfg.out_dir) / "metrics.csv", metrics_csv(result));
  write_file(fs::path(cfg.out_dir) / "metrics.json", metrics_json(result));
  if (cfg.write_trips) write_trip_log(cfg);
  std::cout << metrics_csv(result);
  return 0;
}

int cmd_rollout(const SimulateArgs& args) {
  ExperimentConfig cfg = resolve_config(args);
  if (!cfg.has_intensity)
    throw ConfigError("rollout needs an intensity table for its scenarios");
  const auto pairs = run_rollout_comparison(cfg);
  nlohmann::json j = nlohmann::json::array();
  std::ostringstream csv;
  csv << "policy,fleet_size,mean_cost_plain,mean_cost_rollout,mean_delta,"
         "upper95,median_decision_ms\n";
  for (const auto& p : pairs) {
    j.push_back({{"policy", p.policy},
                 {"fleet_size", p.fleet_size},
                 {"mean_cost_plain", p.mean_cost_plain},
                 {"mean_cost_rollout", p.mean_cost_rollout},
                 {"mean_delta", p.mean_delta},
                 {"upper95", p.upper95},
                 {"median_decision_ms", p.median_decision_ms},
                 {"deltas", p.deltas}});
    csv << p.policy << ',' << p.fleet_size << ',' << p.mean_cost_plain << ','
        << p.mean_cost_rollout << ',' << p.mean_delta << ',' << p.upper95
        << ',' << p.median_decision_ms << '\n';
  }
  write_file(fs::path(cfg.out_dir) / "rollout_compare.json", j.dump(2));
  write_file(fs::path(cfg.out_dir) / "rollout_compare.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_calibrate(const std::string& history_file, const std::string& out_file,
                  const std::vector<double>& bbox, int nx, int ny,
                  double window_seconds, double period_seconds,
                  int call_types) {
  GridSpec grid;
  grid.x_min = bbox[0];
  grid.x_max = bbox[1];
  grid.y_min = bbox[2];
  grid.y_max = bbox[3];
  grid.nx = nx;
  grid.ny = ny;
  grid.window_length = window_seconds;
  grid.period = period_seconds;
  const auto history = load_history_csv(history_file);
  const GriddedIntensity gi = estimate_intensities(history, grid, call_types);
  write_file(out_file, intensity_to_json_text(gi));
  std::cout << "calibrated " << history.size() << " events into "
            << grid.cells() << " cells x " << grid.windows() << " windows\n";
  return 0;
}

int cmd_solve_batch(const std::string& instance_file, bool simplified,
                    const std::string& lp_file, const std::string& out_file) {
  Instance storage;
  const BatchInstance bi = load_batch_instance(instance_file, storage);
  if (!lp_file.empty()) {
    const LinearModel model =
        simplified ? build_simplified_model(bi) : build_full_model(bi);
    write_file(lp_file, export_lp(model));
  }
  const BatchSolution sol = solve_exact(bi);
  const std::string text = batch_solution_to_json(bi, sol);
  if (!out_file.empty()) write_file(out_file, text);
  std::cout << text << '\n';
  return sol.feasible ? 0 : 1;
}

int cmd_bbr_demo(int replications, long long seed, const std::string& policies,
                 const std::string& out_dir) {
  const std::vector<std::string> kinds =
      policies.empty() ? std::vector<std::string>{"ca", "bm", "ghp1", "ghp2", "nm"}
                       : split_list(policies);
  const auto rows =
      run_burst_demo(replications, static_cast<uint64_t>(seed), kinds);
  std::ostringstream csv;
  csv << "policy,mean_response_hbr,mean_response_cbr,mean_response_bbr\n";
  for (const auto& r : rows) {
    csv << r.policy << ',' << static_cast<long long>(std::floor(r.mean_hbr + 0.5))
        << ',' << static_cast<long long>(std::floor(r.mean_cbr + 0.5)) << ','
        << static_cast<long long>(std::floor(r.mean_bbr + 0.5)) << '\n';
  }
  if (!out_dir.empty())
    write_file(fs::path(out_dir) / "bbr_demo.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMS fleet simulation and dispatch optimization"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", sim_args.config_file, "experiment JSON")
        ->required();
    cmd->add_option("--policy", sim_args.policies,
                    "comma list: ca,bm,nm,ghp1,ghcap1,ghp2,ghcap2");
    cmd->add_option("--base-rule", sim_args.base_rules, "comma list: hbr,cbr,bbr");
    cmd->add_option("--fleet-sizes", sim_args.fleet_sizes, "comma list of sizes");
    cmd->add_option("--replications", sim_args.replications);
    cmd->add_option("--seed", sim_args.seed);
    cmd->add_option("--out-dir", sim_args.out_dir);
    cmd->add_option("--delta-seconds", sim_args.delta_seconds,
                    "BBR lookahead window");
    cmd->add_option("--alpha", sim_args.alpha, "BBR quantile level");
  };

  auto* simulate = app.add_subcommand("simulate", "replicated policy runs");
  add_common(simulate);
  simulate->add_flag("--trips", sim_args.trips, "also write trips.jsonl");

  auto* rollout =
      app.add_subcommand("rollout", "paired plain-vs-rollout comparison");
  add_common(rollout);

  std::string history_file, intensity_out;
  std::vector<double> bbox{0, 1, 0, 1};
  int nx = 10, ny = 10, call_types = 1;
  double window_seconds = 1800, period_seconds = 604800;
  auto* calibrate =
      app.add_subcommand("calibrate", "estimate Poisson intensities");
  calibrate->add_option("--history", history_file, "CSV t,x,y,type")->required();
  calibrate->add_option("--out", intensity_out)->required();
  calibrate->add_option("--bbox", bbox, "x_min x_max y_min y_max")
      ->expected(4);
  calibrate->add_option("--nx", nx);
  calibrate->add_option("--ny", ny);
  calibrate->add_option("--window-seconds", window_seconds);
  calibrate->add_option("--period-seconds", period_seconds);
  calibrate->add_option("--call-types", call_types);

  std::string batch_file, lp_file, solution_file;
  bool simplified = false;
  auto* solve = app.add_subcommand("solve-batch", "exact batch allocation");
  solve->add_option("--instance", batch_file)->required();
  solve->add_flag("--simplified", simplified,
                  "export the closest-facility model");
  solve->add_option("--export-lp", lp_file);
  solve->add_option("--out", solution_file);

  int demo_reps = 25;
  long long demo_seed = 1;
  std::string demo_policies, demo_out;
  auto* demo = app.add_subcommand("bbr-demo", "south/north burst relocation demo");
  demo->add_option("--replications", demo_reps);
  demo->add_option("--seed", demo_seed);
  demo->add_option("--policies", demo_policies);
  demo->add_option("--out-dir", demo_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (rollout->parsed()) return cmd_rollout(sim_args);
    if (calibrate->parsed())
      return cmd_calibrate(history_file, intensity_out, bbox, nx, ny,
                           window_seconds, period_seconds, call_types);
    if (solve->parsed())
      return cmd_solve_batch(batch_file, simplified, lp_file, solution_file);
    if (demo->parsed())
      return cmd_bbr_demo(demo_reps, demo_seed, demo_policies, demo_out);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
