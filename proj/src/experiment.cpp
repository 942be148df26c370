#include "ambopt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ambopt {

using nlohmann::json;

uint64_t derive_seed(uint64_t root, uint64_t stream) {
  uint64_t z = root + (stream + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void ExperimentConfig::validate() const {
  instance.validate();
  if (policies.empty()) throw ConfigError("experiment: no policies");
  for (const auto& p : policies) {
    if (!is_policy_kind(p)) throw ConfigError("unknown policy '" + p + "'");
  }
  for (const auto& r : base_rules) {
    if (r != "hbr" && r != "cbr" && r != "bbr")
      throw ConfigError("unknown base rule '" + r + "'");
    if (r == "bbr" && !has_intensity)
      throw ConfigError("base rule bbr needs an intensity table");
  }
  if (replications < 1) throw ConfigError("experiment: replications < 1");
  if (calls_file.empty() && !has_intensity)
    throw ConfigError("experiment: provide calls_file or intensity");
  for (int n : fleet_sizes) {
    if (n < 1 || n > static_cast<int>(instance.fleet.size()))
      throw ConfigError("fleet size " + std::to_string(n) +
                        " outside the roster");
  }
  if (has_intensity &&
      static_cast<int>(service.size()) < intensity.table.call_types)
    throw ConfigError("experiment: one service spec per call type required");
}

namespace {

ServiceModel parse_service(const json& arr) {
  ServiceModel out;
  for (const auto& s : arr) {
    ServiceSpec spec;
    spec.time_on_scene = s.value("time_on_scene", 300.0);
    spec.needs_hospital = s.value("needs_hospital", false);
    spec.time_at_hospital = s.value("time_at_hospital", 0.0);
    spec.needs_cleaning = s.value("needs_cleaning", false);
    spec.cleaning_time = s.value("cleaning_time", 0.0);
    out.push_back(spec);
  }
  return out;
}

ExperimentConfig parse_config(const json& j, const std::string& origin) {
  ExperimentConfig cfg;
  if (j.contains("instance_file")) {
    cfg.instance = load_instance(j.at("instance_file").get<std::string>());
  } else if (j.contains("instance")) {
    cfg.instance = instance_from_json_text(j.at("instance").dump(), origin);
  } else {
    throw ConfigError(origin + ": missing 'instance' or 'instance_file'");
  }
  if (j.contains("policies"))
    cfg.policies = j.at("policies").get<std::vector<std::string>>();
  if (j.contains("base_rules"))
    cfg.base_rules = j.at("base_rules").get<std::vector<std::string>>();
  if (j.contains("fleet_sizes"))
    cfg.fleet_sizes = j.at("fleet_sizes").get<std::vector<int>>();
  cfg.replications = j.value("replications", 1);
  cfg.seed = j.value("seed", 1ull);
  cfg.horizon = j.value("horizon_seconds", 7200.0);
  cfg.calls_file = j.value("calls_file", std::string{});
  if (j.contains("intensity_file")) {
    cfg.intensity = load_intensity(j.at("intensity_file").get<std::string>());
    cfg.has_intensity = true;
  } else if (j.contains("intensity")) {
    cfg.intensity = intensity_from_json_text(j.at("intensity").dump(), origin);
    cfg.has_intensity = true;
  }
  if (j.contains("service")) cfg.service = parse_service(j.at("service"));
  if (j.contains("rollout")) {
    const auto& r = j.at("rollout");
    cfg.rollout = r.value("enabled", true);
    cfg.rollout_config.n_scenarios = r.value("n_scenarios", 25);
    cfg.rollout_config.horizon = r.value("horizon_seconds", 7200.0);
    cfg.rollout_config.combinatorial_hospitals =
        r.value("combinatorial_hospitals", false);
    cfg.rollout_config.parallel = r.value("parallel", true);
  }
  if (j.contains("bbr")) {
    const auto& b = j.at("bbr");
    cfg.bbr.delta = b.value("delta_seconds", 5400.0);
    cfg.bbr.alpha = b.value("alpha", 0.9);
    cfg.bbr.use_max_counts = b.value("use_max_counts", false);
  }
  cfg.out_dir = j.value("out_dir", std::string{"."});
  cfg.parallel_replications = j.value("parallel_replications", true);
  cfg.write_trips = j.value("write_trips", false);
  cfg.validate();
  return cfg;
}

Instance sub_instance(const Instance& full, int fleet_size) {
  Instance sub = full;
  sub.fleet.resize(fleet_size);
  return sub;
}

std::vector<std::vector<Call>> replication_calls(const ExperimentConfig& cfg) {
  std::vector<std::vector<Call>> calls(cfg.replications);
  if (!cfg.calls_file.empty()) {
    const std::vector<Call> fixed = load_calls(cfg.calls_file);
    for (auto& c : calls) c = fixed;
    return calls;
  }
  for (int r = 0; r < cfg.replications; ++r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, r));
    calls[r] = sample_scenario(cfg.intensity, cfg.service, 0.0, cfg.horizon, rng);
  }
  return calls;
}

struct RepOutcome {
  Metrics metrics;
  std::vector<CallRecord> records;
  std::vector<double> decision_ms;
};

RepOutcome run_one(const ExperimentConfig& cfg, const Instance& sub,
                   const BaseIntensity* base_intensity,
                   const std::string& policy_kind, const std::string& rule_kind,
                   const std::vector<Call>& calls, uint64_t rep_seed) {
  Simulator sim(sub);
  std::unique_ptr<SelectionPolicy> policy;
  RolloutPolicy* rollout = nullptr;
  if (cfg.rollout) {
    RolloutConfig rc = cfg.rollout_config;
    rc.heuristic = policy_kind;
    auto rp = std::make_unique<RolloutPolicy>(
        sub, rc,
        RolloutPolicy::poisson_source(cfg.intensity, cfg.service, rc, rep_seed));
    rollout = rp.get();
    policy = std::move(rp);
  } else {
    policy = make_policy(policy_kind, sub);
  }
  auto reassigner = make_reassigner(rule_kind, sub, base_intensity, cfg.bbr);
  SimResult res = sim.run(*policy, *reassigner, calls, cfg.horizon);
  RepOutcome out;
  out.metrics = res.metrics;
  out.records = std::move(res.state.records);
  if (rollout != nullptr) out.decision_ms = rollout->decision_wall_ms();
  return out;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j, path);
}

ExperimentConfig experiment_config_from_json_text(const std::string& text,
                                                  const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return parse_config(j, origin);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* v = std::getenv("AMBOPT_SEED")) cfg.seed = std::stoull(v);
  if (const char* v = std::getenv("AMBOPT_REPLICATIONS"))
    cfg.replications = std::stoi(v);
  if (const char* v = std::getenv("AMBOPT_OUT_DIR")) cfg.out_dir = v;
  if (const char* v = std::getenv("AMBOPT_PARALLEL"))
    cfg.parallel_replications = std::string(v) != "0";
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.replication_calls = replication_calls(cfg);

  std::vector<int> sizes = cfg.fleet_sizes;
  if (sizes.empty()) sizes.push_back(static_cast<int>(cfg.instance.fleet.size()));

  BaseIntensity base_intensity;
  bool need_bbr = std::count(cfg.base_rules.begin(), cfg.base_rules.end(),
                             std::string("bbr")) > 0;
  if (need_bbr) {
    std::vector<Location> centroids;
    for (int c = 0; c < cfg.intensity.grid.cells(); ++c)
      centroids.push_back(cfg.intensity.grid.cell_centroid(c));
    base_intensity =
        aggregate_to_bases(cfg.instance, cfg.intensity.table, centroids);
  }

  for (int n : sizes) {
    const Instance sub = sub_instance(cfg.instance, n);
    for (const auto& policy_kind : cfg.policies) {
      for (const auto& rule_kind : cfg.base_rules) {
        CellResult cell;
        cell.policy = cfg.rollout ? "rollout+" + policy_kind : policy_kind;
        cell.base_rule = rule_kind;
        cell.fleet_size = n;
        std::vector<RepOutcome> outcomes(cfg.replications);
        const BaseIntensity* bi = rule_kind == "bbr" ? &base_intensity : nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cfg.parallel_replications)
#endif
        for (int r = 0; r < cfg.replications; ++r) {
          outcomes[r] = run_one(cfg, sub, bi, policy_kind, rule_kind,
                                result.replication_calls[r],
                                derive_seed(cfg.seed, 1000003ull + r));
        }
        std::vector<double> rt, cost;
        for (int r = 0; r < cfg.replications; ++r) {
          std::vector<double> rep_rt, rep_cost;
          for (const auto& rec : outcomes[r].records) {
            rt.push_back(rec.waiting_on_scene);
            cost.push_back(rec.allocation_cost);
            rep_rt.push_back(rec.waiting_on_scene);
            rep_cost.push_back(rec.allocation_cost);
          }
          cell.rep_mean_response.push_back(mean_of(rep_rt));
          cell.rep_mean_cost.push_back(mean_of(rep_cost));
          cell.decision_ms.insert(cell.decision_ms.end(),
                                  outcomes[r].decision_ms.begin(),
                                  outcomes[r].decision_ms.end());
        }
        if (!rt.empty()) {
          cell.pooled.response_time = summarize(rt);
          cell.pooled.allocation_cost = summarize(cost);
        }
        cell.pooled.calls = static_cast<int>(rt.size());
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

std::vector<PairedComparison> run_rollout_comparison(const ExperimentConfig& cfg) {
  ExperimentConfig plain = cfg;
  plain.rollout = false;
  ExperimentConfig rolled = cfg;
  rolled.rollout = true;

  const ExperimentResult base = run_experiment(plain);
  const ExperimentResult roll = run_experiment(rolled);
  if (base.cells.size() != roll.cells.size())
    throw SimulationError("rollout comparison produced mismatched grids");

  std::vector<PairedComparison> out;
  for (size_t i = 0; i < base.cells.size(); ++i) {
    const CellResult& a = base.cells[i];
    const CellResult& b = roll.cells[i];
    PairedComparison pc;
    pc.policy = a.policy;
    pc.fleet_size = a.fleet_size;
    pc.mean_cost_plain = mean_of(a.rep_mean_cost);
    pc.mean_cost_rollout = mean_of(b.rep_mean_cost);
    for (size_t r = 0; r < a.rep_mean_cost.size(); ++r)
      pc.deltas.push_back(b.rep_mean_cost[r] - a.rep_mean_cost[r]);
    pc.mean_delta = mean_of(pc.deltas);
    // One-sided 95% Student bound, t quantile for 24 df; falls back to the
    // normal quantile elsewhere.
    const double t95 = pc.deltas.size() == 25 ? 1.7109 : 1.6449;
    const double se =
        sample_sd(pc.deltas) / std::sqrt(static_cast<double>(pc.deltas.size()));
    pc.upper95 = pc.mean_delta + t95 * se;
    pc.median_decision_ms = median_of(b.decision_ms);
    out.push_back(std::move(pc));
  }
  return out;
}

std::string metrics_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "policy,base_rule,fleet_size,metric,statistic,value\n";
  auto row = [&](const CellResult& c, const char* metric, const char* stat,
                 double v) {
    out << c.policy << ',' << c.base_rule << ',' << c.fleet_size << ','
        << metric << ',' << stat << ','
        << static_cast<long long>(std::floor(v + 0.5)) << '\n';
  };
  for (const auto& c : result.cells) {
    row(c, "response_time", "mean", c.pooled.response_time.mean);
    row(c, "response_time", "q90", c.pooled.response_time.q90);
    row(c, "response_time", "max", c.pooled.response_time.max);
    row(c, "allocation_cost", "mean", c.pooled.allocation_cost.mean);
    row(c, "allocation_cost", "q90", c.pooled.allocation_cost.q90);
    row(c, "allocation_cost", "max", c.pooled.allocation_cost.max);
  }
  return out.str();
}

std::string metrics_json(const ExperimentResult& result) {
  json cells = json::array();
  for (const auto& c : result.cells) {
    json jc{{"policy", c.policy},
            {"base_rule", c.base_rule},
            {"fleet_size", c.fleet_size},
            {"calls", c.pooled.calls},
            {"response_time",
             {{"mean", c.pooled.response_time.mean},
              {"q90", c.pooled.response_time.q90},
              {"max", c.pooled.response_time.max}}},
            {"allocation_cost",
             {{"mean", c.pooled.allocation_cost.mean},
              {"q90", c.pooled.allocation_cost.q90},
              {"max", c.pooled.allocation_cost.max}}},
            {"rep_mean_response", c.rep_mean_response},
            {"rep_mean_cost", c.rep_mean_cost}};
    if (!c.decision_ms.empty()) {
      jc["decision_ms"] = {{"median", median_of(c.decision_ms)},
                           {"count", c.decision_ms.size()}};
    }
    cells.push_back(jc);
  }
  return json{{"cells", cells}}.dump(2);
}

// ---------------------------------------------------------------------------
// Burst relocation demo

namespace {

constexpr double kBurstHour = 3600.0;

struct Zone {
  double x0, x1, y0, y1;
};
constexpr Zone kSouthZone{3.0, 7.0, 0.0, 2.0};
constexpr Zone kNorthZone{3.0, 7.0, 8.0, 10.0};

}  // namespace

BurstDemo make_burst_demo() {
  BurstDemo demo;
  Instance& ins = demo.instance;
  // One abstract unit per kilometer, cruising at 60 km/h.
  ins.geo = GeoMode::planar(1.0 / 60.0);
  ins.call_types = {{0, 1.0, "standard"}};
  ins.ambulance_types = {{0, 0, "unit"}};
  ins.quality = QualityMatrix(1, 1, 0.0);
  ins.facilities.bases = {{0, {5.0, 0.0}},    // south
                          {1, {5.0, 10.0}},   // north
                          {2, {0.0, 5.0}},    // west
                          {3, {10.0, 5.0}}};  // east
  for (int a = 0; a < 4; ++a) ins.fleet.push_back({a, 0, a});
  ins.validate();

  demo.service = {ServiceSpec{45.0 * 60.0, false, 0.0, false, 0.0}};

  // Per-base table, 2.5 h windows over a 30 h period: every even window
  // holds one full burst. A burst never exceeds its 4 calls, so the
  // bounded quantile uses 4 per burst window.
  IntensityTable t = IntensityTable::zeros(4, 12, 1, 2.5 * kBurstHour);
  t.enable_max_counts();
  for (int w : {0, 2, 4}) {
    t.rate(0, w, 0) = 4.0;
    t.max_count(0, w, 0) = 4.0;
  }
  for (int w : {6, 8, 10}) {
    t.rate(1, w, 0) = 4.0;
    t.max_count(1, w, 0) = 4.0;
  }
  demo.base_intensity = BaseIntensity::per_base(std::move(t));

  demo.bbr.delta = 3.5 * kBurstHour;  // sees past the 3 h lulls
  demo.bbr.alpha = 0.9;
  demo.bbr.use_max_counts = true;
  demo.horizon = 30.0 * kBurstHour;
  return demo;
}

std::vector<Call> sample_burst_calls(std::mt19937_64& rng) {
  std::vector<Call> out;
  auto burst = [&](double start_h, const Zone& z) {
    std::uniform_real_distribution<double> ut(start_h * kBurstHour,
                                              (start_h + 2.0) * kBurstHour);
    std::uniform_real_distribution<double> ux(z.x0, z.x1);
    std::uniform_real_distribution<double> uy(z.y0, z.y1);
    for (int k = 0; k < 4; ++k) {
      Call c;
      c.arrival_time = ut(rng);
      c.location = {ux(rng), uy(rng)};
      c.type = 0;
      c.time_on_scene = 45.0 * 60.0;
      out.push_back(c);
    }
  };
  for (double h : {0.0, 5.0, 10.0}) burst(h, kSouthZone);
  for (double h : {15.0, 20.0, 25.0}) burst(h, kNorthZone);
  std::stable_sort(out.begin(), out.end(), [](const Call& a, const Call& b) {
    return a.arrival_time < b.arrival_time;
  });
  for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

Instance make_synthetic_city(int fleet_size) {
  Instance ins;
  ins.geo = GeoMode::planar(1.0 / 60.0);  // km grid at 60 km/h
  ins.call_types = {{0, 4.0, "high, advanced preferred"},
                    {1, 1.0, "low, advanced preferred"},
                    {2, 4.0, "high, no preference"},
                    {3, 1.0, "low, no preference"}};
  ins.ambulance_types = {{0, 0, "BLS"}, {1, 1, "ALS"}};
  ins.quality = QualityMatrix(2, 4);
  const double bls[4] = {6000.0, 6000.0, 0.0, 0.0};
  const double als[4] = {0.0, 0.0, 1500.0, 1500.0};
  for (int c = 0; c < 4; ++c) {
    ins.quality.at(0, c) = bls[c];
    ins.quality.at(1, c) = als[c];
  }
  ins.facilities.bases = {{0, {0.0, 0.0}},
                          {1, {10.0, 0.0}},
                          {2, {10.0, 10.0}},
                          {3, {0.0, 10.0}},
                          {4, {5.0, 5.0}}};
  ins.facilities.hospitals = {{0, {0.0, 5.0}, std::nullopt, 0, {}},
                              {1, {5.0, 10.0}, std::nullopt, 0, {}}};
  ins.facilities.cleaning_bases = {{0, {5.0, 0.0}}, {1, {10.0, 5.0}}};
  for (int a = 0; a < fleet_size; ++a) ins.fleet.push_back({a, a % 2, a % 5});
  ins.validate();
  return ins;
}

GriddedIntensity make_city_intensity(double rate_per_cell_window) {
  GriddedIntensity gi;
  gi.grid = {0.0, 10.0, 0.0, 10.0, 5, 5, 1800.0, 3600.0};
  gi.table = IntensityTable::zeros(gi.grid.cells(), gi.grid.windows(), 4,
                                   gi.grid.window_length);
  for (auto& r : gi.table.rates) r = rate_per_cell_window;
  return gi;
}

ServiceModel make_city_service() {
  // One call type per ride chain: hospital+cleaning, hospital, cleaning,
  // scene only.
  return {ServiceSpec{300.0, true, 300.0, true, 300.0},
          ServiceSpec{300.0, true, 300.0, false, 0.0},
          ServiceSpec{300.0, false, 0.0, true, 300.0},
          ServiceSpec{300.0, false, 0.0, false, 0.0}};
}

std::vector<BurstDemoRow> run_burst_demo(
    int replications, uint64_t seed, const std::vector<std::string>& policies) {
  const BurstDemo demo = make_burst_demo();
  Simulator sim(demo.instance);

  std::vector<std::vector<Call>> calls(replications);
  for (int r = 0; r < replications; ++r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    calls[r] = sample_burst_calls(rng);
  }

  std::vector<BurstDemoRow> rows;
  for (const auto& kind : policies) {
    BurstDemoRow row;
    row.policy = kind;
    for (const std::string rule : {"hbr", "cbr", "bbr"}) {
      std::vector<std::vector<double>> per_rep(replications);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
      for (int r = 0; r < replications; ++r) {
        auto policy = make_policy(kind, demo.instance);
        auto reassigner = make_reassigner(rule, demo.instance,
                                          &demo.base_intensity, demo.bbr);
        SimResult res = sim.run(*policy, *reassigner, calls[r], demo.horizon);
        for (const auto& rec : res.state.records)
          per_rep[r].push_back(rec.waiting_on_scene);
      }
      std::vector<double> rt;
      for (const auto& v : per_rep) rt.insert(rt.end(), v.begin(), v.end());
      const double m = mean_of(rt);
      if (rule == "hbr") row.mean_hbr = m;
      if (rule == "cbr") row.mean_cbr = m;
      if (rule == "bbr") row.mean_bbr = m;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ambopt
