#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ambopt/scenario.hpp"

namespace ambopt {

/// Deterministic per-stream seed derivation from the single config seed
/// (splitmix64 of seed + stream * golden ratio).
uint64_t derive_seed(uint64_t root, uint64_t stream);

struct ExperimentConfig {
  Instance instance;
  std::vector<std::string> policies{"bm"};
  std::vector<std::string> base_rules{"cbr"};
  std::vector<int> fleet_sizes;  // empty = whole roster
  int replications = 1;
  uint64_t seed = 1;
  double horizon = 7200.0;

  /// Fixed scenario file; empty = sample replications from the intensity.
  std::string calls_file;
  bool has_intensity = false;
  GriddedIntensity intensity;
  ServiceModel service;

  bool rollout = false;
  RolloutConfig rollout_config;
  BestBaseConfig bbr;

  std::string out_dir = ".";
  bool parallel_replications = true;
  bool write_trips = false;

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_json_text(const std::string& text,
                                                  const std::string& origin);
/// AMBOPT_SEED, AMBOPT_REPLICATIONS, AMBOPT_OUT_DIR, AMBOPT_PARALLEL.
void apply_env_overrides(ExperimentConfig& cfg);

/// One (policy, base rule, fleet size) combination, pooled over
/// replications plus per-replication means for paired statistics.
struct CellResult {
  std::string policy;
  std::string base_rule;
  int fleet_size = 0;
  Metrics pooled;
  std::vector<double> rep_mean_response;
  std::vector<double> rep_mean_cost;
  std::vector<double> decision_ms;  // rollout decisions, when applicable
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  /// Replication call lists actually used (shared across cells).
  std::vector<std::vector<Call>> replication_calls;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Paired comparison on common replications: plain heuristic vs the same
/// heuristic inside the rollout.
struct PairedComparison {
  std::string policy;
  int fleet_size = 0;
  double mean_cost_plain = 0.0;
  double mean_cost_rollout = 0.0;
  /// Per-replication deltas rollout - plain of the mean allocation cost.
  std::vector<double> deltas;
  double mean_delta = 0.0;
  /// One-sided 95% upper confidence bound on the mean delta.
  double upper95 = 0.0;
  double median_decision_ms = 0.0;
};

std::vector<PairedComparison> run_rollout_comparison(const ExperimentConfig& cfg);

std::string metrics_csv(const ExperimentResult& result);
std::string metrics_json(const ExperimentResult& result);

/// Synthetic relocation stress instance: four corner-of-region bases, one
/// ambulance each, and 4-call bursts alternating between a south and a
/// north zone (2 h on, 3 h off over 30 h, 45 min service). The intensity
/// table carries per-window maximum counts for the bounded quantile mode.
struct BurstDemo {
  Instance instance;
  BaseIntensity base_intensity;
  ServiceModel service;
  double horizon = 30.0 * 3600.0;
  BestBaseConfig bbr;
};

BurstDemo make_burst_demo();
std::vector<Call> sample_burst_calls(std::mt19937_64& rng);

struct BurstDemoRow {
  std::string policy;
  double mean_hbr = 0.0;
  double mean_cbr = 0.0;
  double mean_bbr = 0.0;
};

std::vector<BurstDemoRow> run_burst_demo(int replications, uint64_t seed,
                                         const std::vector<std::string>& policies);

double mean_of(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);
double median_of(std::vector<double> v);

/// Synthetic planar city: 10x10 km square, five bases, two hospitals, two
/// cleaning stations, the two-type fleet (basic/advanced) and four call
/// types covering all four ride chains. Used by stress runs and the
/// benchmark.
Instance make_synthetic_city(int fleet_size);
/// Spatially uniform periodic intensity over the city;
/// `rate_per_cell_window` is the expected count per (cell, 30 min window,
/// call type).
GriddedIntensity make_city_intensity(double rate_per_cell_window);
ServiceModel make_city_service();

}  // namespace ambopt
