#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ambopt/heuristics.hpp"
#include "ambopt/reassign.hpp"
#include "ambopt/simulator.hpp"

namespace ambopt {

/// Spatial grid and periodic time discretization used for intensity
/// estimation and sampling.
struct GridSpec {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  int nx = 1, ny = 1;
  double window_length = 1800.0;
  double period = 1800.0;

  int cells() const { return nx * ny; }
  int windows() const {
    return static_cast<int>(std::lround(period / window_length));
  }
  /// Half-open boxes [lo, hi); points on the outer max edge are clamped
  /// into the last row/column.
  int cell_of(const Location& p) const;
  Location cell_centroid(int cell) const;
  void validate() const;
};

struct GriddedIntensity {
  GridSpec grid;
  IntensityTable table;
};

struct HistoryEvent {
  double t = 0.0;
  Location location;
  int type = 0;
};

/// Per-window maximum-likelihood rates: event count in (cell, window mod
/// period, type) divided by the number of periods the history touches
/// (assumed to start at t = 0). An empty history gives an all-zero table.
GriddedIntensity estimate_intensities(const std::vector<HistoryEvent>& history,
                                      const GridSpec& grid, int call_types);

/// Constant service durations attached to sampled calls, per call type.
struct ServiceSpec {
  double time_on_scene = 300.0;
  bool needs_hospital = false;
  double time_at_hospital = 0.0;
  bool needs_cleaning = false;
  double cleaning_time = 0.0;
};
using ServiceModel = std::vector<ServiceSpec>;  // indexed by call type

/// Independent Poisson draws per (cell, window overlap, type) on
/// (t0, t0+horizon]; arrival times uniform in the overlap, locations
/// uniform in the cell. Chronological output.
std::vector<Call> sample_scenario(const GriddedIntensity& intensity,
                                  const ServiceModel& service, double t0,
                                  double horizon, std::mt19937_64& rng);

struct RolloutConfig {
  int n_scenarios = 25;
  double horizon = 7200.0;
  std::string heuristic = "bm";
  /// Enumerate every admissible hospital instead of only the closest.
  bool combinatorial_hospitals = false;
  bool parallel = true;
};

/// Feasible first-stage decisions at an event: queueing plus one dispatch
/// per (available compatible ambulance x admissible hospital) for a call;
/// every base plus one dispatch per compatible queued call for a freed
/// ambulance. Dispatches are ordered least-advanced-first, then by id.
std::vector<Decision> enumerate_first_stage(const Simulator& sim,
                                            const WorldState& state,
                                            const Event& event,
                                            const RolloutConfig& config);

/// The calls a second-stage run must serve after first-stage decision x0:
/// carried-over queue (with restrictions applied), the new call when it
/// was queued, and the raw future draws.
std::vector<Call> augment_scenario(const std::vector<Call>& raw_future,
                                   const Decision& x0, const Event& event,
                                   const WorldState& state_before);

/// Immediate cost of a first-stage decision: zero for queueing and
/// staging, the allocation cost for a dispatch.
double first_stage_cost(const Simulator& sim, const WorldState& state,
                        const Decision& d);

struct CandidateValue {
  Decision decision;
  double immediate = 0.0;
  double mean_future = 0.0;
  bool feasible = false;
  double total() const { return immediate + mean_future; }
};

struct RolloutChoice {
  Decision decision;
  std::vector<CandidateValue> candidates;
};

/// Evaluates every candidate against the common scenario set (serially or
/// with OpenMP; both give identical values) and returns the first minimum
/// in enumeration order. Candidates whose second stage cannot serve some
/// call are disqualified; throws when none survives.
RolloutChoice rollout_decide(const Simulator& sim, const WorldState& state,
                             const Event& event, const RolloutConfig& config,
                             const std::vector<std::vector<Call>>& scenarios);

/// Serial reference for the candidate-evaluation kernel; the parallel path
/// must reproduce it exactly.
RolloutChoice rollout_decide_serial(const Simulator& sim,
                                    const WorldState& state, const Event& event,
                                    const RolloutConfig& config,
                                    const std::vector<std::vector<Call>>& scenarios);

/// Two-stage policy: at every event it samples N futures once, scores each
/// first-stage candidate with the base heuristic on every future, and
/// applies the argmin.
class RolloutPolicy final : public SelectionPolicy {
 public:
  using ScenarioSource =
      std::function<std::vector<std::vector<Call>>(double now)>;

  RolloutPolicy(const Instance& instance, RolloutConfig config,
                ScenarioSource source);

  /// Poisson-sampled futures drawn from `intensity`, seeded once.
  static ScenarioSource poisson_source(const GriddedIntensity& intensity,
                                       const ServiceModel& service,
                                       const RolloutConfig& config,
                                       uint64_t seed);

  std::string name() const override { return "rollout+" + config_.heuristic; }
  void begin(const WorldState&) override { decision_ms_.clear(); }
  void on_call(DecisionContext& ctx, int call_id) override;
  void on_completion(DecisionContext& ctx, int ambulance_id) override;
  std::unique_ptr<SelectionPolicy> clone() const override {
    return std::make_unique<RolloutPolicy>(*this);
  }

  const std::vector<double>& decision_wall_ms() const { return decision_ms_; }

 private:
  void decide_and_apply(DecisionContext& ctx, const Event& event);

  const Instance* instance_;
  RolloutConfig config_;
  ScenarioSource source_;
  std::vector<double> decision_ms_;
};

GriddedIntensity intensity_from_json_text(const std::string& text,
                                          const std::string& origin = "<memory>");
std::string intensity_to_json_text(const GriddedIntensity& gi);
GriddedIntensity load_intensity(const std::string& path);

/// History CSV with header `t,x,y,type` (or `t,lat,lon,type`, mapping
/// lat -> y and lon -> x).
std::vector<HistoryEvent> load_history_csv(const std::string& path);

}  // namespace ambopt
