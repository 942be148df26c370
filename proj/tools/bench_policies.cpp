// Times the rollout candidate-evaluation kernel, serial vs OpenMP, plus a
// replicated experiment sweep in both execution modes, and checks that the
// parallel paths reproduce the serial reference bit for bit.

#include <chrono>
#include <iostream>

#include "ambopt/experiment.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace ambopt;
using clock_type = std::chrono::steady_clock;

namespace {

double ms_since(clock_type::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0)
      .count();
}

ExperimentConfig bench_config(bool parallel) {
  ExperimentConfig cfg;
  cfg.instance = make_synthetic_city(12);
  cfg.intensity = make_city_intensity(0.06);
  cfg.has_intensity = true;
  cfg.service = make_city_service();
  cfg.policies = {"ghp1"};
  cfg.base_rules = {"cbr"};
  cfg.replications = 16;
  cfg.seed = 7;
  cfg.horizon = 7200.0;
  cfg.parallel_replications = parallel;
  return cfg;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::cout << "OpenMP threads: " << omp_get_max_threads() << "\n";
#else
  std::cout << "Built without OpenMP; both modes run serially.\n";
#endif

  // Rollout decision kernel on a congested snapshot.
  const Instance city = make_synthetic_city(20);
  const GriddedIntensity intensity = make_city_intensity(0.08);
  const ServiceModel service = make_city_service();
  Simulator sim(city);

  RolloutConfig rc;
  rc.n_scenarios = 25;
  rc.horizon = 7200.0;
  rc.heuristic = "bm";

  std::mt19937_64 rng(123);
  const std::vector<Call> calls =
      sample_scenario(intensity, service, 0.0, 7200.0, rng);
  WorldState state = sim.make_state(calls);
  // Put the fleet under load: dispatch the first dozen calls myopically,
  // then probe the rollout on the next arrival.
  auto warm = make_policy("bm", city);
  DecisionContext ctx(sim, state, true);
  const int probe_id = std::min<int>(12, static_cast<int>(state.calls.size()) - 1);
  for (int i = 0; i < probe_id; ++i) {
    state.clock = state.calls[i].arrival_time;
    state.next_call = i + 1;
    warm->on_call(ctx, i);
  }
  state.clock = state.calls[probe_id].arrival_time;
  state.next_call = probe_id + 1;
  const Event probe_event{Event::Kind::CallArrival, state.clock, probe_id, -1};

  std::vector<std::vector<Call>> futures;
  for (int i = 0; i < rc.n_scenarios; ++i)
    futures.push_back(
        sample_scenario(intensity, service, state.clock, rc.horizon, rng));

  auto t0 = clock_type::now();
  const RolloutChoice serial =
      rollout_decide_serial(sim, state, probe_event, rc, futures);
  const double serial_ms = ms_since(t0);

  rc.parallel = true;
  t0 = clock_type::now();
  const RolloutChoice parallel =
      rollout_decide(sim, state, probe_event, rc, futures);
  const double parallel_ms = ms_since(t0);

  bool identical = serial.candidates.size() == parallel.candidates.size();
  for (size_t i = 0; identical && i < serial.candidates.size(); ++i) {
    identical = serial.candidates[i].total() == parallel.candidates[i].total() &&
                serial.candidates[i].feasible == parallel.candidates[i].feasible;
  }

  std::cout << "rollout decision (" << serial.candidates.size()
            << " candidates x " << rc.n_scenarios << " scenarios)\n"
            << "  serial   " << serial_ms << " ms\n"
            << "  openmp   " << parallel_ms << " ms  (speedup "
            << serial_ms / parallel_ms << "x)\n"
            << "  identical results: " << (identical ? "yes" : "NO") << "\n";

  // Replicated experiment sweep.
  t0 = clock_type::now();
  const ExperimentResult r_serial = run_experiment(bench_config(false));
  const double sweep_serial_ms = ms_since(t0);
  t0 = clock_type::now();
  const ExperimentResult r_parallel = run_experiment(bench_config(true));
  const double sweep_parallel_ms = ms_since(t0);

  const bool sweep_identical =
      metrics_csv(r_serial) == metrics_csv(r_parallel);
  std::cout << "replication sweep (16 runs)\n"
            << "  serial   " << sweep_serial_ms << " ms\n"
            << "  openmp   " << sweep_parallel_ms << " ms  (speedup "
            << sweep_serial_ms / sweep_parallel_ms << "x)\n"
            << "  identical results: " << (sweep_identical ? "yes" : "NO")
            << "\n";
  return identical && sweep_identical ? 0 : 1;
}
