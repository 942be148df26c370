#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ambopt/instance.hpp"
#include "ambopt/model.hpp"

namespace ambopt {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// First-stage action taken at an event.
struct Decision {
  enum class Kind { Dispatch, Enqueue, ToBase };

  Kind kind = Kind::Enqueue;
  int ambulance = -1;
  int call = -1;
  int hospital = -1;       // set iff the call needs a hospital
  int cleaning_base = -1;  // set iff the call needs cleaning
  int base = -1;

  static Decision dispatch(int ambulance, int call, int hospital = -1,
                           int cleaning_base = -1) {
    Decision d;
    d.kind = Kind::Dispatch;
    d.ambulance = ambulance;
    d.call = call;
    d.hospital = hospital;
    d.cleaning_base = cleaning_base;
    return d;
  }
  static Decision enqueue(int call) {
    Decision d;
    d.kind = Kind::Enqueue;
    d.call = call;
    return d;
  }
  static Decision to_base(int ambulance, int base) {
    Decision d;
    d.kind = Kind::ToBase;
    d.ambulance = ambulance;
    d.base = base;
    return d;
  }
};

struct Event {
  enum class Kind { CallArrival, ServiceCompletion };
  Kind kind = Kind::CallArrival;
  double time = 0.0;
  int call = -1;
  int ambulance = -1;
};

/// Mutable world: fleet states, the scenario's calls, the waiting queue,
/// facilities with live occupancy, and everything recorded so far.
/// Value-semantic on purpose: rollout clones it freely.
struct WorldState {
  double clock = 0.0;
  std::vector<AmbulanceState> fleet;
  std::vector<Call> calls;
  std::vector<int> queue;
  std::vector<char> dispatched;
  std::vector<char> completion_pending;
  Facilities facilities;
  std::vector<CallRecord> records;
  int next_call = 0;

  bool has_pending_arrival() const {
    return next_call < static_cast<int>(calls.size());
  }
};

struct Aggregate {
  double mean = 0.0;
  double q90 = 0.0;
  double max = 0.0;
};

/// mean, the 0.9 quantile (smallest sample with empirical CDF >= 0.9),
/// and the maximum. Throws on an empty sample.
Aggregate summarize(std::span<const double> values);

struct Metrics {
  Aggregate response_time;
  Aggregate allocation_cost;
  int calls = 0;
};

Metrics metrics_from_records(std::span<const CallRecord> records);

class Simulator;

/// Handed to policies at each event; decisions applied through it take
/// effect immediately so the policy sees updated ambulance states.
class DecisionContext {
 public:
  DecisionContext(const Simulator& sim, WorldState& state, bool allow_busy)
      : sim_(sim), state_(state), allow_busy_(allow_busy) {}

  const Instance& instance() const;
  WorldState& state() { return state_; }
  double now() const { return state_.clock; }
  void apply(const Decision& d);

 private:
  const Simulator& sim_;
  WorldState& state_;
  bool allow_busy_;
};

class SelectionPolicy {
 public:
  virtual ~SelectionPolicy() = default;
  virtual std::string name() const = 0;
  /// True when the policy may commit an ambulance that is still in
  /// service (it forecasts the free point instead of queueing).
  virtual bool forecasts_busy() const { return false; }
  virtual void begin(const WorldState&) {}
  virtual void on_call(DecisionContext& ctx, int call_id) = 0;
  virtual void on_completion(DecisionContext& ctx, int ambulance_id) = 0;
  virtual std::unique_ptr<SelectionPolicy> clone() const = 0;
};

/// Chooses the staging base for an ambulance that finished service and was
/// not sent to a queued call.
class Reassigner {
 public:
  virtual ~Reassigner() = default;
  virtual std::string name() const = 0;
  virtual void begin(const WorldState&) {}
  virtual int choose_base(const WorldState& state, int ambulance_id) = 0;
  virtual std::unique_ptr<Reassigner> clone() const = 0;
};

struct SimResult {
  WorldState state;
  Metrics metrics;
};

class Simulator {
 public:
  explicit Simulator(const Instance& instance) : instance_(instance) {}

  const Instance& instance() const { return instance_; }

  /// Fresh world with the fleet at rest and the calls sorted and
  /// re-indexed 0..n-1.
  WorldState make_state(std::vector<Call> calls) const;

  /// Earliest of the next call arrival and the next service completion;
  /// arrivals win ties, simultaneous completions go to the lowest id.
  static Event next_event(const WorldState& state);

  /// Materializes a decision: builds the trip chain, updates the state
  /// vector, and writes the call record for dispatches.
  void apply_decision(WorldState& state, const Decision& d,
                      bool allow_busy_dispatch = true) const;

  /// Runs every event through the policy until all calls are served and
  /// all service chains have completed. `horizon` only validates that the
  /// call list fits; the loop always drains to completion.
  SimResult run(SelectionPolicy& policy, Reassigner& reassigner,
                std::vector<Call> calls,
                double horizon = std::numeric_limits<double>::infinity()) const;

  /// Event loop over an existing world (used for rollout continuations).
  void run_loop(WorldState& state, SelectionPolicy& policy,
                Reassigner& reassigner) const;

 private:
  const Instance& instance_;
};

/// One JSON object per trip, ordered by (ambulance, depart).
std::string trips_to_jsonl(const WorldState& state);

}  // namespace ambopt
