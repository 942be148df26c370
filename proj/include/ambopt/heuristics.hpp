#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ambopt/simulator.hpp"

namespace ambopt {

/// Cost of committing `amb` to `call`, evaluated at `eval_time`: the wait
/// already accrued since the call arrived plus the forecast response time,
/// weighted by the call's priority, plus the quality-of-care entry.
double allocation_cost_at(const Instance& instance, const AmbulanceState& amb,
                          const Call& call, double eval_time);

/// Closest admissible hospital / closest cleaning base for a call, as a
/// ready-to-apply pair (-1 where not needed). The cleaning base is chosen
/// from the hospital when the patient is transported, from the scene
/// otherwise.
std::pair<int, int> default_facilities(const Instance& instance,
                                       const Call& call);

/// Dispatches the closest currently available compatible ambulance;
/// queues the call when none is available. Completions drain the queue in
/// arrival order.
class ClosestAvailablePolicy final : public SelectionPolicy {
 public:
  explicit ClosestAvailablePolicy(const Instance& instance)
      : instance_(&instance) {}
  std::string name() const override { return "ca"; }
  void on_call(DecisionContext& ctx, int call_id) override;
  void on_completion(DecisionContext& ctx, int ambulance_id) override;
  std::unique_ptr<SelectionPolicy> clone() const override {
    return std::make_unique<ClosestAvailablePolicy>(*this);
  }

 private:
  void try_serve_queue(DecisionContext& ctx);
  const Instance* instance_;
};

/// Minimizes the immediate allocation cost over the whole fleet, busy
/// ambulances included (their free point is forecast). Ties resolve to the
/// least advanced ambulance, then the lowest id. Never queues.
class BestMyopicPolicy final : public SelectionPolicy {
 public:
  explicit BestMyopicPolicy(const Instance& instance) : instance_(&instance) {}
  std::string name() const override { return "bm"; }
  bool forecasts_busy() const override { return true; }
  void on_call(DecisionContext& ctx, int call_id) override;
  void on_completion(DecisionContext&, int) override {}
  std::unique_ptr<SelectionPolicy> clone() const override {
    return std::make_unique<BestMyopicPolicy>(*this);
  }

  /// Fired just before each dispatch with the pre-dispatch world; used by
  /// the optimality audit.
  std::function<void(const WorldState&, const Call&, int chosen)> on_decide;

 private:
  const Instance* instance_;
};

/// Sequential allocation that may reserve a busy ambulance for a call
/// arriving before that ambulance frees, whenever some sooner call would
/// otherwise outbid it. Reservations are committed immediately and never
/// revoked.
class NonMyopicPolicy final : public SelectionPolicy {
 public:
  explicit NonMyopicPolicy(const Instance& instance) : instance_(&instance) {}
  std::string name() const override { return "nm"; }
  bool forecasts_busy() const override { return true; }
  void on_call(DecisionContext& ctx, int call_id) override;
  void on_completion(DecisionContext&, int) override {}
  std::unique_ptr<SelectionPolicy> clone() const override {
    return std::make_unique<NonMyopicPolicy>(*this);
  }

 private:
  const Instance* instance_;
};

/// Greedy queue policy: each event re-sorts the queue by penalized waiting
/// time and serves each call only with one of its globally best ambulances,
/// deferring the call whenever none of those is available right now.
/// The `closest_available` variant evaluates available ambulances only.
class GreedyPriorityPolicy final : public SelectionPolicy {
 public:
  GreedyPriorityPolicy(const Instance& instance, bool closest_available)
      : instance_(&instance), cap_(closest_available) {}
  std::string name() const override { return cap_ ? "ghcap1" : "ghp1"; }
  void on_call(DecisionContext& ctx, int call_id) override;
  void on_completion(DecisionContext& ctx, int ambulance_id) override;
  std::unique_ptr<SelectionPolicy> clone() const override {
    return std::make_unique<GreedyPriorityPolicy>(*this);
  }

 private:
  void process_queue(DecisionContext& ctx);
  const Instance* instance_;
  bool cap_;
};

/// Greedy queue policy that repeatedly treats the queued call with the
/// worst minimal allocation cost, refreshing the cost table after every
/// dispatch. The `closest_available` variant evaluates available
/// ambulances only.
class GreedyWorstFirstPolicy final : public SelectionPolicy {
 public:
  GreedyWorstFirstPolicy(const Instance& instance, bool closest_available)
      : instance_(&instance), cap_(closest_available) {}
  std::string name() const override { return cap_ ? "ghcap2" : "ghp2"; }
  void on_call(DecisionContext& ctx, int call_id) override;
  void on_completion(DecisionContext& ctx, int ambulance_id) override;
  std::unique_ptr<SelectionPolicy> clone() const override {
    return std::make_unique<GreedyWorstFirstPolicy>(*this);
  }

  /// Fired at each pick with (picked call id, its minimal allocation cost,
  /// current cost table); used by the refresh-vs-recompute audit.
  std::function<void(int call_id, double min_alloc,
                     const std::vector<double>& min_allocs)>
      on_pick;

 private:
  void process_queue(DecisionContext& ctx);
  const Instance* instance_;
  bool cap_;
};

std::unique_ptr<SelectionPolicy> make_policy(const std::string& kind,
                                             const Instance& instance);

bool is_policy_kind(const std::string& kind);

}  // namespace ambopt
