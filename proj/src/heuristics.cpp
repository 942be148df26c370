#include "ambopt/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ambopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool available_now(const AmbulanceState& amb, double now) {
  return availability(amb, now) != Availability::Busy;
}

/// Among the ids attaining the minimum cost, the least advanced ambulance,
/// then the lowest id.
int least_advanced(const Instance& ins, const std::vector<AmbulanceState>& fleet,
                   const std::vector<int>& ids) {
  int best = ids.front();
  for (int id : ids) {
    const int r = ins.rank(fleet[id].type);
    const int br = ins.rank(fleet[best].type);
    if (r < br || (r == br && id < best)) best = id;
  }
  return best;
}

}  // namespace

double allocation_cost_at(const Instance& instance, const AmbulanceState& amb,
                          const Call& call, double eval_time) {
  const double waited = eval_time - call.arrival_time;
  const double t =
      waited + response_time_if_assigned(amb, call, eval_time, instance.geo);
  return cost_allocation(instance.quality, instance.theta(call.type), amb.type,
                         call.type, t);
}

std::pair<int, int> default_facilities(const Instance& instance,
                                       const Call& call) {
  int hospital = -1;
  int cleaning = -1;
  if (call.needs_hospital) {
    hospital = instance.closest_hospital(call.location, call.type);
    if (hospital < 0)
      throw SimulationError("no hospital admits call type " +
                            std::to_string(call.type));
  }
  if (call.needs_cleaning) {
    const Location from = call.needs_hospital
                              ? instance.facilities.hospitals[hospital].location
                              : call.location;
    cleaning = instance.closest_cleaning_base(from);
    if (cleaning < 0) throw SimulationError("no cleaning base configured");
  }
  return {hospital, cleaning};
}

// ---------------------------------------------------------------------------
// Closest Available

void ClosestAvailablePolicy::on_call(DecisionContext& ctx, int call_id) {
  WorldState& s = ctx.state();
  const Call& call = s.calls[call_id];
  const double now = ctx.now();
  int best = -1;
  double best_t = kInf;
  for (int id : compatible_ambulances(call, s.fleet, instance_->quality)) {
    const AmbulanceState& amb = s.fleet[id];
    if (!available_now(amb, now)) continue;
    const double t = travel_time_ms(available_position(amb, now, instance_->geo),
                                    call.location, now, instance_->geo);
    if (t < best_t) {
      best_t = t;
      best = id;
    }
  }
  if (best < 0) {
    ctx.apply(Decision::enqueue(call_id));
    return;
  }
  const auto [h, cb] = default_facilities(*instance_, call);
  ctx.apply(Decision::dispatch(best, call_id, h, cb));
}

void ClosestAvailablePolicy::on_completion(DecisionContext& ctx, int) {
  try_serve_queue(ctx);
}

void ClosestAvailablePolicy::try_serve_queue(DecisionContext& ctx) {
  WorldState& s = ctx.state();
  const double now = ctx.now();
  const std::vector<int> waiting = s.queue;  // arrival order
  for (int call_id : waiting) {
    const Call& call = s.calls[call_id];
    int best = -1;
    double best_t = kInf;
    for (int id : compatible_ambulances(call, s.fleet, instance_->quality)) {
      const AmbulanceState& amb = s.fleet[id];
      if (!available_now(amb, now)) continue;
      const double t =
          travel_time_ms(available_position(amb, now, instance_->geo),
                         call.location, now, instance_->geo);
      if (t < best_t) {
        best_t = t;
        best = id;
      }
    }
    if (best >= 0) {
      const auto [h, cb] = default_facilities(*instance_, call);
      ctx.apply(Decision::dispatch(best, call_id, h, cb));
    }
  }
}

// ---------------------------------------------------------------------------
// Best Myopic

void BestMyopicPolicy::on_call(DecisionContext& ctx, int call_id) {
  WorldState& s = ctx.state();
  const Call& call = s.calls[call_id];
  const double now = ctx.now();
  const std::vector<int> compat =
      compatible_ambulances(call, s.fleet, instance_->quality);
  if (compat.empty())
    throw SimulationError("bm: no compatible ambulance for call " +
                          std::to_string(call_id));
  double best_cost = kInf;
  std::vector<int> argmin;
  for (int id : compat) {
    const double c = allocation_cost_at(*instance_, s.fleet[id], call, now);
    if (c < best_cost) {
      best_cost = c;
      argmin.assign(1, id);
    } else if (c == best_cost) {
      argmin.push_back(id);
    }
  }
  const int chosen = least_advanced(*instance_, s.fleet, argmin);
  if (on_decide) on_decide(s, call, chosen);
  const auto [h, cb] = default_facilities(*instance_, call);
  ctx.apply(Decision::dispatch(chosen, call_id, h, cb));
}

// ---------------------------------------------------------------------------
// NonMyopic

void NonMyopicPolicy::on_call(DecisionContext& ctx, int call_id) {
  WorldState& s = ctx.state();
  if (s.dispatched[call_id]) return;  // reserved at an earlier call
  const Call& call = s.calls[call_id];

  // Costs for a call are always evaluated at that call's own arrival time,
  // against the fleet's currently committed rides.
  auto best_set = [&](const Call& c) {
    std::vector<int> argmin;
    double best = kInf;
    for (int id : compatible_ambulances(c, s.fleet, instance_->quality)) {
      const double v =
          allocation_cost_at(*instance_, s.fleet[id], c, c.arrival_time);
      if (v < best) {
        best = v;
        argmin.assign(1, id);
      } else if (v == best) {
        argmin.push_back(id);
      }
    }
    std::sort(argmin.begin(), argmin.end(), [&](int a, int b) {
      const int ra = instance_->rank(s.fleet[a].type);
      const int rb = instance_->rank(s.fleet[b].type);
      return ra < rb || (ra == rb && a < b);
    });
    return std::pair<std::vector<int>, double>{std::move(argmin), best};
  };

  while (!s.dispatched[call_id]) {
    auto [candidates, cost_i] = best_set(call);
    if (candidates.empty())
      throw SimulationError("nm: no compatible ambulance for call " +
                            std::to_string(call_id));

    // An available best ambulance serves the call outright.
    int avail = -1;
    for (int id : candidates) {
      if (available_now(s.fleet[id], ctx.now())) {
        avail = id;
        break;
      }
    }
    if (avail >= 0) {
      const auto [h, cb] = default_facilities(*instance_, call);
      ctx.apply(Decision::dispatch(avail, call_id, h, cb));
      return;
    }

    // All best ambulances are busy. An ambulance is good when no upcoming
    // call it is best for outbids the current one; otherwise it is reserved
    // for the worst such call and the scan moves on.
    for (int j : candidates) {
      const AmbulanceState& amb = s.fleet[j];
      int worst_call = -1;
      double worst_cost = -kInf;
      bool good = true;
      for (int k = call_id + 1; k < static_cast<int>(s.calls.size()); ++k) {
        if (s.dispatched[k]) continue;
        const Call& future = s.calls[k];
        if (future.arrival_time > amb.free_time) continue;
        auto [future_best, future_cost] = best_set(future);
        if (std::find(future_best.begin(), future_best.end(), j) ==
            future_best.end())
          continue;
        if (future_cost > cost_i) good = false;
        if (future_cost > worst_cost) {
          worst_cost = future_cost;
          worst_call = k;
        }
      }
      if (good) {
        const auto [h, cb] = default_facilities(*instance_, call);
        ctx.apply(Decision::dispatch(j, call_id, h, cb));
        return;
      }
      const Call& reserved = s.calls[worst_call];
      const auto [h, cb] = default_facilities(*instance_, reserved);
      ctx.apply(Decision::dispatch(j, worst_call, h, cb));
    }
    // Every best ambulance was reserved elsewhere; re-enter with the
    // updated rides.
  }
}

// ---------------------------------------------------------------------------
// GHP1 / GHCAP1

void GreedyPriorityPolicy::on_call(DecisionContext& ctx, int call_id) {
  ctx.apply(Decision::enqueue(call_id));
  process_queue(ctx);
}

void GreedyPriorityPolicy::on_completion(DecisionContext& ctx, int) {
  process_queue(ctx);
}

void GreedyPriorityPolicy::process_queue(DecisionContext& ctx) {
  WorldState& s = ctx.state();
  const double now = ctx.now();

  // Worst penalized wait first.
  std::vector<int> order = s.queue;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa =
        penalization(now - s.calls[a].arrival_time, instance_->theta(s.calls[a].type));
    const double pb =
        penalization(now - s.calls[b].arrival_time, instance_->theta(s.calls[b].type));
    return pa > pb || (pa == pb && a < b);
  });

  for (int call_id : order) {
    const Call& call = s.calls[call_id];
    double best_cost = kInf;
    std::vector<int> argmin;
    for (int id : compatible_ambulances(call, s.fleet, instance_->quality)) {
      if (cap_ && !available_now(s.fleet[id], now)) continue;
      const double c = allocation_cost_at(*instance_, s.fleet[id], call, now);
      if (c < best_cost) {
        best_cost = c;
        argmin.assign(1, id);
      } else if (c == best_cost) {
        argmin.push_back(id);
      }
    }
    std::vector<int> available_best;
    for (int id : argmin) {
      if (available_now(s.fleet[id], now)) available_best.push_back(id);
    }
    if (available_best.empty()) continue;  // deferred to a later event
    const int chosen = least_advanced(*instance_, s.fleet, available_best);
    const auto [h, cb] = default_facilities(*instance_, call);
    ctx.apply(Decision::dispatch(chosen, call_id, h, cb));
  }
}

// ---------------------------------------------------------------------------
// GHP2 / GHCAP2

void GreedyWorstFirstPolicy::on_call(DecisionContext& ctx, int call_id) {
  ctx.apply(Decision::enqueue(call_id));
  process_queue(ctx);
}

void GreedyWorstFirstPolicy::on_completion(DecisionContext& ctx, int) {
  process_queue(ctx);
}

void GreedyWorstFirstPolicy::process_queue(DecisionContext& ctx) {
  WorldState& s = ctx.state();
  const double now = ctx.now();
  const std::vector<int> ids = s.queue;
  const int n = static_cast<int>(ids.size());
  const int n_amb = static_cast<int>(s.fleet.size());

  // costs[k][j]: committing ambulance j to queued call k right now;
  // infinity for incompatible (and, in the closest-available variant,
  // busy) ambulances.
  std::vector<std::vector<double>> costs(n, std::vector<double>(n_amb, kInf));
  auto cost_row = [&](int k, int j) {
    const Call& call = s.calls[ids[k]];
    const AmbulanceState& amb = s.fleet[j];
    if (!instance_->quality.compatible(amb.type, call.type)) return kInf;
    if (call.restricted_to && call.restricted_to->count(j) == 0) return kInf;
    if (cap_ && !available_now(amb, now)) return kInf;
    return allocation_cost_at(*instance_, amb, call, now);
  };

  std::vector<double> min_alloc(n, kInf);
  std::vector<std::vector<int>> best_ambs(n);
  auto refresh = [&](int k) {
    min_alloc[k] = kInf;
    best_ambs[k].clear();
    for (int j = 0; j < n_amb; ++j) {
      if (costs[k][j] < min_alloc[k]) {
        min_alloc[k] = costs[k][j];
        best_ambs[k].assign(1, j);
      } else if (std::isfinite(costs[k][j]) && costs[k][j] == min_alloc[k]) {
        best_ambs[k].push_back(j);
      }
    }
    std::sort(best_ambs[k].begin(), best_ambs[k].end(), [&](int a, int b) {
      const int ra = instance_->rank(s.fleet[a].type);
      const int rb = instance_->rank(s.fleet[b].type);
      return ra < rb || (ra == rb && a < b);
    });
  };
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n_amb; ++j) costs[k][j] = cost_row(k, j);
    refresh(k);
  }

  auto has_available_best = [&](int k) {
    return std::any_of(best_ambs[k].begin(), best_ambs[k].end(), [&](int j) {
      return available_now(s.fleet[j], now);
    });
  };

  std::vector<char> treated(n, 0);
  for (int round = 0; round < n; ++round) {
    // Worst minimal cost first; among ties prefer a call that can actually
    // be served now, then the lowest call id.
    int current = -1;
    for (int k = 0; k < n; ++k) {
      if (treated[k]) continue;
      if (current < 0 || min_alloc[k] > min_alloc[current] ||
          (min_alloc[k] == min_alloc[current] &&
           has_available_best(k) && !has_available_best(current))) {
        current = k;
      }
    }
    treated[current] = 1;
    if (on_pick) on_pick(ids[current], min_alloc[current], min_alloc);
    int chosen = -1;
    for (int j : best_ambs[current]) {
      if (available_now(s.fleet[j], now)) {
        chosen = j;
        break;
      }
    }
    if (chosen < 0) continue;  // all best ambulances busy: deferred

    const Call& call = s.calls[ids[current]];
    const auto [h, cb] = default_facilities(*instance_, call);
    ctx.apply(Decision::dispatch(chosen, ids[current], h, cb));

    // The dispatched ambulance is in service now; refresh the untreated
    // rows that had it among their best choices.
    for (int k = 0; k < n; ++k) {
      if (treated[k]) continue;
      if (std::find(best_ambs[k].begin(), best_ambs[k].end(), chosen) ==
          best_ambs[k].end())
        continue;
      costs[k][chosen] = cost_row(k, chosen);
      refresh(k);
    }
  }
}

// ---------------------------------------------------------------------------

std::unique_ptr<SelectionPolicy> make_policy(const std::string& kind,
                                             const Instance& instance) {
  if (kind == "ca") return std::make_unique<ClosestAvailablePolicy>(instance);
  if (kind == "bm") return std::make_unique<BestMyopicPolicy>(instance);
  if (kind == "nm") return std::make_unique<NonMyopicPolicy>(instance);
  if (kind == "ghp1")
    return std::make_unique<GreedyPriorityPolicy>(instance, false);
  if (kind == "ghcap1")
    return std::make_unique<GreedyPriorityPolicy>(instance, true);
  if (kind == "ghp2")
    return std::make_unique<GreedyWorstFirstPolicy>(instance, false);
  if (kind == "ghcap2")
    return std::make_unique<GreedyWorstFirstPolicy>(instance, true);
  throw ConfigError("unknown policy '" + kind + "'");
}

bool is_policy_kind(const std::string& kind) {
  static const char* kinds[] = {"ca",     "bm",   "nm",    "ghp1",
                                "ghcap1", "ghp2", "ghcap2"};
  return std::any_of(std::begin(kinds), std::end(kinds),
                     [&](const char* k) { return kind == k; });
}

}  // namespace ambopt
