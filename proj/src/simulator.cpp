#include "ambopt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace ambopt {

namespace {

void append_idle_filler(AmbulanceState& amb, double until) {
  // Trips must tile the timeline; pad the stationary stretch.
  double from;
  Location loc;
  if (!amb.trips.empty()) {
    from = amb.trips.back().arrive;
    loc = amb.trips.back().destination;
  } else if (amb.awaiting_reassignment) {
    from = amb.free_time;
    loc = amb.free_location;
  } else {
    from = amb.base_time;
    loc = amb.base_location;
  }
  if (until > from) {
    amb.trips.push_back({TripKind::AtBase, loc, loc, from, until, -1});
  }
}

}  // namespace

const Instance& DecisionContext::instance() const { return sim_.instance(); }

void DecisionContext::apply(const Decision& d) {
  sim_.apply_decision(state_, d, allow_busy_);
}

Aggregate summarize(std::span<const double> values) {
  if (values.empty()) throw SimulationError("summarize: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const size_t n = sorted.size();
  const size_t idx =
      static_cast<size_t>(std::ceil(0.9 * static_cast<double>(n))) - 1;
  return {sum / static_cast<double>(n), sorted[idx], sorted.back()};
}

Metrics metrics_from_records(std::span<const CallRecord> records) {
  Metrics m;
  m.calls = static_cast<int>(records.size());
  if (records.empty()) return m;
  std::vector<double> rt, cost;
  rt.reserve(records.size());
  cost.reserve(records.size());
  for (const auto& r : records) {
    rt.push_back(r.waiting_on_scene);
    cost.push_back(r.allocation_cost);
  }
  m.response_time = summarize(rt);
  m.allocation_cost = summarize(cost);
  return m;
}

WorldState Simulator::make_state(std::vector<Call> calls) const {
  std::sort(calls.begin(), calls.end(), [](const Call& a, const Call& b) {
    return a.arrival_time < b.arrival_time ||
           (a.arrival_time == b.arrival_time && a.id < b.id);
  });
  for (size_t i = 0; i < calls.size(); ++i) calls[i].id = static_cast<int>(i);

  WorldState s;
  s.fleet = instance_.initial_fleet();
  s.calls = std::move(calls);
  s.dispatched.assign(s.calls.size(), 0);
  s.completion_pending.assign(s.fleet.size(), 0);
  s.facilities = instance_.facilities;
  return s;
}

Event Simulator::next_event(const WorldState& state) {
  Event best;
  bool have = false;
  if (state.has_pending_arrival()) {
    const Call& c = state.calls[state.next_call];
    best = {Event::Kind::CallArrival, c.arrival_time, c.id, -1};
    have = true;
  }
  for (const auto& amb : state.fleet) {
    if (!state.completion_pending[amb.id]) continue;
    // Arrivals win ties; among completions the lowest id goes first.
    if (!have || amb.free_time < best.time) {
      best = {Event::Kind::ServiceCompletion, amb.free_time, -1, amb.id};
      have = true;
    }
  }
  if (!have) throw SimulationError("next_event: nothing pending");
  return best;
}

void Simulator::apply_decision(WorldState& state, const Decision& d,
                               bool allow_busy_dispatch) const {
  const double now = state.clock;
  const GeoMode& geo = instance_.geo;

  switch (d.kind) {
    case Decision::Kind::Enqueue: {
      if (d.call < 0 || d.call >= static_cast<int>(state.calls.size()))
        throw SimulationError("enqueue: unknown call");
      if (state.dispatched[d.call])
        throw SimulationError("enqueue: call already served");
      state.queue.push_back(d.call);
      return;
    }

    case Decision::Kind::ToBase: {
      AmbulanceState& amb = state.fleet.at(d.ambulance);
      if (amb.busy(now)) throw SimulationError("to-base: ambulance in service");
      const Base& base = state.facilities.bases.at(d.base);
      const Location from = available_position(amb, now, geo);
      if (!amb.awaiting_reassignment && !amb.trips.empty() &&
          amb.trips.back().kind == TripKind::ToBase &&
          amb.trips.back().arrive > now) {
        // Redirected mid-leg: cut the old base trip at the current point.
        amb.trips.back().arrive = now;
        amb.trips.back().destination = from;
      } else {
        append_idle_filler(amb, now);
      }
      const double arrive = now + travel_time_ms(from, base.location, now, geo);
      amb.trips.push_back(
          {TripKind::ToBase, from, base.location, now, arrive, -1});
      amb.base_location = base.location;
      amb.base_time = arrive;
      amb.awaiting_reassignment = false;
      return;
    }

    case Decision::Kind::Dispatch:
      break;
  }

  // Dispatch.
  if (d.call < 0 || d.call >= static_cast<int>(state.calls.size()))
    throw SimulationError("dispatch: unknown call");
  const Call& call = state.calls[d.call];
  if (state.dispatched[d.call])
    throw SimulationError("dispatch: call already served");
  AmbulanceState& amb = state.fleet.at(d.ambulance);
  if (!instance_.quality.compatible(amb.type, call.type))
    throw SimulationError("dispatch: incompatible ambulance type");
  if (call.restricted_to && call.restricted_to->count(amb.id) == 0)
    throw SimulationError("dispatch: ambulance excluded by restriction");
  if (call.needs_hospital && d.hospital < 0)
    throw SimulationError("dispatch: hospital required");
  if (!call.needs_hospital && d.hospital >= 0)
    throw SimulationError("dispatch: hospital given for a no-transport call");
  if (call.needs_cleaning && d.cleaning_base < 0)
    throw SimulationError("dispatch: cleaning base required");

  double depart;
  Location from;
  switch (availability(amb, now)) {
    case Availability::Busy:
      if (!allow_busy_dispatch)
        throw SimulationError(
            "dispatch: ambulance in service and policy does not forecast");
      depart = amb.free_time;
      from = amb.free_location;
      break;
    case Availability::EnRouteToBase:
      from = available_position(amb, now, geo);
      depart = now;
      if (!amb.awaiting_reassignment && !amb.trips.empty() &&
          amb.trips.back().kind == TripKind::ToBase &&
          amb.trips.back().arrive > now) {
        amb.trips.back().arrive = now;
        amb.trips.back().destination = from;
      } else if (amb.awaiting_reassignment) {
        append_idle_filler(amb, now);  // stood at the free point until now
      }
      break;
    case Availability::AtBase:
      from = amb.base_location;
      depart = now;
      append_idle_filler(amb, now);
      break;
  }

  const double scene_arrive =
      depart + travel_time_ms(from, call.location, depart, geo);
  amb.trips.push_back(
      {TripKind::ToScene, from, call.location, depart, scene_arrive, call.id});
  double t = scene_arrive + call.time_on_scene;
  amb.trips.push_back({TripKind::OnScene, call.location, call.location,
                       scene_arrive, t, call.id});
  Location here = call.location;

  std::optional<double> hospital_arrive;
  if (call.needs_hospital) {
    Hospital& h = state.facilities.hospitals.at(d.hospital);
    if (!h.admits(call.type))
      throw SimulationError("dispatch: hospital does not admit this call type");
    const double arrive = t + travel_time_ms(here, h.location, t, geo);
    amb.trips.push_back({TripKind::ToHospital, here, h.location, t, arrive,
                         call.id});
    hospital_arrive = arrive;
    t = arrive + call.time_at_hospital;
    amb.trips.push_back(
        {TripKind::AtHospital, h.location, h.location, arrive, t, call.id});
    here = h.location;
    h.occupancy += 1;  // tracked; capacity is enforced only by the batch model
  }
  if (call.needs_cleaning) {
    const CleaningBase& cb = state.facilities.cleaning_bases.at(d.cleaning_base);
    const double arrive = t + travel_time_ms(here, cb.location, t, geo);
    amb.trips.push_back(
        {TripKind::ToCleaning, here, cb.location, t, arrive, call.id});
    t = arrive + call.cleaning_time;
    amb.trips.push_back(
        {TripKind::AtCleaning, cb.location, cb.location, arrive, t, call.id});
    here = cb.location;
  }

  amb.free_location = here;
  amb.free_time = t;
  amb.awaiting_reassignment = false;
  // Provisional staging leg; the reassignment decision at the completion
  // event replaces it.
  const int pb = instance_.closest_base(here);
  amb.base_location = state.facilities.bases.at(pb).location;
  amb.base_time = t + travel_time_ms(here, amb.base_location, t, geo);
  state.completion_pending[amb.id] = 1;

  CallRecord rec;
  rec.call = call.id;
  rec.which_ambulance = amb.id;
  rec.waiting_on_scene = scene_arrive - call.arrival_time;
  rec.waiting_on_scene_penalized =
      penalization(rec.waiting_on_scene, instance_.theta(call.type));
  if (hospital_arrive) {
    rec.waiting_to_hospital = *hospital_arrive - scene_arrive;
    rec.waiting_to_hospital_penalized =
        penalization(*rec.waiting_to_hospital, instance_.theta(call.type));
  }
  rec.allocation_cost = rec.waiting_on_scene_penalized +
                        instance_.quality.at(amb.type, call.type);
  state.records.push_back(rec);
  state.dispatched[call.id] = 1;
  state.queue.erase(std::remove(state.queue.begin(), state.queue.end(), call.id),
                    state.queue.end());
}

void Simulator::run_loop(WorldState& state, SelectionPolicy& policy,
                         Reassigner& reassigner) const {
  DecisionContext ctx(*this, state, policy.forecasts_busy());
  while (true) {
    bool any_completion = false;
    for (const auto& amb : state.fleet) {
      if (state.completion_pending[amb.id]) any_completion = true;
    }
    if (!state.has_pending_arrival() && !any_completion) break;

    // Events already in the past (queue carried into a continuation run,
    // completions that elapsed while a decision was pending) are processed
    // late at the current clock.
    const Event e = next_event(state);
    state.clock = std::max(state.clock, e.time);

    if (e.kind == Event::Kind::CallArrival) {
      state.next_call += 1;
      if (state.dispatched[e.call]) continue;  // committed in advance
      policy.on_call(ctx, e.call);
      const bool queued = std::count(state.queue.begin(), state.queue.end(),
                                     e.call) > 0;
      if (!state.dispatched[e.call] && !queued)
        throw SimulationError(policy.name() +
                              ": call left neither served nor queued");
    } else {
      state.completion_pending[e.ambulance] = 0;
      AmbulanceState& amb = state.fleet[e.ambulance];
      if (!amb.busy(state.clock)) {
        amb.awaiting_reassignment = true;
        policy.on_completion(ctx, e.ambulance);
        if (!amb.busy(state.clock) && amb.awaiting_reassignment) {
          const int b = reassigner.choose_base(state, e.ambulance);
          apply_decision(state, Decision::to_base(e.ambulance, b));
        }
      }
    }
  }
  if (!state.queue.empty())
    throw SimulationError("event loop drained with calls still queued");
}

SimResult Simulator::run(SelectionPolicy& policy, Reassigner& reassigner,
                         std::vector<Call> calls, double horizon) const {
  for (const auto& c : calls) {
    if (c.arrival_time > horizon)
      throw SimulationError("call " + std::to_string(c.id) +
                            " arrives after the horizon");
  }
  WorldState state = make_state(std::move(calls));
  for (const auto& c : state.calls) {
    if (compatible_ambulances(c, state.fleet, instance_.quality).empty())
      throw SimulationError("call " + std::to_string(c.id) +
                            " has no compatible ambulance in the fleet");
  }
  policy.begin(state);
  reassigner.begin(state);
  run_loop(state, policy, reassigner);
  SimResult result;
  result.metrics = metrics_from_records(state.records);
  result.state = std::move(state);
  return result;
}

std::string trips_to_jsonl(const WorldState& state) {
  std::ostringstream out;
  for (const auto& amb : state.fleet) {
    for (const auto& t : amb.trips) {
      nlohmann::json j{{"ambulance", amb.id},
                       {"kind", trip_kind_name(t.kind)},
                       {"origin", {t.origin.x, t.origin.y}},
                       {"destination", {t.destination.x, t.destination.y}},
                       {"depart", t.depart},
                       {"arrive", t.arrive}};
      if (t.call >= 0) j["call"] = t.call;
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace ambopt
