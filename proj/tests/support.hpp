#pragma once

// Shared fixtures for the test suites: small hand instances, random
// instance/call generators, and structural checkers over finished runs.

#include <random>
#include <vector>

#include "ambopt/experiment.hpp"
#include "ambopt/heuristics.hpp"
#include "ambopt/reassign.hpp"
#include "ambopt/simulator.hpp"

namespace ambopt::testing {

/// One ambulance type (cost 0 everywhere), one call type, unit speed on a
/// 10x10 square, bases at two corners.
inline Instance uniform_instance(int fleet = 2, int bases = 2) {
  Instance ins;
  ins.geo = GeoMode::planar(1.0);
  ins.call_types = {{0, 1.0, "only"}};
  ins.ambulance_types = {{0, 0, "unit"}};
  ins.quality = QualityMatrix(1, 1, 0.0);
  const Location spots[4] = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  for (int b = 0; b < bases; ++b) ins.facilities.bases.push_back({b, spots[b % 4]});
  ins.facilities.hospitals = {{0, {5, 10}, std::nullopt, 0, {}}};
  ins.facilities.cleaning_bases = {{0, {5, 0}}};
  for (int a = 0; a < fleet; ++a) ins.fleet.push_back({a, 0, a % bases});
  ins.validate();
  return ins;
}

/// The two-type, four-call-type setup used throughout: BLS/ALS with the
/// preference penalties and priority weights 4/1/4/1.
inline Instance city_instance(int fleet = 6) { return make_synthetic_city(fleet); }

inline Call make_call(int id, double t, Location loc, int type = 0,
                      double on_scene = 300.0) {
  Call c;
  c.id = id;
  c.arrival_time = t;
  c.location = loc;
  c.type = type;
  c.time_on_scene = on_scene;
  return c;
}

/// Random calls over the city instance, all four types, all ride chains.
inline std::vector<Call> random_city_calls(std::mt19937_64& rng, int n,
                                           double horizon) {
  const ServiceModel service = make_city_service();
  std::uniform_real_distribution<double> ut(0.0, horizon), uxy(0.0, 10.0);
  std::uniform_int_distribution<int> utype(0, 3);
  std::vector<Call> out;
  for (int i = 0; i < n; ++i) {
    Call c;
    c.id = i;
    c.arrival_time = ut(rng);
    c.location = {uxy(rng), uxy(rng)};
    c.type = utype(rng);
    const ServiceSpec& s = service[c.type];
    c.time_on_scene = s.time_on_scene;
    c.needs_hospital = s.needs_hospital;
    c.time_at_hospital = s.time_at_hospital;
    c.needs_cleaning = s.needs_cleaning;
    c.cleaning_time = s.cleaning_time;
    out.push_back(c);
  }
  return out;
}

/// Every ambulance's trips must tile its timeline: chained locations and
/// instants, no overlap, no gap.
inline void check_trip_chains(const WorldState& state) {
  for (const auto& amb : state.fleet) {
    for (size_t i = 0; i < amb.trips.size(); ++i) {
      const Trip& t = amb.trips[i];
      REQUIRE(t.arrive >= t.depart);
      if (i > 0) {
        const Trip& prev = amb.trips[i - 1];
        REQUIRE(t.depart == prev.arrive);
        REQUIRE(t.origin.x == prev.destination.x);
        REQUIRE(t.origin.y == prev.destination.y);
      }
    }
  }
}

/// Served exactly once, non-negative waits, penalization recomputes.
inline void check_conservation(const Instance& ins, const WorldState& state) {
  REQUIRE(state.records.size() == state.calls.size());
  std::vector<int> served(state.calls.size(), 0);
  for (const auto& r : state.records) {
    served.at(r.call) += 1;
    REQUIRE(r.waiting_on_scene >= 0.0);
    REQUIRE(r.waiting_on_scene_penalized ==
            penalization(r.waiting_on_scene,
                         ins.theta(state.calls[r.call].type)));
    REQUIRE(r.allocation_cost ==
            r.waiting_on_scene_penalized +
                ins.quality.at(state.fleet[r.which_ambulance].type,
                               state.calls[r.call].type));
  }
  for (int s : served) REQUIRE(s == 1);
}

struct RunOutput {
  SimResult result;
  std::string trips;
};

inline RunOutput run_policy(const Instance& ins, const std::string& policy_kind,
                            const std::string& rule_kind,
                            std::vector<Call> calls) {
  Simulator sim(ins);
  auto policy = make_policy(policy_kind, ins);
  auto rule = make_reassigner(rule_kind, ins, nullptr, {});
  RunOutput out{sim.run(*policy, *rule, std::move(calls)), ""};
  out.trips = trips_to_jsonl(out.result.state);
  return out;
}

/// Assignment vector (call -> ambulance) of a finished run.
inline std::vector<int> assignment_of(const SimResult& r) {
  std::vector<int> a(r.state.calls.size(), -1);
  for (const auto& rec : r.state.records) a.at(rec.call) = rec.which_ambulance;
  return a;
}

}  // namespace ambopt::testing
