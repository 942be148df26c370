#include <doctest.h>

#include <functional>

#include "batch_support.hpp"

using namespace ambopt;
using namespace ambopt::testing;

TEST_CASE("service profiles follow the closest-facility rules") {
  auto ins = three_tier_instance();
  BatchInstance bi;
  bi.base = ins.get();
  bi.fleet = ins->initial_fleet();

  Call c4;
  c4.location = {4.0, 4.0};
  c4.time_on_scene = 300.0;
  const ServiceProfile p4 = service_profile(bi, c4);
  CHECK(p4.delta == 300.0);
  CHECK(p4.tau == 0.0);
  CHECK(p4.free_at == c4.location);

  Call c2 = c4;
  c2.needs_hospital = true;
  c2.time_at_hospital = 120.0;
  const ServiceProfile p2 = service_profile(bi, c2);
  // Closest hospital to (4,4) is (0,5): 4.123 units at 10/1800 speed.
  const double leg = std::hypot(4.0, 1.0) / (10.0 / 1800.0);
  CHECK(p2.tau == doctest::Approx(300.0 + leg));
  CHECK(p2.delta == doctest::Approx(300.0 + leg + 120.0));
  CHECK(p2.free_at == ins->facilities.hospitals[0].location);
  CHECK(p2.hospital == 0);

  Call c1 = c2;
  c1.needs_cleaning = true;
  c1.cleaning_time = 60.0;
  const ServiceProfile p1 = service_profile(bi, c1);
  // The cleaning base nearest hospital (0,5) is (5,0).
  CHECK(p1.cleaning_base == 0);
  CHECK(p1.tau == doctest::Approx(p2.tau));
  CHECK(p1.free_at == ins->facilities.cleaning_bases[0].location);

  Call c3 = c4;
  c3.needs_cleaning = true;
  c3.cleaning_time = 60.0;
  const ServiceProfile p3 = service_profile(bi, c3);
  CHECK(p3.tau == 0.0);
  CHECK(p3.cleaning_base == 0);  // nearest the scene
}

TEST_CASE("one call, one ambulance: weighted completion from the base") {
  auto ins = three_tier_instance();
  BatchInstance bi;
  bi.base = ins.get();
  bi.fleet = ins->initial_fleet();
  bi.fleet.resize(1);  // advanced at (0,0)
  Call c;
  c.id = 0;
  c.arrival_time = 0.0;
  c.location = {3.0, 4.0};
  c.type = 0;
  c.time_on_scene = 300.0;
  bi.calls = {c};
  const BatchSolution sol = solve_exact(bi);
  REQUIRE(sol.feasible);
  CHECK(sol.proved_optimal);
  const double d = 5.0 / (10.0 / 1800.0);
  CHECK(sol.objective == doctest::Approx(4.0 * d));
  CHECK(sol.sequences[0] == std::vector<int>{0});
}

TEST_CASE("two identical calls, one ambulance: earlier arrival served first") {
  auto ins = three_tier_instance();
  BatchInstance bi;
  bi.base = ins.get();
  bi.fleet = ins->initial_fleet();
  bi.fleet.resize(1);
  for (int i = 0; i < 2; ++i) {
    Call c;
    c.id = i;
    c.arrival_time = i == 0 ? 0.0 : 500.0;
    c.location = {6.0, 0.0};
    c.type = 0;
    c.time_on_scene = 300.0;
    bi.calls.push_back(c);
  }
  const BatchSolution sol = solve_exact(bi);
  CHECK(sol.sequences[0] == std::vector<int>{0, 1});
  // Swapping the order must cost strictly more.
  const double swapped = oracle_objective(bi, {{1, 0}});
  CHECK(sol.objective < swapped);
  CHECK(sol.objective == doctest::Approx(oracle_objective(bi, {{0, 1}})));
}

TEST_CASE("solver equals exhaustive enumeration on random batches") {
  auto ins = three_tier_instance();
  std::mt19937_64 rng(4242);
  int checked = 0;
  for (int rep = 0; rep < 30; ++rep) {
    const BatchInstance bi = random_batch(ins, rng, 5, 3);
    const double oracle = exhaustive_optimum(bi);
    const BatchSolution sol = solve_exact(bi);
    REQUIRE(sol.feasible);
    CHECK(sol.proved_optimal);
    CHECK(sol.objective == doctest::Approx(oracle).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("solver objective recomputes from its own timing output") {
  auto ins = three_tier_instance();
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const BatchInstance bi = random_batch(ins, rng, 5, 3);
    const BatchSolution sol = solve_exact(bi);
    double obj = 0.0;
    std::vector<double> worst(bi.classes(), 0.0);
    for (size_t k = 0; k < sol.sequences.size(); ++k) {
      for (int id : sol.sequences[k]) {
        const Call& c = bi.calls[id];
        const ServiceProfile p = service_profile(bi, c);
        auto& w = worst[bi.class_of(c.type)];
        w = std::max(w, sol.scene_arrival[id] + p.tau - c.arrival_time);
      }
    }
    for (int p = 0; p < bi.classes(); ++p) obj += bi.class_theta[p] * worst[p];
    CHECK(obj == doctest::Approx(sol.objective).epsilon(1e-12));
    // Routing consistency: each call appears exactly once across sequences.
    std::vector<int> seen(bi.calls.size(), 0);
    for (const auto& s : sol.sequences)
      for (int id : s) seen.at(id) += 1;
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("default big-M dominates every feasible arrival in practice") {
  auto ins = three_tier_instance();
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 10; ++rep) {
    const BatchInstance bi = random_batch(ins, rng, 5, 3);
    const double big_m = default_big_m(bi);
    const BatchSolution sol = solve_exact(bi);
    for (double t : sol.scene_arrival) CHECK(t <= big_m);
  }
}

TEST_CASE("timing respects the solved big-M constraints with tiny slack") {
  auto ins = three_tier_instance();
  std::mt19937_64 rng(55);
  const BatchInstance bi = random_batch(ins, rng, 5, 3);
  const BatchSolution sol = solve_exact(bi);
  // Chained pairs: successor arrival >= predecessor completion + travel.
  for (const auto& seq : sol.sequences) {
    for (size_t r = 0; r + 1 < seq.size(); ++r) {
      const ServiceProfile p = service_profile(bi, bi.calls[seq[r]]);
      const double lag =
          sol.scene_arrival[seq[r]] + p.delta +
          travel_time(p.free_at, bi.calls[seq[r + 1]].location, 0.0,
                      bi.base->geo);
      CHECK(sol.scene_arrival[seq[r + 1]] >= lag - 1e-6);
    }
  }
}

TEST_CASE("full model structure on a one-call batch") {
  auto ins = three_tier_instance();
  BatchInstance bi;
  bi.base = ins.get();
  bi.fleet = ins->initial_fleet();
  Call c;
  c.id = 0;
  c.arrival_time = 0.0;
  c.location = {5.0, 5.0};
  c.type = 0;  // only the two advanced units qualify
  c.time_on_scene = 300.0;
  bi.calls = {c};
  const LinearModel m = build_full_model(bi);
  int x = 0, z = 0, y = 0, cont = 0;
  for (const auto& v : m.vars) {
    if (v.name.rfind("x_", 0) == 0) ++x;
    if (v.name.rfind("z_", 0) == 0) ++z;
    if (v.name.rfind("y", 0) == 0) ++y;
    if (!v.binary) ++cont;
  }
  CHECK(x == 2);  // one first-call flag per compatible ambulance
  CHECK(z == 2);
  CHECK(y == 0);     // C4 call: no facility choice
  CHECK(cont == 4);  // t_0 and three class completions
}

TEST_CASE("full model rejects an over-committed hospital") {
  auto ins = three_tier_instance();
  auto capped = std::make_shared<Instance>(*ins);
  for (auto& h : capped->facilities.hospitals) {
    h.capacity = 0;
  }
  BatchInstance bi;
  bi.base = capped.get();
  bi.fleet = capped->initial_fleet();
  Call c;
  c.id = 0;
  c.arrival_time = 0.0;
  c.location = {5.0, 5.0};
  c.type = 0;
  c.time_on_scene = 300.0;
  c.needs_hospital = true;
  c.time_at_hospital = 300.0;
  bi.calls = {c};
  CHECK_THROWS_AS(build_full_model(bi), BatchInfeasible);
}

TEST_CASE("lp export: empty batch gives an objective-only document") {
  auto ins = three_tier_instance();
  BatchInstance bi;
  bi.base = ins.get();
  bi.fleet = ins->initial_fleet();
  const std::string lp = export_lp(build_simplified_model(bi));
  CHECK(lp.find("Minimize") != std::string::npos);
  CHECK(lp.find("End") != std::string::npos);
  CHECK(lp.find("xs_") == std::string::npos);
}

TEST_CASE("lp export: one-call model carries paired first/last binaries") {
  auto ins = three_tier_instance();
  BatchInstance bi;
  bi.base = ins.get();
  bi.fleet = ins->initial_fleet();
  Call c;
  c.id = 0;
  c.arrival_time = 0.0;
  c.location = {1.0, 1.0};
  c.type = 1;  // advanced x2 + intermediate qualify
  c.time_on_scene = 300.0;
  bi.calls = {c};
  const std::string lp = export_lp(build_simplified_model(bi));
  int first = 0, last = 0;
  for (size_t pos = 0; (pos = lp.find("x_0_", pos)) != std::string::npos; ++pos)
    ++first;
  for (size_t pos = 0; (pos = lp.find("z_0_", pos)) != std::string::npos; ++pos)
    ++last;
  CHECK(first >= 3);  // appears in constraints and the binary section
  CHECK(last >= 3);
  CHECK(lp.find("Binaries") != std::string::npos);
}

TEST_CASE("desk instance: solver proves optimality and beats nothing cheaper") {
  auto ins = three_tier_instance();
  const BatchInstance bi = desk_batch(ins);
  const BatchSolution sol = solve_exact(bi);
  REQUIRE(sol.feasible);
  CHECK(sol.proved_optimal);
  CHECK(sol.objective > 0.0);
  // All ten calls served, compatibility respected.
  int served = 0;
  for (size_t k = 0; k < sol.sequences.size(); ++k) {
    for (int id : sol.sequences[k]) {
      ++served;
      CHECK(bi.base->quality.compatible(bi.fleet[k].type, bi.calls[id].type));
    }
  }
  CHECK(served == 10);
  // Local-search audit: relocating or swapping any single call never
  // improves a proved optimum.
  const double best = sol.objective;
  for (size_t k = 0; k < sol.sequences.size(); ++k) {
    for (size_t r = 0; r < sol.sequences[k].size(); ++r) {
      for (size_t k2 = 0; k2 < sol.sequences.size(); ++k2) {
        const int call_id = sol.sequences[k][r];
        if (!bi.base->quality.compatible(bi.fleet[k2].type,
                                         bi.calls[call_id].type))
          continue;
        for (size_t r2 = 0; r2 <= sol.sequences[k2].size(); ++r2) {
          auto seqs = sol.sequences;
          seqs[k].erase(seqs[k].begin() + r);
          auto& target = seqs[k2];
          if (r2 > target.size()) continue;
          target.insert(target.begin() + r2, call_id);
          CHECK(oracle_objective(bi, seqs) >= best - 1e-9);
        }
      }
    }
  }
}

TEST_CASE("a node budget of one returns an unproved incumbent") {
  auto ins = three_tier_instance();
  std::mt19937_64 rng(1);
  const BatchInstance bi = random_batch(ins, rng, 5, 3);
  SolveOptions opts;
  opts.node_budget = 1;
  const BatchSolution sol = solve_exact(bi, opts);
  CHECK(sol.feasible);       // greedy incumbent always exists
  CHECK(!sol.proved_optimal);
}
