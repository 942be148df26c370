#pragma once

// Batch-allocation fixtures and the independent enumeration oracle used by
// both the unit suite and the acceptance run. The oracle re-derives every
// quantity (profiles, timing, objective) from first principles so it never
// shares arithmetic with the solver under test.

#include <algorithm>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "ambopt/batch_opt.hpp"

namespace ambopt::testing {

/// Three-tier instance on the 10x10 square: two advanced ambulances at
/// opposite corners, one intermediate, one basic; tier k serves call
/// classes >= k.
inline std::shared_ptr<Instance> three_tier_instance() {
  auto ins = std::make_shared<Instance>();
  ins->geo = GeoMode::planar(10.0 / 1800.0);  // crosses the square in 30 min
  ins->call_types = {{0, 4.0, "high"}, {1, 2.0, "intermediate"}, {2, 1.0, "basic"}};
  ins->ambulance_types = {{0, 2, "advanced"}, {1, 1, "intermediate"}, {2, 0, "basic"}};
  ins->quality = QualityMatrix(3, 3, 0.0);
  ins->quality.at(1, 0) = QualityMatrix::forbidden();
  ins->quality.at(2, 0) = QualityMatrix::forbidden();
  ins->quality.at(2, 1) = QualityMatrix::forbidden();
  ins->facilities.bases = {{0, {0, 0}}, {1, {0, 10}}, {2, {10, 0}}, {3, {10, 10}}};
  ins->facilities.hospitals = {{0, {0, 5}, std::nullopt, 0, {}},
                               {1, {5, 10}, std::nullopt, 0, {}}};
  ins->facilities.cleaning_bases = {{0, {5, 0}}, {1, {10, 5}}};
  ins->fleet = {{0, 0, 0}, {1, 0, 3}, {2, 1, 1}, {3, 2, 2}};
  ins->validate();
  return ins;
}

inline Call batch_call(int id, double t, double x, double y, int type,
                       bool cleaning) {
  Call c;
  c.id = id;
  c.arrival_time = t;
  c.location = {x, y};
  c.type = type;
  c.time_on_scene = 300.0;
  c.needs_hospital = true;
  c.time_at_hospital = 300.0;
  c.needs_cleaning = cleaning;
  c.cleaning_time = cleaning ? 300.0 : 0.0;
  return c;
}

/// The ten-call desk instance: every patient is transported, service legs
/// all last 300 s, classes weighted 4/2/1.
inline BatchInstance desk_batch(const std::shared_ptr<Instance>& ins) {
  BatchInstance bi;
  bi.base = ins.get();
  bi.t0 = 0.0;
  bi.fleet = ins->initial_fleet();
  bi.class_theta = {4.0, 2.0, 1.0};
  bi.calls = {
      batch_call(0, 4615, 2.573950, 7.204272, 0, false),
      batch_call(1, 4615, 9.051706, 6.459336, 1, true),
      batch_call(2, 6928, 0.323052, 5.631636, 2, false),
      batch_call(3, 7041, 9.300417, 1.637796, 2, true),
      batch_call(4, 12867, 9.872602, 6.497998, 0, true),
      batch_call(5, 15814, 4.214452, 8.023232, 1, true),
      batch_call(6, 16806, 1.127195, 9.637274, 2, false),
      batch_call(7, 17782, 9.940016, 4.055296, 1, true),
      batch_call(8, 20818, 1.196135, 4.216586, 2, true),
      batch_call(9, 34823, 0.076350, 1.954592, 2, true),
  };
  return bi;
}

// ---------------------------------------------------------------------------
// Independent oracle

inline double oracle_tt(const BatchInstance& bi, Location a, Location b) {
  return std::hypot(b.x - a.x, b.y - a.y) / bi.base->geo.speed;
}

struct OracleProfile {
  double delta, tau;
  Location ends_at;
};

inline OracleProfile oracle_profile(const BatchInstance& bi, const Call& c) {
  const auto& fac = bi.base->facilities;
  auto closest = [&](Location from, const auto& list, auto admits) {
    int best = -1;
    double bt = std::numeric_limits<double>::infinity();
    for (const auto& f : list) {
      if (!admits(f)) continue;
      const double t = oracle_tt(bi, from, f.location);
      if (t < bt) {
        bt = t;
        best = f.id;
      }
    }
    return best;
  };
  OracleProfile p{c.time_on_scene, 0.0, c.location};
  if (c.needs_hospital) {
    const int h = closest(c.location, fac.hospitals,
                          [&](const Hospital& x) { return x.admits(c.type); });
    const Location hl = fac.hospitals[h].location;
    p.tau = c.time_on_scene + oracle_tt(bi, c.location, hl);
    p.delta = p.tau + c.time_at_hospital;
    p.ends_at = hl;
    if (c.needs_cleaning) {
      const int cb = closest(hl, fac.cleaning_bases, [](const CleaningBase&) {
        return true;
      });
      const Location cl = fac.cleaning_bases[cb].location;
      p.delta += oracle_tt(bi, hl, cl) + c.cleaning_time;
      p.ends_at = cl;
    }
  } else if (c.needs_cleaning) {
    const int cb = closest(c.location, fac.cleaning_bases,
                           [](const CleaningBase&) { return true; });
    const Location cl = fac.cleaning_bases[cb].location;
    p.delta = c.time_on_scene + oracle_tt(bi, c.location, cl) + c.cleaning_time;
    p.ends_at = cl;
  }
  return p;
}

inline double oracle_objective(const BatchInstance& bi,
                               const std::vector<std::vector<int>>& seqs) {
  std::vector<double> worst(bi.classes(), 0.0);
  for (size_t k = 0; k < seqs.size(); ++k) {
    const AmbulanceState& amb = bi.fleet[k];
    double free_time;
    Location at;
    if (bi.t0 < amb.free_time) {
      free_time = amb.free_time;
      at = amb.free_location;
    } else if (bi.t0 < amb.base_time) {
      // Plain linear interpolation along the return leg.
      const double leg = oracle_tt(bi, amb.free_location, amb.base_location);
      const double s = leg > 0.0 ? std::min(1.0, (bi.t0 - amb.free_time) / leg)
                                 : 1.0;
      free_time = bi.t0;
      at = {amb.free_location.x +
                s * (amb.base_location.x - amb.free_location.x),
            amb.free_location.y +
                s * (amb.base_location.y - amb.free_location.y)};
    } else {
      free_time = bi.t0;
      at = amb.base_location;
    }
    for (int id : seqs[k]) {
      const Call& c = bi.calls[id];
      const double arrive =
          std::max(free_time + oracle_tt(bi, at, c.location), c.arrival_time);
      const OracleProfile p = oracle_profile(bi, c);
      worst[bi.class_of(c.type)] =
          std::max(worst[bi.class_of(c.type)],
                   arrive + p.tau -
                       (bi.objective_mode == CompletionObjective::PerCallRelative
                            ? c.arrival_time
                            : 0.0));
      free_time = arrive + p.delta;
      at = p.ends_at;
    }
  }
  double obj = 0.0;
  for (int p = 0; p < bi.classes(); ++p) obj += bi.class_theta[p] * worst[p];
  if (bi.objective_mode == CompletionObjective::AbsoluteEarliest) {
    std::vector<double> earliest(bi.classes(),
                                 std::numeric_limits<double>::infinity());
    for (const auto& c : bi.calls) {
      auto& e = earliest[bi.class_of(c.type)];
      e = std::min(e, c.arrival_time);
    }
    for (int p = 0; p < bi.classes(); ++p)
      if (std::isfinite(earliest[p])) obj -= bi.class_theta[p] * earliest[p];
  }
  return obj;
}

/// Every (assignment, per-ambulance order) combination, brute force.
inline double exhaustive_optimum(const BatchInstance& bi) {
  const int n = static_cast<int>(bi.calls.size());
  const int m = static_cast<int>(bi.fleet.size());
  std::vector<std::vector<int>> compat(n);
  for (int i = 0; i < n; ++i)
    compat[i] = compatible_ambulances(bi.calls[i], bi.fleet, bi.base->quality);

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> owner(n, -1);

  // Enumerate orderings of each ambulance's call set as the product of
  // per-ambulance permutations.
  std::function<void(int, std::vector<std::vector<int>>&)> permute =
      [&](int k, std::vector<std::vector<int>>& seqs) {
        if (k == m) {
          best = std::min(best, oracle_objective(bi, seqs));
          return;
        }
        std::vector<int>& s = seqs[k];
        std::sort(s.begin(), s.end());
        do {
          permute(k + 1, seqs);
        } while (std::next_permutation(s.begin(), s.end()));
      };

  std::function<void(int)> assign = [&](int i) {
    if (i == n) {
      std::vector<std::vector<int>> seqs(m);
      for (int c = 0; c < n; ++c) seqs[owner[c]].push_back(c);
      permute(0, seqs);
      return;
    }
    for (int k : compat[i]) {
      owner[i] = k;
      assign(i + 1);
    }
  };
  assign(0);
  return best;
}

/// Random small planar batch with mixed ride classes and tiers.
inline BatchInstance random_batch(const std::shared_ptr<Instance>& ins,
                                  std::mt19937_64& rng, int max_calls,
                                  int max_ambulances) {
  BatchInstance bi;
  bi.base = ins.get();
  bi.t0 = 0.0;
  bi.class_theta = {4.0, 2.0, 1.0};
  std::uniform_real_distribution<double> uxy(0.0, 10.0);
  std::uniform_int_distribution<int> utype(0, 2);
  std::uniform_int_distribution<int> ubit(0, 1);
  const int n = 1 + static_cast<int>(rng() % max_calls);
  for (int i = 0; i < n; ++i) {
    Call c;
    c.id = i;
    c.arrival_time = 100.0 * static_cast<double>(rng() % 20);
    c.location = {uxy(rng), uxy(rng)};
    c.type = utype(rng);
    c.time_on_scene = 300.0;
    if (ubit(rng)) {
      c.needs_hospital = true;
      c.time_at_hospital = 300.0;
    }
    if (ubit(rng)) {
      c.needs_cleaning = true;
      c.cleaning_time = 300.0;
    }
    bi.calls.push_back(c);
  }
  bi.fleet = ins->initial_fleet();
  bi.fleet.resize(std::max(1, static_cast<int>(rng() % (max_ambulances + 1))));
  // Keep at least one advanced unit so every class stays servable.
  bi.fleet[0].type = 0;
  // Scatter some of the fleet off base, mid-return or in service.
  for (auto& amb : bi.fleet) {
    const int mode = static_cast<int>(rng() % 3);
    if (mode == 1) {
      amb.free_location = {uxy(rng), uxy(rng)};
      amb.free_time = -200.0;  // already heading home at t0
      amb.base_time =
          amb.free_time +
          travel_time(amb.free_location, amb.base_location, 0.0, ins->geo);
    } else if (mode == 2) {
      amb.free_location = {uxy(rng), uxy(rng)};
      amb.free_time = 100.0 * static_cast<double>(1 + rng() % 10);  // busy
    }
  }
  return bi;
}

}  // namespace ambopt::testing
