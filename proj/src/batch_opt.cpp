#include "ambopt/batch_opt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace ambopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The batch model works in continuous time with the raw metric, so the
// triangle inequality holds exactly and first-ride floors stay admissible.
double tt(const BatchInstance& bi, const Location& a, const Location& b) {
  return travel_time(a, b, 0.0, bi.base->geo);
}

/// Departure profile of ambulance k for a first ride decided at t0.
struct Departure {
  double ready;
  Location from;
};

Departure departure_at_t0(const BatchInstance& bi, const AmbulanceState& amb) {
  switch (availability(amb, bi.t0)) {
    case Availability::Busy:
      return {amb.free_time, amb.free_location};
    case Availability::EnRouteToBase:
      return {bi.t0, available_position(amb, bi.t0, bi.base->geo)};
    case Availability::AtBase:
      return {bi.t0, amb.base_location};
  }
  return {bi.t0, amb.base_location};
}

double completion_offset(const BatchInstance& bi, const Call& c) {
  return bi.objective_mode == CompletionObjective::PerCallRelative
             ? c.arrival_time
             : 0.0;
}

double objective_constant_for(const BatchInstance& bi) {
  if (bi.objective_mode != CompletionObjective::AbsoluteEarliest) return 0.0;
  std::vector<double> earliest(bi.classes(), kInf);
  for (const auto& c : bi.calls) {
    auto& e = earliest[bi.class_of(c.type)];
    e = std::min(e, c.arrival_time);
  }
  double constant = 0.0;
  for (int p = 0; p < bi.classes(); ++p) {
    if (std::isfinite(earliest[p]))
      constant -= bi.class_theta[p] * earliest[p];
  }
  return constant;
}

}  // namespace

std::vector<int> BatchInstance::compatible(const Call& c) const {
  return compatible_ambulances(c, fleet, base->quality);
}

void BatchInstance::validate() const {
  if (base == nullptr) throw ConfigError("batch: no base instance");
  if (static_cast<int>(class_theta.size()) != 3)
    throw ConfigError("batch: exactly three completion classes expected");
  for (const auto& c : calls) {
    const int p = class_of(c.type);
    if (p < 0 || p >= classes())
      throw ConfigError("batch: call type " + std::to_string(c.type) +
                        " maps outside the completion classes");
    if (compatible(c).empty())
      throw BatchInfeasible("call " + std::to_string(c.id) +
                            " has no compatible ambulance");
    if (c.needs_hospital &&
        base->closest_hospital(c.location, c.type) < 0)
      throw BatchInfeasible("call " + std::to_string(c.id) +
                            ": no hospital admits its type");
    if (c.needs_cleaning && base->facilities.cleaning_bases.empty())
      throw BatchInfeasible("cleaning needed but no cleaning base exists");
  }
  // Aggregate bed check; the per-hospital constraint lives in the model.
  double free_beds = 0.0;
  bool unbounded = false;
  for (const auto& h : base->facilities.hospitals) {
    if (h.capacity) {
      free_beds += std::max(0, *h.capacity - h.occupancy);
      if (*h.capacity - h.occupancy < 0)
        throw BatchInfeasible("hospital " + std::to_string(h.id) +
                              " already over capacity");
    } else {
      unbounded = true;
    }
  }
  if (!unbounded) {
    int needing = 0;
    for (const auto& c : calls) needing += c.needs_hospital ? 1 : 0;
    if (needing > free_beds)
      throw BatchInfeasible("hospital capacity cannot absorb the batch");
  }
}

ServiceProfile service_profile(const BatchInstance& bi, const Call& call) {
  ServiceProfile p;
  const Instance& ins = *bi.base;
  switch (call.ride_class()) {
    case 1: {
      p.hospital = ins.closest_hospital(call.location, call.type);
      const Location h = ins.facilities.hospitals[p.hospital].location;
      p.cleaning_base = ins.closest_cleaning_base(h);
      const Location cb = ins.facilities.cleaning_bases[p.cleaning_base].location;
      p.tau = call.time_on_scene + tt(bi, call.location, h);
      p.delta = p.tau + call.time_at_hospital + tt(bi, h, cb) +
                call.cleaning_time;
      p.free_at = cb;
      break;
    }
    case 2: {
      p.hospital = ins.closest_hospital(call.location, call.type);
      const Location h = ins.facilities.hospitals[p.hospital].location;
      p.tau = call.time_on_scene + tt(bi, call.location, h);
      p.delta = p.tau + call.time_at_hospital;
      p.free_at = h;
      break;
    }
    case 3: {
      p.cleaning_base = ins.closest_cleaning_base(call.location);
      const Location cb = ins.facilities.cleaning_bases[p.cleaning_base].location;
      p.delta = call.time_on_scene + tt(bi, call.location, cb) +
                call.cleaning_time;
      p.free_at = cb;
      p.tau = 0.0;
      break;
    }
    default: {
      p.delta = call.time_on_scene;
      p.free_at = call.location;
      p.tau = 0.0;
      break;
    }
  }
  return p;
}

double default_big_m(const BatchInstance& bi) {
  double ready = bi.t0;
  for (const auto& amb : bi.fleet) ready = std::max(ready, amb.free_time);
  for (const auto& c : bi.calls) ready = std::max(ready, c.arrival_time);
  // Every location a ride can touch.
  std::vector<Location> pts;
  for (const auto& amb : bi.fleet) {
    pts.push_back(departure_at_t0(bi, amb).from);
    pts.push_back(amb.free_location);
  }
  for (const auto& c : bi.calls) pts.push_back(c.location);
  for (const auto& h : bi.base->facilities.hospitals) pts.push_back(h.location);
  for (const auto& cb : bi.base->facilities.cleaning_bases)
    pts.push_back(cb.location);
  double max_leg = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      max_leg = std::max(max_leg, tt(bi, pts[i], pts[j]));
  double service = 0.0;
  for (const auto& c : bi.calls) service += service_profile(bi, c).delta;
  return ready + service + (bi.calls.size() + 1) * max_leg + 1.0;
}

int LinearModel::add_binary(const std::string& name) {
  vars.push_back({name, true, 0.0, 1.0, 0.0});
  return static_cast<int>(vars.size()) - 1;
}

int LinearModel::add_continuous(const std::string& name, double lb, double ub) {
  vars.push_back({name, false, lb, ub, 0.0});
  return static_cast<int>(vars.size()) - 1;
}

namespace {

/// Variable bookkeeping shared by both builders.
struct ModelVars {
  // first[i][k], succ[i][j][k], last[i][k]: -1 where incompatible.
  std::vector<std::vector<int>> first;
  std::vector<std::vector<std::vector<int>>> succ;
  std::vector<std::vector<int>> last;
  std::vector<int> t;
  std::vector<int> m_class;
};

ModelVars add_routing(LinearModel& m, const BatchInstance& bi) {
  const int n = static_cast<int>(bi.calls.size());
  const int n_amb = static_cast<int>(bi.fleet.size());
  ModelVars v;
  v.first.assign(n, std::vector<int>(n_amb, -1));
  v.last.assign(n, std::vector<int>(n_amb, -1));
  v.succ.assign(n, std::vector<std::vector<int>>(
                       n, std::vector<int>(n_amb, -1)));
  std::vector<std::vector<char>> ok(n, std::vector<char>(n_amb, 0));
  for (int i = 0; i < n; ++i)
    for (int k : bi.compatible(bi.calls[i])) ok[i][k] = 1;

  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n_amb; ++k) {
      if (!ok[i][k]) continue;
      v.first[i][k] =
          m.add_binary("x_" + std::to_string(i) + "_" + std::to_string(k));
      v.last[i][k] =
          m.add_binary("z_" + std::to_string(i) + "_" + std::to_string(k));
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (int k = 0; k < n_amb; ++k) {
        if (!ok[i][k] || !ok[j][k]) continue;
        v.succ[i][j][k] = m.add_binary("xs_" + std::to_string(i) + "_" +
                                       std::to_string(j) + "_" +
                                       std::to_string(k));
      }
    }
  // A scene cannot be reached before its call exists.
  for (int i = 0; i < n; ++i)
    v.t.push_back(m.add_continuous("t_" + std::to_string(i),
                                   std::max(0.0, bi.calls[i].arrival_time),
                                   kInf));
  for (int p = 0; p < bi.classes(); ++p) {
    const int id = m.add_continuous("M_cls" + std::to_string(p), 0.0, kInf);
    m.vars[id].objective = bi.class_theta[p];
    v.m_class.push_back(id);
  }

  // At most one first call per ambulance.
  for (int k = 0; k < n_amb; ++k) {
    LinearConstraint c;
    c.name = "one_first_k" + std::to_string(k);
    for (int i = 0; i < n; ++i)
      if (v.first[i][k] >= 0) c.terms.push_back({v.first[i][k], 1.0});
    if (c.terms.empty()) continue;
    c.sense = '<';
    c.rhs = 1.0;
    m.add_constraint(std::move(c));
  }
  // Every call attended exactly once (first or successor).
  for (int i = 0; i < n; ++i) {
    LinearConstraint c;
    c.name = "serve_i" + std::to_string(i);
    for (int k = 0; k < n_amb; ++k) {
      if (v.first[i][k] >= 0) c.terms.push_back({v.first[i][k], 1.0});
      for (int j = 0; j < n; ++j)
        if (j != i && v.succ[j][i][k] >= 0)
          c.terms.push_back({v.succ[j][i][k], 1.0});
    }
    c.sense = '=';
    c.rhs = 1.0;
    m.add_constraint(std::move(c));
  }
  // Flow conservation: an ambulance arriving at a scene leaves it.
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n_amb; ++k) {
      if (v.first[i][k] < 0) continue;
      LinearConstraint c;
      c.name = "flow_i" + std::to_string(i) + "_k" + std::to_string(k);
      c.terms.push_back({v.first[i][k], 1.0});
      for (int j = 0; j < n; ++j)
        if (j != i && v.succ[j][i][k] >= 0)
          c.terms.push_back({v.succ[j][i][k], 1.0});
      c.terms.push_back({v.last[i][k], -1.0});
      for (int j = 0; j < n; ++j)
        if (j != i && v.succ[i][j][k] >= 0)
          c.terms.push_back({v.succ[i][j][k], -1.0});
      c.sense = '=';
      c.rhs = 0.0;
      m.add_constraint(std::move(c));
    }
  }
  return v;
}

void add_first_call_timing(LinearModel& m, const BatchInstance& bi,
                           const ModelVars& v, double big_m) {
  const int n = static_cast<int>(bi.calls.size());
  for (int i = 0; i < n; ++i) {
    for (size_t k = 0; k < bi.fleet.size(); ++k) {
      if (v.first[i][k] < 0) continue;
      const Departure dep = departure_at_t0(bi, bi.fleet[k]);
      const double reach = dep.ready + tt(bi, dep.from, bi.calls[i].location);
      // reach <= t_i + M (1 - x(i,k))
      LinearConstraint c;
      c.name = "arrive_first_i" + std::to_string(i) + "_k" + std::to_string(k);
      c.terms.push_back({v.t[i], 1.0});
      c.terms.push_back({v.first[i][k], -big_m});
      c.sense = '>';
      c.rhs = reach - big_m;
      m.add_constraint(std::move(c));
    }
  }
}

void add_class_bound(LinearModel& m, const BatchInstance& bi,
                     const ModelVars& v, int call, double fixed_part,
                     int y_var, double y_coef, const std::string& name) {
  // M_class >= t_i + fixed + coef*y - offset
  const Call& c = bi.calls[call];
  LinearConstraint con;
  con.name = name;
  con.terms.push_back({v.m_class[bi.class_of(c.type)], 1.0});
  con.terms.push_back({v.t[call], -1.0});
  if (y_var >= 0) con.terms.push_back({y_var, -y_coef});
  con.sense = '>';
  con.rhs = fixed_part - completion_offset(bi, c);
  m.add_constraint(std::move(con));
}

}  // namespace

LinearModel build_simplified_model(const BatchInstance& bi) {
  bi.validate();
  LinearModel m;
  m.objective_constant = objective_constant_for(bi);
  const double big_m = bi.big_m > 0.0 ? bi.big_m : default_big_m(bi);
  const ModelVars v = add_routing(m, bi);
  add_first_call_timing(m, bi, v, big_m);

  const int n = static_cast<int>(bi.calls.size());
  std::vector<ServiceProfile> prof;
  prof.reserve(n);
  for (const auto& c : bi.calls) prof.push_back(service_profile(bi, c));

  // Succession timing with the closest-facility profile folded in.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      bool linked = false;
      for (size_t k = 0; k < bi.fleet.size(); ++k)
        if (v.succ[i][j][k] >= 0) linked = true;
      if (!linked) continue;
      const double lag =
          prof[i].delta + tt(bi, prof[i].free_at, bi.calls[j].location);
      LinearConstraint c;
      c.name = "chain_i" + std::to_string(i) + "_j" + std::to_string(j);
      c.terms.push_back({v.t[j], 1.0});
      c.terms.push_back({v.t[i], -1.0});
      for (size_t k = 0; k < bi.fleet.size(); ++k)
        if (v.succ[i][j][k] >= 0) c.terms.push_back({v.succ[i][j][k], -big_m});
      c.sense = '>';
      c.rhs = lag - big_m;
      m.add_constraint(std::move(c));
    }
  }
  // Completion bounds: scene arrival plus the scene-to-hospital lag.
  for (int i = 0; i < n; ++i) {
    add_class_bound(m, bi, v, i, prof[i].tau, -1, 0.0,
                    "completion_i" + std::to_string(i));
  }
  return m;
}

LinearModel build_full_model(const BatchInstance& bi) {
  bi.validate();
  LinearModel m;
  m.objective_constant = objective_constant_for(bi);
  const double big_m = bi.big_m > 0.0 ? bi.big_m : default_big_m(bi);
  const ModelVars v = add_routing(m, bi);
  add_first_call_timing(m, bi, v, big_m);

  const Instance& ins = *bi.base;
  const int n = static_cast<int>(bi.calls.size());
  const auto& hospitals = ins.facilities.hospitals;
  const auto& cleaners = ins.facilities.cleaning_bases;

  // Facility-choice variables per ride class.
  std::vector<std::vector<std::vector<int>>> y1(n);  // [i][h][cb]
  std::vector<std::vector<int>> y2(n);               // [i][h]
  std::vector<std::vector<int>> y3(n);               // [i][cb]
  for (int i = 0; i < n; ++i) {
    const Call& c = bi.calls[i];
    switch (c.ride_class()) {
      case 1: {
        y1[i].assign(hospitals.size(), std::vector<int>(cleaners.size(), -1));
        LinearConstraint one;
        one.name = "route_c1_i" + std::to_string(i);
        for (const auto& h : hospitals) {
          if (!h.admits(c.type)) continue;
          for (const auto& cb : cleaners) {
            const int var = m.add_binary("y1_" + std::to_string(i) + "_" +
                                         std::to_string(h.id) + "_" +
                                         std::to_string(cb.id));
            y1[i][h.id][cb.id] = var;
            one.terms.push_back({var, 1.0});
          }
        }
        one.sense = '=';
        one.rhs = 1.0;
        m.add_constraint(std::move(one));
        break;
      }
      case 2: {
        y2[i].assign(hospitals.size(), -1);
        LinearConstraint one;
        one.name = "route_c2_i" + std::to_string(i);
        for (const auto& h : hospitals) {
          if (!h.admits(c.type)) continue;
          const int var = m.add_binary("y2_" + std::to_string(i) + "_" +
                                       std::to_string(h.id));
          y2[i][h.id] = var;
          one.terms.push_back({var, 1.0});
        }
        one.sense = '=';
        one.rhs = 1.0;
        m.add_constraint(std::move(one));
        break;
      }
      case 3: {
        y3[i].assign(cleaners.size(), -1);
        LinearConstraint one;
        one.name = "route_c3_i" + std::to_string(i);
        for (const auto& cb : cleaners) {
          const int var = m.add_binary("y3_" + std::to_string(i) + "_" +
                                       std::to_string(cb.id));
          y3[i][cb.id] = var;
          one.terms.push_back({var, 1.0});
        }
        one.sense = '=';
        one.rhs = 1.0;
        m.add_constraint(std::move(one));
        break;
      }
      default:
        break;
    }
  }

  // Hospital capacity.
  for (const auto& h : hospitals) {
    if (!h.capacity) continue;
    LinearConstraint cap;
    cap.name = "beds_h" + std::to_string(h.id);
    for (int i = 0; i < n; ++i) {
      if (!y2[i].empty() && y2[i][h.id] >= 0)
        cap.terms.push_back({y2[i][h.id], 1.0});
      if (!y1[i].empty())
        for (const auto& cb : cleaners)
          if (y1[i][h.id][cb.id] >= 0)
            cap.terms.push_back({y1[i][h.id][cb.id], 1.0});
    }
    cap.sense = '<';
    cap.rhs = *h.capacity - h.occupancy;
    m.add_constraint(std::move(cap));
  }

  // Succession timing, one constraint per facility combination.
  for (int i = 0; i < n; ++i) {
    const Call& ci = bi.calls[i];
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      std::vector<LinearTerm> link;
      for (size_t k = 0; k < bi.fleet.size(); ++k)
        if (v.succ[i][j][k] >= 0) link.push_back({v.succ[i][j][k], -big_m});
      if (link.empty()) continue;
      auto base_con = [&](const std::string& name) {
        LinearConstraint c;
        c.name = name;
        c.terms.push_back({v.t[j], 1.0});
        c.terms.push_back({v.t[i], -1.0});
        c.terms.insert(c.terms.end(), link.begin(), link.end());
        c.sense = '>';
        return c;
      };
      const std::string tag =
          "chain_i" + std::to_string(i) + "_j" + std::to_string(j);
      switch (ci.ride_class()) {
        case 1:
          for (const auto& h : hospitals) {
            for (const auto& cb : cleaners) {
              if (y1[i][h.id][cb.id] < 0) continue;
              const double leg = tt(bi, ci.location, h.location) +
                                 ci.time_at_hospital +
                                 tt(bi, h.location, cb.location) +
                                 ci.cleaning_time +
                                 tt(bi, cb.location, bi.calls[j].location);
              auto c = base_con(tag + "_h" + std::to_string(h.id) + "_cb" +
                                std::to_string(cb.id));
              c.terms.push_back({y1[i][h.id][cb.id], -leg});
              c.rhs = ci.time_on_scene - big_m;
              m.add_constraint(std::move(c));
            }
          }
          break;
        case 2:
          for (const auto& h : hospitals) {
            if (y2[i][h.id] < 0) continue;
            const double leg = tt(bi, ci.location, h.location) +
                               ci.time_at_hospital +
                               tt(bi, h.location, bi.calls[j].location);
            auto c = base_con(tag + "_h" + std::to_string(h.id));
            c.terms.push_back({y2[i][h.id], -leg});
            c.rhs = ci.time_on_scene - big_m;
            m.add_constraint(std::move(c));
          }
          break;
        case 3:
          for (const auto& cb : cleaners) {
            if (y3[i][cb.id] < 0) continue;
            const double leg = tt(bi, ci.location, cb.location) +
                               ci.cleaning_time +
                               tt(bi, cb.location, bi.calls[j].location);
            auto c = base_con(tag + "_cb" + std::to_string(cb.id));
            c.terms.push_back({y3[i][cb.id], -leg});
            c.rhs = ci.time_on_scene - big_m;
            m.add_constraint(std::move(c));
          }
          break;
        default: {
          auto c = base_con(tag);
          c.rhs = ci.time_on_scene +
                  tt(bi, ci.location, bi.calls[j].location) - big_m;
          m.add_constraint(std::move(c));
          break;
        }
      }
    }
  }

  // Completion bounds. Transported patients complete at hospital arrival,
  // the rest at scene arrival.
  for (int i = 0; i < n; ++i) {
    const Call& c = bi.calls[i];
    const std::string tag = "completion_i" + std::to_string(i);
    switch (c.ride_class()) {
      case 1:
        for (const auto& h : hospitals) {
          for (const auto& cb : cleaners) {
            if (y1[i][h.id][cb.id] < 0) continue;
            add_class_bound(m, bi, v, i, c.time_on_scene, y1[i][h.id][cb.id],
                            tt(bi, c.location, h.location),
                            tag + "_h" + std::to_string(h.id) + "_cb" +
                                std::to_string(cb.id));
          }
        }
        break;
      case 2:
        for (const auto& h : hospitals) {
          if (y2[i][h.id] < 0) continue;
          add_class_bound(m, bi, v, i, c.time_on_scene, y2[i][h.id],
                          tt(bi, c.location, h.location),
                          tag + "_h" + std::to_string(h.id));
        }
        break;
      default:
        add_class_bound(m, bi, v, i, 0.0, -1, 0.0, tag);
        break;
    }
  }
  return m;
}

std::string export_lp(const LinearModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "Minimize\n obj:";
  bool any = false;
  for (size_t i = 0; i < model.vars.size(); ++i) {
    const double c = model.vars[i].objective;
    if (c == 0.0) continue;
    out << (c < 0 ? " - " : (any ? " + " : " ")) << std::abs(c) << " "
        << model.vars[i].name;
    any = true;
  }
  if (model.objective_constant != 0.0) {
    const double c = model.objective_constant;
    out << (c < 0 ? " - " : (any ? " + " : " ")) << std::abs(c);
    any = true;
  }
  if (!any) out << " 0";
  out << "\nSubject To\n";
  for (const auto& con : model.cons) {
    out << " " << con.name << ":";
    bool first = true;
    for (const auto& term : con.terms) {
      out << (term.coef < 0 ? " - " : (first ? " " : " + "))
          << std::abs(term.coef) << " " << model.vars[term.var].name;
      first = false;
    }
    const char* sense = con.sense == '<' ? "<=" : (con.sense == '>' ? ">=" : "=");
    out << " " << sense << " " << con.rhs << "\n";
  }
  out << "Bounds\n";
  for (const auto& var : model.vars) {
    if (var.binary) continue;
    out << " " << var.lb << " <= " << var.name << " <= ";
    if (std::isfinite(var.ub))
      out << var.ub;
    else
      out << "+inf";
    out << "\n";
  }
  bool any_bin = false;
  for (const auto& var : model.vars) any_bin |= var.binary;
  if (any_bin) {
    out << "Binaries\n";
    for (const auto& var : model.vars)
      if (var.binary) out << " " << var.name << "\n";
  }
  out << "End\n";
  return out.str();
}

BatchSolution evaluate_sequences(
    const BatchInstance& bi, const std::vector<std::vector<int>>& sequences) {
  const int n = static_cast<int>(bi.calls.size());
  BatchSolution sol;
  sol.sequences = sequences;
  sol.scene_arrival.assign(n, 0.0);
  std::vector<double> completion(bi.classes(), 0.0);

  for (size_t k = 0; k < sequences.size(); ++k) {
    Departure dep = departure_at_t0(bi, bi.fleet[k]);
    double free_time = dep.ready;
    Location free_at = dep.from;
    for (int call_id : sequences[k]) {
      const Call& c = bi.calls[call_id];
      const double arrive =
          std::max(free_time + tt(bi, free_at, c.location), c.arrival_time);
      sol.scene_arrival[call_id] = arrive;
      const ServiceProfile prof = service_profile(bi, c);
      const double done = arrive + prof.tau - completion_offset(bi, c);
      auto& m = completion[bi.class_of(c.type)];
      m = std::max(m, done);
      free_time = arrive + prof.delta;
      free_at = prof.free_at;
    }
  }
  sol.class_completion = completion;
  sol.objective = objective_constant_for(bi);
  for (int p = 0; p < bi.classes(); ++p)
    sol.objective += bi.class_theta[p] * completion[p];
  sol.feasible = true;
  return sol;
}

namespace {

struct SearchContext {
  const BatchInstance* bi;
  std::vector<int> order;                   // branch order (call ids)
  std::vector<std::vector<int>> compat;     // per call id
  std::vector<double> floor_completion;     // per call id, objective scale
  std::vector<ServiceProfile> prof;         // per call id
  std::vector<std::vector<int>> seq;        // per ambulance
  BatchSolution best;
  long nodes = 0;
  long budget = 0;
  bool exhausted = true;
};

/// Objective of the current partial assignment plus per-class best-case
/// completions of everything still unassigned. Admissible under the
/// triangle inequality: inserting more calls never shrinks an assigned
/// call's completion, and no call can complete before its first-ride floor.
double lower_bound(SearchContext& sc, size_t next_pos) {
  const BatchInstance& bi = *sc.bi;
  std::vector<double> completion(bi.classes(), 0.0);
  for (size_t k = 0; k < sc.seq.size(); ++k) {
    Departure dep = departure_at_t0(bi, bi.fleet[k]);
    double free_time = dep.ready;
    Location free_at = dep.from;
    for (int call_id : sc.seq[k]) {
      const Call& c = bi.calls[call_id];
      const double arrive =
          std::max(free_time + tt(bi, free_at, c.location), c.arrival_time);
      const ServiceProfile& prof = sc.prof[call_id];
      auto& m = completion[bi.class_of(c.type)];
      m = std::max(m, arrive + prof.tau - completion_offset(bi, c));
      free_time = arrive + prof.delta;
      free_at = prof.free_at;
    }
  }
  for (size_t p = next_pos; p < sc.order.size(); ++p) {
    const int call_id = sc.order[p];
    auto& m = completion[bi.class_of(bi.calls[call_id].type)];
    m = std::max(m, sc.floor_completion[call_id]);
  }
  double lb = objective_constant_for(bi);
  for (int p = 0; p < bi.classes(); ++p)
    lb += bi.class_theta[p] * completion[p];
  return lb;
}

void dfs(SearchContext& sc, size_t pos) {
  const BatchInstance& bi = *sc.bi;
  if (pos == sc.order.size()) {
    BatchSolution cand = evaluate_sequences(bi, sc.seq);
    if (!sc.best.feasible || cand.objective < sc.best.objective) {
      const long nodes = sc.best.nodes;
      sc.best = cand;
      sc.best.nodes = nodes;
    }
    return;
  }
  const int call_id = sc.order[pos];
  for (int k : sc.compat[call_id]) {
    auto& seq = sc.seq[k];
    for (size_t at = 0; at <= seq.size(); ++at) {
      if (sc.nodes >= sc.budget) {
        sc.exhausted = false;
        return;
      }
      ++sc.nodes;
      seq.insert(seq.begin() + at, call_id);
      const double lb = lower_bound(sc, pos + 1);
      if (!sc.best.feasible || lb < sc.best.objective - 1e-12) {
        dfs(sc, pos + 1);
      }
      seq.erase(seq.begin() + at);
      if (!sc.exhausted) return;
    }
  }
}

}  // namespace

BatchSolution solve_exact(const BatchInstance& bi, const SolveOptions& opts) {
  bi.validate();
  const int n = static_cast<int>(bi.calls.size());
  SearchContext sc;
  sc.bi = &bi;
  sc.budget = opts.node_budget;
  sc.seq.assign(bi.fleet.size(), {});
  sc.compat.resize(n);
  sc.prof.reserve(n);
  for (int i = 0; i < n; ++i) {
    sc.compat[i] = bi.compatible(bi.calls[i]);
    sc.prof.push_back(service_profile(bi, bi.calls[i]));
  }
  // Fail-first: fewest compatible ambulances branch earliest.
  sc.order.resize(n);
  for (int i = 0; i < n; ++i) sc.order[i] = i;
  std::stable_sort(sc.order.begin(), sc.order.end(), [&](int a, int b) {
    return sc.compat[a].size() < sc.compat[b].size();
  });
  sc.floor_completion.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double floor = kInf;
    for (int k : sc.compat[i]) {
      const Departure dep = departure_at_t0(bi, bi.fleet[k]);
      floor = std::min(floor,
                       dep.ready + tt(bi, dep.from, bi.calls[i].location));
    }
    sc.floor_completion[i] =
        std::max(floor, bi.calls[i].arrival_time) + sc.prof[i].tau -
        completion_offset(bi, bi.calls[i]);
  }

  // Greedy incumbent: best insertion in branch order.
  for (int call_id : sc.order) {
    double best_obj = kInf;
    int best_k = -1;
    size_t best_at = 0;
    for (int k : sc.compat[call_id]) {
      auto& seq = sc.seq[k];
      for (size_t at = 0; at <= seq.size(); ++at) {
        seq.insert(seq.begin() + at, call_id);
        const double obj = evaluate_sequences(bi, sc.seq).objective;
        seq.erase(seq.begin() + at);
        if (obj < best_obj) {
          best_obj = obj;
          best_k = k;
          best_at = at;
        }
      }
    }
    sc.seq[best_k].insert(sc.seq[best_k].begin() + best_at, call_id);
  }
  sc.best = evaluate_sequences(bi, sc.seq);
  sc.seq.assign(bi.fleet.size(), {});

  dfs(sc, 0);
  sc.best.nodes = sc.nodes;
  sc.best.proved_optimal = sc.exhausted;
  return sc.best;
}

std::string batch_solution_to_json(const BatchInstance& bi,
                                   const BatchSolution& sol) {
  nlohmann::json j;
  j["feasible"] = sol.feasible;
  j["proved_optimal"] = sol.proved_optimal;
  j["objective"] = sol.objective;
  j["nodes"] = sol.nodes;
  j["sequences"] = sol.sequences;
  j["scene_arrival"] = sol.scene_arrival;
  j["class_completion"] = sol.class_completion;
  nlohmann::json assign = nlohmann::json::array();
  for (size_t k = 0; k < sol.sequences.size(); ++k) {
    for (size_t r = 0; r < sol.sequences[k].size(); ++r) {
      const int call_id = sol.sequences[k][r];
      const ServiceProfile prof = service_profile(bi, bi.calls[call_id]);
      assign.push_back({{"call", call_id},
                        {"ambulance", static_cast<int>(k)},
                        {"position", static_cast<int>(r)},
                        {"hospital", prof.hospital},
                        {"cleaning_base", prof.cleaning_base}});
    }
  }
  j["assignments"] = assign;
  return j.dump(2);
}

BatchInstance batch_instance_from_json_text(const std::string& text,
                                            Instance& storage,
                                            const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (j.contains("instance_file")) {
    storage = load_instance(j.at("instance_file").get<std::string>());
  } else if (j.contains("instance")) {
    storage = instance_from_json_text(j.at("instance").dump(), origin);
  } else {
    throw ConfigError(origin + ": missing 'instance' or 'instance_file'");
  }
  BatchInstance bi;
  bi.base = &storage;
  bi.t0 = j.value("t0", 0.0);
  bi.calls = calls_from_json_text(j.dump(), origin);
  for (size_t i = 0; i < bi.calls.size(); ++i)
    bi.calls[i].id = static_cast<int>(i);
  bi.fleet = storage.initial_fleet();
  if (j.contains("class_theta"))
    bi.class_theta = j.at("class_theta").get<std::vector<double>>();
  if (j.contains("type_class"))
    bi.type_class = j.at("type_class").get<std::vector<int>>();
  bi.big_m = j.value("big_m", 0.0);
  const std::string mode = j.value("objective_mode", "per_call_relative");
  if (mode == "per_call_relative") {
    bi.objective_mode = CompletionObjective::PerCallRelative;
  } else if (mode == "absolute") {
    bi.objective_mode = CompletionObjective::AbsoluteEarliest;
  } else {
    throw ConfigError(origin + ".objective_mode: unknown value '" + mode + "'");
  }
  if (j.contains("fleet_states")) {
    for (const auto& fs : j.at("fleet_states")) {
      const int id = fs.at("id").get<int>();
      AmbulanceState& amb = bi.fleet.at(id);
      if (fs.contains("free")) {
        amb.free_location = {fs.at("free").at("x").get<double>(),
                             fs.at("free").at("y").get<double>()};
        amb.free_time = fs.at("free").at("t").get<double>();
      }
      if (fs.contains("base")) {
        amb.base_location = {fs.at("base").at("x").get<double>(),
                             fs.at("base").at("y").get<double>()};
        amb.base_time = fs.at("base").at("t").get<double>();
      }
    }
  }
  bi.validate();
  return bi;
}

BatchInstance load_batch_instance(const std::string& path, Instance& storage) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return batch_instance_from_json_text(buf.str(), storage, path);
}

}  // namespace ambopt
