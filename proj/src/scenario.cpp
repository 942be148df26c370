#include "ambopt/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ambopt {

int GridSpec::cell_of(const Location& p) const {
  const double fx = (p.x - x_min) / (x_max - x_min) * nx;
  const double fy = (p.y - y_min) / (y_max - y_min) * ny;
  const int ix = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 1);
  const int iy = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 1);
  return iy * nx + ix;
}

Location GridSpec::cell_centroid(int cell) const {
  const int ix = cell % nx;
  const int iy = cell / nx;
  const double dx = (x_max - x_min) / nx;
  const double dy = (y_max - y_min) / ny;
  return {x_min + (ix + 0.5) * dx, y_min + (iy + 0.5) * dy};
}

void GridSpec::validate() const {
  if (nx < 1 || ny < 1) throw ConfigError("grid: nx and ny must be >= 1");
  if (!(x_max > x_min) || !(y_max > y_min))
    throw ConfigError("grid: empty bounding box");
  if (!(window_length > 0.0)) throw ConfigError("grid: window_length <= 0");
  const double ratio = period / window_length;
  if (std::abs(ratio - std::lround(ratio)) > 1e-9)
    throw ConfigError("grid: period must be a whole number of windows");
}

GriddedIntensity estimate_intensities(const std::vector<HistoryEvent>& history,
                                      const GridSpec& grid, int call_types) {
  grid.validate();
  GriddedIntensity gi;
  gi.grid = grid;
  gi.table = IntensityTable::zeros(grid.cells(), grid.windows(), call_types,
                                   grid.window_length);
  if (history.empty()) return gi;

  double t_max = 0.0;
  for (const auto& e : history) t_max = std::max(t_max, e.t);
  const double n_periods = std::floor(t_max / grid.period) + 1.0;

  for (const auto& e : history) {
    if (e.type < 0 || e.type >= call_types)
      throw ConfigError("history event with unknown call type " +
                        std::to_string(e.type));
    double pos = std::fmod(e.t, grid.period);
    if (pos < 0.0) pos += grid.period;
    const int w = std::clamp(static_cast<int>(pos / grid.window_length), 0,
                             grid.windows() - 1);
    gi.table.rate(grid.cell_of(e.location), w, e.type) += 1.0;
  }
  for (auto& r : gi.table.rates) r /= n_periods;
  return gi;
}

std::vector<Call> sample_scenario(const GriddedIntensity& intensity,
                                  const ServiceModel& service, double t0,
                                  double horizon, std::mt19937_64& rng) {
  const GridSpec& g = intensity.grid;
  const IntensityTable& table = intensity.table;
  std::vector<Call> out;
  if (horizon <= 0.0) return out;

  const double dx = (g.x_max - g.x_min) / g.nx;
  const double dy = (g.y_max - g.y_min) / g.ny;
  const double t_end = t0 + horizon;
  double s = t0;
  while (s < t_end - 1e-12) {
    double pos = std::fmod(s, g.period);
    if (pos < 0.0) pos += g.period;
    const int w = std::clamp(static_cast<int>(pos / g.window_length), 0,
                             g.windows() - 1);
    const double window_end = s + (g.window_length - std::fmod(pos, g.window_length));
    const double e = std::min(t_end, window_end);
    const double frac = (e - s) / g.window_length;
    for (int cell = 0; cell < g.cells(); ++cell) {
      const int ix = cell % g.nx;
      const int iy = cell / g.nx;
      for (int type = 0; type < table.call_types; ++type) {
        const double lambda = table.rate(cell, w, type) * frac;
        if (lambda <= 0.0) continue;
        std::poisson_distribution<int> n_dist(lambda);
        const int n = n_dist(rng);
        for (int k = 0; k < n; ++k) {
          std::uniform_real_distribution<double> ut(s, e);
          std::uniform_real_distribution<double> ux(g.x_min + ix * dx,
                                                    g.x_min + (ix + 1) * dx);
          std::uniform_real_distribution<double> uy(g.y_min + iy * dy,
                                                    g.y_min + (iy + 1) * dy);
          Call c;
          c.arrival_time = ut(rng);
          c.location = {ux(rng), uy(rng)};
          c.type = type;
          const ServiceSpec& spec = service.at(type);
          c.time_on_scene = spec.time_on_scene;
          c.needs_hospital = spec.needs_hospital;
          c.time_at_hospital = spec.time_at_hospital;
          c.needs_cleaning = spec.needs_cleaning;
          c.cleaning_time = spec.cleaning_time;
          out.push_back(c);
        }
      }
    }
    s = e;
  }
  std::stable_sort(out.begin(), out.end(), [](const Call& a, const Call& b) {
    return a.arrival_time < b.arrival_time;
  });
  for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

std::vector<Decision> enumerate_first_stage(const Simulator& sim,
                                            const WorldState& state,
                                            const Event& event,
                                            const RolloutConfig& config) {
  const Instance& ins = sim.instance();
  const double now = state.clock;
  std::vector<Decision> out;

  auto hospital_options = [&](const Call& call) {
    std::vector<int> hs;
    if (!call.needs_hospital) {
      hs.push_back(-1);
    } else if (config.combinatorial_hospitals) {
      for (const auto& h : ins.facilities.hospitals)
        if (h.admits(call.type)) hs.push_back(h.id);
    } else {
      hs.push_back(ins.closest_hospital(call.location, call.type));
    }
    return hs;
  };
  auto cleaning_for = [&](const Call& call, int hospital) {
    if (!call.needs_cleaning) return -1;
    const Location from = call.needs_hospital
                              ? ins.facilities.hospitals[hospital].location
                              : call.location;
    return ins.closest_cleaning_base(from);
  };
  auto sorted_by_rank = [&](std::vector<int> ids) {
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      const int ra = ins.rank(state.fleet[a].type);
      const int rb = ins.rank(state.fleet[b].type);
      return ra < rb || (ra == rb && a < b);
    });
    return ids;
  };

  if (event.kind == Event::Kind::CallArrival) {
    const Call& call = state.calls[event.call];
    out.push_back(Decision::enqueue(call.id));
    std::vector<int> avail;
    for (int id : compatible_ambulances(call, state.fleet, ins.quality)) {
      if (availability(state.fleet[id], now) != Availability::Busy)
        avail.push_back(id);
    }
    for (int id : sorted_by_rank(std::move(avail))) {
      for (int h : hospital_options(call))
        out.push_back(Decision::dispatch(id, call.id, h, cleaning_for(call, h)));
    }
  } else {
    const int j = event.ambulance;
    for (const auto& b : state.facilities.bases)
      out.push_back(Decision::to_base(j, b.id));
    for (int qid : state.queue) {
      const Call& call = state.calls[qid];
      if (!ins.quality.compatible(state.fleet[j].type, call.type)) continue;
      if (call.restricted_to && call.restricted_to->count(j) == 0) continue;
      for (int h : hospital_options(call))
        out.push_back(Decision::dispatch(j, qid, h, cleaning_for(call, h)));
    }
  }
  return out;
}

double first_stage_cost(const Simulator& sim, const WorldState& state,
                        const Decision& d) {
  if (d.kind != Decision::Kind::Dispatch) return 0.0;
  return allocation_cost_at(sim.instance(), state.fleet[d.ambulance],
                            state.calls[d.call], state.clock);
}

std::vector<Call> augment_scenario(const std::vector<Call>& raw_future,
                                   const Decision& x0, const Event& event,
                                   const WorldState& state_before) {
  std::vector<Call> out;
  const double now = state_before.clock;

  for (int qid : state_before.queue) {
    if (x0.kind == Decision::Kind::Dispatch && x0.call == qid) continue;
    Call c = state_before.calls[qid];
    if (x0.kind == Decision::Kind::ToBase) {
      // The staged ambulance turned these calls down.
      std::set<int> allowed;
      if (c.restricted_to) {
        allowed = *c.restricted_to;
      } else {
        for (const auto& amb : state_before.fleet) allowed.insert(amb.id);
      }
      allowed.erase(x0.ambulance);
      c.restricted_to = std::move(allowed);
    }
    out.push_back(std::move(c));
  }
  if (event.kind == Event::Kind::CallArrival &&
      x0.kind == Decision::Kind::Enqueue) {
    // Queued deliberately: only an ambulance that is busy right now may
    // pick it up.
    Call c = state_before.calls[x0.call];
    std::set<int> busy;
    for (const auto& amb : state_before.fleet)
      if (amb.busy(now)) busy.insert(amb.id);
    c.restricted_to = std::move(busy);
    out.push_back(std::move(c));
  }
  out.insert(out.end(), raw_future.begin(), raw_future.end());
  std::stable_sort(out.begin(), out.end(), [](const Call& a, const Call& b) {
    return a.arrival_time < b.arrival_time;
  });
  return out;
}

namespace {

/// Second-stage value of one (candidate, scenario) pair; infinity when the
/// heuristic cannot serve every call of the augmented scenario.
double evaluate_pair(const Simulator& sim, const WorldState& state,
                     const Event& event, const Decision& x0,
                     const std::vector<Call>& raw_future,
                     const std::string& heuristic) {
  const Instance& ins = sim.instance();
  WorldState w = state;
  // Second stage must not peek at the real future beyond this event.
  w.calls.resize(w.next_call);
  w.dispatched.resize(w.next_call);

  std::vector<Call> stage2 = augment_scenario(raw_future, x0, event, w);
  try {
    sim.apply_decision(w, x0, /*allow_busy_dispatch=*/false);
  } catch (const SimulationError&) {
    return std::numeric_limits<double>::infinity();
  }
  const size_t baseline = w.records.size();

  w.calls = std::move(stage2);
  for (size_t i = 0; i < w.calls.size(); ++i)
    w.calls[i].id = static_cast<int>(i);
  w.dispatched.assign(w.calls.size(), 0);
  w.queue.clear();
  w.next_call = 0;

  auto policy = make_policy(heuristic, ins);
  ClosestBaseRule cbr(ins);
  try {
    policy->begin(w);
    sim.run_loop(w, *policy, cbr);
  } catch (const SimulationError&) {
    return std::numeric_limits<double>::infinity();
  }
  double total = 0.0;
  for (size_t r = baseline; r < w.records.size(); ++r)
    total += w.records[r].allocation_cost;
  return total;
}

RolloutChoice pick_best(const Simulator& sim, const WorldState& state,
                        const std::vector<Decision>& candidates,
                        const std::vector<std::vector<double>>& values,
                        int n_scenarios) {
  RolloutChoice choice;
  choice.candidates.reserve(candidates.size());
  int best = -1;
  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    CandidateValue cv;
    cv.decision = candidates[ci];
    cv.immediate = first_stage_cost(sim, state, candidates[ci]);
    double sum = 0.0;
    bool ok = true;
    for (int si = 0; si < n_scenarios; ++si) {
      if (!std::isfinite(values[ci][si])) ok = false;
      sum += values[ci][si];
    }
    cv.feasible = ok;
    cv.mean_future = ok ? sum / n_scenarios : 0.0;
    if (ok && (best < 0 ||
               cv.total() < choice.candidates[best].total())) {
      best = static_cast<int>(ci);
    }
    choice.candidates.push_back(cv);
  }
  if (best < 0)
    throw SimulationError("rollout: every first-stage candidate failed");
  choice.decision = choice.candidates[best].decision;
  return choice;
}

}  // namespace

RolloutChoice rollout_decide_serial(
    const Simulator& sim, const WorldState& state, const Event& event,
    const RolloutConfig& config,
    const std::vector<std::vector<Call>>& scenarios) {
  const std::vector<Decision> candidates =
      enumerate_first_stage(sim, state, event, config);
  const int n = static_cast<int>(scenarios.size());
  std::vector<std::vector<double>> values(
      candidates.size(), std::vector<double>(std::max(n, 1), 0.0));
  for (size_t ci = 0; ci < candidates.size(); ++ci)
    for (int si = 0; si < n; ++si)
      values[ci][si] = evaluate_pair(sim, state, event, candidates[ci],
                                     scenarios[si], config.heuristic);
  return pick_best(sim, state, candidates, values, n);
}

RolloutChoice rollout_decide(const Simulator& sim, const WorldState& state,
                             const Event& event, const RolloutConfig& config,
                             const std::vector<std::vector<Call>>& scenarios) {
  if (!config.parallel)
    return rollout_decide_serial(sim, state, event, config, scenarios);
  const std::vector<Decision> candidates =
      enumerate_first_stage(sim, state, event, config);
  const int n = static_cast<int>(scenarios.size());
  const int nc = static_cast<int>(candidates.size());
  std::vector<std::vector<double>> values(
      nc, std::vector<double>(std::max(n, 1), 0.0));
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(dynamic)
#endif
  for (int ci = 0; ci < nc; ++ci) {
    for (int si = 0; si < n; ++si) {
      values[ci][si] = evaluate_pair(sim, state, event, candidates[ci],
                                     scenarios[si], config.heuristic);
    }
  }
  return pick_best(sim, state, candidates, values, n);
}

RolloutPolicy::RolloutPolicy(const Instance& instance, RolloutConfig config,
                             ScenarioSource source)
    : instance_(&instance), config_(std::move(config)), source_(std::move(source)) {
  if (config_.n_scenarios < 1)
    throw ConfigError("rollout: n_scenarios must be >= 1");
  if (!(config_.horizon > 0.0)) throw ConfigError("rollout: horizon <= 0");
  if (!is_policy_kind(config_.heuristic))
    throw ConfigError("rollout: unknown heuristic '" + config_.heuristic + "'");
}

RolloutPolicy::ScenarioSource RolloutPolicy::poisson_source(
    const GriddedIntensity& intensity, const ServiceModel& service,
    const RolloutConfig& config, uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  const int n = config.n_scenarios;
  const double horizon = config.horizon;
  return [rng, n, horizon, intensity, service](double now) {
    std::vector<std::vector<Call>> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i)
      out.push_back(sample_scenario(intensity, service, now, horizon, *rng));
    return out;
  };
}

void RolloutPolicy::decide_and_apply(DecisionContext& ctx, const Event& event) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::vector<Call>> scenarios = source_(ctx.now());
  Simulator sim(*instance_);
  const RolloutChoice choice =
      rollout_decide(sim, ctx.state(), event, config_, scenarios);
  ctx.apply(choice.decision);
  const auto t1 = std::chrono::steady_clock::now();
  decision_ms_.push_back(
      std::chrono::duration<double, std::milli>(t1 - t0).count());
}

void RolloutPolicy::on_call(DecisionContext& ctx, int call_id) {
  decide_and_apply(ctx, {Event::Kind::CallArrival, ctx.now(), call_id, -1});
}

void RolloutPolicy::on_completion(DecisionContext& ctx, int ambulance_id) {
  decide_and_apply(ctx,
                   {Event::Kind::ServiceCompletion, ctx.now(), -1, ambulance_id});
}

GriddedIntensity intensity_from_json_text(const std::string& text,
                                          const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  GriddedIntensity gi;
  const auto& g = j.at("grid");
  gi.grid.x_min = g.at("x_min").get<double>();
  gi.grid.x_max = g.at("x_max").get<double>();
  gi.grid.y_min = g.at("y_min").get<double>();
  gi.grid.y_max = g.at("y_max").get<double>();
  gi.grid.nx = g.at("nx").get<int>();
  gi.grid.ny = g.at("ny").get<int>();
  gi.grid.window_length = g.at("window_seconds").get<double>();
  gi.grid.period = g.at("period_seconds").get<double>();
  gi.grid.validate();
  const int call_types = j.at("call_types").get<int>();
  gi.table = IntensityTable::zeros(gi.grid.cells(), gi.grid.windows(),
                                   call_types, gi.grid.window_length);
  for (const auto& e : j.value("entries", nlohmann::json::array())) {
    gi.table.rate(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()) =
        e.at(3).get<double>();
  }
  if (j.contains("max_counts")) {
    gi.table.enable_max_counts();
    for (const auto& e : j.at("max_counts")) {
      gi.table.max_count(e.at(0).get<int>(), e.at(1).get<int>(),
                         e.at(2).get<int>()) = e.at(3).get<double>();
    }
  }
  return gi;
}

std::string intensity_to_json_text(const GriddedIntensity& gi) {
  nlohmann::json j;
  j["grid"] = {{"x_min", gi.grid.x_min},     {"x_max", gi.grid.x_max},
               {"y_min", gi.grid.y_min},     {"y_max", gi.grid.y_max},
               {"nx", gi.grid.nx},           {"ny", gi.grid.ny},
               {"window_seconds", gi.grid.window_length},
               {"period_seconds", gi.grid.period}};
  j["call_types"] = gi.table.call_types;
  nlohmann::json entries = nlohmann::json::array();
  for (int cell = 0; cell < gi.table.cells; ++cell)
    for (int w = 0; w < gi.table.windows; ++w)
      for (int c = 0; c < gi.table.call_types; ++c)
        if (gi.table.rate(cell, w, c) != 0.0)
          entries.push_back({cell, w, c, gi.table.rate(cell, w, c)});
  j["entries"] = entries;
  if (gi.table.has_max_counts()) {
    nlohmann::json mc = nlohmann::json::array();
    for (int cell = 0; cell < gi.table.cells; ++cell)
      for (int w = 0; w < gi.table.windows; ++w)
        for (int c = 0; c < gi.table.call_types; ++c)
          if (gi.table.max_count(cell, w, c) != 0.0)
            mc.push_back({cell, w, c, gi.table.max_count(cell, w, c)});
    j["max_counts"] = mc;
  }
  return j.dump(2);
}

GriddedIntensity load_intensity(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return intensity_from_json_text(buf.str(), path);
}

std::vector<HistoryEvent> load_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
  };
  const auto header = split(line);
  if (header.size() != 4)
    throw ConfigError(path + ": expected header t,x,y,type or t,lat,lon,type");
  const bool latlon = header[1] == "lat";
  if (!latlon && header[1] != "x")
    throw ConfigError(path + ": unknown column '" + header[1] + "'");

  std::vector<HistoryEvent> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto parts = split(line);
    if (parts.size() != 4)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 4 columns");
    HistoryEvent e;
    try {
      e.t = std::stod(parts[0]);
      const double a = std::stod(parts[1]);
      const double b = std::stod(parts[2]);
      // lat,lon order maps to (y, x).
      e.location = latlon ? Location{b, a} : Location{a, b};
      e.type = std::stoi(parts[3]);
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad number");
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace ambopt
