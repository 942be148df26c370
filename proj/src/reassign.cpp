#include "ambopt/reassign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ambopt {

int poisson_quantile(double mean, double alpha) {
  if (mean < 0.0) throw std::invalid_argument("negative Poisson mean");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha outside (0, 1)");
  if (mean == 0.0) return 0;
  double pmf = std::exp(-mean);
  double cdf = pmf;
  int q = 0;
  while (cdf < alpha) {
    ++q;
    pmf *= mean / q;
    cdf += pmf;
    if (q > 10'000'000) throw std::runtime_error("poisson_quantile diverged");
  }
  return q;
}

namespace {

double overlap_length(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Visits every (window, overlap seconds) pair of [t0, t0+delta] against the
// periodic window partition.
template <typename F>
void for_each_window_overlap(const IntensityTable& t, double t0, double delta,
                             F&& visit) {
  if (delta <= 0.0) return;
  const double period = t.period();
  double start = std::fmod(t0, period);
  if (start < 0.0) start += period;
  double remaining = delta;
  while (remaining > 1e-12) {
    const double chunk = std::min(remaining, period - start);
    for (int w = 0; w < t.windows; ++w) {
      const double w0 = w * t.window_length;
      const double w1 = w0 + t.window_length;
      const double ov = overlap_length(start, start + chunk, w0, w1);
      if (ov > 0.0) visit(w, ov);
    }
    remaining -= chunk;
    start = 0.0;
  }
}

}  // namespace

double mean_count_over_window(const IntensityTable& table, int cell, int type,
                              double t0, double delta) {
  double total = 0.0;
  for_each_window_overlap(table, t0, delta, [&](int w, double ov) {
    total += table.rate(cell, w, type) * (ov / table.window_length);
  });
  return total;
}

double max_count_over_window(const IntensityTable& table, int cell, int type,
                             double t0, double delta) {
  if (!table.has_max_counts()) return 0.0;
  double total = 0.0;
  std::vector<char> touched(table.windows, 0);
  for_each_window_overlap(table, t0, delta, [&](int w, double ov) {
    if (ov > 1e-12 && !touched[w]) {
      touched[w] = 1;
      total += table.max_count(cell, w, type);
    }
  });
  return total;
}

int HomeBaseRule::choose_base(const WorldState& state, int ambulance_id) {
  return state.fleet.at(ambulance_id).home_base;
}

int ClosestBaseRule::choose_base(const WorldState& state, int ambulance_id) {
  const AmbulanceState& amb = state.fleet.at(ambulance_id);
  const Location from =
      available_position(amb, state.clock, instance_->geo);
  return instance_->closest_base(from);
}

std::vector<int> voronoi_cell_of_base(const Instance& instance,
                                      const std::vector<Location>& centroids) {
  std::vector<int> out;
  out.reserve(centroids.size());
  for (const auto& c : centroids) out.push_back(instance.closest_base(c));
  return out;
}

BaseIntensity aggregate_to_bases(const Instance& instance,
                                 const IntensityTable& grid_table,
                                 const std::vector<Location>& centroids) {
  const std::vector<int> owner = voronoi_cell_of_base(instance, centroids);
  IntensityTable base = IntensityTable::zeros(
      static_cast<int>(instance.facilities.bases.size()), grid_table.windows,
      grid_table.call_types, grid_table.window_length);
  if (grid_table.has_max_counts()) base.enable_max_counts();
  for (int cell = 0; cell < grid_table.cells; ++cell) {
    const int b = owner.at(cell);
    for (int w = 0; w < grid_table.windows; ++w) {
      for (int c = 0; c < grid_table.call_types; ++c) {
        base.rate(b, w, c) += grid_table.rate(cell, w, c);
        if (grid_table.has_max_counts())
          base.max_count(b, w, c) += grid_table.max_count(cell, w, c);
      }
    }
  }
  return BaseIntensity{std::move(base)};
}

BestBaseRule::BestBaseRule(const Instance& instance, BaseIntensity intensity,
                           BestBaseConfig config)
    : instance_(&instance),
      intensity_(std::move(intensity)),
      config_(config) {
  if (!(config_.delta > 0.0)) throw ConfigError("bbr: delta must be positive");
  if (!(config_.alpha > 0.0 && config_.alpha < 1.0))
    throw ConfigError("bbr: alpha outside (0, 1)");
  if (intensity_.table.cells !=
      static_cast<int>(instance.facilities.bases.size()))
    throw ConfigError("bbr: intensity table not indexed by base");
}

std::vector<int> BestBaseRule::admissible_types_by_priority(
    int ambulance_type) const {
  std::vector<int> types;
  for (const auto& ct : instance_->call_types) {
    if (instance_->quality.compatible(ambulance_type, ct.id))
      types.push_back(ct.id);
  }
  std::sort(types.begin(), types.end(), [&](int a, int b) {
    const double ta = instance_->theta(a), tb = instance_->theta(b);
    return ta > tb || (ta == tb && a < b);
  });
  return types;
}

int BestBaseRule::arrival_count(const WorldState& state, int ambulance_id,
                                int base, int call_type,
                                double arrive_at) const {
  const Location base_loc = state.facilities.bases.at(base).location;
  int count = 0;
  for (const auto& other : state.fleet) {
    if (other.id == ambulance_id) continue;
    if (!instance_->quality.compatible(other.type, call_type)) continue;
    switch (availability(other, state.clock)) {
      case Availability::AtBase:
        if (other.base_location == base_loc) ++count;
        break;
      case Availability::EnRouteToBase:
        if (!other.awaiting_reassignment && other.base_location == base_loc &&
            other.base_time <= arrive_at)
          ++count;
        break;
      case Availability::Busy:
        // No staging base committed yet.
        break;
    }
  }
  return count;
}

int BestBaseRule::deficit(const WorldState& state, int ambulance_id, int base,
                          int priority_index) const {
  const AmbulanceState& amb = state.fleet.at(ambulance_id);
  const std::vector<int> types = admissible_types_by_priority(amb.type);
  const int call_type = types.at(priority_index);
  const Location from = available_position(amb, state.clock, instance_->geo);
  const Location base_loc = state.facilities.bases.at(base).location;
  const double arrive_at =
      state.clock + travel_time_ms(from, base_loc, state.clock, instance_->geo);
  int q;
  if (config_.use_max_counts) {
    q = static_cast<int>(std::llround(max_count_over_window(
        intensity_.table, base, call_type, arrive_at, config_.delta)));
  } else {
    const double mean = mean_count_over_window(intensity_.table, base,
                                               call_type, arrive_at,
                                               config_.delta);
    q = poisson_quantile(mean, config_.alpha);
  }
  return q - arrival_count(state, ambulance_id, base, call_type, arrive_at);
}

int BestBaseRule::choose_base(const WorldState& state, int ambulance_id) {
  const AmbulanceState& amb = state.fleet.at(ambulance_id);
  const std::vector<int> types = admissible_types_by_priority(amb.type);
  const int n_bases = static_cast<int>(state.facilities.bases.size());
  if (n_bases == 0) throw SimulationError("bbr: no bases");

  int global_best_base = -1;
  int global_best_deficit = std::numeric_limits<int>::min();
  for (int l = 0; l < static_cast<int>(types.size()); ++l) {
    int level_best_base = -1;
    int level_best = std::numeric_limits<int>::min();
    for (int b = 0; b < n_bases; ++b) {
      const int d = deficit(state, ambulance_id, b, l);
      if (d > level_best) {
        level_best = d;
        level_best_base = b;
      }
    }
    if (level_best > global_best_deficit) {
      global_best_deficit = level_best;
      global_best_base = level_best_base;
    }
    if (level_best > 0) return level_best_base;
  }
  return global_best_base;
}

std::unique_ptr<Reassigner> make_reassigner(const std::string& kind,
                                            const Instance& instance,
                                            const BaseIntensity* intensity,
                                            const BestBaseConfig& config) {
  if (kind == "hbr") return std::make_unique<HomeBaseRule>();
  if (kind == "cbr") return std::make_unique<ClosestBaseRule>(instance);
  if (kind == "bbr") {
    if (intensity == nullptr)
      throw ConfigError("bbr requires an intensity table");
    return std::make_unique<BestBaseRule>(instance, *intensity, config);
  }
  throw ConfigError("unknown base rule '" + kind + "'");
}

}  // namespace ambopt
