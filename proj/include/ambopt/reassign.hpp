#pragma once

#include <memory>
#include <vector>

#include "ambopt/simulator.hpp"

namespace ambopt {

/// Periodic Poisson rates per (cell, time window, call type). Windows
/// partition one period exactly; `rate` is the expected count within a
/// whole window. `max_count` optionally bounds the number of calls a
/// window can hold (used by the max-calls quantile mode).
struct IntensityTable {
  int cells = 0;
  int windows = 0;
  int call_types = 0;
  double window_length = 0.0;
  std::vector<double> rates;       // cells x windows x call_types
  std::vector<double> max_counts;  // same layout; empty unless provided

  double period() const { return window_length * windows; }
  size_t index(int cell, int window, int type) const {
    return (static_cast<size_t>(cell) * windows + window) * call_types + type;
  }
  double rate(int cell, int window, int type) const {
    return rates[index(cell, window, type)];
  }
  double& rate(int cell, int window, int type) {
    return rates[index(cell, window, type)];
  }
  bool has_max_counts() const { return !max_counts.empty(); }
  void enable_max_counts() {
    max_counts.assign(rates.size(), 0.0);
  }
  double max_count(int cell, int window, int type) const {
    return max_counts[index(cell, window, type)];
  }
  double& max_count(int cell, int window, int type) {
    return max_counts[index(cell, window, type)];
  }

  static IntensityTable zeros(int cells, int windows, int call_types,
                              double window_length) {
    IntensityTable t;
    t.cells = cells;
    t.windows = windows;
    t.call_types = call_types;
    t.window_length = window_length;
    t.rates.assign(static_cast<size_t>(cells) * windows * call_types, 0.0);
    return t;
  }
};

/// Smallest integer q with P(X <= q) >= alpha for X ~ Poisson(mean),
/// by direct CDF summation.
int poisson_quantile(double mean, double alpha);

/// Expected number of events of `type` in `cell` over [t0, t0 + delta]:
/// sum over windows of rate x overlap, where a full window contributes its
/// rate once. Wraps around the period.
double mean_count_over_window(const IntensityTable& table, int cell, int type,
                              double t0, double delta);

/// Same interval algebra for the bounded mode: sum of per-window maxima
/// over every window the interval touches.
double max_count_over_window(const IntensityTable& table, int cell, int type,
                             double t0, double delta);

class HomeBaseRule final : public Reassigner {
 public:
  std::string name() const override { return "hbr"; }
  int choose_base(const WorldState&, int ambulance_id) override;
  std::unique_ptr<Reassigner> clone() const override {
    return std::make_unique<HomeBaseRule>(*this);
  }
};

class ClosestBaseRule final : public Reassigner {
 public:
  explicit ClosestBaseRule(const Instance& instance) : instance_(&instance) {}
  std::string name() const override { return "cbr"; }
  int choose_base(const WorldState&, int ambulance_id) override;
  std::unique_ptr<Reassigner> clone() const override {
    return std::make_unique<ClosestBaseRule>(*this);
  }

 private:
  const Instance* instance_;
};

struct BestBaseConfig {
  double delta = 5400.0;  // lookahead, seconds
  double alpha = 0.9;
  /// When true, q is the summed per-window max count instead of the
  /// Poisson quantile.
  bool use_max_counts = false;
};

/// Rates aggregated onto base cells. Built from a gridded table through
/// the Voronoi partition of the bases, or supplied directly per base.
struct BaseIntensity {
  IntensityTable table;  // cells == number of bases

  static BaseIntensity per_base(IntensityTable table) {
    return BaseIntensity{std::move(table)};
  }
};

/// Assigns every grid cell (by centroid) to its closest base; ties go to
/// the lowest base id.
std::vector<int> voronoi_cell_of_base(const Instance& instance,
                                      const std::vector<Location>& centroids);

/// Folds a gridded intensity table onto base cells using the Voronoi map.
BaseIntensity aggregate_to_bases(const Instance& instance,
                                 const IntensityTable& grid_table,
                                 const std::vector<Location>& centroids);

class BestBaseRule final : public Reassigner {
 public:
  BestBaseRule(const Instance& instance, BaseIntensity intensity,
               BestBaseConfig config);
  std::string name() const override { return "bbr"; }
  int choose_base(const WorldState& state, int ambulance_id) override;
  std::unique_ptr<Reassigner> clone() const override {
    return std::make_unique<BestBaseRule>(*this);
  }

  /// Demand quantile minus forecast supply at base b for the ambulance's
  /// l-th admissible call type (may be negative).
  int deficit(const WorldState& state, int ambulance_id, int base,
              int priority_index) const;

  /// Call types the ambulance can serve, most urgent first.
  std::vector<int> admissible_types_by_priority(int ambulance_type) const;

 private:
  int arrival_count(const WorldState& state, int ambulance_id, int base,
                    int call_type, double arrive_at) const;

  const Instance* instance_;
  BaseIntensity intensity_;
  BestBaseConfig config_;
};

std::unique_ptr<Reassigner> make_reassigner(const std::string& kind,
                                            const Instance& instance,
                                            const BaseIntensity* intensity,
                                            const BestBaseConfig& config);

}  // namespace ambopt
