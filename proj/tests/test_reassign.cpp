#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace ambopt;
using namespace ambopt::testing;

namespace {

// Independent Poisson CDF oracle built from log-space pmf terms.
int quantile_oracle(double mean, double alpha) {
  if (mean == 0.0) return 0;
  double cdf = 0.0;
  int k = 0;
  while (true) {
    cdf += std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
    if (cdf >= alpha) return k;
    ++k;
  }
}

IntensityTable two_window_table(double r0, double r1) {
  IntensityTable t = IntensityTable::zeros(1, 2, 1, 50.0);
  t.rate(0, 0, 0) = r0;
  t.rate(0, 1, 0) = r1;
  return t;
}

}  // namespace

TEST_CASE("poisson quantile matches direct CDF summation") {
  CHECK(poisson_quantile(0.0, 0.9) == 0);
  CHECK(poisson_quantile(1.0, 0.9) == 2);
  CHECK(poisson_quantile(5.0, 0.9) == 8);
  for (double mean : {0.0, 0.1, 1.0, 5.0, 20.0}) {
    for (double alpha : {0.5, 0.9, 0.99}) {
      CHECK(poisson_quantile(mean, alpha) == quantile_oracle(mean, alpha));
    }
  }
  CHECK_THROWS_AS(poisson_quantile(-1.0, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(poisson_quantile(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("poisson quantile is monotone in mean and level") {
  int prev = -1;
  for (double mean = 0.0; mean <= 12.0; mean += 0.5) {
    const int q = poisson_quantile(mean, 0.9);
    CHECK(q >= prev);
    prev = q;
  }
  for (double mean : {0.3, 2.0, 7.5}) {
    int prev_q = -1;
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
      const int q = poisson_quantile(mean, alpha);
      CHECK(q >= prev_q);
      prev_q = q;
    }
  }
}

TEST_CASE("mean count over a window interval") {
  // Rate 2 per 50 s window; half a window -> 1 expected call.
  const IntensityTable t = two_window_table(2.0, 4.0);
  CHECK(mean_count_over_window(t, 0, 0, 0.0, 25.0) == doctest::Approx(1.0));
  // Half of each window: 1 + 2 = 3.
  CHECK(mean_count_over_window(t, 0, 0, 25.0, 50.0) == doctest::Approx(3.0));
  const IntensityTable zero = IntensityTable::zeros(1, 2, 1, 50.0);
  CHECK(mean_count_over_window(zero, 0, 0, 10.0, 60.0) == 0.0);
}

TEST_CASE("mean count wraps around the period") {
  const IntensityTable t = two_window_table(5.0, 1.0);
  // [80, 130): 20 s of window 1, then 30 s of window 0 next period.
  CHECK(mean_count_over_window(t, 0, 0, 80.0, 50.0) ==
        doctest::Approx(1.0 * 0.4 + 5.0 * 0.6));
  // A whole period always sums every rate once.
  for (double start : {0.0, 13.0, 99.0, 250.0}) {
    CHECK(mean_count_over_window(t, 0, 0, start, 100.0) ==
          doctest::Approx(6.0));
  }
}

TEST_CASE("mean count is additive under interval splits") {
  const IntensityTable t = two_window_table(1.5, 3.25);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 300.0);
  for (int i = 0; i < 200; ++i) {
    const double t0 = u(rng);
    const double len = u(rng) / 2 + 1.0;
    const double cut = len * 0.37;
    const double whole = mean_count_over_window(t, 0, 0, t0, len);
    const double parts = mean_count_over_window(t, 0, 0, t0, cut) +
                         mean_count_over_window(t, 0, 0, t0 + cut, len - cut);
    CHECK(whole == doctest::Approx(parts).epsilon(1e-9));
  }
}

TEST_CASE("bounded mode sums per-window maxima over touched windows") {
  IntensityTable t = two_window_table(0.0, 0.0);
  t.enable_max_counts();
  t.max_count(0, 0, 0) = 4.0;
  t.max_count(0, 1, 0) = 2.0;
  CHECK(max_count_over_window(t, 0, 0, 10.0, 20.0) == 4.0);
  CHECK(max_count_over_window(t, 0, 0, 10.0, 60.0) == 6.0);
  CHECK(max_count_over_window(t, 0, 0, 60.0, 30.0) == 2.0);
}

TEST_CASE("home and closest base rules") {
  const Instance ins = uniform_instance(2, 2);
  Simulator sim(ins);
  WorldState s = sim.make_state({});
  s.clock = 100.0;
  s.fleet[1].awaiting_reassignment = true;
  s.fleet[1].free_location = {9.0, 3.0};
  s.fleet[1].free_time = 100.0;

  HomeBaseRule hbr;
  CHECK(hbr.choose_base(s, 0) == 0);
  CHECK(hbr.choose_base(s, 1) == 1);  // constant map, location-independent

  ClosestBaseRule cbr(ins);
  CHECK(cbr.choose_base(s, 1) == 1);  // (9,3) is nearer (10,0)
  CHECK(cbr.choose_base(s, 0) == 0);  // already at base 0
  // Equidistant point: lowest id wins.
  s.fleet[1].free_location = {5.0, 2.0};
  CHECK(cbr.choose_base(s, 1) == 0);
}

namespace {

/// Two bases, three ambulances. Ambulance 0 just finished service in the
/// middle; 1 is parked at base 0; 2 is busy.
struct BbrFixture {
  Instance ins = uniform_instance(3, 2);
  Simulator sim{ins};
  WorldState state = sim.make_state({});

  BbrFixture() {
    state.clock = 1000.0;
    auto& j = state.fleet[0];
    j.awaiting_reassignment = true;
    j.free_location = {5.0, 0.0};
    j.free_time = 1000.0;
    auto& parked = state.fleet[1];
    parked.base_location = ins.facilities.bases[0].location;
    parked.free_location = parked.base_location;
    auto& busy = state.fleet[2];
    busy.free_time = 5000.0;
    busy.free_location = {3.0, 3.0};
    state.completion_pending[2] = 1;
  }

  BestBaseRule rule(double rate_base0, double rate_base1,
                    double delta = 100.0) {
    IntensityTable t = IntensityTable::zeros(2, 1, 1, 10000.0);
    t.rate(0, 0, 0) = rate_base0;
    t.rate(1, 0, 0) = rate_base1;
    BestBaseConfig cfg;
    cfg.delta = delta;
    cfg.alpha = 0.9;
    return BestBaseRule(ins, BaseIntensity::per_base(std::move(t)), cfg);
  }
};

}  // namespace

TEST_CASE("bbr deficit: quantile demand minus forecast supply") {
  BbrFixture fx;
  // Rates scaled so a whole-delta mean of 200*(100/10000)=2 -> q(2,.9)=4.
  BestBaseRule rule = fx.rule(200.0, 0.0);
  // Base 0 holds parked ambulance 1 (compatible), so A = 1 there; the busy
  // ambulance has no committed base and never counts; j itself is excluded.
  CHECK(rule.deficit(fx.state, 0, 0, 0) == poisson_quantile(2.0, 0.9) - 1);
  CHECK(rule.deficit(fx.state, 0, 1, 0) == 0);
  // Supply can exceed demand: negative deficit.
  BestBaseRule quiet = fx.rule(0.0, 0.0);
  CHECK(quiet.deficit(fx.state, 0, 0, 0) == -1);
}

TEST_CASE("bbr sends the ambulance to the positive-deficit base") {
  BbrFixture fx;
  BestBaseRule rule = fx.rule(0.0, 200.0);
  CHECK(rule.choose_base(fx.state, 0) == 1);
}

TEST_CASE("bbr falls back to the least-negative deficit when none is positive") {
  BbrFixture fx;
  // No demand anywhere: deficits are -1 (base 0, occupied) and 0 (base 1).
  BestBaseRule rule = fx.rule(0.0, 0.0);
  CHECK(rule.choose_base(fx.state, 0) == 1);
}

TEST_CASE("bbr tie on deficit resolves to the lowest base id") {
  BbrFixture fx;
  fx.state.fleet[1].base_location = {99.0, 99.0};  // park amb 1 off-grid
  BestBaseRule rule = fx.rule(0.0, 0.0);
  CHECK(rule.choose_base(fx.state, 0) == 0);
}

TEST_CASE("bbr with a single base agrees with the other rules") {
  Instance ins = uniform_instance(1, 1);
  Simulator sim(ins);
  WorldState s = sim.make_state({});
  s.clock = 10.0;
  s.fleet[0].awaiting_reassignment = true;
  s.fleet[0].free_location = {4.0, 4.0};
  s.fleet[0].free_time = 10.0;
  IntensityTable t = IntensityTable::zeros(1, 1, 1, 3600.0);
  BestBaseConfig cfg;
  BestBaseRule bbr(ins, BaseIntensity::per_base(std::move(t)), cfg);
  HomeBaseRule hbr;
  ClosestBaseRule cbr(ins);
  CHECK(bbr.choose_base(s, 0) == 0);
  CHECK(hbr.choose_base(s, 0) == 0);
  CHECK(cbr.choose_base(s, 0) == 0);
}

TEST_CASE("scaling every rate up never drops a quantile") {
  for (double base : {0.2, 1.0, 3.7}) {
    for (double k : {1.0, 1.5, 2.0, 10.0}) {
      CHECK(poisson_quantile(k * base, 0.9) >= poisson_quantile(base, 0.9));
    }
  }
}

TEST_CASE("voronoi aggregation folds grid cells onto their closest base") {
  const Instance ins = uniform_instance(2, 2);  // bases (0,0) and (10,0)
  GridSpec grid{0.0, 10.0, 0.0, 10.0, 2, 1, 100.0, 100.0};
  IntensityTable t = IntensityTable::zeros(2, 1, 1, 100.0);
  t.rate(0, 0, 0) = 3.0;  // centroid (2.5,5) -> base 0
  t.rate(1, 0, 0) = 5.0;  // centroid (7.5,5) -> base 1
  std::vector<Location> centroids{grid.cell_centroid(0), grid.cell_centroid(1)};
  const BaseIntensity agg = aggregate_to_bases(ins, t, centroids);
  CHECK(agg.table.rate(0, 0, 0) == 3.0);
  CHECK(agg.table.rate(1, 0, 0) == 5.0);
  CHECK(voronoi_cell_of_base(ins, centroids) == std::vector<int>{0, 1});
}

TEST_CASE("reassigner factory") {
  const Instance ins = uniform_instance();
  CHECK(make_reassigner("hbr", ins, nullptr, {})->name() == "hbr");
  CHECK(make_reassigner("cbr", ins, nullptr, {})->name() == "cbr");
  CHECK_THROWS_AS(make_reassigner("bbr", ins, nullptr, {}), ConfigError);
  CHECK_THROWS_AS(make_reassigner("nope", ins, nullptr, {}), ConfigError);
}
