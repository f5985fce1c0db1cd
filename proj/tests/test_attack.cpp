#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "osciguard/attack/attack.hpp"
#include "osciguard/core/errors.hpp"

using namespace osciguard;
using namespace osciguard::attack;

namespace {
AttackScenario base_square() {
  AttackScenario a;
  a.kind = Kind::SquareWave;
  a.target_bus = 5;
  a.start_s = 10.0;
  a.duration_s = 30.0;
  a.magnitude_fraction = 0.20;
  a.aggregate_period_s = 1.5;
  a.duty = 0.5;
  a.station_rate_kw = 360.0;
  return a;
}
}  // namespace

TEST_CASE("fleet size for a target load floors to whole stations") {
  CHECK(fleet_size_for_attack(84.0, 11.0) == 7636);
  CHECK(fleet_size_for_attack(84.0, 40.0) == 2100);
  CHECK(fleet_size_for_attack(84.0, 360.0) == 233);
  CHECK(fleet_size_for_attack(0.36, 360.0) == 1);
}

TEST_CASE("kind names round trip") {
  for (Kind k : {Kind::SquareWave, Kind::DistributedStealthy, Kind::AlternatingPortions,
                 Kind::DynamicFeedback})
    CHECK(kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(kind_from_string("bogus"), UsageError);
}

TEST_CASE("scenario validation rejects out-of-range parameters") {
  CHECK_NOTHROW(validate(base_square()));

  AttackScenario a = base_square();
  a.magnitude_fraction = 0.0;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.magnitude_fraction = 1.5;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.duty = 0.0;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.aggregate_period_s = -1.0;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.duration_s = 0.0;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.kind = Kind::DistributedStealthy;
  a.groups = 1;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.kind = Kind::AlternatingPortions;
  a.portion = 0.7;
  CHECK_THROWS_AS(validate(a), UsageError);
  a = base_square();
  a.station_rate_kw = 0.0;
  CHECK_THROWS_AS(validate(a), UsageError);
}

TEST_CASE("square wave toggles the whole pool on the aggregate clock") {
  const AttackScenario a = base_square();
  const double bus_mw = 125.0;
  const Schedule s = square_wave(a, bus_mw);

  const int expect_n = fleet_size_for_attack(0.20 * 125.0, 360.0);
  CHECK(s.n_stations() == expect_n);
  const double total = expect_n * 0.360;

  CHECK(s.aggregate_mw(9.99) == 0.0);                    // before start
  CHECK(s.aggregate_mw(10.01) == doctest::Approx(total));  // first on pulse
  CHECK(s.aggregate_mw(10.74) == doctest::Approx(total));
  CHECK(s.aggregate_mw(10.76) == 0.0);                   // off half-period
  CHECK(s.aggregate_mw(11.51) == doctest::Approx(total));  // next period
  CHECK(s.aggregate_mw(45.0) == 0.0);                    // after the end

  // every station switches once per edge: all commands share edge times
  std::set<double> times;
  for (const auto& st : s.stations)
    for (const auto& c : st) times.insert(c.t);
  const std::size_t edges = times.size();
  CHECK(edges >= 2 * static_cast<std::size_t>(30.0 / 1.5));
}

TEST_CASE("duty cycle shapes the on fraction of each period") {
  AttackScenario a = base_square();
  a.duty = 0.35;
  const Schedule s = square_wave(a, 100.0);
  const double total = s.n_stations() * 0.360;
  CHECK(s.aggregate_mw(10.0 + 0.34 * 1.5) == doctest::Approx(total));
  CHECK(s.aggregate_mw(10.0 + 0.36 * 1.5) == 0.0);
}

TEST_CASE("stealthy grouping keeps the aggregate square wave") {
  AttackScenario sq = base_square();
  AttackScenario st = sq;
  st.kind = Kind::DistributedStealthy;
  st.groups = 3;

  const Schedule plain = square_wave(sq, 125.0);
  const Schedule grouped = distributed_stealthy(st, 125.0);

  // m times the stations, same aggregate amplitude on the same clock
  CHECK(grouped.n_stations() == 3 * plain.n_stations());
  for (double t = 9.0; t < 41.0; t += 0.05) {
    CHECK(grouped.aggregate_mw(t) == doctest::Approx(plain.aggregate_mw(t)).epsilon(1e-12));
  }
}

TEST_CASE("stealthy stations switch at a fraction of the aggregate rate") {
  AttackScenario a = base_square();
  a.kind = Kind::DistributedStealthy;
  a.groups = 4;
  const Schedule s = distributed_stealthy(a, 125.0);
  const Schedule plain = square_wave(base_square(), 125.0);

  std::size_t worst = 0;
  for (const auto& st : s.stations) worst = std::max(worst, st.size());
  std::size_t plain_worst = 0;
  for (const auto& st : plain.stations) plain_worst = std::max(plain_worst, st.size());
  // each grouped station serves every 4th pulse
  CHECK(worst * 3 <= plain_worst);
}

TEST_CASE("alternating portions rotate unequal groups one at a time") {
  AttackScenario a = base_square();
  a.kind = Kind::AlternatingPortions;
  a.portion = 0.25;
  const Schedule s = alternating_portions(a, 125.0);
  REQUIRE(s.n_stations() > 0);

  // one group is on at any instant, and the largest group alone realizes the
  // full magnitude target, so the aggregate never exceeds that group's load
  const double full = s.n_stations() * 0.360;
  const double peak_mw = fleet_size_for_attack(0.20 * 125.0, 360.0) * 0.360;
  double peak = 0.0;
  std::set<long> levels;
  for (double t = 10.01; t < 40.0; t += 0.03) {
    const double v = s.aggregate_mw(t);
    CHECK(v <= peak_mw + 1e-9);
    levels.insert(std::lround(v / 0.360));
    peak = std::max(peak, v);
  }
  CHECK(peak == doctest::Approx(peak_mw).epsilon(1e-12));
  // the tapered companion groups make the pool bigger than any single group
  CHECK(full > peak_mw);
  // and the rotation visits distinct group sizes, not one uniform slice
  CHECK(levels.size() >= 3);
}

TEST_CASE("alternating portions cycle with the aggregate period") {
  AttackScenario a = base_square();
  a.kind = Kind::AlternatingPortions;
  a.portion = 0.25;
  const Schedule s = alternating_portions(a, 125.0);
  for (double t = 10.0; t < 38.0; t += 0.21) {
    CHECK(s.aggregate_mw(t) == doctest::Approx(s.aggregate_mw(t + 1.5)).epsilon(1e-12));
  }
}

TEST_CASE("feedback controller is a bang-bang relay with hysteresis") {
  DynamicFeedbackController c(60.0, 0.005);
  CHECK(!c.on());

  // inside the deadband nothing happens
  CHECK(!c.update(60.0).has_value());
  CHECK(!c.update(60.004).has_value());

  // above the band: switch on (load drags frequency down)
  auto r = c.update(60.006);
  REQUIRE(r.has_value());
  CHECK(*r);
  CHECK(c.on());

  // stays on inside the band
  CHECK(!c.update(60.001).has_value());
  CHECK(c.on());

  // below the band: off
  r = c.update(59.994);
  REQUIRE(r.has_value());
  CHECK_FALSE(*r);
  CHECK(!c.on());

  // repeated crossings do not re-emit
  CHECK(!c.update(59.993).has_value());
}

TEST_CASE("feedback controller can be kicked on from the deadband") {
  DynamicFeedbackController c(60.0, 0.005);
  CHECK(!c.update(60.0).has_value());
  c.force_on();
  CHECK(c.on());
  // next crossing below still turns it off
  auto r = c.update(59.99);
  REQUIRE(r.has_value());
  CHECK_FALSE(*r);
}

TEST_CASE("schedules replay into per-station alternating command streams") {
  const Schedule s = square_wave(base_square(), 125.0);
  for (const auto& st : s.stations) {
    REQUIRE(!st.empty());
    CHECK(st.front().kind == fleet::EventKind::Start);
    for (std::size_t i = 1; i < st.size(); ++i) {
      CHECK(st[i].t > st[i - 1].t);
      CHECK(st[i].kind != st[i - 1].kind);
    }
    CHECK(st.back().kind == fleet::EventKind::Stop);  // campaign cleans up
  }
}
