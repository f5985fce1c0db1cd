#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "osciguard/core/rng.hpp"
#include "osciguard/fleet/fleet.hpp"

using namespace osciguard;
using namespace osciguard::fleet;

TEST_CASE("poisson arrivals hit the requested rate") {
  Rng rng(2024);
  const double rate = 6.0;  // per hour
  const int reps = 10000;
  long long total = 0;
  for (int i = 0; i < reps; ++i)
    total += static_cast<long long>(sample_arrivals(rng, rate, 3600.0).size());
  const double mean = static_cast<double>(total) / reps;
  CHECK(mean == doctest::Approx(6.0).epsilon(0.025));
}

TEST_CASE("arrival times are sorted and inside the horizon") {
  Rng rng(5);
  const std::vector<double> t = sample_arrivals(rng, 30.0, 1800.0);
  REQUIRE(!t.empty());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t[i] >= 0.0);
    CHECK(t[i] < 1800.0);
    if (i > 0) CHECK(t[i] > t[i - 1]);
  }
}

TEST_CASE("zero arrival rate gives an empty schedule") {
  Rng rng(1);
  CHECK(sample_arrivals(rng, 0.0, 3600.0).empty());
}

TEST_CASE("session lengths respect the truncation bounds of both profiles") {
  for (Profile p : {Profile::HeavyUse, Profile::LightSwitchy}) {
    const BehaviorParams b = profile_defaults(p);
    Rng rng(p == Profile::HeavyUse ? 10u : 11u);
    double lo = 1e18, hi = -1e18, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double d = sample_duration(rng, b.duration);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      sum += d;
    }
    CHECK(lo >= b.duration.min_s);
    CHECK(hi <= b.duration.max_s);
    // truncation is mild, so the sample mean stays near the nominal mean
    CHECK(sum / n == doctest::Approx(b.duration.mean_s).epsilon(0.12));
  }
}

TEST_CASE("profile session floors differ as documented") {
  CHECK(profile_defaults(Profile::HeavyUse).duration.min_s == doctest::Approx(55.0));
  CHECK(profile_defaults(Profile::LightSwitchy).duration.min_s == doctest::Approx(26.0));
  CHECK(profile_defaults(Profile::HeavyUse).duration.mean_s >
        profile_defaults(Profile::LightSwitchy).duration.mean_s);
  CHECK(profile_defaults(Profile::LightSwitchy).burst_prob > 0.0);
  CHECK(profile_defaults(Profile::HeavyUse).burst_prob == 0.0);
}

TEST_CASE("arrival rate tables peak at commute hours and vary by season") {
  for (Profile p : {Profile::HeavyUse, Profile::LightSwitchy}) {
    for (Season s : {Season::Winter, Season::Spring, Season::Summer, Season::Fall}) {
      const double night = default_arrival_rate_per_hr(p, s, 3.0);
      const double morning = default_arrival_rate_per_hr(p, s, 8.0);
      const double evening = default_arrival_rate_per_hr(p, s, 18.0);
      CHECK(night > 0.0);
      CHECK(morning > night);
      CHECK(evening > night);
    }
  }
  // season scales the level for a fixed hour
  const double winter = default_arrival_rate_per_hr(Profile::HeavyUse, Season::Winter, 18.0);
  const double summer = default_arrival_rate_per_hr(Profile::HeavyUse, Season::Summer, 18.0);
  CHECK(winter != summer);
}

TEST_CASE("benign commands alternate start stop in time order") {
  Rng rng(77);
  BehaviorParams b = profile_defaults(Profile::HeavyUse);
  b.arrival_rate_per_hr = 40.0;  // busy so sessions overlap and get clipped
  const std::vector<Command> cmds = benign_commands(rng, b, 7200.0);
  REQUIRE(!cmds.empty());
  for (std::size_t i = 1; i < cmds.size(); ++i) CHECK(cmds[i].t >= cmds[i - 1].t);
}

TEST_CASE("state machine drops commands that do not flip the state") {
  StationState st(1, 5, 11.0);
  CHECK(!st.charging());
  CHECK(st.load_mw() == 0.0);

  CHECK(st.apply(1.0, EventKind::Start));
  CHECK(st.charging());
  CHECK(st.load_mw() == doctest::Approx(0.011));

  CHECK(!st.apply(2.0, EventKind::Start));  // already charging: dropped
  CHECK(st.apply(3.0, EventKind::Stop));
  CHECK(!st.apply(4.0, EventKind::Stop));
  CHECK(st.apply(5.0, EventKind::Start));

  const StationLog& log = st.log();
  REQUIRE(log.events.size() == 3);
  CHECK(log.events[0].kind == EventKind::Start);
  CHECK(log.events[1].kind == EventKind::Stop);
  CHECK(log.events[2].kind == EventKind::Start);
  for (std::size_t i = 1; i < log.events.size(); ++i)
    CHECK(log.events[i].kind != log.events[i - 1].kind);
}

TEST_CASE("replaying benign commands through the state machine keeps alternation") {
  Rng rng(31);
  BehaviorParams b = profile_defaults(Profile::LightSwitchy);
  b.arrival_rate_per_hr = 25.0;
  const std::vector<Command> cmds = benign_commands(rng, b, 14400.0);
  StationState st(7, 6, 11.0);
  for (const Command& c : cmds) st.apply(c.t, c.kind);
  const auto& ev = st.log().events;
  for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i].kind != ev[i - 1].kind);
}

TEST_CASE("window covers the trailing two minutes with the last event per slot") {
  StationLog log;
  log.station_id = 3;
  log.bus_id = 5;
  // two events in the same slot: the later one wins
  log.events.push_back({100.00, EventKind::Start});
  log.events.push_back({100.30, EventKind::Stop});
  // a normal isolated event
  log.events.push_back({150.25, EventKind::Start});
  // outside (before) the window
  log.events.push_back({200.00, EventKind::Stop});

  const auto w = window_events(log, 220.0);  // window covers [100, 220)
  REQUIRE(w.size() == 240);

  // slot of t=100.0..100.5 relative to window start
  CHECK(w[0] == static_cast<int8_t>(EventKind::Stop));  // 100.30 overrides 100.00
  const int slot150 = static_cast<int>((150.25 - 100.0) / 0.5);
  CHECK(w[static_cast<std::size_t>(slot150)] == static_cast<int8_t>(EventKind::Start));
  const int slot200 = static_cast<int>((200.0 - 100.0) / 0.5);
  CHECK(w[static_cast<std::size_t>(slot200)] == static_cast<int8_t>(EventKind::Stop));

  int filled = 0;
  for (int8_t v : w) {
    CHECK(v >= -1);
    CHECK(v <= 1);
    if (v != -1) ++filled;
  }
  CHECK(filled == 3);
}

TEST_CASE("events before the window do not leak in") {
  StationLog log;
  log.events.push_back({10.0, EventKind::Start});
  const auto w = window_events(log, 300.0);  // window is [180, 300)
  for (int8_t v : w) CHECK(v == -1);
}

TEST_CASE("window handles an empty log") {
  StationLog log;
  const auto w = window_events(log, 500.0);
  for (int8_t v : w) CHECK(v == -1);
}

TEST_CASE("burst behavior produces quick replug clusters for fickle stations") {
  BehaviorParams b = profile_defaults(Profile::LightSwitchy);
  b.arrival_rate_per_hr = 2.0;
  b.burst_prob = 1.0;  // force a burst on every session
  Rng rng(99);
  const std::vector<Command> cmds = benign_commands(rng, b, 7200.0);
  REQUIRE(cmds.size() >= 4);
  // bursts mean more than one start per arrival on average
  int starts = 0;
  for (const Command& c : cmds)
    if (c.kind == EventKind::Start) ++starts;
  Rng rng2(99);
  const std::size_t arrivals = sample_arrivals(rng2, 2.0, 7200.0).size();
  CHECK(starts > static_cast<int>(arrivals));
}
