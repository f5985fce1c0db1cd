#include "osciguard/fleet/fleet.hpp"

#include <algorithm>
#include <cmath>

namespace osciguard::fleet {

BehaviorParams profile_defaults(Profile p) {
  BehaviorParams b;
  if (p == Profile::HeavyUse) {
    b.arrival_rate_per_hr = 2.0;
    b.duration = {1440.0, 600.0, 55.0, 14400.0};
    b.burst_prob = 0.0;
  } else {
    b.arrival_rate_per_hr = 1.5;
    b.duration = {480.0, 300.0, 26.0, 3600.0};
    b.burst_prob = 0.25;
  }
  return b;
}

double default_arrival_rate_per_hr(Profile p, Season s, double hour_of_day) {
  const double base = p == Profile::HeavyUse ? 2.0 : 1.5;
  double tod = 1.0;
  if (hour_of_day >= 7.0 && hour_of_day < 9.5)
    tod = 2.5;
  else if (hour_of_day >= 17.0 && hour_of_day < 20.5)
    tod = 3.0;
  else if (hour_of_day < 6.0 || hour_of_day >= 23.0)
    tod = 0.3;
  double season = 1.0;
  switch (s) {
    case Season::Winter: season = 1.2; break;
    case Season::Summer: season = 1.1; break;
    case Season::Spring: season = 0.9; break;
    case Season::Fall: season = 1.0; break;
  }
  return base * tod * season;
}

std::vector<double> sample_arrivals(Rng& rng, double rate_per_hr, double horizon_s) {
  std::vector<double> out;
  if (rate_per_hr <= 0.0) return out;
  const double rate_per_s = rate_per_hr / 3600.0;
  double t = rng.exponential(rate_per_s);
  while (t < horizon_s) {
    out.push_back(t);
    t += rng.exponential(rate_per_s);
  }
  return out;
}

double sample_duration(Rng& rng, const DurationParams& p) {
  return rng.truncated_normal(p.mean_s, p.std_s, p.min_s, p.max_s);
}

std::vector<Command> benign_commands(Rng& rng, const BehaviorParams& b, double horizon_s) {
  std::vector<Command> out;
  if (b.arrival_rate_per_hr <= 0.0) return out;
  const double rate_per_s = b.arrival_rate_per_hr / 3600.0;
  double t = rng.exponential(rate_per_s);
  while (t < horizon_s) {
    const double dur = sample_duration(rng, b.duration);
    out.push_back({t, EventKind::Start});
    double end = t + dur;
    if (end < horizon_s) {
      out.push_back({end, EventKind::Stop});
      if (b.burst_prob > 0.0 && rng.uniform() < b.burst_prob) {
        // 2-3 quick replug cycles inside a few minutes.
        const int cycles = rng.uniform_int(b.burst_cycles_min, b.burst_cycles_max);
        const double budget = b.burst_span_s / (2.0 * cycles);
        for (int c = 0; c < cycles && end < horizon_s; ++c) {
          const double gap = rng.uniform(3.0, budget);
          const double on = rng.uniform(5.0, budget);
          if (end + gap >= horizon_s) break;
          out.push_back({end + gap, EventKind::Start});
          if (end + gap + on >= horizon_s) {
            end = horizon_s;
            break;
          }
          out.push_back({end + gap + on, EventKind::Stop});
          end += gap + on;
        }
      }
    } else {
      end = horizon_s;  // still charging when the horizon closes
    }
    t = end + rng.exponential(rate_per_s);
  }
  return out;
}

bool StationState::apply(double t, EventKind k) {
  const bool want = (k == EventKind::Start);
  if (want == charging_) return false;
  charging_ = want;
  log_.events.push_back({t, k});
  return true;
}

std::array<std::int8_t, kWindowSlots> window_events(const StationLog& log, double t_now) {
  std::array<std::int8_t, kWindowSlots> slots;
  slots.fill(-1);
  const double t0 = t_now - kWindowSlots * kSlotSeconds;
  auto it = std::lower_bound(log.events.begin(), log.events.end(), t0,
                             [](const Event& e, double t) { return e.t < t; });
  for (; it != log.events.end() && it->t < t_now; ++it) {
    const int slot = static_cast<int>((it->t - t0) / kSlotSeconds);
    if (slot >= 0 && slot < kWindowSlots)
      slots[static_cast<std::size_t>(slot)] = static_cast<std::int8_t>(it->kind);
  }
  return slots;
}

}  // namespace osciguard::fleet
