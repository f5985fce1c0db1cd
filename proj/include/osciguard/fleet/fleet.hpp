#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "osciguard/core/rng.hpp"

namespace osciguard::fleet {

enum class Profile { HeavyUse, LightSwitchy };
enum class Season { Winter, Spring, Summer, Fall };
enum class EventKind : std::uint8_t { Stop = 0, Start = 1 };

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::Start;
};

/// Observed switching history of one station. Events strictly alternate
/// because they are emitted by the state machine below, which drops
/// commands that do not change state.
struct StationLog {
  int station_id = 0;
  int bus_id = 0;
  std::vector<Event> events;
};

struct DurationParams {
  double mean_s = 1440.0;
  double std_s = 600.0;
  double min_s = 55.0;
  double max_s = 14400.0;
};

struct BehaviorParams {
  double arrival_rate_per_hr = 2.0;
  DurationParams duration;
  // LightSwitchy users sometimes replug a few times in quick succession.
  double burst_prob = 0.0;
  int burst_cycles_min = 2;
  int burst_cycles_max = 3;
  double burst_span_s = 180.0;
};

/// Session statistics for the two shipped station profiles: long steady
/// sessions (mean 24 min, floor 55 s) versus short fickle ones (mean 8 min,
/// floor 26 s) with occasional benign replug bursts.
BehaviorParams profile_defaults(Profile p);

/// Shipped arrival-rate tables with morning/evening peaks and a seasonal
/// factor. hour_of_day in [0, 24).
double default_arrival_rate_per_hr(Profile p, Season s, double hour_of_day);

/// Homogeneous Poisson arrival times over [0, horizon): exponential gaps.
std::vector<double> sample_arrivals(Rng& rng, double rate_per_hr, double horizon_s);

/// Truncated Gaussian session length (rejection sampling).
double sample_duration(Rng& rng, const DurationParams& p);

/// Plug/unplug commands a station would receive over [0, horizon) when
/// driven by its benign behavior.
struct Command {
  double t = 0.0;
  EventKind kind = EventKind::Start;
};
std::vector<Command> benign_commands(Rng& rng, const BehaviorParams& b, double horizon_s);

/// Charging state machine. Commands that do not change state are dropped,
/// which keeps the log alternating Start/Stop.
class StationState {
 public:
  StationState(int station_id, int bus_id, double charge_rate_kw)
      : rate_kw_(charge_rate_kw) {
    log_.station_id = station_id;
    log_.bus_id = bus_id;
  }

  /// Returns true when the command flipped the state (and was logged).
  bool apply(double t, EventKind k);

  bool charging() const { return charging_; }
  double load_mw() const { return charging_ ? rate_kw_ / 1000.0 : 0.0; }
  double charge_rate_kw() const { return rate_kw_; }
  const StationLog& log() const { return log_; }

 private:
  bool charging_ = false;
  double rate_kw_;
  StationLog log_;
};

inline constexpr int kWindowSlots = 240;
inline constexpr double kSlotSeconds = 0.5;

/// 240 half-second slots covering [t_now - 120, t_now); the latest event in
/// each slot wins. -1 = no event, otherwise the EventKind value.
std::array<std::int8_t, kWindowSlots> window_events(const StationLog& log, double t_now);

}  // namespace osciguard::fleet
