#pragma once

#include <optional>
#include <string>
#include <vector>

#include "osciguard/fleet/fleet.hpp"

namespace osciguard::attack {

enum class Kind { SquareWave, DistributedStealthy, AlternatingPortions, DynamicFeedback };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

/// One compromised-fleet switching campaign against a single bus.
struct AttackScenario {
  Kind kind = Kind::SquareWave;
  int target_bus = 0;
  double start_s = 0.0;
  double duration_s = 10.0;
  double magnitude_fraction = 0.20;  // of the bus nominal load
  double aggregate_period_s = 1.5;
  double duty = 0.5;
  int groups = 2;          // DistributedStealthy only, >= 2
  double portion = 0.25;   // AlternatingPortions only, (0, 0.5]
  double hysteresis_hz = 0.005;
  double station_rate_kw = 360.0;
};

/// Throws UsageError on out-of-range parameters.
void validate(const AttackScenario& a);

/// Stations needed to realize a load of magnitude_mw at the given per-port
/// rate (floor: the attacker cannot switch fractional stations).
int fleet_size_for_attack(double magnitude_mw, double charge_rate_kw);

/// Timed plug/unplug commands for each compromised station (station ids are
/// local indices into `stations`).
struct Schedule {
  std::vector<std::vector<fleet::Command>> stations;
  double station_rate_kw = 360.0;
  int n_stations() const { return static_cast<int>(stations.size()); }
  /// Aggregate compromised load at time t obtained by replaying commands.
  double aggregate_mw(double t) const;
};

/// All stations toggle together: on for duty*period, off for the rest.
Schedule square_wave(const AttackScenario& a, double bus_nominal_mw);

/// The pool is m times larger and split into m groups; group g serves every
/// m-th on-pulse, so each station switches at 1/m of the aggregate rate
/// while the aggregate waveform still matches the square wave.
Schedule distributed_stealthy(const AttackScenario& a, double bus_nominal_mw);

/// round(1/portion) unequal groups rotate, one group on per step, with
/// sinusoidally tapered group sizes: the aggregate steps through a smooth
/// sine-like cycle with period aggregate_period_s.
Schedule alternating_portions(const AttackScenario& a, double bus_nominal_mw);

/// Bang-bang feedback: switch the pool on while the measured frequency is
/// above nominal and off while below, with a small hysteresis band.
class DynamicFeedbackController {
 public:
  DynamicFeedbackController(double nominal_hz, double hysteresis_hz)
      : f0_(nominal_hz), h_(hysteresis_hz) {}

  /// true = switch pool on, false = off, nullopt = hold current state.
  std::optional<bool> update(double f_hz);
  /// Attacker-initiated first switch, used when the grid starts inside the deadband.
  void force_on();
  bool on() const { return on_; }

 private:
  double f0_, h_;
  bool on_ = false;
};

}  // namespace osciguard::attack
