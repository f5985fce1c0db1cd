#include "osciguard/attack/attack.hpp"

#include <algorithm>
#include <cmath>

#include "osciguard/core/errors.hpp"

namespace osciguard::attack {

using fleet::Command;
using fleet::EventKind;

std::string to_string(Kind k) {
  switch (k) {
    case Kind::SquareWave: return "square-wave";
    case Kind::DistributedStealthy: return "distributed-stealthy";
    case Kind::AlternatingPortions: return "alternating-portions";
    case Kind::DynamicFeedback: return "dynamic-feedback";
  }
  return "?";
}

Kind kind_from_string(const std::string& s) {
  if (s == "square-wave") return Kind::SquareWave;
  if (s == "distributed-stealthy") return Kind::DistributedStealthy;
  if (s == "alternating-portions") return Kind::AlternatingPortions;
  if (s == "dynamic-feedback") return Kind::DynamicFeedback;
  throw UsageError("unknown attack kind '" + s + "'");
}

void validate(const AttackScenario& a) {
  if (a.aggregate_period_s <= 0.0 || a.aggregate_period_s > 10.0)
    throw UsageError("attack period out of range");
  if (a.duty <= 0.0 || a.duty >= 1.0) throw UsageError("attack duty out of range");
  if (a.magnitude_fraction <= 0.0 || a.magnitude_fraction > 1.0)
    throw UsageError("attack magnitude fraction out of range");
  if (a.duration_s <= 0.0 || a.start_s < 0.0) throw UsageError("attack timing out of range");
  if (a.kind == Kind::DistributedStealthy && a.groups < 2)
    throw UsageError("distributed attack needs at least 2 groups");
  if (a.kind == Kind::AlternatingPortions && (a.portion <= 0.0 || a.portion > 0.5))
    throw UsageError("alternating portion must be in (0, 0.5]");
  if (a.station_rate_kw <= 0.0) throw UsageError("station rate must be positive");
  if (a.hysteresis_hz <= 0.0) throw UsageError("hysteresis must be positive");
}

int fleet_size_for_attack(double magnitude_mw, double charge_rate_kw) {
  if (magnitude_mw < 0.0 || charge_rate_kw <= 0.0)
    throw UsageError("fleet sizing needs magnitude >= 0 and a positive rate");
  return static_cast<int>(std::floor(magnitude_mw * 1000.0 / charge_rate_kw));
}

double Schedule::aggregate_mw(double t) const {
  double mw = 0.0;
  for (const auto& cmds : stations) {
    bool on = false;
    for (const auto& c : cmds) {
      if (c.t > t) break;
      on = (c.kind == EventKind::Start);
    }
    if (on) mw += station_rate_kw / 1000.0;
  }
  return mw;
}

namespace {
void close_out(std::vector<Command>& cmds, double t_end) {
  if (!cmds.empty() && cmds.back().kind == EventKind::Start)
    cmds.push_back({t_end, EventKind::Stop});
}
}  // namespace

Schedule square_wave(const AttackScenario& a, double bus_nominal_mw) {
  validate(a);
  const double mag_mw = a.magnitude_fraction * bus_nominal_mw;
  const int n = fleet_size_for_attack(mag_mw, a.station_rate_kw);
  Schedule s;
  s.station_rate_kw = a.station_rate_kw;
  s.stations.resize(static_cast<std::size_t>(n));
  const double on_span = a.duty * a.aggregate_period_s;
  const double t_end = a.start_s + a.duration_s;
  for (auto& cmds : s.stations) {
    for (double t = a.start_s; t < t_end; t += a.aggregate_period_s) {
      cmds.push_back({t, EventKind::Start});
      if (t + on_span < t_end) cmds.push_back({t + on_span, EventKind::Stop});
    }
    close_out(cmds, t_end);
  }
  return s;
}

Schedule distributed_stealthy(const AttackScenario& a, double bus_nominal_mw) {
  validate(a);
  const double mag_mw = a.magnitude_fraction * bus_nominal_mw;
  const int per_group = fleet_size_for_attack(mag_mw, a.station_rate_kw);
  const int m = a.groups;
  Schedule s;
  s.station_rate_kw = a.station_rate_kw;
  s.stations.resize(static_cast<std::size_t>(per_group) * m);
  const double period = a.aggregate_period_s;
  const double on_span = a.duty * period;
  const double t_end = a.start_s + a.duration_s;
  for (int g = 0; g < m; ++g) {
    for (int i = 0; i < per_group; ++i) {
      auto& cmds = s.stations[static_cast<std::size_t>(g) * per_group + i];
      // pulse k is served by group k mod m
      for (int k = g;; k += m) {
        const double t = a.start_s + k * period;
        if (t >= t_end) break;
        cmds.push_back({t, EventKind::Start});
        if (t + on_span < t_end) cmds.push_back({t + on_span, EventKind::Stop});
      }
      close_out(cmds, t_end);
    }
  }
  return s;
}

Schedule alternating_portions(const AttackScenario& a, double bus_nominal_mw) {
  validate(a);
  const double mag_mw = a.magnitude_fraction * bus_nominal_mw;
  const int groups = std::max(2, static_cast<int>(std::lround(1.0 / a.portion)));
  const double step_dt = a.aggregate_period_s / groups;
  // Sine-tapered group sizes, peak group realizes the full magnitude.
  std::vector<int> sizes(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    const double w = 0.5 + 0.5 * std::sin(2.0 * M_PI * g / groups);
    sizes[static_cast<std::size_t>(g)] = fleet_size_for_attack(mag_mw * w, a.station_rate_kw);
  }
  Schedule s;
  s.station_rate_kw = a.station_rate_kw;
  const double t_end = a.start_s + a.duration_s;
  for (int g = 0; g < groups; ++g) {
    for (int i = 0; i < sizes[static_cast<std::size_t>(g)]; ++i) {
      std::vector<Command> cmds;
      for (double c = a.start_s + g * step_dt; c < t_end; c += a.aggregate_period_s) {
        cmds.push_back({c, EventKind::Start});
        if (c + step_dt < t_end) cmds.push_back({c + step_dt, EventKind::Stop});
      }
      close_out(cmds, t_end);
      s.stations.push_back(std::move(cmds));
    }
  }
  return s;
}

std::optional<bool> DynamicFeedbackController::update(double f_hz) {
  if (!on_ && f_hz > f0_ + h_) {
    on_ = true;
    return true;
  }
  if (on_ && f_hz < f0_ - h_) {
    on_ = false;
    return false;
  }
  return std::nullopt;
}

void DynamicFeedbackController::force_on() { on_ = true; }

}  // namespace osciguard::attack
