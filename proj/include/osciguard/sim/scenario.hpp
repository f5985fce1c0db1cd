#pragma once

#include <array>
#include <optional>
#include <vector>

#include "osciguard/attack/attack.hpp"
#include "osciguard/fleet/fleet.hpp"
#include "osciguard/grid/dynamics.hpp"
#include "osciguard/grid/model.hpp"

namespace osciguard::sim {

struct StationSpec {
  int id = 0;
  int bus_id = 0;
  double rate_kw = 11.0;
  fleet::BehaviorParams behavior;  // arrival_rate_per_hr == 0 keeps it silent
  bool in_attack_pool = false;
};

class Engine;

/// Read-only view handed to request interceptors (detection hooks).
class EngineView {
 public:
  explicit EngineView(const Engine& e) : e_(e) {}
  const fleet::StationLog& log(int station_idx) const;
  int bus_index_of(int station_idx) const;
  double nominal_freq_hz() const;
  /// Last 240 half-second frequency samples for a bus, ending at the sample
  /// tick at or before t_now. False when fewer than 240 samples exist yet.
  bool freq_window(int bus_index, double t_now, std::array<double, 240>& out) const;

 private:
  const Engine& e_;
};

/// Decides what happens to an arriving plug/unplug request.
class RequestInterceptor {
 public:
  virtual ~RequestInterceptor() = default;
  /// Returns the delay (seconds, >= 0) to impose before execution.
  virtual double on_request(int station_idx, int bus_idx, double t, fleet::EventKind kind,
                            const EngineView& view) = 0;
};

/// Additive rectangular load disturbance (benign, e.g. a feeder switching).
struct LoadStep {
  int bus_id = 0;
  double t0 = 0.0, t1 = 0.0;
  double mw = 0.0;
};

struct EngineConfig {
  const grid::GridModel* model = nullptr;
  std::vector<StationSpec> stations;
  std::optional<attack::AttackScenario> attack;
  attack::Schedule schedule;          // prebuilt; unused for DynamicFeedback
  std::vector<int> pool_station_idx;  // engine station index per schedule slot
  std::vector<LoadStep> extra_steps;
  std::vector<std::pair<int, fleet::Command>> extra_commands;  // (station idx, cmd)
  double horizon_s = 127.0;
  double dt = 0.01;
  double sample_dt = 0.5;
  double fine_sample_dt = 0.0;  // 0 = no dense trace
  double perturb_cap_fraction = 0.02;
  double perturb_interval_s = 0.5;
  std::uint64_t seed = 1;
  RequestInterceptor* interceptor = nullptr;
};

struct EngineResult {
  grid::FrequencyTrace freq;       // sample_dt grid, all buses, t=0 first row
  grid::FrequencyTrace fine_freq;  // only when fine_sample_dt > 0
  std::vector<fleet::StationLog> logs;
  std::vector<double> attack_load_t;
  std::vector<double> attack_load_mw;  // compromised-pool load on the fine/sample grid
};

/// Event-driven co-simulation of the fleet against the grid model.
/// Benign behavior is pre-drawn per station from decorrelated seed streams;
/// attack schedules and feedback controllers inject requests; an optional
/// interceptor may delay any request before it reaches the state machine.
EngineResult run_engine(const EngineConfig& cfg);

/// Snaps a trigger time onto the half-second slot grid so the triggering
/// event lands in the final window slot.
double snap_window_end(double t_event);

class Engine {
 public:
  friend class EngineView;
  explicit Engine(const EngineConfig& cfg);
  EngineResult run();

 private:
  struct QueueItem {
    double t;
    int station;
    fleet::EventKind kind;
    bool is_request;  // requests pass through the interceptor first
    long long seq;
  };
  struct ItemOrder {
    bool operator()(const QueueItem& a, const QueueItem& b) const {
      if (a.t != b.t) return a.t > b.t;
      if (a.station != b.station) return a.station > b.station;
      return a.seq > b.seq;
    }
  };

  void push(QueueItem it);
  void process_due(double t_now);
  void execute(const QueueItem& it);

  const EngineConfig& cfg_;
  std::vector<fleet::StationState> stations_;
  std::vector<int> station_bus_idx_;
  std::vector<double> ev_mw_;  // per bus index
  std::vector<QueueItem> heap_;
  long long seq_ = 0;
  std::vector<std::vector<double>> freq_rows_;
  double pool_mw_ = 0.0;
  std::vector<bool> in_pool_;
};

}  // namespace osciguard::sim
