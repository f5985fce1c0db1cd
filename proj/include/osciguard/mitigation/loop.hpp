#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "osciguard/core/rng.hpp"
#include "osciguard/data/window.hpp"
#include "osciguard/grid/dynamics.hpp"
#include "osciguard/nn/network.hpp"
#include "osciguard/sim/scenario.hpp"

namespace osciguard::mitigation {

/// Binary anomaly score in [0, 1] for one station window.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual double score(const std::array<std::int8_t, 240>& events,
                       const std::array<double, 240>& freq_hz) = 0;
};

/// Adapts a trained detector: encodes the event slots, min-max scales the
/// frequency with the training bounds, and runs one eval-mode forward pass.
class NetworkClassifier : public Classifier {
 public:
  NetworkClassifier(nn::Network& net, const data::NormBounds& bounds)
      : net_(net), bounds_(bounds) {}
  double score(const std::array<std::int8_t, 240>& events,
               const std::array<double, 240>& freq_hz) override;

 private:
  nn::Network& net_;
  data::NormBounds bounds_;
};

/// Verdict combination: either detector reading abnormal switches the delays
/// on, and they come off only once both read normal again.
bool decide(bool m1_abnormal, bool m2_abnormal);

/// 0 while inactive; a fresh uniform draw in (0, max_delay_s] per request
/// while active.
double delay_for_request(Rng& rng, bool active, double max_delay_s = 4.0);

/// Operator notification emitted on every abnormal verdict.
struct ReportEntry {
  double t = 0.0;
  int station_id = 0;
  int bus_id = 0;
  std::string label_source;  // "m1", "m2", "m1+m2", or "forced"
};

struct GuardConfig {
  std::uint64_t seed = 1;
  double max_delay_s = 4.0;
  double threshold = 0.5;
  /// Worst-case detection switch: when >= 0 every station is inactive before
  /// this instant and active from it onward, regardless of detector scores.
  double force_active_at_s = -1.0;
  Classifier* m1 = nullptr;  // short-tail detector
  Classifier* m2 = nullptr;  // long-tail detector, catches m1 misses
};

/// Per-station detection plus random request delay. Every station keeps its
/// own verdict state and delay stream; the only shared signal is the bus
/// frequency it observes. Scores are cached per half-second slot because the
/// window cannot change within one.
class DelayGuard : public sim::RequestInterceptor {
 public:
  explicit DelayGuard(const GuardConfig& cfg) : cfg_(cfg) {}

  double on_request(int station_idx, int bus_idx, double t, fleet::EventKind kind,
                    const sim::EngineView& view) override;

  double first_activation_s() const { return first_activation_s_; }
  long long activations() const { return activations_; }
  long long cold_starts() const { return cold_starts_; }
  long long delayed_requests() const { return static_cast<long long>(delays_.size()); }
  const std::vector<double>& delays() const { return delays_; }
  const std::vector<ReportEntry>& reports() const { return reports_; }

 private:
  struct StationState {
    bool has_rng = false;
    Rng rng{0};
    bool active = false;
    long long slot = -1;
    bool m1 = false, m2 = false;
  };

  GuardConfig cfg_;
  std::unordered_map<int, StationState> st_;
  std::vector<double> delays_;
  std::vector<ReportEntry> reports_;
  double first_activation_s_ = -1.0;
  long long activations_ = 0;
  long long cold_starts_ = 0;
};

/// Closed-loop demonstration: a square-wave campaign against one bus with
/// the guard deployed on every station. The attack starts after a full 120 s
/// of history exists so the detectors see real windows.
struct DemoConfig {
  std::string grid_topology = "wscc9";
  std::uint64_t seed = 1;
  double horizon_s = 160.0;
  double attack_start_s = 121.0;
  double period_s = 2.4;
  double duty = 0.5;
  double magnitude_fraction = 0.12;
  int target_bus = 5;
  double station_rate_kw = 160.0;
  double band_hz = 0.1;
  /// Worst-case detection: activation exactly this long after attack start.
  /// Negative leaves activation entirely to the detectors.
  double forced_detect_after_s = 5.0;
  double threshold = 0.5;
  double max_delay_s = 4.0;
  double perturb_cap_fraction = 0.005;
  int background_stations = 4;
  double spectral_window_s = 30.0;
  Classifier* m1 = nullptr;  // optional; required only for detector-driven runs
  Classifier* m2 = nullptr;
};

struct MitigationReport {
  double attack_start_s = 0.0;
  double activation_s = -1.0;
  double band_hz = 0.0;
  double total_attack_mw = 0.0;  // pool load with every station on
  int pool_stations = 0;
  grid::FrequencyTrace base_freq;  // same clock as mit_freq
  grid::FrequencyTrace mit_freq;
  std::vector<double> load_t;
  std::vector<double> base_load_mw;
  std::vector<double> mit_load_mw;
  long long delayed_requests = 0;
  std::array<long long, 8> delay_histogram{};  // half-second bins over (0, 4]
  std::vector<ReportEntry> reports;
  long long activations = 0;
  long long cold_starts = 0;
  /// peak-to-peak frequency swing on the target bus over one attack period,
  /// measured over the period ending at activation and the one starting 1 s
  /// after it; the steady offset cancels so this tracks the oscillation alone
  double osc_before_hz = 0.0;
  double osc_after_1s_hz = 0.0;
  /// Activation to the start of the first full second inside the band; -1 if
  /// the trace never settles.
  double time_to_band_s = -1.0;
  double plateau_ratio = 0.0;   // settled pool load / total_attack_mw
  double spectral_ratio = 0.0;  // power at the attack fundamental, mit / base
};

MitigationReport run_closed_loop(const DemoConfig& cfg);

}  // namespace osciguard::mitigation
