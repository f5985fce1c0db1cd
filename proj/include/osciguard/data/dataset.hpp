#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "osciguard/core/parallel.hpp"
#include "osciguard/data/window.hpp"
#include "osciguard/grid/dynamics.hpp"
#include "osciguard/grid/model.hpp"

namespace osciguard::data {

/// Dataset regimes differ only in how much of the window tail the attack
/// occupies by the time the sample is cut.
enum class Regime : std::uint8_t { Attack5 = 5, Attack10 = 10 };

double regime_tail_s(Regime r);

struct SynthConfig {
  std::string grid_topology = "wscc9";
  Regime regime = Regime::Attack5;
  int n_normal = 1000;
  int n_attack = 1000;
  std::uint64_t seed = 42;
  /// When positive, attack windows are cut this many seconds after the attack
  /// starts instead of the regime tail. Used for early-detection probes.
  double probe_tail_s = 0.0;
  ExecMode mode = ExecMode::Parallel;
  double horizon_s = 127.0;
  double perturb_cap_fraction = 0.02;
  double station_rate_kw = 360.0;  // compromised fast-charge ports
  int background_stations = 8;
  double normal_mix[4] = {0.30, 0.20, 0.25, 0.25};  // scenario classes 1..4
  double stealthy_share = 0.40;                     // of attack samples
  double fast_mix[3] = {0.40, 0.30, 0.30};          // square / alternating / feedback
};

struct Dataset {
  Regime regime = Regime::Attack5;
  std::uint64_t seed = 0;
  std::string grid_name;
  NormBounds bounds;  // min/max over this set; a split re-derives them from train
  std::vector<WindowSample> samples;

  int count_label(std::uint8_t label) const;
};

NormBounds compute_bounds(const std::vector<WindowSample>& samples);

/// Builds the labeled window corpus by co-simulating one scenario per sample.
Dataset synthesize_dataset(const SynthConfig& cfg);

/// Stratified by label. Both halves carry bounds computed from the training
/// half only, so evaluation never peeks at test-range frequencies.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

/// time_s,bus_id,freq_hz
void write_trace_csv(const grid::FrequencyTrace& trace, const std::string& path);
grid::FrequencyTrace read_trace_csv(const std::string& path);

/// station_id,bus_id,time_s,event  (event is start|stop)
void write_log_csv(const std::vector<fleet::StationLog>& logs, const std::string& path);
std::vector<fleet::StationLog> read_log_csv(const std::string& path);

}  // namespace osciguard::data
