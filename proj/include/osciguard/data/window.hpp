#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "osciguard/fleet/fleet.hpp"

namespace osciguard::data {

inline constexpr int kWindowLen = fleet::kWindowSlots;  // 240 half-second slots

/// Event-channel code for one slot: 0 = no event, 1 = stop, 2 = start.
double encode_slot(std::int8_t slot);

std::array<double, kWindowLen> encode_events(const std::array<std::int8_t, kWindowLen>& slots);

/// Frequency normalization bounds, derived from the training portion of a dataset.
struct NormBounds {
  double min_hz = 0.0;
  double max_hz = 0.0;
};

/// Min-max scaling to [0,1]; out-of-range inputs clamp so inference never
/// extrapolates past what the detector was fit on.
double normalize_freq(double hz, const NormBounds& b);

enum class ScenarioClass : std::uint8_t {
  VerySlowNormal = 1,   // sparse sessions, quiet grid
  VerySlowAbnormal = 2, // sparse sessions, disturbance not caused by this station
  SlowNormal = 3,       // moderate session turnover
  FastNormal = 4,       // legitimate rapid replug bursts
  FastAttack = 5,       // switching attack with this station in the pool
  StealthyAttack = 6,   // distributed low-rate attack, station in the pool
};

/// One labeled 120 s window for a single station: the event channel holds the
/// per-slot command codes, the frequency channel holds raw bus frequency in Hz
/// sampled at the slot ticks. Normalization happens at batch-assembly time so
/// bounds can be swapped without regenerating data.
struct WindowSample {
  std::array<double, kWindowLen> events{};
  std::array<double, kWindowLen> freq_hz{};
  std::uint8_t label = 0;
  std::uint8_t scenario_class = 0;
  std::uint32_t scenario_id = 0;
  std::uint32_t station_id = 0;
  std::int32_t bus_id = 0;
  double t_end_s = 0.0;
};

/// Positive iff the focal station took part in an attack that drove its bus
/// during the final tail_s seconds of the window.
std::uint8_t label_window(bool station_in_pool, bool attack_on_station_bus,
                          bool station_commanded_in_tail, bool attack_overlaps_tail);

}  // namespace osciguard::data
