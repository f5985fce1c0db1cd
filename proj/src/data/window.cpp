#include "osciguard/data/window.hpp"

#include <algorithm>

namespace osciguard::data {

double encode_slot(std::int8_t slot) {
  switch (slot) {
    case -1: return 0.0;
    case static_cast<std::int8_t>(fleet::EventKind::Stop): return 1.0;
    default: return 2.0;
  }
}

std::array<double, kWindowLen> encode_events(const std::array<std::int8_t, kWindowLen>& slots) {
  std::array<double, kWindowLen> out{};
  for (int i = 0; i < kWindowLen; ++i)
    out[static_cast<std::size_t>(i)] = encode_slot(slots[static_cast<std::size_t>(i)]);
  return out;
}

double normalize_freq(double hz, const NormBounds& b) {
  const double span = b.max_hz - b.min_hz;
  if (span <= 0.0) return 0.0;
  return std::clamp((hz - b.min_hz) / span, 0.0, 1.0);
}

std::uint8_t label_window(bool station_in_pool, bool attack_on_station_bus,
                          bool station_commanded_in_tail, bool attack_overlaps_tail) {
  return (station_in_pool && attack_on_station_bus && station_commanded_in_tail &&
          attack_overlaps_tail)
             ? 1
             : 0;
}

}  // namespace osciguard::data
