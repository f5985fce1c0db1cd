#pragma once

#include <functional>
#include <span>
#include <vector>

#include "osciguard/core/rng.hpp"
#include "osciguard/grid/model.hpp"

namespace osciguard::grid {

struct GridState {
  double t = 0.0;
  std::vector<double> delta;    // rotor angle (rad)
  std::vector<double> domega;   // speed deviation (pu)
  std::vector<double> pm_dev;   // governor output deviation (pu)
};

GridState initial_state(const GridModel& model);

/// One fixed RK4 step with per-bus load deltas (MW, relative to nominal)
/// held constant across the step. Throws SimulationFault when any machine
/// exceeds the trip threshold.
void step(const GridModel& model, GridState& s, std::span<const double> load_delta_mw,
          double dt);

/// Local bus frequency: nominal * (1 + electrical-distance-weighted machine
/// speed deviations).
double bus_frequency(const GridModel& model, const GridState& s, int bus_index);

struct FrequencyTrace {
  double sample_dt = 0.5;
  std::vector<int> bus_ids;
  std::vector<std::vector<double>> freq_hz;  // [sample][bus]
  int n_samples() const { return static_cast<int>(freq_hz.size()); }
};

using LoadDeltaFn = std::function<void(double t, std::span<double> mw)>;

/// Integrates the model over [0, horizon] with dt steps, sampling bus
/// frequencies every sample_dt (t=0 included).
FrequencyTrace simulate(const GridModel& model, const LoadDeltaFn& load, double horizon_s,
                        double dt = 0.01, double sample_dt = 0.5);

/// Piecewise-constant benign load noise: every interval each bus draws a
/// fresh delta capped at cap_fraction of its nominal load, alternating
/// Gaussian and uniform shapes across draws.
struct LoadPerturbation {
  double interval_s = 0.5;
  std::vector<std::vector<double>> deltas_mw;  // [interval][bus]
  double at(double t, int bus_index) const;
};

LoadPerturbation random_load_perturbation(Rng& rng, const GridModel& model,
                                          double cap_fraction, double horizon_s,
                                          double interval_s = 0.5);

}  // namespace osciguard::grid
