#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace osciguard::grid {

struct GeneratorParams {
  std::string id;
  double rated_mva = 100.0;
  double inertia_h_s = 5.0;    // on system base
  double damping_d_pu = 2.0;
  double droop_r_pu = 0.05;
  double governor_t_s = 0.5;
  int bus_id = 0;              // terminal bus the machine is tied to
  double dispatch_mw = 0.0;
};

struct BusParams {
  int id = 0;
  double nominal_load_mw = 0.0;
};

/// Reduced-order interconnection: generator internal nodes plus load buses
/// coupled through a symmetric susceptance Laplacian (pu). Generators come
/// first in the coupling row order, buses after.
struct GridModel {
  std::string name;
  double base_mva = 100.0;
  double nominal_freq_hz = 60.0;
  double trip_threshold_pu = 0.05;
  std::vector<GeneratorParams> gens;
  std::vector<BusParams> buses;
  std::vector<double> coupling;  // (G+B)x(G+B), row-major, zero row sums

  // Derived at build time (finalize_model).
  std::vector<double> kdd;       // GxG: electrical power = kdd*delta + kdp*load_pu
  std::vector<double> kdp;       // GxB
  std::vector<double> weights;   // BxG electrical-distance weights, rows sum to 1
  std::vector<double> pm0_pu;    // balanced dispatch (pu)
  std::vector<double> delta0;    // equilibrium rotor angles (rad)
  std::vector<double> theta0;    // equilibrium bus angles (rad)

  int n_gens() const { return static_cast<int>(gens.size()); }
  int n_buses() const { return static_cast<int>(buses.size()); }
  int bus_index(int bus_id) const;
  double total_load_mw() const;
};

/// Built-in topologies: "wscc9" (3 machines, 3 load buses, classic 9-bus
/// line data reduced to the load buses) or "ne39-reduced" (10-machine
/// aggregate of the New England system).
GridModel build_grid(const std::string& topology);

/// Explicit model from a structured config (same field names as the struct).
GridModel build_grid_from_json(const nlohmann::json& cfg);

/// Validates invariants (coupling symmetric PSD Laplacian, positive machine
/// constants) and computes the derived blocks and the balanced equilibrium.
/// Throws UsageError on violations.
void finalize_model(GridModel& model);

}  // namespace osciguard::grid
