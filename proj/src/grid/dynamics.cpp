#include "osciguard/grid/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "osciguard/core/errors.hpp"

namespace osciguard::grid {

namespace {

struct Derivs {
  std::vector<double> ddelta, ddomega, dpm;
};

void eval_derivs(const GridModel& m, const std::vector<double>& delta,
                 const std::vector<double>& domega, const std::vector<double>& pm_dev,
                 const std::vector<double>& load_pu, Derivs& out) {
  const int g = m.n_gens(), b = m.n_buses();
  const double omega_s = 2.0 * M_PI * m.nominal_freq_hz;
  out.ddelta.resize(g);
  out.ddomega.resize(g);
  out.dpm.resize(g);
  for (int i = 0; i < g; ++i) {
    double pe = 0.0;
    const double* kdd = &m.kdd[static_cast<std::size_t>(i) * g];
    const double* kdp = &m.kdp[static_cast<std::size_t>(i) * b];
    for (int j = 0; j < g; ++j) pe += kdd[j] * delta[j];
    for (int j = 0; j < b; ++j) pe += kdp[j] * load_pu[j];
    const auto& gen = m.gens[i];
    out.ddelta[i] = omega_s * domega[i];
    out.ddomega[i] =
        (m.pm0_pu[i] + pm_dev[i] - pe - gen.damping_d_pu * domega[i]) / (2.0 * gen.inertia_h_s);
    out.dpm[i] = (-domega[i] / gen.droop_r_pu - pm_dev[i]) / gen.governor_t_s;
  }
}

}  // namespace

GridState initial_state(const GridModel& m) {
  GridState s;
  s.t = 0.0;
  s.delta = m.delta0;
  s.domega.assign(m.gens.size(), 0.0);
  s.pm_dev.assign(m.gens.size(), 0.0);
  return s;
}

void step(const GridModel& m, GridState& s, std::span<const double> load_delta_mw, double dt) {
  const int g = m.n_gens(), b = m.n_buses();
  std::vector<double> load_pu(b);
  for (int i = 0; i < b; ++i)
    load_pu[i] = (m.buses[i].nominal_load_mw + load_delta_mw[i]) / m.base_mva;

  static thread_local Derivs k1, k2, k3, k4;
  static thread_local std::vector<double> d, w, p;
  auto blend = [&](const std::vector<double>& base, const std::vector<double>& slope,
                   double h, std::vector<double>& out) {
    out.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + h * slope[i];
  };

  eval_derivs(m, s.delta, s.domega, s.pm_dev, load_pu, k1);
  blend(s.delta, k1.ddelta, dt / 2, d);
  blend(s.domega, k1.ddomega, dt / 2, w);
  blend(s.pm_dev, k1.dpm, dt / 2, p);
  eval_derivs(m, d, w, p, load_pu, k2);
  blend(s.delta, k2.ddelta, dt / 2, d);
  blend(s.domega, k2.ddomega, dt / 2, w);
  blend(s.pm_dev, k2.dpm, dt / 2, p);
  eval_derivs(m, d, w, p, load_pu, k3);
  blend(s.delta, k3.ddelta, dt, d);
  blend(s.domega, k3.ddomega, dt, w);
  blend(s.pm_dev, k3.dpm, dt, p);
  eval_derivs(m, d, w, p, load_pu, k4);

  for (int i = 0; i < g; ++i) {
    s.delta[i] += dt / 6.0 * (k1.ddelta[i] + 2 * k2.ddelta[i] + 2 * k3.ddelta[i] + k4.ddelta[i]);
    s.domega[i] +=
        dt / 6.0 * (k1.ddomega[i] + 2 * k2.ddomega[i] + 2 * k3.ddomega[i] + k4.ddomega[i]);
    s.pm_dev[i] += dt / 6.0 * (k1.dpm[i] + 2 * k2.dpm[i] + 2 * k3.dpm[i] + k4.dpm[i]);
  }
  s.t += dt;

  for (int i = 0; i < g; ++i)
    if (std::abs(s.domega[i]) > m.trip_threshold_pu)
      throw SimulationFault("machine " + m.gens[i].id + " tripped on overspeed", s.t);
}

double bus_frequency(const GridModel& m, const GridState& s, int bus_index) {
  const int g = m.n_gens();
  const double* w = &m.weights[static_cast<std::size_t>(bus_index) * g];
  double dev = 0.0;
  for (int i = 0; i < g; ++i) dev += w[i] * s.domega[i];
  return m.nominal_freq_hz * (1.0 + dev);
}

FrequencyTrace simulate(const GridModel& m, const LoadDeltaFn& load, double horizon_s,
                        double dt, double sample_dt) {
  FrequencyTrace tr;
  tr.sample_dt = sample_dt;
  for (const auto& b : m.buses) tr.bus_ids.push_back(b.id);

  GridState s = initial_state(m);
  std::vector<double> mw(m.buses.size(), 0.0);
  const long long steps = std::llround(horizon_s / dt);
  const long long per_sample = std::max<long long>(1, std::llround(sample_dt / dt));
  auto sample = [&] {
    std::vector<double> row(m.buses.size());
    for (int b = 0; b < m.n_buses(); ++b) row[b] = bus_frequency(m, s, b);
    tr.freq_hz.push_back(std::move(row));
  };
  sample();
  for (long long k = 0; k < steps; ++k) {
    load(s.t, mw);
    step(m, s, mw, dt);
    if ((k + 1) % per_sample == 0) sample();
  }
  return tr;
}

double LoadPerturbation::at(double t, int bus_index) const {
  if (deltas_mw.empty()) return 0.0;
  auto k = static_cast<std::size_t>(std::max(0.0, t / interval_s));
  k = std::min(k, deltas_mw.size() - 1);
  return deltas_mw[k][static_cast<std::size_t>(bus_index)];
}

LoadPerturbation random_load_perturbation(Rng& rng, const GridModel& m, double cap_fraction,
                                          double horizon_s, double interval_s) {
  LoadPerturbation p;
  p.interval_s = interval_s;
  const auto n = static_cast<std::size_t>(std::ceil(horizon_s / interval_s)) + 1;
  p.deltas_mw.resize(n, std::vector<double>(m.buses.size(), 0.0));
  // clipped Gaussian: the cap is a hard envelope, typical draws sit well
  // inside it, which keeps broadband excitation of the lightly damped
  // swing modes realistic rather than dominant
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t b = 0; b < m.buses.size(); ++b) {
      const double cap = cap_fraction * m.buses[b].nominal_load_mw;
      p.deltas_mw[k][b] = std::clamp(rng.normal(0.0, cap / 8.0), -cap, cap);
    }
  }
  return p;
}

}  // namespace osciguard::grid
