#include "osciguard/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osciguard/core/errors.hpp"

namespace osciguard::sim {

using fleet::EventKind;

namespace {
constexpr std::uint64_t kTagStation = 0x5741u;
constexpr std::uint64_t kTagPerturb = 0x9EB7u;
}  // namespace

double snap_window_end(double t_event) {
  return (std::floor(t_event / fleet::kSlotSeconds) + 1.0) * fleet::kSlotSeconds;
}

const fleet::StationLog& EngineView::log(int station_idx) const {
  return e_.stations_[static_cast<std::size_t>(station_idx)].log();
}

int EngineView::bus_index_of(int station_idx) const {
  return e_.station_bus_idx_[static_cast<std::size_t>(station_idx)];
}

double EngineView::nominal_freq_hz() const { return e_.cfg_.model->nominal_freq_hz; }

bool EngineView::freq_window(int bus_index, double t_now, std::array<double, 240>& out) const {
  const auto& rows = e_.freq_rows_;
  const double sdt = e_.cfg_.sample_dt;
  const long long end = static_cast<long long>(std::floor(t_now / sdt + 1e-9));  // row index of t_now
  if (end + 1 < 240 || end >= static_cast<long long>(rows.size())) return false;
  for (int i = 0; i < 240; ++i)
    out[static_cast<std::size_t>(i)] =
        rows[static_cast<std::size_t>(end - 239 + i)][static_cast<std::size_t>(bus_index)];
  return true;
}

Engine::Engine(const EngineConfig& cfg) : cfg_(cfg) {
  if (!cfg_.model) throw UsageError("engine needs a grid model");
  const auto& m = *cfg_.model;
  ev_mw_.assign(static_cast<std::size_t>(m.n_buses()), 0.0);

  Rng root(cfg_.seed);
  const double attack_start =
      cfg_.attack ? cfg_.attack->start_s : std::numeric_limits<double>::infinity();

  for (const auto& spec : cfg_.stations) {
    const int bus_idx = m.bus_index(spec.bus_id);
    if (bus_idx < 0) throw UsageError("station references unknown bus");
    stations_.emplace_back(spec.id, spec.bus_id, spec.rate_kw);
    station_bus_idx_.push_back(bus_idx);
    in_pool_.push_back(spec.in_attack_pool);

    Rng st = root.stream(mix_seed(kTagStation, static_cast<std::uint64_t>(spec.id)));
    auto cmds = fleet::benign_commands(st, spec.behavior, cfg_.horizon_s);
    for (const auto& c : cmds) {
      // the attacker holds the pool once the campaign starts
      if (spec.in_attack_pool && c.t >= attack_start) continue;
      push({c.t, static_cast<int>(stations_.size()) - 1, c.kind, true, seq_++});
    }
  }

  for (std::size_t j = 0; j < cfg_.schedule.stations.size(); ++j) {
    const int st = cfg_.pool_station_idx.at(j);
    for (const auto& c : cfg_.schedule.stations[j])
      push({c.t, st, c.kind, true, seq_++});
  }

  for (const auto& [st, c] : cfg_.extra_commands) {
    if (st < 0 || st >= static_cast<int>(stations_.size()))
      throw UsageError("extra command targets unknown station index");
    push({c.t, st, c.kind, true, seq_++});
  }
}

void Engine::push(QueueItem it) {
  heap_.push_back(it);
  std::push_heap(heap_.begin(), heap_.end(), ItemOrder{});
}

void Engine::execute(const QueueItem& it) {
  auto& st = stations_[static_cast<std::size_t>(it.station)];
  const bool was = st.charging();
  if (st.apply(it.t, it.kind) && was != st.charging()) {
    const double d = st.load_mw() - (was ? st.charge_rate_kw() / 1000.0 : 0.0);
    ev_mw_[static_cast<std::size_t>(station_bus_idx_[static_cast<std::size_t>(it.station)])] += d;
    if (in_pool_[static_cast<std::size_t>(it.station)]) pool_mw_ += d;
  }
}

void Engine::process_due(double t_now) {
  EngineView view(*this);
  while (!heap_.empty() && heap_.front().t <= t_now + 1e-12) {
    std::pop_heap(heap_.begin(), heap_.end(), ItemOrder{});
    QueueItem it = heap_.back();
    heap_.pop_back();
    if (it.is_request && cfg_.interceptor) {
      const double delay = cfg_.interceptor->on_request(
          it.station, station_bus_idx_[static_cast<std::size_t>(it.station)], it.t, it.kind,
          view);
      if (delay > 0.0) {
        push({it.t + delay, it.station, it.kind, false, seq_++});
        continue;
      }
    }
    execute(it);
  }
}

EngineResult Engine::run() {
  const auto& m = *cfg_.model;
  Rng root(cfg_.seed);
  Rng prng = root.stream(kTagPerturb);
  const auto perturb = grid::random_load_perturbation(prng, m, cfg_.perturb_cap_fraction,
                                                      cfg_.horizon_s, cfg_.perturb_interval_s);

  EngineResult res;
  res.freq.sample_dt = cfg_.sample_dt;
  res.fine_freq.sample_dt = cfg_.fine_sample_dt > 0 ? cfg_.fine_sample_dt : cfg_.sample_dt;
  for (const auto& b : m.buses) {
    res.freq.bus_ids.push_back(b.id);
    res.fine_freq.bus_ids.push_back(b.id);
  }

  std::optional<attack::DynamicFeedbackController> ctrl;
  int attack_bus_idx = -1;
  bool pool_forced_off = false;
  bool dyn_primed = false;
  if (cfg_.attack) {
    attack_bus_idx = m.bus_index(cfg_.attack->target_bus);
    if (attack_bus_idx < 0) throw UsageError("attack targets unknown bus");
    if (cfg_.attack->kind == attack::Kind::DynamicFeedback)
      ctrl.emplace(m.nominal_freq_hz, cfg_.attack->hysteresis_hz);
  }

  grid::GridState s = grid::initial_state(m);
  std::vector<double> mw(static_cast<std::size_t>(m.n_buses()), 0.0);

  const long long steps = std::llround(cfg_.horizon_s / cfg_.dt);
  const long long per_sample = std::max<long long>(1, std::llround(cfg_.sample_dt / cfg_.dt));
  const long long per_fine =
      cfg_.fine_sample_dt > 0 ? std::max<long long>(1, std::llround(cfg_.fine_sample_dt / cfg_.dt))
                              : 0;

  auto sample_coarse = [&] {
    std::vector<double> row(static_cast<std::size_t>(m.n_buses()));
    for (int b = 0; b < m.n_buses(); ++b) row[static_cast<std::size_t>(b)] = bus_frequency(m, s, b);
    freq_rows_.push_back(row);
    res.freq.freq_hz.push_back(std::move(row));
  };
  auto sample_fine = [&] {
    std::vector<double> row(static_cast<std::size_t>(m.n_buses()));
    for (int b = 0; b < m.n_buses(); ++b) row[static_cast<std::size_t>(b)] = bus_frequency(m, s, b);
    res.fine_freq.freq_hz.push_back(std::move(row));
    res.attack_load_t.push_back(s.t);
    res.attack_load_mw.push_back(pool_mw_);
  };

  sample_coarse();
  if (per_fine > 0) sample_fine();

  for (long long k = 0; k < steps; ++k) {
    process_due(s.t);

    if (ctrl && cfg_.attack) {
      const auto& a = *cfg_.attack;
      if (s.t >= a.start_s && s.t < a.start_s + a.duration_s) {
        if (!dyn_primed) {
          // kick the relay so the limit cycle starts even from a quiet grid
          dyn_primed = true;
          if (!ctrl->on()) {
            ctrl->force_on();
            for (int st : cfg_.pool_station_idx) push({s.t, st, EventKind::Start, true, seq_++});
            process_due(s.t);
          }
        }
        const auto toggle = ctrl->update(bus_frequency(m, s, attack_bus_idx));
        if (toggle) {
          const EventKind kk = *toggle ? EventKind::Start : EventKind::Stop;
          for (int st : cfg_.pool_station_idx) push({s.t, st, kk, true, seq_++});
          process_due(s.t);
        }
      } else if (s.t >= a.start_s + a.duration_s && !pool_forced_off) {
        for (int st : cfg_.pool_station_idx)
          push({s.t, st, EventKind::Stop, true, seq_++});
        pool_forced_off = true;
        process_due(s.t);
      }
    }

    for (int b = 0; b < m.n_buses(); ++b)
      mw[static_cast<std::size_t>(b)] = ev_mw_[static_cast<std::size_t>(b)] + perturb.at(s.t, b);
    for (const auto& ls : cfg_.extra_steps) {
      if (s.t >= ls.t0 && s.t < ls.t1)
        mw[static_cast<std::size_t>(m.bus_index(ls.bus_id))] += ls.mw;
    }
    grid::step(m, s, mw, cfg_.dt);

    if ((k + 1) % per_sample == 0) sample_coarse();
    if (per_fine > 0 && (k + 1) % per_fine == 0) sample_fine();
  }
  process_due(s.t);

  if (per_fine == 0) {
    res.fine_freq = res.freq;  // callers can always read a dense-ish trace
  }
  for (const auto& st : stations_) res.logs.push_back(st.log());
  return res;
}

EngineResult run_engine(const EngineConfig& cfg) { return Engine(cfg).run(); }

}  // namespace osciguard::sim
