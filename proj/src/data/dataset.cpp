#include "osciguard/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "osciguard/attack/attack.hpp"
#include "osciguard/core/binio.hpp"
#include "osciguard/core/errors.hpp"
#include "osciguard/core/rng.hpp"
#include "osciguard/sim/scenario.hpp"

namespace osciguard::data {

namespace {

constexpr std::uint64_t kTagScenario = 0xD5C0;
constexpr std::uint64_t kTagEngine = 0xE419;
constexpr std::uint64_t kTagSplit = 0x5B17;

struct Plan {
  ScenarioClass cls = ScenarioClass::VerySlowNormal;
  int fast_kind = 0;           // FastAttack: 0 square, 1 alternating, 2 feedback
  bool trigger_anchor = false; // normals: cut at the last event instead of the grid
};

std::vector<Plan> build_plan(const SynthConfig& cfg) {
  if (cfg.n_normal < 0 || cfg.n_attack < 0 || cfg.n_normal + cfg.n_attack == 0)
    throw UsageError("dataset needs a positive sample count");
  if (cfg.horizon_s < 127.0)
    throw UsageError("horizon must cover a 120s window plus settling margin");

  std::vector<Plan> plans;
  plans.reserve(static_cast<std::size_t>(cfg.n_normal + cfg.n_attack));

  double wsum = 0.0;
  for (double w : cfg.normal_mix) {
    if (w < 0.0) throw UsageError("normal class mix must be non-negative");
    wsum += w;
  }
  if (cfg.n_normal > 0 && wsum <= 0.0) throw UsageError("normal class mix sums to zero");

  // Quota boundaries keep class counts exact for any n.
  double cum = 0.0;
  int prev = 0;
  std::array<int, 4> normal_counts{};
  for (int k = 0; k < 4; ++k) {
    cum += cfg.normal_mix[k] / wsum;
    const int upto = static_cast<int>(std::llround(cum * cfg.n_normal));
    normal_counts[static_cast<std::size_t>(k)] = upto - prev;
    prev = upto;
  }
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < normal_counts[static_cast<std::size_t>(k)]; ++i) {
      Plan p;
      p.cls = static_cast<ScenarioClass>(k + 1);
      p.trigger_anchor = (i % 2 == 0);
      plans.push_back(p);
    }
  }

  const int n_stealthy = std::clamp(
      static_cast<int>(std::llround(cfg.stealthy_share * cfg.n_attack)), 0, cfg.n_attack);
  const int n_fast = cfg.n_attack - n_stealthy;
  double fsum = 0.0;
  for (double w : cfg.fast_mix) {
    if (w < 0.0) throw UsageError("attack kind mix must be non-negative");
    fsum += w;
  }
  if (n_fast > 0 && fsum <= 0.0) throw UsageError("attack kind mix sums to zero");
  cum = 0.0;
  prev = 0;
  for (int k = 0; k < 3; ++k) {
    cum += cfg.fast_mix[k] / fsum;
    const int upto = static_cast<int>(std::llround(cum * n_fast));
    for (int i = prev; i < upto; ++i) {
      Plan p;
      p.cls = ScenarioClass::FastAttack;
      p.fast_kind = k;
      plans.push_back(p);
    }
    prev = upto;
  }
  for (int i = 0; i < n_stealthy; ++i) {
    Plan p;
    p.cls = ScenarioClass::StealthyAttack;
    plans.push_back(p);
  }
  return plans;
}

fleet::BehaviorParams focal_behavior(ScenarioClass cls, Rng& r) {
  using fleet::Profile;
  switch (cls) {
    case ScenarioClass::VerySlowNormal:
    case ScenarioClass::VerySlowAbnormal: {
      auto b = fleet::profile_defaults(Profile::HeavyUse);
      b.arrival_rate_per_hr = r.uniform(2.0, 4.0);
      return b;
    }
    case ScenarioClass::SlowNormal: {
      auto b = fleet::profile_defaults(Profile::LightSwitchy);
      b.arrival_rate_per_hr = r.uniform(10.0, 40.0);
      return b;
    }
    case ScenarioClass::FastNormal: {
      fleet::BehaviorParams b;
      b.arrival_rate_per_hr = r.uniform(400.0, 900.0);
      b.duration = {6.0, 3.0, 1.0, 15.0};
      b.burst_prob = 0.0;
      return b;
    }
    default: {
      fleet::BehaviorParams b;
      b.arrival_rate_per_hr = 0.0;  // attacker-held port stays silent until the campaign
      return b;
    }
  }
}

WindowSample make_sample(const grid::GridModel& g, const SynthConfig& cfg, std::uint32_t sid,
                         const Plan& plan) {
  Rng r = Rng(cfg.seed).stream(mix_seed(kTagScenario, sid));
  const double horizon = cfg.horizon_s;
  const double tail =
      cfg.probe_tail_s > 0.0 ? cfg.probe_tail_s : regime_tail_s(cfg.regime);
  const double grid_t_end = horizon - 1.0;

  const bool is_attack =
      plan.cls == ScenarioClass::FastAttack || plan.cls == ScenarioClass::StealthyAttack;
  const int focal_bus = g.buses[static_cast<std::size_t>(r.uniform_int(0, g.n_buses() - 1))].id;

  sim::EngineConfig ec;
  ec.model = &g;
  ec.seed = mix_seed(cfg.seed, mix_seed(kTagEngine, sid));
  ec.horizon_s = horizon;
  ec.perturb_cap_fraction = cfg.perturb_cap_fraction;

  sim::StationSpec focal;
  focal.id = 1;
  focal.bus_id = focal_bus;
  focal.rate_kw = is_attack ? cfg.station_rate_kw : 11.0;
  focal.behavior = focal_behavior(plan.cls, r);
  focal.in_attack_pool = is_attack;
  ec.stations.push_back(focal);

  for (int j = 0; j < cfg.background_stations; ++j) {
    sim::StationSpec bg;
    bg.id = 100 + j;
    bg.bus_id = focal_bus;
    bg.rate_kw = 11.0;
    bg.behavior = fleet::profile_defaults(j % 5 == 4 ? fleet::Profile::LightSwitchy
                                                     : fleet::Profile::HeavyUse);
    ec.stations.push_back(bg);
  }
  const int pool_base = static_cast<int>(ec.stations.size());

  std::optional<attack::AttackScenario> atk;
  bool focal_in_pool = false;

  auto add_pool = [&](int count, bool include_focal) {
    ec.pool_station_idx.clear();
    if (include_focal) ec.pool_station_idx.push_back(0);
    const int extra = include_focal ? count - 1 : count;
    for (int j = 0; j < extra; ++j) {
      sim::StationSpec ps;
      ps.id = 1000 + j;
      ps.bus_id = atk->target_bus;
      ps.rate_kw = cfg.station_rate_kw;
      ps.behavior.arrival_rate_per_hr = 0.0;
      ps.in_attack_pool = true;
      ec.stations.push_back(ps);
      ec.pool_station_idx.push_back(pool_base + j);
    }
  };

  if (is_attack) {
    attack::AttackScenario a;
    a.target_bus = focal_bus;
    a.station_rate_kw = cfg.station_rate_kw;
    a.magnitude_fraction = r.uniform(0.1, 0.3);
    a.aggregate_period_s = r.uniform(1.0, 2.0);
    a.duty = r.uniform(0.3, 0.7);
    a.start_s = grid_t_end - tail;
    a.duration_s = horizon - a.start_s;
    if (plan.cls == ScenarioClass::StealthyAttack) {
      a.kind = attack::Kind::DistributedStealthy;
      a.groups = r.uniform_int(2, 4);
    } else if (plan.fast_kind == 0) {
      a.kind = attack::Kind::SquareWave;
    } else if (plan.fast_kind == 1) {
      a.kind = attack::Kind::AlternatingPortions;
      a.portion = 1.0 / r.uniform_int(2, 5);
    } else {
      a.kind = attack::Kind::DynamicFeedback;
    }
    atk = a;
    const double nominal =
        g.buses[static_cast<std::size_t>(g.bus_index(a.target_bus))].nominal_load_mw;
    focal_in_pool = true;
    if (a.kind == attack::Kind::DynamicFeedback) {
      const int n = attack::fleet_size_for_attack(a.magnitude_fraction * nominal,
                                                  a.station_rate_kw);
      add_pool(std::max(1, n), true);
    } else {
      switch (a.kind) {
        case attack::Kind::SquareWave: ec.schedule = attack::square_wave(a, nominal); break;
        case attack::Kind::AlternatingPortions:
          ec.schedule = attack::alternating_portions(a, nominal);
          break;
        default: ec.schedule = attack::distributed_stealthy(a, nominal); break;
      }
      add_pool(ec.schedule.n_stations(), true);
    }
    ec.attack = atk;
  } else if (plan.cls == ScenarioClass::VerySlowAbnormal) {
    if (r.uniform() < 0.5) {
      // someone else's pool gets attacked; the focal station stays benign
      attack::AttackScenario a;
      a.kind = attack::Kind::SquareWave;
      a.target_bus = g.buses[static_cast<std::size_t>(r.uniform_int(0, g.n_buses() - 1))].id;
      a.station_rate_kw = cfg.station_rate_kw;
      a.magnitude_fraction = r.uniform(0.1, 0.3);
      a.aggregate_period_s = r.uniform(1.0, 2.0);
      a.duty = r.uniform(0.3, 0.7);
      a.start_s = r.uniform(100.0, 118.0);
      a.duration_s = horizon - a.start_s;
      atk = a;
      const double nominal =
          g.buses[static_cast<std::size_t>(g.bus_index(a.target_bus))].nominal_load_mw;
      ec.schedule = attack::square_wave(a, nominal);
      add_pool(ec.schedule.n_stations(), false);
      ec.attack = atk;
    } else {
      const int steps = r.uniform_int(1, 2);
      for (int j = 0; j < steps; ++j) {
        sim::LoadStep ls;
        const auto& bus =
            g.buses[static_cast<std::size_t>(r.uniform_int(0, g.n_buses() - 1))];
        ls.bus_id = bus.id;
        const double frac = r.uniform(0.08, 0.15) * (r.uniform() < 0.5 ? -1.0 : 1.0);
        ls.mw = frac * bus.nominal_load_mw;
        ls.t0 = r.uniform(grid_t_end - 30.0, grid_t_end - 4.0);
        ls.t1 = std::min(ls.t0 + r.uniform(4.0, 20.0), horizon);
        ec.extra_steps.push_back(ls);
      }
    }
  }

  // Sparse stations rarely produce a natural cut point, so trigger-anchored
  // windows get a plausible inspection replug near the end of the horizon.
  const bool wants_trigger = !is_attack && plan.trigger_anchor;
  if (wants_trigger && plan.cls != ScenarioClass::FastNormal) {
    const double t_a = r.uniform(121.5, 124.0);
    ec.extra_commands.emplace_back(0, fleet::Command{t_a, fleet::EventKind::Stop});
    ec.extra_commands.emplace_back(0, fleet::Command{t_a + 1.0, fleet::EventKind::Start});
  }

  sim::Engine engine(ec);
  sim::EngineResult res = engine.run();
  const auto& focal_log = res.logs.at(0);

  double t_end = grid_t_end;
  if (wants_trigger) {
    double last_ev = -1.0;
    for (const auto& e : focal_log.events)
      if (e.t >= 121.0 && e.t <= grid_t_end && e.t > last_ev) last_ev = e.t;
    if (last_ev > 0.0) t_end = sim::snap_window_end(last_ev);
  } else if (is_attack) {
    t_end = atk->start_s + tail;
  }

  WindowSample ws;
  ws.scenario_id = sid;
  ws.station_id = static_cast<std::uint32_t>(focal_log.station_id);
  ws.bus_id = focal_bus;
  ws.scenario_class = static_cast<std::uint8_t>(plan.cls);
  ws.t_end_s = t_end;
  ws.events = encode_events(fleet::window_events(focal_log, t_end));

  const auto& rows = res.freq.freq_hz;
  const int bcol = g.bus_index(focal_bus);
  const long long idx_end = std::llround(t_end / 0.5);
  const long long idx0 = idx_end - (kWindowLen - 1);
  if (idx0 < 0 || idx_end >= static_cast<long long>(rows.size()))
    throw SimulationFault("window extends past the simulated trace", t_end);
  for (int i = 0; i < kWindowLen; ++i)
    ws.freq_hz[static_cast<std::size_t>(i)] =
        rows[static_cast<std::size_t>(idx0 + i)][static_cast<std::size_t>(bcol)];

  bool commanded_in_tail = false;
  for (const auto& e : focal_log.events)
    if (e.t >= t_end - tail && e.t < t_end) commanded_in_tail = true;
  const bool attack_on_bus = atk.has_value() && atk->target_bus == focal_bus;
  const bool overlaps = atk.has_value() && atk->start_s < t_end &&
                        atk->start_s + atk->duration_s > t_end - tail;
  ws.label = label_window(focal_in_pool, attack_on_bus, commanded_in_tail, overlaps);
  if (is_attack && ws.label != 1)
    throw SimulationFault("attack scenario left no focal evidence in the window", t_end);
  return ws;
}

}  // namespace

double regime_tail_s(Regime r) { return r == Regime::Attack5 ? 5.0 : 10.0; }

int Dataset::count_label(std::uint8_t label) const {
  int n = 0;
  for (const auto& s : samples) n += (s.label == label) ? 1 : 0;
  return n;
}

NormBounds compute_bounds(const std::vector<WindowSample>& samples) {
  if (samples.empty()) return {};
  NormBounds b{samples[0].freq_hz[0], samples[0].freq_hz[0]};
  for (const auto& s : samples)
    for (double v : s.freq_hz) {
      b.min_hz = std::min(b.min_hz, v);
      b.max_hz = std::max(b.max_hz, v);
    }
  return b;
}

Dataset synthesize_dataset(const SynthConfig& cfg) {
  const auto plans = build_plan(cfg);
  const grid::GridModel g = grid::build_grid(cfg.grid_topology);

  Dataset out;
  out.regime = cfg.regime;
  out.seed = cfg.seed;
  out.grid_name = g.name;
  out.samples.resize(plans.size());

  std::exception_ptr eptr = nullptr;
  std::mutex mu;
  parallel_chunks(static_cast<int>(plans.size()), cfg.mode, [&](int, int lo, int hi) {
    try {
      for (int i = lo; i < hi; ++i)
        out.samples[static_cast<std::size_t>(i)] =
            make_sample(g, cfg, static_cast<std::uint32_t>(i), plans[static_cast<std::size_t>(i)]);
    } catch (...) {
      const std::lock_guard<std::mutex> lk(mu);
      if (!eptr) eptr = std::current_exception();
    }
  });
  if (eptr) std::rethrow_exception(eptr);

  out.bounds = compute_bounds(out.samples);
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw UsageError("train fraction must be in (0, 1)");

  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < d.samples.size(); ++i)
    by_label[d.samples[i].label ? 1 : 0].push_back(i);

  Rng r = Rng(seed).stream(kTagSplit);
  std::array<std::vector<std::size_t>, 2> train_idx, test_idx;
  for (int l = 0; l < 2; ++l) {
    auto& idx = by_label[static_cast<std::size_t>(l)];
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(r.uniform_int(0, static_cast<int>(i) - 1))]);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    train_idx[static_cast<std::size_t>(l)].assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    test_idx[static_cast<std::size_t>(l)].assign(idx.begin() + static_cast<long>(n_train), idx.end());
  }

  auto assemble = [&](const std::array<std::vector<std::size_t>, 2>& per_label) {
    Dataset s;
    s.regime = d.regime;
    s.seed = d.seed;
    s.grid_name = d.grid_name;
    std::vector<std::size_t> all;
    for (const auto& v : per_label) all.insert(all.end(), v.begin(), v.end());
    std::sort(all.begin(), all.end());
    s.samples.reserve(all.size());
    for (std::size_t i : all) s.samples.push_back(d.samples[i]);
    return s;
  };
  Dataset train = assemble(train_idx);
  Dataset test = assemble(test_idx);
  train.bounds = compute_bounds(train.samples);
  test.bounds = train.bounds;
  return {std::move(train), std::move(test)};
}

namespace {
constexpr const char* kDatasetMagic = "OGDS1";
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataFormatError("cannot open dataset file for writing: " + path);
  write_bytes(os, kDatasetMagic, 5);
  write_u32(os, 1);
  write_u8(os, static_cast<std::uint8_t>(d.regime));
  write_u64(os, d.seed);
  write_string(os, d.grid_name);
  write_f64(os, d.bounds.min_hz);
  write_f64(os, d.bounds.max_hz);
  write_u64(os, d.samples.size());
  for (const auto& s : d.samples) {
    write_u32(os, s.scenario_id);
    write_u32(os, s.station_id);
    write_u32(os, static_cast<std::uint32_t>(s.bus_id));
    write_u8(os, s.label);
    write_u8(os, s.scenario_class);
    write_f64(os, s.t_end_s);
    for (double v : s.events) write_f64(os, v);
    for (double v : s.freq_hz) write_f64(os, v);
  }
  if (!os) throw DataFormatError("short write while saving dataset: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open dataset file: " + path);
  expect_magic(is, kDatasetMagic, "dataset");
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw DataFormatError("unsupported dataset version");
  Dataset d;
  const std::uint8_t regime = read_u8(is);
  if (regime != 5 && regime != 10) throw DataFormatError("unknown dataset regime");
  d.regime = static_cast<Regime>(regime);
  d.seed = read_u64(is);
  d.grid_name = read_string(is);
  d.bounds.min_hz = read_f64(is);
  d.bounds.max_hz = read_f64(is);
  const std::uint64_t n = read_u64(is);
  d.samples.resize(n);
  for (auto& s : d.samples) {
    s.scenario_id = read_u32(is);
    s.station_id = read_u32(is);
    s.bus_id = static_cast<std::int32_t>(read_u32(is));
    s.label = read_u8(is);
    if (s.label > 1) throw DataFormatError("dataset label outside {0,1}");
    s.scenario_class = read_u8(is);
    if (s.scenario_class < 1 || s.scenario_class > 6)
      throw DataFormatError("dataset scenario class outside 1..6");
    s.t_end_s = read_f64(is);
    for (auto& v : s.events) {
      v = read_f64(is);
      if (v != 0.0 && v != 1.0 && v != 2.0)
        throw DataFormatError("event channel code outside {0,1,2}");
    }
    for (auto& v : s.freq_hz) v = read_f64(is);
  }
  return d;
}

void write_trace_csv(const grid::FrequencyTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataFormatError("cannot open trace csv for writing: " + path);
  os << "time_s,bus_id,freq_hz\n";
  os.precision(17);
  for (std::size_t k = 0; k < trace.freq_hz.size(); ++k) {
    const double t = static_cast<double>(k) * trace.sample_dt;
    for (std::size_t b = 0; b < trace.bus_ids.size(); ++b)
      os << t << ',' << trace.bus_ids[b] << ',' << trace.freq_hz[k][b] << '\n';
  }
  if (!os) throw DataFormatError("short write on trace csv: " + path);
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line, std::size_t want) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != want) throw DataFormatError("csv row has wrong column count: " + line);
  return cells;
}

double parse_f64(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw DataFormatError("trailing junk in csv number: " + s);
    return v;
  } catch (const DataFormatError&) {
    throw;
  } catch (const std::exception&) {
    throw DataFormatError("bad csv number: " + s);
  }
}

int parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw DataFormatError("trailing junk in csv integer: " + s);
    return v;
  } catch (const DataFormatError&) {
    throw;
  } catch (const std::exception&) {
    throw DataFormatError("bad csv integer: " + s);
  }
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

grid::FrequencyTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataFormatError("cannot open trace csv: " + path);
  std::string line;
  if (!std::getline(is, line) || strip_cr(line) != "time_s,bus_id,freq_hz")
    throw DataFormatError("trace csv header mismatch in " + path);

  grid::FrequencyTrace tr;
  std::vector<double> times;
  while (std::getline(is, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_row(line, 3);
    const double t = parse_f64(cells[0]);
    const int bus = parse_int(cells[1]);
    const double f = parse_f64(cells[2]);
    if (times.empty() || t != times.back()) {
      times.push_back(t);
      tr.freq_hz.emplace_back();
    }
    if (times.size() == 1) tr.bus_ids.push_back(bus);
    auto& row = tr.freq_hz.back();
    if (row.size() >= tr.bus_ids.size() ||
        tr.bus_ids[row.size()] != bus)
      throw DataFormatError("trace csv bus order is inconsistent at t=" + cells[0]);
    row.push_back(f);
  }
  for (const auto& row : tr.freq_hz)
    if (row.size() != tr.bus_ids.size())
      throw DataFormatError("trace csv is ragged in " + path);
  if (times.size() >= 2) tr.sample_dt = times[1] - times[0];
  return tr;
}

void write_log_csv(const std::vector<fleet::StationLog>& logs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataFormatError("cannot open log csv for writing: " + path);
  os << "station_id,bus_id,time_s,event\n";
  os.precision(17);
  for (const auto& lg : logs)
    for (const auto& e : lg.events)
      os << lg.station_id << ',' << lg.bus_id << ',' << e.t << ','
         << (e.kind == fleet::EventKind::Start ? "start" : "stop") << '\n';
  if (!os) throw DataFormatError("short write on log csv: " + path);
}

std::vector<fleet::StationLog> read_log_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataFormatError("cannot open log csv: " + path);
  std::string line;
  if (!std::getline(is, line) || strip_cr(line) != "station_id,bus_id,time_s,event")
    throw DataFormatError("log csv header mismatch in " + path);

  std::vector<fleet::StationLog> logs;
  while (std::getline(is, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_row(line, 4);
    const int sid = parse_int(cells[0]);
    const int bus = parse_int(cells[1]);
    const double t = parse_f64(cells[2]);
    fleet::EventKind kind;
    if (cells[3] == "start") kind = fleet::EventKind::Start;
    else if (cells[3] == "stop") kind = fleet::EventKind::Stop;
    else throw DataFormatError("unknown event kind in log csv: " + cells[3]);

    auto it = std::find_if(logs.begin(), logs.end(),
                           [&](const fleet::StationLog& lg) { return lg.station_id == sid; });
    if (it == logs.end()) {
      fleet::StationLog lg;
      lg.station_id = sid;
      lg.bus_id = bus;
      logs.push_back(std::move(lg));
      it = std::prev(logs.end());
    } else if (it->bus_id != bus) {
      throw DataFormatError("station switches buses mid log csv");
    }
    it->events.push_back({t, kind});
  }
  return logs;
}

}  // namespace osciguard::data
