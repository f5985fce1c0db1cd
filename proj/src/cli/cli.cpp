#include "osciguard/cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "osciguard/core/errors.hpp"
#include "osciguard/data/dataset.hpp"
#include "osciguard/mitigation/loop.hpp"
#include "osciguard/nn/checkpoint.hpp"
#include "osciguard/nn/train.hpp"
#include "osciguard/tune/search.hpp"

namespace osciguard::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw UsageError("config file not found: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataFormatError("config file " + path + " is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw DataFormatError("config file " + path + " must hold a JSON object");
  return j;
}

/// Explicit command-line flags win; otherwise config values; otherwise the
/// built-in defaults already sitting in the variable.
template <class T>
void merge_cfg(const json& c, const CLI::Option* opt, const char* key, T& v) {
  if (opt && opt->count() > 0) return;
  if (!c.contains(key)) return;
  try {
    v = c.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataFormatError(std::string("config key '") + key + "' has the wrong type");
  }
}

fs::path out_dir(const std::string& out) {
  const fs::path p = out.empty() ? fs::path(".") : fs::path(out);
  if (!fs::exists(p) || !fs::is_directory(p))
    throw UsageError("output directory does not exist: " + p.string());
  return p;
}

void write_json_file(const fs::path& p, const json& j) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw UsageError("cannot write " + p.string());
  os << j.dump(2) << "\n";
}

void write_text_file(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw UsageError("cannot write " + p.string());
  os << s;
}

std::string fmt_g(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.10g", v);
  return b;
}

data::Regime parse_regime(const std::string& s) {
  if (s == "attack5" || s == "5") return data::Regime::Attack5;
  if (s == "attack10" || s == "10") return data::Regime::Attack10;
  throw UsageError("unknown regime '" + s + "' (want attack5 or attack10)");
}

std::string regime_name(data::Regime r) {
  return r == data::Regime::Attack5 ? "attack5" : "attack10";
}

/// Options shared by every subcommand.
struct Common {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 1;
  bool serial = false;
  CLI::Option* seed_opt = nullptr;

  ExecMode mode() const { return serial ? ExecMode::Serial : ExecMode::Parallel; }
};

void add_common(CLI::App* sub, Common& c, std::uint64_t default_seed) {
  c.seed = default_seed;
  sub->add_option("--config", c.config, "JSON config file; flags override its values");
  sub->add_option("--out", c.out, "output directory (must exist)");
  c.seed_opt = sub->add_option("--seed", c.seed, "root seed for this run");
  sub->add_flag("--serial", c.serial, "disable the OpenMP execution path");
}

json confusion_json(const tune::Confusion& c) {
  return json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

json metrics_json(const tune::Confusion& c) {
  return json{{"accuracy_pct", tune::accuracy_pct(c)},
              {"f_measure_pct", tune::f_measure_pct(c)},
              {"recall_pct", tune::recall_pct(c)},
              {"precision_pct", tune::precision_pct(c)}};
}

std::string metrics_table(const tune::Confusion& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-12s %8s\n"
                "%-12s %8.3f\n%-12s %8.3f\n%-12s %8.3f\n%-12s %8.3f\n\n"
                "%-12s %8s %8s\n"
                "%-12s %8lld %8lld\n%-12s %8lld %8lld\n",
                "metric", "value", "Accuracy", tune::accuracy_pct(c), "F-measure",
                tune::f_measure_pct(c), "Recall", tune::recall_pct(c), "Precision",
                tune::precision_pct(c), "confusion", "N", "A", "N", c.tn, c.fp, "A", c.fn, c.tp);
  return buf;
}

nn::NetworkSpec load_spec_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("spec file not found: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataFormatError("spec file " + path + " is not valid JSON: " + std::string(e.what()));
  }
  return nn::NetworkSpec::from_json(j);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  Common common;
  int n_normal = 1000;
  int n_attack = 1000;
  std::string regime = "attack5";
  std::string grid = "wscc9";
  double probe_tail = 0.0;
  double split = 0.0;
};

int run_synth(const SynthArgs& a, const json& cfg) {
  data::SynthConfig sc;
  sc.grid_topology = a.grid;
  sc.regime = parse_regime(a.regime);
  sc.n_normal = a.n_normal;
  sc.n_attack = a.n_attack;
  sc.seed = a.common.seed;
  sc.probe_tail_s = a.probe_tail;
  sc.mode = a.common.mode();
  merge_cfg(cfg, nullptr, "perturb_cap_fraction", sc.perturb_cap_fraction);
  merge_cfg(cfg, nullptr, "station_rate_kw", sc.station_rate_kw);
  merge_cfg(cfg, nullptr, "background_stations", sc.background_stations);
  merge_cfg(cfg, nullptr, "stealthy_share", sc.stealthy_share);
  merge_cfg(cfg, nullptr, "horizon_s", sc.horizon_s);
  if (a.split != 0.0 && (a.split <= 0.0 || a.split >= 1.0))
    throw UsageError("--split must lie in (0,1)");

  const fs::path out = out_dir(a.common.out);
  Stopwatch sw;
  const data::Dataset ds = data::synthesize_dataset(sc);
  const double synth_s = sw.seconds();

  const std::string stem =
      "dataset_" + regime_name(sc.regime) + (sc.probe_tail_s > 0.0 ? "_probe" : "");
  json files;
  if (a.split > 0.0) {
    const auto [tr, te] = data::split_dataset(ds, a.split, a.common.seed);
    const fs::path trp = out / ("train_" + regime_name(sc.regime) + ".ogds");
    const fs::path tep = out / ("test_" + regime_name(sc.regime) + ".ogds");
    data::save_dataset(tr, trp.string());
    data::save_dataset(te, tep.string());
    files["train"] = trp.string();
    files["test"] = tep.string();
    std::cout << "wrote " << trp.string() << " (" << tr.samples.size() << " windows)\n";
    std::cout << "wrote " << tep.string() << " (" << te.samples.size() << " windows)\n";
  } else {
    const fs::path dp = out / (stem + ".ogds");
    data::save_dataset(ds, dp.string());
    files["dataset"] = dp.string();
    std::cout << "wrote " << dp.string() << " (" << ds.samples.size() << " windows)\n";
  }

  json class_counts = json::object();
  for (int c = 1; c <= 6; ++c) {
    long long n = 0;
    for (const auto& s : ds.samples)
      if (s.scenario_class == c) ++n;
    class_counts[std::to_string(c)] = n;
  }

  json summary{{"command", "synth"},
               {"grid", ds.grid_name},
               {"regime", regime_name(sc.regime)},
               {"seed", sc.seed},
               {"n_normal", sc.n_normal},
               {"n_attack", sc.n_attack},
               {"probe_tail_s", sc.probe_tail_s},
               {"split", a.split},
               {"bounds", {{"min_hz", ds.bounds.min_hz}, {"max_hz", ds.bounds.max_hz}}},
               {"class_counts", class_counts},
               {"label_counts",
                {{"normal", ds.count_label(0)}, {"attack", ds.count_label(1)}}},
               {"files", files},
               {"timing", {{"synth_s", synth_s}}}};
  write_json_file(out / "synth_summary.json", summary);
  std::cout << "wrote " << (out / "synth_summary.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  Common common;
  std::string data;
  std::string spec_file;
  std::string name = "model";
  std::string family = "convlstm";
  nn::NetworkSpec spec;
  CLI::Option *o_units1, *o_units2, *o_units3, *o_filters1, *o_filters2, *o_kernel1, *o_kernel2,
      *o_dropout, *o_lr, *o_batch, *o_epochs, *o_init_seed, *o_family;
};

int run_train(TrainArgs& a, const json& cfg) {
  require_file(a.data, "--data dataset");
  nn::NetworkSpec spec;
  if (!a.spec_file.empty()) spec = load_spec_file(a.spec_file);
  spec.family = a.o_family->count() || a.spec_file.empty() ? a.family : spec.family;
  auto take = [&](const CLI::Option* o, auto member, auto value) {
    if (o->count() > 0) spec.*member = value;
  };
  take(a.o_units1, &nn::NetworkSpec::units1, a.spec.units1);
  take(a.o_units2, &nn::NetworkSpec::units2, a.spec.units2);
  take(a.o_units3, &nn::NetworkSpec::units3, a.spec.units3);
  take(a.o_filters1, &nn::NetworkSpec::filters1, a.spec.filters1);
  take(a.o_filters2, &nn::NetworkSpec::filters2, a.spec.filters2);
  take(a.o_kernel1, &nn::NetworkSpec::kernel1, a.spec.kernel1);
  take(a.o_kernel2, &nn::NetworkSpec::kernel2, a.spec.kernel2);
  take(a.o_dropout, &nn::NetworkSpec::dropout, a.spec.dropout);
  take(a.o_lr, &nn::NetworkSpec::lr, a.spec.lr);
  take(a.o_batch, &nn::NetworkSpec::batch, a.spec.batch);
  take(a.o_epochs, &nn::NetworkSpec::epochs, a.spec.epochs);
  take(a.o_init_seed, &nn::NetworkSpec::init_seed, a.spec.init_seed);
  merge_cfg(cfg, a.o_dropout, "dropout", spec.dropout);
  merge_cfg(cfg, a.o_lr, "lr", spec.lr);
  merge_cfg(cfg, a.o_batch, "batch", spec.batch);
  merge_cfg(cfg, a.o_epochs, "epochs", spec.epochs);

  const fs::path out = out_dir(a.common.out);
  const data::Dataset ds = data::load_dataset(a.data);

  nn::Network net(spec);
  net.set_mode(a.common.mode());
  nn::TrainConfig tc;
  tc.shuffle_seed = a.common.seed;
  tc.mode = a.common.mode();
  Stopwatch sw;
  const nn::TrainResult tr = nn::train_network(net, ds, tc);
  const double train_s = sw.seconds();

  nn::CheckpointMeta meta;
  meta.spec = spec;
  meta.bounds = ds.bounds;
  meta.grid_name = ds.grid_name;
  meta.dataset_seed = ds.seed;
  meta.extra = json{{"train_windows", ds.samples.size()},
                    {"shuffle_seed", tc.shuffle_seed},
                    {"final_loss", tr.history.empty() ? 0.0 : tr.history.back().loss}};
  const fs::path ck = out / (a.name + ".ogck");
  nn::save_checkpoint(ck.string(), net, meta);
  std::cout << "wrote " << ck.string() << "\n";

  json history = json::array();
  for (const auto& e : tr.history)
    history.push_back(json{{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  json summary{{"command", "train"},
               {"data", a.data},
               {"n_windows", ds.samples.size()},
               {"spec", spec.to_json()},
               {"n_params", net.n_params()},
               {"shuffle_seed", tc.shuffle_seed},
               {"history", history},
               {"files", {{"checkpoint", ck.string()}}},
               {"timing", {{"train_s", train_s}}}};
  write_json_file(out / "train_summary.json", summary);
  std::cout << "wrote " << (out / "train_summary.json").string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- tune ----

struct TuneArgs {
  Common common;
  std::string data;
  std::string family = "convlstm";
  int trials = 12;
  int refine_trials = 6;
  double val_frac = 0.25;
};

void leaderboard_rows(std::ostringstream& os, const std::string& stage,
                      const std::vector<tune::TrialResult>& trials) {
  for (std::size_t rank = 0; rank < trials.size(); ++rank) {
    const auto& t = trials[rank];
    const auto& s = t.spec;
    os << stage << ',' << rank << ',' << t.index << ',' << fmt_g(t.f_pct) << ',' << t.val.tp
       << ',' << t.val.fp << ',' << t.val.tn << ',' << t.val.fn << ',' << s.family << ','
       << fmt_g(s.lr) << ',' << fmt_g(s.dropout) << ',' << s.batch << ',' << s.units1 << ','
       << s.units2 << ',' << s.units3 << ',' << s.epochs << ',' << s.filters1 << ','
       << s.filters2 << ',' << s.kernel1 << ',' << s.kernel2 << ',' << s.init_seed << '\n';
  }
}

int run_tune(const TuneArgs& a, const json& cfg) {
  require_file(a.data, "--data dataset");
  if (a.val_frac <= 0.0 || a.val_frac >= 1.0) throw UsageError("--val-frac must lie in (0,1)");
  if (a.trials < 1 || a.refine_trials < 1) throw UsageError("trial counts must be positive");
  tune::SearchSpace space;
  merge_cfg(cfg, nullptr, "lr_lo", space.lr_lo);
  merge_cfg(cfg, nullptr, "lr_hi", space.lr_hi);
  merge_cfg(cfg, nullptr, "epochs_lo", space.epochs_lo);
  merge_cfg(cfg, nullptr, "epochs_hi", space.epochs_hi);
  merge_cfg(cfg, nullptr, "units_lo", space.units_lo);
  merge_cfg(cfg, nullptr, "units_hi", space.units_hi);
  merge_cfg(cfg, nullptr, "batch_lo", space.batch_lo);
  merge_cfg(cfg, nullptr, "batch_hi", space.batch_hi);

  const fs::path out = out_dir(a.common.out);
  const data::Dataset ds = data::load_dataset(a.data);
  const auto [tr, val] = data::split_dataset(ds, 1.0 - a.val_frac, a.common.seed);

  Stopwatch sw1;
  auto stage1 = tune::random_search(a.family, tr, val, a.trials, mix_seed(a.common.seed, 1),
                                    a.common.mode(), space);
  const double search_s = sw1.seconds();
  Stopwatch sw2;
  auto stage2 = tune::refine_search(stage1.front().spec, tr, val, a.refine_trials,
                                    mix_seed(a.common.seed, 2), a.common.mode(), space);
  const double refine_s = sw2.seconds();
  const tune::TrialResult& best = stage2.front();

  std::ostringstream lb;
  lb << "stage,rank,trial,f_pct,tp,fp,tn,fn,family,lr,dropout,batch,units1,units2,units3,"
        "epochs,filters1,filters2,kernel1,kernel2,init_seed\n";
  leaderboard_rows(lb, "random", stage1);
  leaderboard_rows(lb, "refine", stage2);
  write_text_file(out / "leaderboard.csv", lb.str());
  write_json_file(out / "best_spec.json", best.spec.to_json());

  json summary{{"command", "tune"},
               {"data", a.data},
               {"family", a.family},
               {"trials", a.trials},
               {"refine_trials", a.refine_trials},
               {"val_frac", a.val_frac},
               {"train_windows", tr.samples.size()},
               {"val_windows", val.samples.size()},
               {"stage1_best_f_pct", stage1.front().f_pct},
               {"best_f_pct", best.f_pct},
               {"best_confusion", confusion_json(best.val)},
               {"best_spec", best.spec.to_json()},
               {"files",
                {{"leaderboard", (out / "leaderboard.csv").string()},
                 {"best_spec", (out / "best_spec.json").string()}}},
               {"timing", {{"search_s", search_s}, {"refine_s", refine_s}}}};
  write_json_file(out / "tune_summary.json", summary);
  std::cout << "best F " << fmt_g(best.f_pct) << "% (fn " << best.val.fn << ")\n";
  std::cout << "wrote " << (out / "tune_summary.json").string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string data;
  std::string confusion;  // "tp,fn,tn,fp" fixture, bypasses the model
  std::string name = "metrics";
  double threshold = 0.5;
};

tune::Confusion parse_confusion(const std::string& s) {
  tune::Confusion c;
  long long v[4];
  char extra;
  if (std::sscanf(s.c_str(), "%lld,%lld,%lld,%lld%c", &v[0], &v[1], &v[2], &v[3], &extra) != 4)
    throw UsageError("--confusion wants exactly four integers: tp,fn,tn,fp");
  if (v[0] < 0 || v[1] < 0 || v[2] < 0 || v[3] < 0)
    throw UsageError("--confusion counts must be non-negative");
  c.tp = v[0];
  c.fn = v[1];
  c.tn = v[2];
  c.fp = v[3];
  return c;
}

int run_eval(const EvalArgs& a, const json&) {
  const fs::path out = out_dir(a.common.out);
  tune::Confusion c;
  std::string source;
  double eval_s = 0.0;
  if (!a.confusion.empty()) {
    c = parse_confusion(a.confusion);
    source = "fixture";
  } else {
    require_file(a.checkpoint, "--checkpoint");
    require_file(a.data, "--data dataset");
    auto [net, meta] = nn::load_checkpoint(a.checkpoint);
    net->set_mode(a.common.mode());
    data::Dataset ds = data::load_dataset(a.data);
    ds.bounds = meta.bounds;  // score with the normalization the model learned
    Stopwatch sw;
    const tune::EvalResult ev = tune::evaluate(*net, ds, a.threshold);
    eval_s = sw.seconds();
    c = ev.confusion;
    source = "checkpoint";
  }

  const std::string table = metrics_table(c);
  std::cout << table;
  write_text_file(out / (a.name + ".txt"), table);
  json summary{{"command", "eval"},
               {"source", source},
               {"threshold", a.threshold},
               {"confusion", confusion_json(c)},
               {"metrics", metrics_json(c)},
               {"files", {{"table", (out / (a.name + ".txt")).string()}}},
               {"timing", {{"eval_s", eval_s}}}};
  if (!a.data.empty()) summary["data"] = a.data;
  if (!a.checkpoint.empty()) summary["checkpoint"] = a.checkpoint;
  write_json_file(out / (a.name + ".json"), summary);
  std::cout << "wrote " << (out / (a.name + ".json")).string() << "\n";
  return 0;
}

// ------------------------------------------------------------- probe-1s ----

struct ProbeArgs {
  Common common;
  std::string checkpoint;
  std::string grid;  // empty = grid the checkpoint was trained on
  int n_normal = 500;
  int n_attack = 500;
  double tail = 1.0;
  double threshold = 0.5;
};

int run_probe(const ProbeArgs& a, const json& cfg) {
  require_file(a.checkpoint, "--checkpoint");
  if (a.tail <= 0.0) throw UsageError("--tail must be positive");
  const fs::path out = out_dir(a.common.out);
  auto [net, meta] = nn::load_checkpoint(a.checkpoint);
  net->set_mode(a.common.mode());

  data::SynthConfig sc;
  sc.grid_topology = a.grid.empty() ? meta.grid_name : a.grid;
  sc.regime = data::Regime::Attack5;  // class mix is shared; the tail is overridden anyway
  sc.n_normal = a.n_normal;
  sc.n_attack = a.n_attack;
  sc.seed = a.common.seed;
  sc.probe_tail_s = a.tail;
  sc.mode = a.common.mode();
  merge_cfg(cfg, nullptr, "station_rate_kw", sc.station_rate_kw);

  Stopwatch sw;
  data::Dataset ds = data::synthesize_dataset(sc);
  const double synth_s = sw.seconds();
  ds.bounds = meta.bounds;
  Stopwatch sw2;
  const tune::ProbeResult pr = tune::early_detection_probe(*net, ds, a.threshold);
  const double eval_s = sw2.seconds();

  json summary{{"command", "probe-1s"},
               {"checkpoint", a.checkpoint},
               {"grid", sc.grid_topology},
               {"seed", sc.seed},
               {"tail_s", a.tail},
               {"n_normal", a.n_normal},
               {"n_attack", a.n_attack},
               {"threshold", a.threshold},
               {"recall_pct", pr.recall_pct},
               {"fp_rate_pct", pr.fp_rate_pct},
               {"confusion", confusion_json(pr.confusion)},
               {"timing", {{"synth_s", synth_s}, {"eval_s", eval_s}}}};
  write_json_file(out / "probe_summary.json", summary);
  std::cout << "probe recall " << fmt_g(pr.recall_pct) << "% with " << pr.confusion.fp
            << " false alarms (" << fmt_g(pr.fp_rate_pct) << "%)\n";
  std::cout << "wrote " << (out / "probe_summary.json").string() << "\n";
  return 0;
}

// -------------------------------------------------------- mitigate-demo ----

struct MitigateArgs {
  Common common;
  std::string m1, m2;
  // option targets bind straight into the demo config so the defaults shown
  // by --help are the ones the library actually uses
  mitigation::DemoConfig dc;
  bool worst_case = false;
  double forced_after = 5.0;
};

void write_series_csv(const fs::path& p, const char* header, const std::vector<double>& t,
                      const std::vector<double>& v) {
  std::ostringstream os;
  os << header << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) os << fmt_g(t[i]) << ',' << fmt_g(v[i]) << '\n';
  write_text_file(p, os.str());
}

int run_mitigate(const MitigateArgs& a, const json& cfg) {
  require_file(a.m1, "--m1 checkpoint");
  require_file(a.m2, "--m2 checkpoint");
  const fs::path out = out_dir(a.common.out);
  auto [net1, meta1] = nn::load_checkpoint(a.m1);
  auto [net2, meta2] = nn::load_checkpoint(a.m2);
  net1->set_mode(a.common.mode());
  net2->set_mode(a.common.mode());
  mitigation::NetworkClassifier c1(*net1, meta1.bounds);
  mitigation::NetworkClassifier c2(*net2, meta2.bounds);

  mitigation::DemoConfig dc = a.dc;
  dc.seed = a.common.seed;
  dc.forced_detect_after_s = a.worst_case ? a.forced_after : -1.0;
  dc.m1 = &c1;
  dc.m2 = &c2;
  merge_cfg(cfg, nullptr, "perturb_cap_fraction", dc.perturb_cap_fraction);
  merge_cfg(cfg, nullptr, "station_rate_kw", dc.station_rate_kw);
  merge_cfg(cfg, nullptr, "max_delay_s", dc.max_delay_s);
  merge_cfg(cfg, nullptr, "background_stations", dc.background_stations);

  Stopwatch sw;
  const mitigation::MitigationReport rep = mitigation::run_closed_loop(dc);
  const double demo_s = sw.seconds();

  const grid::GridModel model = grid::build_grid(dc.grid_topology);
  const int col = model.bus_index(dc.target_bus);
  auto bus_series = [&](const grid::FrequencyTrace& tr) {
    std::pair<std::vector<double>, std::vector<double>> s;
    for (int i = 0; i < tr.n_samples(); ++i) {
      s.first.push_back(i * tr.sample_dt);
      s.second.push_back(
          tr.freq_hz[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)]);
    }
    return s;
  };
  const auto bf = bus_series(rep.base_freq);
  const auto mf = bus_series(rep.mit_freq);
  write_series_csv(out / "freq_base.csv", "time_s,freq_hz", bf.first, bf.second);
  write_series_csv(out / "freq_mitigated.csv", "time_s,freq_hz", mf.first, mf.second);
  write_series_csv(out / "load_base.csv", "time_s,attack_load_mw", rep.load_t,
                   rep.base_load_mw);
  write_series_csv(out / "load_mitigated.csv", "time_s,attack_load_mw", rep.load_t,
                   rep.mit_load_mw);

  json hist = json::array();
  for (long long n : rep.delay_histogram) hist.push_back(n);
  std::map<std::string, long long> src_counts;
  for (const auto& r : rep.reports) ++src_counts[r.label_source];
  const json by_source(src_counts);
  json summary{{"command", "mitigate-demo"},
               {"grid", dc.grid_topology},
               {"target_bus", dc.target_bus},
               {"seed", a.common.seed},
               {"worst_case_detection", a.worst_case},
               {"attack_start_s", rep.attack_start_s},
               {"detection_time_s", rep.activation_s},
               {"time_to_normal_band_s", rep.time_to_band_s},
               {"band_hz", rep.band_hz},
               {"pool_stations", rep.pool_stations},
               {"total_attack_mw", rep.total_attack_mw},
               {"plateau_ratio", rep.plateau_ratio},
               {"spectral_ratio", rep.spectral_ratio},
               {"osc_before_hz", rep.osc_before_hz},
               {"osc_after_1s_hz", rep.osc_after_1s_hz},
               {"delayed_requests", rep.delayed_requests},
               {"delay_histogram", hist},
               {"activations", rep.activations},
               {"reports_count", rep.reports.size()},
               {"reports_by_source", by_source},
               {"cold_starts", rep.cold_starts},
               {"files",
                {{"freq_base", (out / "freq_base.csv").string()},
                 {"freq_mitigated", (out / "freq_mitigated.csv").string()},
                 {"load_base", (out / "load_base.csv").string()},
                 {"load_mitigated", (out / "load_mitigated.csv").string()}}},
               {"timing", {{"demo_s", demo_s}}}};
  write_json_file(out / "mitigation_summary.json", summary);
  std::cout << "detection at t=" << fmt_g(rep.activation_s) << "s, back in band after "
            << fmt_g(rep.time_to_band_s) << "s, plateau " << fmt_g(rep.plateau_ratio * 100.0)
            << "% of the attack load\n";
  std::cout << "wrote " << (out / "mitigation_summary.json").string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"EV charging fleet and grid co-simulation, detection, and mitigation toolkit"};
  app.require_subcommand(1);

  SynthArgs sy;
  CLI::App* synth = app.add_subcommand("synth", "synthesize a labeled window dataset");
  add_common(synth, sy.common, 42);
  synth->add_option("--normal", sy.n_normal, "normal scenarios");
  synth->add_option("--attack", sy.n_attack, "attack scenarios");
  synth->add_option("--regime", sy.regime, "attack tail regime: attack5 or attack10");
  synth->add_option("--grid", sy.grid, "grid topology name");
  synth->add_option("--probe-tail", sy.probe_tail, "override the attack tail (seconds)");
  synth->add_option("--split", sy.split, "train fraction; 0 writes a single file");

  TrainArgs tn;
  CLI::App* train = app.add_subcommand("train", "train a detector on a dataset");
  add_common(train, tn.common, 7);
  train->add_option("--data", tn.data, "dataset file (.ogds)");
  train->add_option("--spec", tn.spec_file, "network spec JSON (e.g. tune's best_spec.json)");
  train->add_option("--name", tn.name, "checkpoint file stem");
  tn.o_family = train->add_option("--family", tn.family, "lstm or convlstm");
  tn.o_units1 = train->add_option("--units1", tn.spec.units1, "recurrent units");
  tn.o_units2 = train->add_option("--units2", tn.spec.units2, "first dense width");
  tn.o_units3 = train->add_option("--units3", tn.spec.units3, "second dense width (lstm)");
  tn.o_filters1 = train->add_option("--filters1", tn.spec.filters1, "first conv filters");
  tn.o_filters2 = train->add_option("--filters2", tn.spec.filters2, "second conv filters");
  tn.o_kernel1 = train->add_option("--kernel1", tn.spec.kernel1, "first conv kernel");
  tn.o_kernel2 = train->add_option("--kernel2", tn.spec.kernel2, "second conv kernel");
  tn.o_dropout = train->add_option("--dropout", tn.spec.dropout, "dropout rate");
  tn.o_lr = train->add_option("--lr", tn.spec.lr, "Adam learning rate");
  tn.o_batch = train->add_option("--batch", tn.spec.batch, "batch size");
  tn.o_epochs = train->add_option("--epochs", tn.spec.epochs, "training epochs");
  tn.o_init_seed = train->add_option("--init-seed", tn.spec.init_seed, "weight init seed");

  TuneArgs tu;
  CLI::App* tunec = app.add_subcommand("tune", "two-stage random hyperparameter search");
  add_common(tunec, tu.common, 1);
  tunec->add_option("--data", tu.data, "dataset file (.ogds)");
  tunec->add_option("--family", tu.family, "lstm or convlstm");
  tunec->add_option("--trials", tu.trials, "stage-1 random trials");
  tunec->add_option("--refine-trials", tu.refine_trials, "stage-2 local trials");
  tunec->add_option("--val-frac", tu.val_frac, "validation fraction");

  EvalArgs ev;
  CLI::App* evalc = app.add_subcommand("eval", "score a checkpoint or a confusion fixture");
  add_common(evalc, ev.common, 1);
  evalc->add_option("--checkpoint", ev.checkpoint, "trained detector (.ogck)");
  evalc->add_option("--data", ev.data, "dataset file (.ogds)");
  evalc->add_option("--confusion", ev.confusion, "fixture counts tp,fn,tn,fp");
  evalc->add_option("--threshold", ev.threshold, "decision threshold");
  evalc->add_option("--name", ev.name, "output file stem");

  ProbeArgs pr;
  CLI::App* probe = app.add_subcommand("probe-1s", "early-detection probe on 1 s attack tails");
  add_common(probe, pr.common, 99);
  probe->add_option("--checkpoint", pr.checkpoint, "trained detector (.ogck)");
  probe->add_option("--grid", pr.grid, "grid topology (default: checkpoint's)");
  probe->add_option("--normal", pr.n_normal, "normal scenarios");
  probe->add_option("--attack", pr.n_attack, "attack scenarios");
  probe->add_option("--tail", pr.tail, "attack tail seconds in the probe windows");
  probe->add_option("--threshold", pr.threshold, "decision threshold");

  MitigateArgs mi;
  CLI::App* mit = app.add_subcommand("mitigate-demo", "closed-loop random-delay mitigation");
  add_common(mit, mi.common, 1);
  mit->add_option("--m1", mi.m1, "short-tail detector checkpoint");
  mit->add_option("--m2", mi.m2, "long-tail detector checkpoint");
  mit->add_option("--grid", mi.dc.grid_topology, "grid topology name");
  mit->add_option("--bus", mi.dc.target_bus, "attacked bus id");
  mit->add_option("--magnitude", mi.dc.magnitude_fraction,
                  "attack size as a fraction of the bus load");
  mit->add_option("--period", mi.dc.period_s, "aggregate switching period (s)");
  mit->add_option("--duty", mi.dc.duty, "on fraction of each period");
  mit->add_option("--attack-start", mi.dc.attack_start_s, "attack start (s)");
  mit->add_option("--horizon", mi.dc.horizon_s, "simulation end (s)");
  mit->add_option("--band", mi.dc.band_hz, "normal frequency band (Hz about nominal)");
  mit->add_flag("--worst-case-detection", mi.worst_case,
                "force activation exactly --forced-detect-after seconds into the attack");
  mit->add_option("--forced-detect-after", mi.forced_after,
                  "forced detection latency for the worst case (s)");
  mit->add_option("--threshold", mi.dc.threshold, "detector decision threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    Common* c = nullptr;
    if (synth->parsed()) c = &sy.common;
    if (train->parsed()) c = &tn.common;
    if (tunec->parsed()) c = &tu.common;
    if (evalc->parsed()) c = &ev.common;
    if (probe->parsed()) c = &pr.common;
    if (mit->parsed()) c = &mi.common;
    const json cfg = load_config_file(c ? c->config : "");
    if (c) merge_cfg(cfg, c->seed_opt, "seed", c->seed);

    if (synth->parsed()) return run_synth(sy, cfg);
    if (train->parsed()) return run_train(tn, cfg);
    if (tunec->parsed()) return run_tune(tu, cfg);
    if (evalc->parsed()) return run_eval(ev, cfg);
    if (probe->parsed()) return run_probe(pr, cfg);
    if (mit->parsed()) return run_mitigate(mi, cfg);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataFormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationFault& e) {
    std::cerr << "simulation fault: " << e.what() << "\n";
    return 3;
  } catch (const TrainingFault& e) {
    std::cerr << "training fault: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "fault: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace osciguard::cli
