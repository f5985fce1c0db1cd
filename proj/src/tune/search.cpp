#include "osciguard/tune/search.hpp"

#include <algorithm>
#include <cmath>

#include "osciguard/core/errors.hpp"

namespace osciguard::tune {

namespace {
constexpr std::uint64_t kTagTrial = 0x7214;

int jitter_int(int v, int lo, int hi, Rng& r) {
  const int j = static_cast<int>(std::lround(v * r.uniform(0.9, 1.1)));
  return std::clamp(j, lo, hi);
}
}  // namespace

nn::NetworkSpec sample_spec(const std::string& family, const SearchSpace& sp, Rng& r) {
  nn::NetworkSpec s;
  s.family = family;
  s.lr = std::exp(r.uniform(std::log(sp.lr_lo), std::log(sp.lr_hi)));
  s.dropout = r.uniform(sp.dropout_lo, sp.dropout_hi);
  s.batch = r.uniform_int(sp.batch_lo, sp.batch_hi);
  s.units1 = r.uniform_int(sp.units_lo, sp.units_hi);
  s.units2 = r.uniform_int(sp.units_lo, sp.units_hi);
  s.units3 = r.uniform_int(sp.units_lo, sp.units_hi);
  s.epochs = r.uniform_int(sp.epochs_lo, sp.epochs_hi);
  s.filters1 = r.uniform_int(sp.filters_lo, sp.filters_hi);
  s.filters2 = r.uniform_int(sp.filters_lo, sp.filters_hi);
  s.kernel1 = r.uniform_int(sp.kernel_lo, sp.kernel_hi);
  s.kernel2 = r.uniform_int(sp.kernel_lo, sp.kernel_hi);
  s.init_seed = r.next_u64();
  return s;
}

void rank_trials(std::vector<TrialResult>& trials) {
  std::stable_sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.f_pct != b.f_pct) return a.f_pct > b.f_pct;
    if (a.val.fn != b.val.fn) return a.val.fn < b.val.fn;
    return a.index < b.index;
  });
}

namespace {

TrialResult run_trial(int index, const nn::NetworkSpec& spec, const data::Dataset& train,
                      const data::Dataset& val, std::uint64_t seed, ExecMode mode) {
  TrialResult tr;
  tr.index = index;
  tr.spec = spec;
  nn::Network net(spec);
  nn::TrainConfig tc;
  tc.shuffle_seed = mix_seed(seed, static_cast<std::uint64_t>(index) * 2 + 1);
  tc.mode = mode;
  tr.train = nn::train_network(net, train, tc);
  const EvalResult ev = evaluate(net, val);
  tr.val = ev.confusion;
  tr.f_pct = f_measure_pct(ev.confusion);
  return tr;
}

}  // namespace

std::vector<TrialResult> random_search(const std::string& family, const data::Dataset& train,
                                       const data::Dataset& val, int n_trials,
                                       std::uint64_t seed, ExecMode mode,
                                       const SearchSpace& space) {
  if (n_trials < 1) throw UsageError("search needs at least one trial");
  std::vector<TrialResult> trials;
  trials.reserve(static_cast<std::size_t>(n_trials));
  Rng root(seed);
  for (int i = 0; i < n_trials; ++i) {
    Rng r = root.stream(mix_seed(kTagTrial, static_cast<std::uint64_t>(i)));
    const nn::NetworkSpec spec = sample_spec(family, space, r);
    trials.push_back(run_trial(i, spec, train, val, seed, mode));
  }
  rank_trials(trials);
  return trials;
}

std::vector<TrialResult> refine_search(const nn::NetworkSpec& incumbent,
                                       const data::Dataset& train, const data::Dataset& val,
                                       int n_trials, std::uint64_t seed, ExecMode mode,
                                       const SearchSpace& sp) {
  if (n_trials < 1) throw UsageError("refinement needs at least one trial");
  std::vector<TrialResult> trials;
  trials.reserve(static_cast<std::size_t>(n_trials));
  Rng root(seed);
  for (int i = 0; i < n_trials; ++i) {
    nn::NetworkSpec s = incumbent;
    if (i > 0) {
      Rng r = root.stream(mix_seed(kTagTrial, static_cast<std::uint64_t>(i)));
      s.lr = std::clamp(incumbent.lr * r.uniform(0.9, 1.1), sp.lr_lo, sp.lr_hi);
      s.dropout = std::clamp(incumbent.dropout * r.uniform(0.9, 1.1), sp.dropout_lo,
                             sp.dropout_hi);
      s.batch = jitter_int(incumbent.batch, sp.batch_lo, sp.batch_hi, r);
      s.units1 = jitter_int(incumbent.units1, sp.units_lo, sp.units_hi, r);
      s.units2 = jitter_int(incumbent.units2, sp.units_lo, sp.units_hi, r);
      s.units3 = jitter_int(incumbent.units3, sp.units_lo, sp.units_hi, r);
      s.epochs = jitter_int(incumbent.epochs, sp.epochs_lo, sp.epochs_hi, r);
      s.filters1 = jitter_int(incumbent.filters1, sp.filters_lo, sp.filters_hi, r);
      s.filters2 = jitter_int(incumbent.filters2, sp.filters_lo, sp.filters_hi, r);
      s.kernel1 = jitter_int(incumbent.kernel1, sp.kernel_lo, sp.kernel_hi, r);
      s.kernel2 = jitter_int(incumbent.kernel2, sp.kernel_lo, sp.kernel_hi, r);
      s.init_seed = r.next_u64();
    }
    trials.push_back(run_trial(i, s, train, val, seed, mode));
  }
  rank_trials(trials);
  return trials;
}

ProbeResult early_detection_probe(nn::Network& net, const data::Dataset& probe_set,
                                  double threshold) {
  const EvalResult ev = evaluate(net, probe_set, threshold);
  ProbeResult pr;
  pr.confusion = ev.confusion;
  pr.recall_pct = recall_pct(ev.confusion);
  const long long d = ev.confusion.fp + ev.confusion.tn;
  pr.fp_rate_pct =
      d == 0 ? 0.0 : 100.0 * static_cast<double>(ev.confusion.fp) / static_cast<double>(d);
  return pr;
}

}  // namespace osciguard::tune
