#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osciguard/core/errors.hpp"
#include "osciguard/data/dataset.hpp"
#include "osciguard/nn/adam.hpp"
#include "osciguard/nn/checkpoint.hpp"
#include "osciguard/nn/train.hpp"

using namespace osciguard;

namespace {

std::string temp_path(const std::string& stem) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "osciguard_train_tests";
  std::filesystem::create_directories(dir);
  return (dir / (stem + "_" + std::to_string(counter++))).string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Small corpus shared by the training tests; serial so the cases stand alone.
data::Dataset small_corpus() {
  data::SynthConfig cfg;
  cfg.n_normal = 24;
  cfg.n_attack = 24;
  cfg.seed = 11;
  cfg.mode = ExecMode::Serial;
  return data::synthesize_dataset(cfg);
}

nn::NetworkSpec small_spec() {
  nn::NetworkSpec spec;
  spec.family = "lstm";
  spec.units1 = 8;
  spec.units2 = 6;
  spec.units3 = 4;
  spec.dropout = 0.2;
  spec.lr = 0.01;
  spec.batch = 16;
  spec.epochs = 3;
  spec.init_seed = 5;
  return spec;
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

nn::Param make_param(const std::string& name, std::vector<double> value,
                     std::vector<double> grad) {
  nn::Param p;
  p.name = name;
  p.value = nn::Tensor({static_cast<int>(value.size())});
  p.value.vec() = std::move(value);
  p.grad = nn::Tensor(p.value.shape());
  p.grad.vec() = std::move(grad);
  return p;
}

}  // namespace

TEST_CASE("batch assembly interleaves event codes with normalized frequency") {
  data::Dataset ds;
  data::WindowSample a;
  for (int t = 0; t < data::kWindowLen; ++t) {
    a.events[static_cast<std::size_t>(t)] = static_cast<double>(t % 3);
    a.freq_hz[static_cast<std::size_t>(t)] = 59.5 + static_cast<double>(t) * 0.005;
  }
  a.label = 1;
  data::WindowSample b;
  b.events.fill(2.0);
  b.freq_hz.fill(60.0);
  b.label = 0;
  ds.samples = {a, b};

  const data::NormBounds bounds{59.5, 60.5};
  nn::Tensor x = nn::assemble_batch(ds, {1, 0}, bounds);
  REQUIRE(x.shape() == std::vector<int>{2, 240, 2});

  for (int t = 0; t < 240; ++t) {
    CHECK(x[static_cast<std::size_t>(2 * t)] == 2.0);
    CHECK(x[static_cast<std::size_t>(2 * t + 1)] == doctest::Approx(0.5).epsilon(1e-12));
  }
  for (int t = 0; t < 240; ++t) {
    const std::size_t off = 480 + static_cast<std::size_t>(2 * t);
    CHECK(x[off] == static_cast<double>(t % 3));
    const double want = std::min(1.0, static_cast<double>(t) * 0.005 / 1.0);
    CHECK(x[off + 1] == doctest::Approx(want).epsilon(1e-12));
  }

  // Normalization honors the bounds argument, not whatever the dataset carries.
  const data::NormBounds wide{59.0, 61.0};
  nn::Tensor xw = nn::assemble_batch(ds, {1}, wide);
  CHECK(xw[1] == doctest::Approx(0.5).epsilon(1e-12));

  // Duplicated and reordered indices are honored as given.
  nn::Tensor xd = nn::assemble_batch(ds, {0, 0}, bounds);
  REQUIRE(xd.shape() == std::vector<int>{2, 240, 2});
  for (std::size_t i = 0; i < 480; ++i) CHECK(xd[i] == xd[480 + i]);
}

TEST_CASE("batch labels follow the index list") {
  data::Dataset ds;
  for (int i = 0; i < 5; ++i) {
    data::WindowSample s;
    s.label = static_cast<std::uint8_t>(i % 2);
    ds.samples.push_back(s);
  }
  const auto y = nn::batch_labels(ds, {4, 0, 3, 3});
  REQUIRE(y.size() == 4);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 1.0);
  CHECK(y[3] == 1.0);
}

TEST_CASE("binary cross entropy matches a direct evaluation") {
  nn::Tensor logits({3, 1});
  logits[0] = 0.3;
  logits[1] = -1.2;
  logits[2] = 2.0;
  const std::vector<double> y{1.0, 0.0, 1.0};

  nn::Tensor dlogits;
  const double loss = nn::bce_with_logits(logits, y, dlogits);

  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double p = sigmoid(logits[static_cast<std::size_t>(i)]);
    want -= y[static_cast<std::size_t>(i)] * std::log(p) +
            (1.0 - y[static_cast<std::size_t>(i)]) * std::log(1.0 - p);
  }
  want /= 3.0;
  CHECK(loss == doctest::Approx(want).epsilon(1e-12));

  REQUIRE(dlogits.shape() == logits.shape());
  for (int i = 0; i < 3; ++i) {
    const double p = sigmoid(logits[static_cast<std::size_t>(i)]);
    CHECK(dlogits[static_cast<std::size_t>(i)] ==
          doctest::Approx((p - y[static_cast<std::size_t>(i)]) / 3.0).epsilon(1e-12));
  }

  // A perfect prediction is clamped away from log(0).
  nn::Tensor sure({1});
  sure[0] = -50.0;
  nn::Tensor dsure;
  const double clamped = nn::bce_with_logits(sure, {1.0}, dsure);
  CHECK(clamped == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(dsure[0] == doctest::Approx(1e-7 - 1.0).epsilon(1e-9));
  CHECK(std::isfinite(clamped));

  nn::Tensor two({2});
  nn::Tensor scratch;
  CHECK_THROWS_AS(nn::bce_with_logits(two, {1.0}, scratch), UsageError);
}

TEST_CASE("adam matches a hand stepped reference") {
  nn::Param w = make_param("w", {1.0, -2.0, 0.5}, {0.0, 0.0, 0.0});
  nn::Param b = make_param("b", {0.25}, {0.0});
  const std::vector<nn::Param*> params{&w, &b};

  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  nn::Adam opt(lr, b1, b2, eps);
  CHECK(opt.t() == 0);

  std::vector<double> ref_w = w.value.vec(), ref_b = b.value.vec();
  std::vector<double> mw(3, 0.0), vw(3, 0.0), mb(1, 0.0), vb(1, 0.0);

  for (int step = 1; step <= 5; ++step) {
    // Deterministic made-up gradients varying per step and element.
    for (int k = 0; k < 3; ++k)
      w.grad[static_cast<std::size_t>(k)] = 0.3 * step - 0.4 * k;
    b.grad[0] = -0.1 * step;

    const double c1 = 1.0 - std::pow(b1, step);
    const double c2 = 1.0 - std::pow(b2, step);
    for (int k = 0; k < 3; ++k) {
      const double g = w.grad[static_cast<std::size_t>(k)];
      mw[static_cast<std::size_t>(k)] = b1 * mw[static_cast<std::size_t>(k)] + (1.0 - b1) * g;
      vw[static_cast<std::size_t>(k)] = b2 * vw[static_cast<std::size_t>(k)] + (1.0 - b2) * g * g;
      ref_w[static_cast<std::size_t>(k)] -=
          lr * (mw[static_cast<std::size_t>(k)] / c1) /
          (std::sqrt(vw[static_cast<std::size_t>(k)] / c2) + eps);
    }
    const double gb = b.grad[0];
    mb[0] = b1 * mb[0] + (1.0 - b1) * gb;
    vb[0] = b2 * vb[0] + (1.0 - b2) * gb * gb;
    ref_b[0] -= lr * (mb[0] / c1) / (std::sqrt(vb[0] / c2) + eps);

    opt.step(params);
    CHECK(opt.t() == step);
    for (int k = 0; k < 3; ++k)
      CHECK(w.value[static_cast<std::size_t>(k)] ==
            doctest::Approx(ref_w[static_cast<std::size_t>(k)]).epsilon(1e-15));
    CHECK(b.value[0] == doctest::Approx(ref_b[0]).epsilon(1e-15));
  }
}

TEST_CASE("adam's first step moves each weight by about the learning rate") {
  nn::Param w = make_param("w", {0.0, 0.0}, {2.0, -0.5});
  nn::Adam opt(0.01);
  opt.step({&w});
  // Bias correction makes mhat = g and vhat = g*g, so the first update is
  // -lr * sign(g) up to the denominator epsilon.
  CHECK(w.value[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(w.value[1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam leaves weights alone when gradients are zero") {
  nn::Param w = make_param("w", {1.5, -0.75}, {0.0, 0.0});
  nn::Adam opt(0.1);
  opt.step({&w});
  CHECK(w.value[0] == 1.5);
  CHECK(w.value[1] == -0.75);
}

TEST_CASE("adam rejects a parameter list it was not built for") {
  nn::Param a = make_param("a", {1.0}, {0.1});
  nn::Param b = make_param("b", {2.0}, {0.2});
  nn::Adam opt(0.01);
  opt.step({&a, &b});
  CHECK_THROWS_AS(opt.step({&a}), UsageError);

  nn::Param wide = make_param("wide", {1.0, 2.0}, {0.1, 0.2});
  CHECK_THROWS_AS(opt.step({&a, &wide}), UsageError);
}

TEST_CASE("training reduces the loss and reproduces bit for bit") {
  const data::Dataset ds = small_corpus();
  REQUIRE(ds.samples.size() == 48);

  nn::TrainConfig cfg;
  cfg.mode = ExecMode::Serial;

  nn::Network net(small_spec());
  const nn::TrainResult res = nn::train_network(net, ds, cfg);
  REQUIRE(res.history.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(res.history[static_cast<std::size_t>(e)].epoch == e + 1);
    CHECK(std::isfinite(res.history[static_cast<std::size_t>(e)].loss));
    CHECK(res.history[static_cast<std::size_t>(e)].accuracy >= 0.0);
    CHECK(res.history[static_cast<std::size_t>(e)].accuracy <= 1.0);
  }
  CHECK(res.history.back().loss < res.history.front().loss);

  nn::Network again(small_spec());
  const nn::TrainResult rerun = nn::train_network(again, ds, cfg);
  REQUIRE(rerun.history.size() == res.history.size());
  for (std::size_t e = 0; e < res.history.size(); ++e) {
    CHECK(rerun.history[e].loss == res.history[e].loss);
    CHECK(rerun.history[e].accuracy == res.history[e].accuracy);
  }
  const auto p1 = nn::predict(net, ds);
  const auto p2 = nn::predict(again, ds);
  REQUIRE(p1.size() == ds.samples.size());
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);

  nn::Network other(small_spec());
  nn::TrainConfig shuffled = cfg;
  shuffled.shuffle_seed = 8;
  const nn::TrainResult moved = nn::train_network(other, ds, shuffled);
  bool any_diff = false;
  for (std::size_t e = 0; e < moved.history.size(); ++e)
    any_diff = any_diff || moved.history[e].loss != res.history[e].loss;
  CHECK(any_diff);

  data::Dataset empty;
  nn::Network fresh(small_spec());
  CHECK_THROWS_AS(nn::train_network(fresh, empty, cfg), UsageError);
}

TEST_CASE("config overrides shadow the spec hyperparameters") {
  const data::Dataset ds = small_corpus();

  // Reference run drives everything from the spec.
  nn::Network ref_net(small_spec());
  nn::TrainConfig plain;
  plain.mode = ExecMode::Serial;
  const nn::TrainResult ref = nn::train_network(ref_net, ds, plain);

  // Same architecture and init, deliberately wrong training fields in the
  // spec, corrected through the config.
  nn::NetworkSpec junk = small_spec();
  junk.lr = 0.9;
  junk.batch = 7;
  junk.epochs = 9;
  nn::Network net(junk);
  nn::TrainConfig cfg;
  cfg.mode = ExecMode::Serial;
  cfg.lr = 0.01;
  cfg.batch = 16;
  cfg.epochs = 3;
  const nn::TrainResult res = nn::train_network(net, ds, cfg);

  REQUIRE(res.history.size() == ref.history.size());
  for (std::size_t e = 0; e < res.history.size(); ++e) {
    CHECK(res.history[e].loss == ref.history[e].loss);
    CHECK(res.history[e].accuracy == ref.history[e].accuracy);
  }
  const auto pa = nn::predict(ref_net, ds, 16);
  const auto pb = nn::predict(net, ds, 16);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("predictions are probabilities and independent of batch size") {
  const data::Dataset ds = small_corpus();
  nn::Network net(small_spec());
  nn::TrainConfig cfg;
  cfg.mode = ExecMode::Serial;
  cfg.epochs = 1;
  nn::train_network(net, ds, cfg);

  const auto base = nn::predict(net, ds, 16);
  REQUIRE(base.size() == ds.samples.size());
  for (double p : base) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  for (int bs : {1, 5, 48, 1000}) {
    const auto probs = nn::predict(net, ds, bs);
    REQUIRE(probs.size() == base.size());
    for (std::size_t i = 0; i < probs.size(); ++i) CHECK(probs[i] == base[i]);
  }
  // Inference does not mutate the network.
  const auto repeat = nn::predict(net, ds, 16);
  for (std::size_t i = 0; i < repeat.size(); ++i) CHECK(repeat[i] == base[i]);
}

TEST_CASE("training throws once the loss stops being finite") {
  const data::Dataset ds = small_corpus();
  nn::NetworkSpec spec = small_spec();
  spec.lr = 1e300;  // one update flings the weights past the overflow edge
  nn::Network net(spec);
  nn::TrainConfig cfg;
  cfg.mode = ExecMode::Serial;
  CHECK_THROWS_AS(nn::train_network(net, ds, cfg), TrainingFault);
}

TEST_CASE("checkpoints round trip the network bit for bit") {
  const data::Dataset ds = small_corpus();
  nn::Network net(small_spec());
  nn::TrainConfig cfg;
  cfg.mode = ExecMode::Serial;
  cfg.epochs = 1;
  nn::train_network(net, ds, cfg);  // move params and running stats off init

  nn::CheckpointMeta meta;
  meta.spec = small_spec();
  meta.bounds = ds.bounds;
  meta.grid_name = ds.grid_name;
  meta.dataset_seed = ds.seed;
  meta.extra = nlohmann::json{{"note", "fixture"}, {"f1", 0.5}};

  const std::string path = temp_path("ckpt") + ".ogck";
  nn::save_checkpoint(path, net, meta);

  auto [loaded, got] = nn::load_checkpoint(path);
  CHECK(got.spec.family == meta.spec.family);
  CHECK(got.spec.units1 == meta.spec.units1);
  CHECK(got.spec.units2 == meta.spec.units2);
  CHECK(got.spec.units3 == meta.spec.units3);
  CHECK(got.spec.dropout == meta.spec.dropout);
  CHECK(got.spec.lr == meta.spec.lr);
  CHECK(got.spec.batch == meta.spec.batch);
  CHECK(got.spec.epochs == meta.spec.epochs);
  CHECK(got.spec.init_seed == meta.spec.init_seed);
  CHECK(got.bounds.min_hz == meta.bounds.min_hz);
  CHECK(got.bounds.max_hz == meta.bounds.max_hz);
  CHECK(got.grid_name == meta.grid_name);
  CHECK(got.dataset_seed == meta.dataset_seed);
  CHECK(got.extra == meta.extra);

  const auto orig_params = net.params();
  const auto load_params = loaded->params();
  REQUIRE(orig_params.size() == load_params.size());
  for (std::size_t i = 0; i < orig_params.size(); ++i) {
    CHECK(load_params[i]->name == orig_params[i]->name);
    CHECK(load_params[i]->value.vec() == orig_params[i]->value.vec());
  }
  const auto orig_state = net.state();
  const auto load_state = loaded->state();
  REQUIRE(orig_state.size() == load_state.size());
  for (std::size_t i = 0; i < orig_state.size(); ++i)
    CHECK(load_state[i]->value.vec() == orig_state[i]->value.vec());

  const auto p_orig = nn::predict(net, ds, 16);
  const auto p_load = nn::predict(*loaded, ds, 16);
  for (std::size_t i = 0; i < p_orig.size(); ++i) CHECK(p_load[i] == p_orig[i]);

  // Saving the loaded copy reproduces the file byte for byte.
  const std::string again = temp_path("ckpt_resave") + ".ogck";
  nn::save_checkpoint(again, *loaded, got);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("checkpoint loader rejects damaged files") {
  const data::Dataset ds = small_corpus();
  nn::Network net(small_spec());
  nn::CheckpointMeta meta;
  meta.spec = small_spec();
  meta.bounds = ds.bounds;

  const std::string path = temp_path("ckpt_damage") + ".ogck";
  nn::save_checkpoint(path, net, meta);
  const std::string bytes = slurp(path);
  REQUIRE(bytes.size() > 32);

  auto write_variant = [&](const std::string& stem, const std::string& content) {
    const std::string p = temp_path(stem) + ".ogck";
    std::ofstream os(p, std::ios::binary);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    return p;
  };

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(nn::load_checkpoint(write_variant("bad_magic", wrong_magic)),
                  DataFormatError);

  std::string wrong_version = bytes;
  for (int i = 5; i < 9; ++i) wrong_version[static_cast<std::size_t>(i)] = '\xff';
  CHECK_THROWS_AS(nn::load_checkpoint(write_variant("bad_version", wrong_version)),
                  DataFormatError);

  const std::string truncated = bytes.substr(0, bytes.size() - 16);
  CHECK_THROWS_AS(nn::load_checkpoint(write_variant("truncated", truncated)),
                  DataFormatError);

  CHECK_THROWS_AS(nn::load_checkpoint(temp_path("missing") + ".ogck"), DataFormatError);
}
