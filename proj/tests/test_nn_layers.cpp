#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "osciguard/core/errors.hpp"
#include "osciguard/core/rng.hpp"
#include "osciguard/nn/gradcheck.hpp"
#include "osciguard/nn/layers.hpp"
#include "osciguard/nn/network.hpp"
#include "osciguard/nn/tensor.hpp"

using namespace osciguard;
using namespace osciguard::nn;

namespace {

LayerContext train_ctx() {
  LayerContext c;
  c.training = true;
  return c;
}

LayerContext infer_ctx() { return LayerContext{}; }

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Tensor random_windows(int n, std::uint64_t seed) {
  Tensor x({n, kInputSteps, kInputFeatures});
  Rng r(seed);
  for (int b = 0; b < n; ++b)
    for (int t = 0; t < kInputSteps; ++t) {
      x[static_cast<std::size_t>((b * kInputSteps + t) * 2)] =
          static_cast<double>(r.uniform_int(0, 2));
      x[static_cast<std::size_t>((b * kInputSteps + t) * 2 + 1)] = r.uniform();
    }
  return x;
}

}  // namespace

TEST_CASE("tensor shape arithmetic and reshape guards") {
  Tensor t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.dim(1) == 3);
  CHECK_THROWS_AS(t.dim(3), UsageError);
  t.reshape({6, 4});
  CHECK(t.ndim() == 2);
  CHECK_THROWS_AS(t.reshape({5, 4}), UsageError);
  CHECK_THROWS_AS(Tensor({2, 0}), UsageError);
  CHECK(shape_str({2, 3}) == "[2,3]");
}

TEST_CASE("dense layer computes rows times weights plus bias on any rank") {
  Dense d(2, 3, Rng(1));
  auto ps = d.params();
  REQUIRE(ps.size() == 2);
  // w is [in, out] row major
  const std::array<double, 6> w = {0.5, -1.0, 2.0, 1.5, 0.25, -0.5};
  for (std::size_t i = 0; i < 6; ++i) ps[0]->value[i] = w[i];
  ps[1]->value[0] = 0.1;
  ps[1]->value[1] = -0.2;
  ps[1]->value[2] = 0.3;

  Tensor x({2, 3, 2});
  for (long long i = 0; i < x.numel(); ++i) x[static_cast<std::size_t>(i)] = 0.5 * (double)i - 1.0;
  const Tensor y = d.forward(x, infer_ctx());
  REQUIRE(y.shape() == std::vector<int>{2, 3, 3});
  for (int r = 0; r < 6; ++r) {
    const double a = x[static_cast<std::size_t>(2 * r)];
    const double b = x[static_cast<std::size_t>(2 * r + 1)];
    CHECK(y[static_cast<std::size_t>(3 * r + 0)] ==
          doctest::Approx(a * w[0] + b * w[3] + 0.1).epsilon(1e-12));
    CHECK(y[static_cast<std::size_t>(3 * r + 1)] ==
          doctest::Approx(a * w[1] + b * w[4] - 0.2).epsilon(1e-12));
    CHECK(y[static_cast<std::size_t>(3 * r + 2)] ==
          doctest::Approx(a * w[2] + b * w[5] + 0.3).epsilon(1e-12));
  }

  Tensor bad({2, 3});
  CHECK_THROWS_AS(d.forward(bad, infer_ctx()), UsageError);
}

TEST_CASE("leaky relu keeps positives and scales negatives in both passes") {
  LeakyReLU l(0.1);
  Tensor x({4});
  x[0] = 2.0;
  x[1] = -3.0;
  x[2] = 0.0;
  x[3] = 1e-9;
  const Tensor y = l.forward(x, infer_ctx());
  CHECK(y[0] == 2.0);
  CHECK(y[1] == doctest::Approx(-0.3));
  CHECK(y[2] == 0.0);
  CHECK(y[3] == doctest::Approx(1e-9));

  Tensor dy({4});
  dy.fill(1.0);
  const Tensor dx = l.backward(dy, infer_ctx());
  CHECK(dx[0] == 1.0);
  CHECK(dx[1] == doctest::Approx(0.1));
  CHECK(dx[2] == doctest::Approx(0.1));  // zero sits on the leaky side
  CHECK(dx[3] == 1.0);
}

TEST_CASE("batch norm standardizes with batch stats and tracks running ones") {
  BatchNorm bn(2);
  CHECK(bn.eps() == doctest::Approx(1e-9));
  Tensor x({4, 2});
  const std::array<double, 8> vals = {1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0};
  for (std::size_t i = 0; i < 8; ++i) x[i] = vals[i];

  const Tensor y = bn.forward(x, train_ctx());
  for (int f = 0; f < 2; ++f) {
    double m = 0.0, v = 0.0;
    for (int r = 0; r < 4; ++r) m += y[static_cast<std::size_t>(2 * r + f)];
    m /= 4.0;
    for (int r = 0; r < 4; ++r) {
      const double d = y[static_cast<std::size_t>(2 * r + f)] - m;
      v += d * d;
    }
    v /= 4.0;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  }

  // running stats blend one step toward the batch stats (momentum 0.99)
  auto st = bn.state();
  REQUIRE(st.size() == 2);
  CHECK(st[0]->value[0] == doctest::Approx(0.01 * 2.5).epsilon(1e-12));
  CHECK(st[0]->value[1] == doctest::Approx(0.01 * 25.0).epsilon(1e-12));
  CHECK(st[1]->value[0] == doctest::Approx(0.99 + 0.01 * 1.25).epsilon(1e-12));
  CHECK(st[1]->value[1] == doctest::Approx(0.99 + 0.01 * 125.0).epsilon(1e-12));

  // inference uses the running estimates, not the batch ones
  const Tensor yi = bn.forward(x, infer_ctx());
  const double rm = st[0]->value[0];
  const double rv = st[1]->value[0];
  CHECK(yi[0] == doctest::Approx((1.0 - rm) / std::sqrt(rv + bn.eps())).epsilon(1e-12));

  Tensor bad({4, 3});
  CHECK_THROWS_AS(bn.forward(bad, train_ctx()), UsageError);
}

TEST_CASE("dropout masks are counter-seeded, scaled and reproducible") {
  CHECK_THROWS_AS(Dropout(1.0, 1), UsageError);
  CHECK_THROWS_AS(Dropout(-0.1, 1), UsageError);

  Tensor x({1000});
  x.fill(1.0);

  Dropout d(0.4, 77);
  const Tensor off = d.forward(x, infer_ctx());
  for (long long i = 0; i < off.numel(); ++i) CHECK(off[static_cast<std::size_t>(i)] == 1.0);

  const Tensor a1 = d.forward(x, train_ctx());
  const Tensor a2 = d.forward(x, train_ctx());
  int zeros = 0;
  bool identical = true;
  const double keep = 1.0 / 0.6;
  for (long long i = 0; i < a1.numel(); ++i) {
    const double v = a1[static_cast<std::size_t>(i)];
    CHECK((v == 0.0 || v == doctest::Approx(keep).epsilon(1e-12)));
    zeros += v == 0.0 ? 1 : 0;
    identical = identical && v == a2[static_cast<std::size_t>(i)];
  }
  CHECK(zeros > 330);
  CHECK(zeros < 470);
  CHECK(!identical);  // the call counter advances the mask

  // a fresh instance with the same seed replays the same mask sequence
  Dropout d2(0.4, 77);
  const Tensor b1 = d2.forward(x, train_ctx());
  for (long long i = 0; i < b1.numel(); ++i)
    CHECK(b1[static_cast<std::size_t>(i)] == a1[static_cast<std::size_t>(i)]);

  // frozen mode pins the mask instead of advancing it
  LayerContext fz = train_ctx();
  fz.frozen = true;
  const Tensor f1 = d2.forward(x, fz);
  const Tensor f2 = d2.forward(x, fz);
  for (long long i = 0; i < f1.numel(); ++i)
    CHECK(f1[static_cast<std::size_t>(i)] == f2[static_cast<std::size_t>(i)]);

  // backward kills exactly the dropped coordinates
  Tensor dy({1000});
  dy.fill(2.0);
  const Tensor dx = d2.backward(dy, fz);
  for (long long i = 0; i < dx.numel(); ++i)
    CHECK(dx[static_cast<std::size_t>(i)] ==
          (f2[static_cast<std::size_t>(i)] == 0.0 ? 0.0 : doctest::Approx(2.0 * keep)));
}

TEST_CASE("lstm forward matches a scalar reference cell") {
  Lstm l(1, 2, true, Rng(5));
  auto ps = l.params();
  REQUIRE(ps.size() == 3);
  // gate columns are [i i f f g g o o]
  std::vector<double> wx = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.15, -0.1};
  std::vector<double> wh = {0.05, -0.03, 0.02, 0.04, 0.01,  -0.02, 0.06, 0.03,
                            -0.01, 0.02, 0.03, -0.05, 0.045, 0.01,  -0.04, 0.02};
  std::vector<double> b = {0.1, -0.1, 0.2, 0.3, 0.0, 0.05, -0.2, 0.15};
  for (std::size_t i = 0; i < wx.size(); ++i) ps[0]->value[i] = wx[i];
  for (std::size_t i = 0; i < wh.size(); ++i) ps[1]->value[i] = wh[i];
  for (std::size_t i = 0; i < b.size(); ++i) ps[2]->value[i] = b[i];

  const std::vector<double> xs = {0.5, -1.0, 2.0};
  Tensor x({1, 3, 1});
  for (std::size_t t = 0; t < xs.size(); ++t) x[t] = xs[t];
  const Tensor y = l.forward(x, infer_ctx());
  REQUIRE(y.shape() == std::vector<int>{1, 3, 2});

  double h[2] = {0.0, 0.0}, c[2] = {0.0, 0.0};
  for (std::size_t t = 0; t < xs.size(); ++t) {
    double z[8];
    for (int j = 0; j < 8; ++j)
      z[j] = xs[t] * wx[static_cast<std::size_t>(j)] + h[0] * wh[static_cast<std::size_t>(j)] +
             h[1] * wh[static_cast<std::size_t>(8 + j)] + b[static_cast<std::size_t>(j)];
    for (int u = 0; u < 2; ++u) {
      const double gi = sig(z[u]), gf = sig(z[2 + u]), gg = std::tanh(z[4 + u]),
                   go = sig(z[6 + u]);
      c[u] = gf * c[u] + gi * gg;
      h[u] = go * std::tanh(c[u]);
      CHECK(y[2 * t + static_cast<std::size_t>(u)] == doctest::Approx(h[u]).epsilon(1e-12));
    }
  }

  // last-step mode returns the final hidden state only
  Lstm last(1, 2, false, Rng(5));
  auto ps2 = last.params();
  for (std::size_t i = 0; i < wx.size(); ++i) ps2[0]->value[i] = wx[i];
  for (std::size_t i = 0; i < wh.size(); ++i) ps2[1]->value[i] = wh[i];
  for (std::size_t i = 0; i < b.size(); ++i) ps2[2]->value[i] = b[i];
  const Tensor yl = last.forward(x, infer_ctx());
  REQUIRE(yl.shape() == std::vector<int>{1, 2});
  CHECK(yl[0] == doctest::Approx(h[0]).epsilon(1e-12));
  CHECK(yl[1] == doctest::Approx(h[1]).epsilon(1e-12));

  CHECK_THROWS_AS(l.forward(Tensor({1, 3}), infer_ctx()), UsageError);
  CHECK(l.params()[2]->value.numel() == 8);
  // fresh construction seeds the forget gate bias at one
  Lstm fresh(1, 2, true, Rng(5));
  CHECK(fresh.params()[2]->value[2] == 1.0);
  CHECK(fresh.params()[2]->value[3] == 1.0);
}

TEST_CASE("a one-by-one conv lstm is exactly an lstm cell") {
  // identical seeds draw identical weights because the tensors have the same
  // element counts and the forget bias lands at the same offsets
  Lstm ref(2, 3, true, Rng(9));
  ConvLstm2d conv(2, 3, 1, true, Rng(9));
  auto pr = ref.params();
  auto pc = conv.params();
  for (std::size_t p = 0; p < 3; ++p) {
    REQUIRE(pr[p]->value.numel() == pc[p]->value.numel());
    for (long long i = 0; i < pr[p]->value.numel(); ++i)
      REQUIRE(pr[p]->value[static_cast<std::size_t>(i)] ==
              pc[p]->value[static_cast<std::size_t>(i)]);
  }

  Tensor x3({2, 4, 2});
  Rng r(11);
  for (long long i = 0; i < x3.numel(); ++i) x3[static_cast<std::size_t>(i)] = r.uniform(-1.0, 1.0);
  Tensor x5 = x3;
  x5.reshape({2, 4, 1, 1, 2});

  const Tensor hr = ref.forward(x3, infer_ctx());
  const Tensor hc = conv.forward(x5, infer_ctx());
  REQUIRE(hr.numel() == hc.numel());
  for (long long i = 0; i < hr.numel(); ++i)
    CHECK(hr[static_cast<std::size_t>(i)] == hc[static_cast<std::size_t>(i)]);

  // the backward passes agree on every gradient too
  Tensor dy = hr;
  for (long long i = 0; i < dy.numel(); ++i) dy[static_cast<std::size_t>(i)] = 0.1 * (double)i;
  Tensor dyc = dy;
  dyc.reshape({2, 4, 1, 1, 3});
  const Tensor dxr = ref.backward(dy, infer_ctx());
  const Tensor dxc = conv.backward(dyc, infer_ctx());
  for (long long i = 0; i < dxr.numel(); ++i)
    CHECK(dxr[static_cast<std::size_t>(i)] == dxc[static_cast<std::size_t>(i)]);
  for (std::size_t p = 0; p < 3; ++p)
    for (long long i = 0; i < pr[p]->grad.numel(); ++i)
      CHECK(pr[p]->grad[static_cast<std::size_t>(i)] ==
            doctest::Approx(pc[p]->grad[static_cast<std::size_t>(i)]).epsilon(1e-12));

  CHECK_THROWS_AS(conv.forward(x3, infer_ctx()), UsageError);
  CHECK_THROWS_AS(ConvLstm2d(1, 2, 0, true, Rng(1)), UsageError);
}

TEST_CASE("recurrent stack gradients agree with central differences") {
  NetworkSpec spec;
  spec.family = "lstm";
  spec.units1 = 6;
  spec.units2 = 5;
  spec.units3 = 4;
  spec.dropout = 0.3;
  spec.init_seed = 3;
  Network net(spec);

  const Tensor x = random_windows(3, 21);
  const std::vector<double> y = {0.0, 1.0, 1.0};
  const GradCheckResult res = grad_check(net, x, y, 12);

  CHECK(res.max_rel_err < 1e-4);
  REQUIRE(res.tensors.size() == 13);  // 3 lstm + 2x2 dense + 2x2 bn + 2 head
  // every tensor was probed; zero-bias rows that dropout parks exactly on the
  // activation kink are counted as skipped rather than checked
  int checked = 0;
  for (const auto& t : res.tensors) {
    CHECK(t.n_checked + t.n_skipped > 0);
    checked += t.n_checked;
  }
  CHECK(checked > 80);
  CHECK(res.max_for_prefix("lstm1") < 1e-4);
  CHECK(res.max_for_prefix("dense1") < 1e-4);
  CHECK(res.max_for_prefix("bn1") < 1e-4);
  CHECK(res.max_for_prefix("head") < 1e-4);
  CHECK(!res.worst.empty());
}

TEST_CASE("convolutional stack gradients agree with central differences") {
  NetworkSpec spec;
  spec.family = "convlstm";
  spec.filters1 = 2;
  spec.filters2 = 2;
  spec.kernel1 = 3;
  spec.kernel2 = 3;
  spec.units2 = 5;
  spec.dropout = 0.2;
  spec.init_seed = 4;
  Network net(spec);

  const Tensor x = random_windows(2, 22);
  const std::vector<double> y = {1.0, 0.0};
  const GradCheckResult res = grad_check(net, x, y, 10);

  CHECK(res.max_rel_err < 1e-4);
  REQUIRE(res.tensors.size() == 16);  // 2x3 conv lstm + 2x2 dense + 3x2 bn
  CHECK(res.max_for_prefix("convlstm1") < 1e-4);
  CHECK(res.max_for_prefix("convlstm2") < 1e-4);
  CHECK(res.max_for_prefix("dense1") < 1e-4);
  // with a zero-initialized bias and dropout upstream, the dense bias sits
  // exactly on the kink for every unit, so the guard must have fired
  int skipped = 0;
  for (const auto& t : res.tensors) skipped += t.n_skipped;
  CHECK(skipped > 0);
}

TEST_CASE("network construction is deterministic in the init seed") {
  NetworkSpec spec;
  spec.family = "lstm";
  spec.units1 = 5;
  spec.units2 = 4;
  spec.units3 = 3;
  spec.init_seed = 12;
  Network a(spec), b(spec);
  spec.init_seed = 13;
  Network c(spec);

  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool same_ab = true, same_ac = true;
  for (std::size_t p = 0; p < pa.size(); ++p)
    for (long long i = 0; i < pa[p]->value.numel(); ++i) {
      same_ab = same_ab && pa[p]->value[static_cast<std::size_t>(i)] ==
                               pb[p]->value[static_cast<std::size_t>(i)];
      same_ac = same_ac && pa[p]->value[static_cast<std::size_t>(i)] ==
                               pc[p]->value[static_cast<std::size_t>(i)];
    }
  CHECK(same_ab);
  CHECK(!same_ac);

  // identical specs score identical outputs
  const Tensor x = random_windows(2, 30);
  const Tensor ya = a.forward(x, false);
  const Tensor yb = b.forward(x, false);
  REQUIRE(ya.numel() == 2);
  for (long long i = 0; i < ya.numel(); ++i)
    CHECK(ya[static_cast<std::size_t>(i)] == yb[static_cast<std::size_t>(i)]);

  // parameter count follows the architecture arithmetic
  const long long u1 = 5, u2 = 4, u3 = 3;
  const long long expect = (2 * 4 * u1 + u1 * 4 * u1 + 4 * u1) + (u1 * u2 + u2) + 2 * u2 +
                           (u2 * u3 + u3) + 2 * u3 + (240 * u3 + 1);
  CHECK(a.n_params() == expect);
}

TEST_CASE("network specs validate and round trip through json") {
  NetworkSpec s;
  s.family = "convlstm";
  s.units2 = 24;
  s.filters1 = 5;
  s.filters2 = 8;
  s.kernel1 = 6;
  s.kernel2 = 5;
  s.dropout = 0.18;
  s.lr = 0.0001939;
  s.batch = 30;
  s.epochs = 6;
  s.init_seed = 99;
  const NetworkSpec r = NetworkSpec::from_json(s.to_json());
  CHECK(r.family == s.family);
  CHECK(r.units1 == s.units1);
  CHECK(r.units2 == s.units2);
  CHECK(r.units3 == s.units3);
  CHECK(r.filters1 == s.filters1);
  CHECK(r.filters2 == s.filters2);
  CHECK(r.kernel1 == s.kernel1);
  CHECK(r.kernel2 == s.kernel2);
  CHECK(r.dropout == s.dropout);
  CHECK(r.lr == s.lr);
  CHECK(r.batch == s.batch);
  CHECK(r.epochs == s.epochs);
  CHECK(r.init_seed == s.init_seed);

  nlohmann::json j = s.to_json();
  j.erase("units2");
  CHECK_THROWS_AS(NetworkSpec::from_json(j), DataFormatError);

  NetworkSpec bad;
  bad.family = "transformer";
  CHECK_THROWS_AS(Network{bad}, UsageError);
  bad = NetworkSpec{};
  bad.dropout = 1.0;
  CHECK_THROWS_AS(Network{bad}, UsageError);
  bad = NetworkSpec{};
  bad.lr = 0.0;
  CHECK_THROWS_AS(Network{bad}, UsageError);

  NetworkSpec ok;
  ok.units1 = 3;
  ok.units2 = 3;
  ok.units3 = 3;
  Network n(ok);
  CHECK_THROWS_AS(n.forward(Tensor({1, 10, 2}), false), UsageError);
}
