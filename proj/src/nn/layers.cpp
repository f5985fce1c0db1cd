#include "osciguard/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "osciguard/core/errors.hpp"

namespace osciguard::nn {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// y[r,:] (+)= x[r,:] . W  with x [n, fin], W [fin, fout], rows independent.
void matmul_rows(const double* x, const double* w, double* y, long long n, int fin, int fout,
                 ExecMode mode, bool acc) {
  parallel_elems(n, mode, [&](long long r) {
    double* yr = y + r * fout;
    if (!acc) std::fill(yr, yr + fout, 0.0);
    const double* xr = x + r * fin;
    for (int k = 0; k < fin; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const double* wk = w + static_cast<long long>(k) * fout;
      for (int j = 0; j < fout; ++j) yr[j] += xv * wk[j];
    }
  });
}

// dx[r,:] (+)= dy[r,:] . W^T
void matmul_rows_wt(const double* dy, const double* w, double* dx, long long n, int fin, int fout,
                    ExecMode mode, bool acc) {
  parallel_elems(n, mode, [&](long long r) {
    const double* dyr = dy + r * fout;
    double* dxr = dx + r * fin;
    for (int k = 0; k < fin; ++k) {
      const double* wk = w + static_cast<long long>(k) * fout;
      double s = 0.0;
      for (int j = 0; j < fout; ++j) s += dyr[j] * wk[j];
      if (acc) dxr[k] += s; else dxr[k] = s;
    }
  });
}

// dW[k,j] += sum_r x[r,k] * dy[r,j]; each (k,j) owned by one iteration, so
// the accumulation order never depends on the thread count.
void accum_weight_grad(const double* x, const double* dy, double* dw, long long n, int fin,
                       int fout, ExecMode mode) {
  parallel_elems(static_cast<long long>(fin) * fout, mode, [&](long long idx) {
    const int k = static_cast<int>(idx / fout);
    const int j = static_cast<int>(idx % fout);
    double s = 0.0;
    for (long long r = 0; r < n; ++r) s += x[r * fin + k] * dy[r * fout + j];
    dw[idx] += s;
  });
}

void accum_bias_grad(const double* dy, double* db, long long n, int fout, ExecMode mode) {
  parallel_elems(fout, mode, [&](long long j) {
    double s = 0.0;
    for (long long r = 0; r < n; ++r) s += dy[r * fout + j];
    db[j] += s;
  });
}

// Same-padded correlation, TF convention: left/top pad (k-1)/2.
void conv_same_fwd(const double* x, const double* w, double* y, int nb, int h, int wd, int ci,
                   int co, int k, ExecMode mode, bool acc) {
  const int plo = (k - 1) / 2;
  const long long img_in = static_cast<long long>(h) * wd * ci;
  const long long img_out = static_cast<long long>(h) * wd * co;
  parallel_elems(nb, mode, [&](long long b) {
    const double* xb = x + b * img_in;
    double* yb = y + b * img_out;
    if (!acc) std::fill(yb, yb + img_out, 0.0);
    for (int oh = 0; oh < h; ++oh)
      for (int ow = 0; ow < wd; ++ow) {
        double* yp = yb + (static_cast<long long>(oh) * wd + ow) * co;
        for (int dh = 0; dh < k; ++dh) {
          const int ih = oh + dh - plo;
          if (ih < 0 || ih >= h) continue;
          for (int dw = 0; dw < k; ++dw) {
            const int iw = ow + dw - plo;
            if (iw < 0 || iw >= wd) continue;
            const double* xp = xb + (static_cast<long long>(ih) * wd + iw) * ci;
            const double* wp = w + (static_cast<long long>(dh) * k + dw) * ci * co;
            for (int c = 0; c < ci; ++c) {
              const double xv = xp[c];
              if (xv == 0.0) continue;
              const double* wc = wp + static_cast<long long>(c) * co;
              for (int f = 0; f < co; ++f) yp[f] += xv * wc[f];
            }
          }
        }
      }
  });
}

// Gradient w.r.t. the conv input.
void conv_same_dx(const double* dy, const double* w, double* dx, int nb, int h, int wd, int ci,
                  int co, int k, ExecMode mode, bool acc) {
  const int plo = (k - 1) / 2;
  const long long img_in = static_cast<long long>(h) * wd * ci;
  const long long img_out = static_cast<long long>(h) * wd * co;
  parallel_elems(nb, mode, [&](long long b) {
    const double* dyb = dy + b * img_out;
    double* dxb = dx + b * img_in;
    if (!acc) std::fill(dxb, dxb + img_in, 0.0);
    for (int ih = 0; ih < h; ++ih)
      for (int iw = 0; iw < wd; ++iw) {
        double* dxp = dxb + (static_cast<long long>(ih) * wd + iw) * ci;
        for (int dh = 0; dh < k; ++dh) {
          const int oh = ih - dh + plo;
          if (oh < 0 || oh >= h) continue;
          for (int dw = 0; dw < k; ++dw) {
            const int ow = iw - dw + plo;
            if (ow < 0 || ow >= wd) continue;
            const double* dyp = dyb + (static_cast<long long>(oh) * wd + ow) * co;
            const double* wp = w + (static_cast<long long>(dh) * k + dw) * ci * co;
            for (int c = 0; c < ci; ++c) {
              const double* wc = wp + static_cast<long long>(c) * co;
              double s = 0.0;
              for (int f = 0; f < co; ++f) s += dyp[f] * wc[f];
              dxp[c] += s;
            }
          }
        }
      }
  });
}

// Gradient w.r.t. the kernel; one iteration owns one kernel entry.
void conv_same_dw(const double* x, const double* dy, double* dw, int nb, int h, int wd, int ci,
                  int co, int k, ExecMode mode) {
  const int plo = (k - 1) / 2;
  const long long img_in = static_cast<long long>(h) * wd * ci;
  const long long img_out = static_cast<long long>(h) * wd * co;
  parallel_elems(static_cast<long long>(k) * k * ci * co, mode, [&](long long idx) {
    const int f = static_cast<int>(idx % co);
    const int c = static_cast<int>((idx / co) % ci);
    const int dw_ = static_cast<int>((idx / (static_cast<long long>(co) * ci)) % k);
    const int dh = static_cast<int>(idx / (static_cast<long long>(co) * ci * k));
    double s = 0.0;
    for (int b = 0; b < nb; ++b) {
      const double* xb = x + b * img_in;
      const double* dyb = dy + b * img_out;
      for (int oh = 0; oh < h; ++oh) {
        const int ih = oh + dh - plo;
        if (ih < 0 || ih >= h) continue;
        for (int ow = 0; ow < wd; ++ow) {
          const int iw = ow + dw_ - plo;
          if (iw < 0 || iw >= wd) continue;
          s += xb[(static_cast<long long>(ih) * wd + iw) * ci + c] *
               dyb[(static_cast<long long>(oh) * wd + ow) * co + f];
        }
      }
    }
    dw[idx] += s;
  });
}

}  // namespace

void init_truncated_normal(Tensor& t, Rng& rng, double stddev) {
  for (long long i = 0; i < t.numel(); ++i)
    t[static_cast<std::size_t>(i)] =
        rng.truncated_normal(0.0, stddev, -2.0 * stddev, 2.0 * stddev);
}

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features, Rng init) : in_(in_features), out_(out_features) {
  w_.name = "w";
  b_.name = "b";
  w_.value = Tensor({in_, out_});
  w_.grad = Tensor({in_, out_});
  b_.value = Tensor({out_});
  b_.grad = Tensor({out_});
  init_truncated_normal(w_.value, init);
}

Tensor Dense::forward(const Tensor& x, const LayerContext& ctx) {
  if (x.ndim() < 2 || x.dim(x.ndim() - 1) != in_)
    throw UsageError("dense expects last axis " + std::to_string(in_) + ", got " +
                     shape_str(x.shape()));
  x_ = x;
  const long long n = x.numel() / in_;
  auto shape = x.shape();
  shape.back() = out_;
  Tensor y(shape);
  parallel_elems(n, ctx.mode, [&](long long r) {
    double* yr = y.data() + r * out_;
    std::copy(b_.value.data(), b_.value.data() + out_, yr);
  });
  matmul_rows(x.data(), w_.value.data(), y.data(), n, in_, out_, ctx.mode, true);
  return y;
}

Tensor Dense::backward(const Tensor& dy, const LayerContext& ctx) {
  const long long n = x_.numel() / in_;
  accum_weight_grad(x_.data(), dy.data(), w_.grad.data(), n, in_, out_, ctx.mode);
  accum_bias_grad(dy.data(), b_.grad.data(), n, out_, ctx.mode);
  Tensor dx(x_.shape());
  matmul_rows_wt(dy.data(), w_.value.data(), dx.data(), n, in_, out_, ctx.mode, false);
  return dx;
}

// ---------------------------------------------------------------- LeakyReLU

Tensor LeakyReLU::forward(const Tensor& x, const LayerContext& ctx) {
  x_ = x;
  Tensor y(x.shape());
  parallel_elems(x.numel(), ctx.mode, [&](long long i) {
    const double v = x.data()[i];
    y.data()[i] = v > 0.0 ? v : alpha_ * v;
  });
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy, const LayerContext& ctx) {
  Tensor dx(x_.shape());
  parallel_elems(dx.numel(), ctx.mode, [&](long long i) {
    dx.data()[i] = dy.data()[i] * (x_.data()[i] > 0.0 ? 1.0 : alpha_);
  });
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int features, double eps, double momentum)
    : f_(features), eps_(eps), momentum_(momentum) {
  gamma_.name = "gamma";
  beta_.name = "beta";
  run_mean_.name = "running_mean";
  run_var_.name = "running_var";
  gamma_.value = Tensor({f_});
  gamma_.grad = Tensor({f_});
  beta_.value = Tensor({f_});
  beta_.grad = Tensor({f_});
  run_mean_.value = Tensor({f_});
  run_var_.value = Tensor({f_});
  gamma_.value.fill(1.0);
  run_var_.value.fill(1.0);
}

Tensor BatchNorm::forward(const Tensor& x, const LayerContext& ctx) {
  if (x.dim(x.ndim() - 1) != f_)
    throw UsageError("batch_norm expects " + std::to_string(f_) + " features, got " +
                     shape_str(x.shape()));
  const long long n = x.numel() / f_;
  rows_ = n;
  mean_.assign(static_cast<std::size_t>(f_), 0.0);
  inv_std_.assign(static_cast<std::size_t>(f_), 0.0);
  xhat_ = Tensor(x.shape());
  Tensor y(x.shape());

  if (ctx.training) {
    parallel_elems(f_, ctx.mode, [&](long long f) {
      double m = 0.0;
      for (long long r = 0; r < n; ++r) m += x.data()[r * f_ + f];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (long long r = 0; r < n; ++r) {
        const double d = x.data()[r * f_ + f] - m;
        v += d * d;
      }
      v /= static_cast<double>(n);
      mean_[static_cast<std::size_t>(f)] = m;
      inv_std_[static_cast<std::size_t>(f)] = 1.0 / std::sqrt(v + eps_);
      if (!ctx.frozen) {
        run_mean_.value[static_cast<std::size_t>(f)] =
            momentum_ * run_mean_.value[static_cast<std::size_t>(f)] + (1.0 - momentum_) * m;
        run_var_.value[static_cast<std::size_t>(f)] =
            momentum_ * run_var_.value[static_cast<std::size_t>(f)] + (1.0 - momentum_) * v;
      }
    });
    train_path_ = true;
  } else {
    for (int f = 0; f < f_; ++f) {
      mean_[static_cast<std::size_t>(f)] = run_mean_.value[static_cast<std::size_t>(f)];
      inv_std_[static_cast<std::size_t>(f)] =
          1.0 / std::sqrt(run_var_.value[static_cast<std::size_t>(f)] + eps_);
    }
    train_path_ = false;
  }

  parallel_elems(x.numel(), ctx.mode, [&](long long i) {
    const int f = static_cast<int>(i % f_);
    const double xh = (x.data()[i] - mean_[static_cast<std::size_t>(f)]) *
                      inv_std_[static_cast<std::size_t>(f)];
    xhat_.data()[i] = xh;
    y.data()[i] = gamma_.value[static_cast<std::size_t>(f)] * xh +
                  beta_.value[static_cast<std::size_t>(f)];
  });
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy, const LayerContext& ctx) {
  const long long n = rows_;
  Tensor dx(xhat_.shape());
  parallel_elems(f_, ctx.mode, [&](long long f) {
    const double g = gamma_.value[static_cast<std::size_t>(f)];
    double dbeta = 0.0, dgamma = 0.0, s1 = 0.0, s2 = 0.0;
    for (long long r = 0; r < n; ++r) {
      const double d = dy.data()[r * f_ + f];
      const double xh = xhat_.data()[r * f_ + f];
      dbeta += d;
      dgamma += d * xh;
      s1 += d * g;
      s2 += d * g * xh;
    }
    beta_.grad[static_cast<std::size_t>(f)] += dbeta;
    gamma_.grad[static_cast<std::size_t>(f)] += dgamma;
    const double inv = inv_std_[static_cast<std::size_t>(f)];
    if (train_path_) {
      const double invn = 1.0 / static_cast<double>(n);
      for (long long r = 0; r < n; ++r) {
        const double dxh = dy.data()[r * f_ + f] * g;
        const double xh = xhat_.data()[r * f_ + f];
        dx.data()[r * f_ + f] = inv * (dxh - invn * s1 - xh * invn * s2);
      }
    } else {
      for (long long r = 0; r < n; ++r)
        dx.data()[r * f_ + f] = dy.data()[r * f_ + f] * g * inv;
    }
  });
  return dx;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {
  if (rate_ < 0.0 || rate_ >= 1.0) throw UsageError("dropout rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, const LayerContext& ctx) {
  if (!ctx.training || rate_ <= 0.0) {
    masked_ = false;
    return x;
  }
  const std::uint64_t call = ctx.frozen ? counter_ : counter_++;
  Rng mrng(mix_seed(seed_, call));
  mask_ = Tensor(x.shape());
  const double keep_scale = 1.0 / (1.0 - rate_);
  for (long long i = 0; i < mask_.numel(); ++i)
    mask_[static_cast<std::size_t>(i)] = mrng.uniform() >= rate_ ? keep_scale : 0.0;
  masked_ = true;
  Tensor y(x.shape());
  parallel_elems(x.numel(), ctx.mode,
                 [&](long long i) { y.data()[i] = x.data()[i] * mask_.data()[i]; });
  return y;
}

Tensor Dropout::backward(const Tensor& dy, const LayerContext& ctx) {
  if (!masked_) return dy;
  Tensor dx(dy.shape());
  parallel_elems(dy.numel(), ctx.mode,
                 [&](long long i) { dx.data()[i] = dy.data()[i] * mask_.data()[i]; });
  return dx;
}

// ---------------------------------------------------------------- shape ops

Tensor Flatten::forward(const Tensor& x, const LayerContext&) {
  in_shape_ = x.shape();
  Tensor y = x;
  y.reshape({x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
  return y;
}

Tensor Flatten::backward(const Tensor& dy, const LayerContext&) {
  Tensor dx = dy;
  dx.reshape(in_shape_);
  return dx;
}

Tensor Reshape::forward(const Tensor& x, const LayerContext&) {
  in_shape_ = x.shape();
  std::vector<int> shape{x.dim(0)};
  shape.insert(shape.end(), inner_.begin(), inner_.end());
  Tensor y = x;
  y.reshape(shape);
  return y;
}

Tensor Reshape::backward(const Tensor& dy, const LayerContext&) {
  Tensor dx = dy;
  dx.reshape(in_shape_);
  return dx;
}

// ---------------------------------------------------------------- LSTM

Lstm::Lstm(int in_features, int units, bool return_sequences, Rng init)
    : in_(in_features), units_(units), seq_(return_sequences) {
  wx_.name = "wx";
  wh_.name = "wh";
  b_.name = "b";
  wx_.value = Tensor({in_, 4 * units_});
  wx_.grad = Tensor({in_, 4 * units_});
  wh_.value = Tensor({units_, 4 * units_});
  wh_.grad = Tensor({units_, 4 * units_});
  b_.value = Tensor({4 * units_});
  b_.grad = Tensor({4 * units_});
  init_truncated_normal(wx_.value, init);
  init_truncated_normal(wh_.value, init);
  for (int u = 0; u < units_; ++u) b_.value[static_cast<std::size_t>(units_ + u)] = 1.0;
}

Tensor Lstm::forward(const Tensor& x, const LayerContext& ctx) {
  if (x.ndim() != 3 || x.dim(2) != in_)
    throw UsageError("lstm expects [batch, time, " + std::to_string(in_) + "], got " +
                     shape_str(x.shape()));
  const int nb = x.dim(0), nt = x.dim(1);
  const int u = units_, g4 = 4 * units_;
  x_ = x;
  gates_ = Tensor({nb, nt, g4});
  c_ = Tensor({nb, nt, u});
  tanhc_ = Tensor({nb, nt, u});
  h_ = Tensor({nb, nt, u});

  std::vector<double> xt(static_cast<std::size_t>(nb) * in_);
  std::vector<double> hprev(static_cast<std::size_t>(nb) * u, 0.0);
  std::vector<double> cprev(static_cast<std::size_t>(nb) * u, 0.0);
  std::vector<double> z(static_cast<std::size_t>(nb) * g4);

  for (int t = 0; t < nt; ++t) {
    for (int b = 0; b < nb; ++b) {
      std::copy(x.data() + (static_cast<long long>(b) * nt + t) * in_,
                x.data() + (static_cast<long long>(b) * nt + t) * in_ + in_,
                xt.data() + static_cast<long long>(b) * in_);
      std::copy(b_.value.data(), b_.value.data() + g4, z.data() + static_cast<long long>(b) * g4);
    }
    matmul_rows(xt.data(), wx_.value.data(), z.data(), nb, in_, g4, ctx.mode, true);
    matmul_rows(hprev.data(), wh_.value.data(), z.data(), nb, u, g4, ctx.mode, true);

    parallel_elems(static_cast<long long>(nb) * u, ctx.mode, [&](long long idx) {
      const long long b = idx / u;
      const int j = static_cast<int>(idx % u);
      const double* zb = z.data() + b * g4;
      double* gb = gates_.data() + (b * nt + t) * g4;
      const double gi = sigmoid(zb[j]);
      const double gf = sigmoid(zb[u + j]);
      const double gg = std::tanh(zb[2 * u + j]);
      const double go = sigmoid(zb[3 * u + j]);
      gb[j] = gi;
      gb[u + j] = gf;
      gb[2 * u + j] = gg;
      gb[3 * u + j] = go;
      const double cp = cprev[static_cast<std::size_t>(idx)];
      const double cv = gf * cp + gi * gg;
      const double th = std::tanh(cv);
      c_.data()[(b * nt + t) * u + j] = cv;
      tanhc_.data()[(b * nt + t) * u + j] = th;
      h_.data()[(b * nt + t) * u + j] = go * th;
      cprev[static_cast<std::size_t>(idx)] = cv;
      hprev[static_cast<std::size_t>(idx)] = go * th;
    });
  }

  if (seq_) return h_;
  Tensor out({nb, u});
  for (int b = 0; b < nb; ++b)
    std::copy(h_.data() + (static_cast<long long>(b) * nt + (nt - 1)) * u,
              h_.data() + (static_cast<long long>(b) * nt + (nt - 1)) * u + u,
              out.data() + static_cast<long long>(b) * u);
  return out;
}

Tensor Lstm::backward(const Tensor& dy, const LayerContext& ctx) {
  const int nb = x_.dim(0), nt = x_.dim(1);
  const int u = units_, g4 = 4 * units_;
  Tensor dx(x_.shape());

  std::vector<double> dh_next(static_cast<std::size_t>(nb) * u, 0.0);
  std::vector<double> dc_next(static_cast<std::size_t>(nb) * u, 0.0);
  std::vector<double> dz(static_cast<std::size_t>(nb) * g4);
  std::vector<double> xt(static_cast<std::size_t>(nb) * in_);
  std::vector<double> hprev(static_cast<std::size_t>(nb) * u);
  std::vector<double> dxt(static_cast<std::size_t>(nb) * in_);

  for (int t = nt - 1; t >= 0; --t) {
    parallel_elems(static_cast<long long>(nb) * u, ctx.mode, [&](long long idx) {
      const long long b = idx / u;
      const int j = static_cast<int>(idx % u);
      double dh = dh_next[static_cast<std::size_t>(idx)];
      if (seq_) dh += dy.data()[(b * nt + t) * u + j];
      else if (t == nt - 1) dh += dy.data()[b * u + j];
      const double* gb = gates_.data() + (b * nt + t) * g4;
      const double gi = gb[j], gf = gb[u + j], gg = gb[2 * u + j], go = gb[3 * u + j];
      const double th = tanhc_.data()[(b * nt + t) * u + j];
      const double cp = t > 0 ? c_.data()[(b * nt + (t - 1)) * u + j] : 0.0;
      const double dc = dc_next[static_cast<std::size_t>(idx)] + dh * go * (1.0 - th * th);
      double* dzb = dz.data() + b * g4;
      dzb[j] = dc * gg * gi * (1.0 - gi);
      dzb[u + j] = dc * cp * gf * (1.0 - gf);
      dzb[2 * u + j] = dc * gi * (1.0 - gg * gg);
      dzb[3 * u + j] = dh * th * go * (1.0 - go);
      dc_next[static_cast<std::size_t>(idx)] = dc * gf;
    });

    for (int b = 0; b < nb; ++b) {
      std::copy(x_.data() + (static_cast<long long>(b) * nt + t) * in_,
                x_.data() + (static_cast<long long>(b) * nt + t) * in_ + in_,
                xt.data() + static_cast<long long>(b) * in_);
      if (t > 0)
        std::copy(h_.data() + (static_cast<long long>(b) * nt + (t - 1)) * u,
                  h_.data() + (static_cast<long long>(b) * nt + (t - 1)) * u + u,
                  hprev.data() + static_cast<long long>(b) * u);
      else
        std::fill(hprev.data() + static_cast<long long>(b) * u,
                  hprev.data() + static_cast<long long>(b) * u + u, 0.0);
    }

    accum_weight_grad(xt.data(), dz.data(), wx_.grad.data(), nb, in_, g4, ctx.mode);
    accum_weight_grad(hprev.data(), dz.data(), wh_.grad.data(), nb, u, g4, ctx.mode);
    accum_bias_grad(dz.data(), b_.grad.data(), nb, g4, ctx.mode);

    matmul_rows_wt(dz.data(), wx_.value.data(), dxt.data(), nb, in_, g4, ctx.mode, false);
    for (int b = 0; b < nb; ++b)
      std::copy(dxt.data() + static_cast<long long>(b) * in_,
                dxt.data() + static_cast<long long>(b) * in_ + in_,
                dx.data() + (static_cast<long long>(b) * nt + t) * in_);
    matmul_rows_wt(dz.data(), wh_.value.data(), dh_next.data(), nb, u, g4, ctx.mode, false);
  }
  return dx;
}

// ---------------------------------------------------------------- ConvLSTM

ConvLstm2d::ConvLstm2d(int in_channels, int filters, int kernel, bool return_sequences, Rng init)
    : cin_(in_channels), filters_(filters), kernel_(kernel), seq_(return_sequences) {
  if (kernel_ < 1) throw UsageError("conv kernel must be positive");
  wx_.name = "wx";
  wh_.name = "wh";
  b_.name = "b";
  wx_.value = Tensor({kernel_, kernel_, cin_, 4 * filters_});
  wx_.grad = Tensor({kernel_, kernel_, cin_, 4 * filters_});
  wh_.value = Tensor({kernel_, kernel_, filters_, 4 * filters_});
  wh_.grad = Tensor({kernel_, kernel_, filters_, 4 * filters_});
  b_.value = Tensor({4 * filters_});
  b_.grad = Tensor({4 * filters_});
  init_truncated_normal(wx_.value, init);
  init_truncated_normal(wh_.value, init);
  for (int f = 0; f < filters_; ++f) b_.value[static_cast<std::size_t>(filters_ + f)] = 1.0;
}

Tensor ConvLstm2d::forward(const Tensor& x, const LayerContext& ctx) {
  if (x.ndim() != 5 || x.dim(4) != cin_)
    throw UsageError("conv_lstm expects [batch, time, h, w, " + std::to_string(cin_) +
                     "], got " + shape_str(x.shape()));
  const int nb = x.dim(0), nt = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int kf = filters_, g4 = 4 * filters_;
  const long long cell = static_cast<long long>(h) * w;
  x_ = x;
  gates_ = Tensor({nb, nt, h, w, g4});
  c_ = Tensor({nb, nt, h, w, kf});
  tanhc_ = Tensor({nb, nt, h, w, kf});
  h_ = Tensor({nb, nt, h, w, kf});

  std::vector<double> xt(static_cast<std::size_t>(nb) * cell * cin_);
  std::vector<double> hprev(static_cast<std::size_t>(nb) * cell * kf, 0.0);
  std::vector<double> cprev(static_cast<std::size_t>(nb) * cell * kf, 0.0);
  std::vector<double> z(static_cast<std::size_t>(nb) * cell * g4);

  for (int t = 0; t < nt; ++t) {
    for (int b = 0; b < nb; ++b) {
      std::copy(x.data() + ((static_cast<long long>(b) * nt + t) * cell) * cin_,
                x.data() + ((static_cast<long long>(b) * nt + t) * cell + cell) * cin_,
                xt.data() + static_cast<long long>(b) * cell * cin_);
      double* zb = z.data() + static_cast<long long>(b) * cell * g4;
      for (long long s = 0; s < cell; ++s)
        std::copy(b_.value.data(), b_.value.data() + g4, zb + s * g4);
    }
    conv_same_fwd(xt.data(), wx_.value.data(), z.data(), nb, h, w, cin_, g4, kernel_, ctx.mode,
                  true);
    conv_same_fwd(hprev.data(), wh_.value.data(), z.data(), nb, h, w, kf, g4, kernel_, ctx.mode,
                  true);

    parallel_elems(static_cast<long long>(nb) * cell * kf, ctx.mode, [&](long long idx) {
      const long long bs = idx / kf;  // batch*cell position
      const int j = static_cast<int>(idx % kf);
      const double* zp = z.data() + bs * g4;
      const long long b = bs / cell;
      const long long s = bs % cell;
      double* gp = gates_.data() + ((b * nt + t) * cell + s) * g4;
      const double gi = sigmoid(zp[j]);
      const double gf = sigmoid(zp[kf + j]);
      const double gg = std::tanh(zp[2 * kf + j]);
      const double go = sigmoid(zp[3 * kf + j]);
      gp[j] = gi;
      gp[kf + j] = gf;
      gp[2 * kf + j] = gg;
      gp[3 * kf + j] = go;
      const double cp = cprev[static_cast<std::size_t>(idx)];
      const double cv = gf * cp + gi * gg;
      const double th = std::tanh(cv);
      c_.data()[((b * nt + t) * cell + s) * kf + j] = cv;
      tanhc_.data()[((b * nt + t) * cell + s) * kf + j] = th;
      h_.data()[((b * nt + t) * cell + s) * kf + j] = go * th;
      cprev[static_cast<std::size_t>(idx)] = cv;
      hprev[static_cast<std::size_t>(idx)] = go * th;
    });
  }

  if (seq_) return h_;
  Tensor out({nb, h, w, kf});
  for (int b = 0; b < nb; ++b)
    std::copy(h_.data() + ((static_cast<long long>(b) * nt + (nt - 1)) * cell) * kf,
              h_.data() + ((static_cast<long long>(b) * nt + (nt - 1)) * cell + cell) * kf,
              out.data() + static_cast<long long>(b) * cell * kf);
  return out;
}

Tensor ConvLstm2d::backward(const Tensor& dy, const LayerContext& ctx) {
  const int nb = x_.dim(0), nt = x_.dim(1), h = x_.dim(2), w = x_.dim(3);
  const int kf = filters_, g4 = 4 * filters_;
  const long long cell = static_cast<long long>(h) * w;
  Tensor dx(x_.shape());

  std::vector<double> dh_next(static_cast<std::size_t>(nb) * cell * kf, 0.0);
  std::vector<double> dc_next(static_cast<std::size_t>(nb) * cell * kf, 0.0);
  std::vector<double> dz(static_cast<std::size_t>(nb) * cell * g4);
  std::vector<double> xt(static_cast<std::size_t>(nb) * cell * cin_);
  std::vector<double> hprev(static_cast<std::size_t>(nb) * cell * kf);
  std::vector<double> dxt(static_cast<std::size_t>(nb) * cell * cin_);

  for (int t = nt - 1; t >= 0; --t) {
    parallel_elems(static_cast<long long>(nb) * cell * kf, ctx.mode, [&](long long idx) {
      const long long bs = idx / kf;
      const int j = static_cast<int>(idx % kf);
      const long long b = bs / cell;
      const long long s = bs % cell;
      double dh = dh_next[static_cast<std::size_t>(idx)];
      if (seq_) dh += dy.data()[((b * nt + t) * cell + s) * kf + j];
      else if (t == nt - 1) dh += dy.data()[(b * cell + s) * kf + j];
      const double* gp = gates_.data() + ((b * nt + t) * cell + s) * g4;
      const double gi = gp[j], gf = gp[kf + j], gg = gp[2 * kf + j], go = gp[3 * kf + j];
      const double th = tanhc_.data()[((b * nt + t) * cell + s) * kf + j];
      const double cp = t > 0 ? c_.data()[((b * nt + (t - 1)) * cell + s) * kf + j] : 0.0;
      const double dc = dc_next[static_cast<std::size_t>(idx)] + dh * go * (1.0 - th * th);
      double* dzp = dz.data() + bs * g4;
      dzp[j] = dc * gg * gi * (1.0 - gi);
      dzp[kf + j] = dc * cp * gf * (1.0 - gf);
      dzp[2 * kf + j] = dc * gi * (1.0 - gg * gg);
      dzp[3 * kf + j] = dh * th * go * (1.0 - go);
      dc_next[static_cast<std::size_t>(idx)] = dc * gf;
    });

    for (int b = 0; b < nb; ++b) {
      std::copy(x_.data() + ((static_cast<long long>(b) * nt + t) * cell) * cin_,
                x_.data() + ((static_cast<long long>(b) * nt + t) * cell + cell) * cin_,
                xt.data() + static_cast<long long>(b) * cell * cin_);
      if (t > 0)
        std::copy(h_.data() + ((static_cast<long long>(b) * nt + (t - 1)) * cell) * kf,
                  h_.data() + ((static_cast<long long>(b) * nt + (t - 1)) * cell + cell) * kf,
                  hprev.data() + static_cast<long long>(b) * cell * kf);
      else
        std::fill(hprev.data() + static_cast<long long>(b) * cell * kf,
                  hprev.data() + (static_cast<long long>(b) + 1) * cell * kf, 0.0);
    }

    conv_same_dw(xt.data(), dz.data(), wx_.grad.data(), nb, h, w, cin_, g4, kernel_, ctx.mode);
    conv_same_dw(hprev.data(), dz.data(), wh_.grad.data(), nb, h, w, kf, g4, kernel_, ctx.mode);
    accum_bias_grad(dz.data(), b_.grad.data(), static_cast<long long>(nb) * cell, g4, ctx.mode);

    conv_same_dx(dz.data(), wx_.value.data(), dxt.data(), nb, h, w, cin_, g4, kernel_, ctx.mode,
                 false);
    for (int b = 0; b < nb; ++b)
      std::copy(dxt.data() + static_cast<long long>(b) * cell * cin_,
                dxt.data() + (static_cast<long long>(b) + 1) * cell * cin_,
                dx.data() + ((static_cast<long long>(b) * nt + t) * cell) * cin_);
    conv_same_dx(dz.data(), wh_.value.data(), dh_next.data(), nb, h, w, kf, g4, kernel_,
                 ctx.mode, false);
  }
  return dx;
}

}  // namespace osciguard::nn
