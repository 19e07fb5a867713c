#include "drssl/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drssl/error.hpp"

namespace drssl::nn {
namespace {

struct SeriesDims {
  bool batched;
  std::size_t batch;
  std::size_t channels;
  std::size_t length;
};

SeriesDims series_dims(const Tensor& x, const char* op) {
  if (x.rank() == 2) return {false, 1, x.shape()[0], x.shape()[1]};
  if (x.rank() == 3) return {true, x.shape()[0], x.shape()[1], x.shape()[2]};
  throw ShapeError(std::string(op) + ": input rank must be 2 or 3, got shape " +
                   shape_string(x.shape()));
}

Shape series_shape(const SeriesDims& d, std::size_t channels, std::size_t length) {
  if (d.batched) return {d.batch, channels, length};
  return {channels, length};
}

void require_dim(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

// out[b,f,t] += sum_c sum_j w[f,c,j] * in[b,c,t+j]   (w viewed as [F,C,k])
void correlate(const double* in, std::size_t batch, std::size_t channels, std::size_t in_len,
               const double* w, std::size_t filters, std::size_t k, double* out,
               std::size_t out_len) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      double* o = out + (b * filters + f) * out_len;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* x = in + (b * channels + c) * in_len;
        const double* wk = w + (f * channels + c) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double wj = wk[j];
          const double* xj = x + j;
          for (std::size_t t = 0; t < out_len; ++t) o[t] += wj * xj[t];
        }
      }
    }
  }
}

// out[b,c,t+j] += sum_f w[f,c,j] * in[b,f,t]: the adjoint of correlate.
void scatter(const double* in, std::size_t batch, std::size_t filters, std::size_t in_len,
             const double* w, std::size_t channels, std::size_t k, double* out,
             std::size_t out_len) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      const double* u = in + (b * filters + f) * in_len;
      for (std::size_t c = 0; c < channels; ++c) {
        double* o = out + (b * channels + c) * out_len;
        const double* wk = w + (f * channels + c) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double wj = wk[j];
          double* oj = o + j;
          for (std::size_t t = 0; t < in_len; ++t) oj[t] += wj * u[t];
        }
      }
    }
  }
}

// g[f,c,j] += sum_b sum_t a[b,f,t] * x[b,c,t+j]  with a: [B,F,La], x: [B,C,Lx]
void kernel_grad(const double* a, std::size_t filters, std::size_t a_len, const double* x,
                 std::size_t channels, std::size_t x_len, std::size_t batch, std::size_t k,
                 double* g) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      const double* af = a + (b * filters + f) * a_len;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = x + (b * channels + c) * x_len;
        double* gk = g + (f * channels + c) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double* xj = xc + j;
          double acc = 0.0;
          for (std::size_t t = 0; t < a_len; ++t) acc += af[t] * xj[t];
          gk[j] += acc;
        }
      }
    }
  }
}

void add_channel_bias(double* out, std::size_t batch, std::size_t channels, std::size_t len,
                      const double* bias) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* o = out + (b * channels + c) * len;
      for (std::size_t t = 0; t < len; ++t) o[t] += bias[c];
    }
  }
}

Tensor channel_sums(const double* g, std::size_t batch, std::size_t channels, std::size_t len) {
  Tensor out({channels});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* gc = g + (b * channels + c) * len;
      double acc = 0.0;
      for (std::size_t t = 0; t < len; ++t) acc += gc[t];
      out[c] += acc;
    }
  }
  return out;
}

void check_kernels(const Tensor& kernels, const char* op) {
  require_dim(kernels.rank() == 3, op, "kernels must be [filters x channels x width], got " +
                                           shape_string(kernels.shape()));
  require_dim(kernels.shape()[0] >= 1 && kernels.shape()[1] >= 1 && kernels.shape()[2] >= 1, op,
              "kernel dims must be positive");
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  const auto d = series_dims(x, "conv1d");
  check_kernels(kernels, "conv1d");
  const std::size_t filters = kernels.shape()[0];
  const std::size_t k = kernels.shape()[2];
  require_dim(kernels.shape()[1] == d.channels, "conv1d",
              "channel dim: input has " + std::to_string(d.channels) + ", kernels expect " +
                  std::to_string(kernels.shape()[1]));
  require_dim(k <= d.length, "conv1d",
              "time dim: kernel width " + std::to_string(k) + " exceeds input length " +
                  std::to_string(d.length));
  require_dim(bias.rank() == 1 && bias.size() == filters, "conv1d",
              "bias dim: expected " + std::to_string(filters) + ", got " +
                  shape_string(bias.shape()));
  const std::size_t out_len = d.length - k + 1;
  Tensor out(series_shape(d, filters, out_len));
  add_channel_bias(out.data().data(), d.batch, filters, out_len, bias.data().data());
  correlate(x.data().data(), d.batch, d.channels, d.length, kernels.data().data(), filters, k,
            out.data().data(), out_len);
  return out;
}

ConvGrads conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& grad_out,
                          bool need_input_grad) {
  const auto d = series_dims(x, "conv1d_backward");
  const std::size_t filters = kernels.shape()[0];
  const std::size_t k = kernels.shape()[2];
  const std::size_t out_len = d.length - k + 1;
  require_dim(grad_out.shape() == series_shape(d, filters, out_len), "conv1d_backward",
              "grad_out shape " + shape_string(grad_out.shape()));
  ConvGrads g;
  g.kernels = Tensor(kernels.shape());
  kernel_grad(grad_out.data().data(), filters, out_len, x.data().data(), d.channels, d.length,
              d.batch, k, g.kernels.data().data());
  g.bias = channel_sums(grad_out.data().data(), d.batch, filters, out_len);
  if (need_input_grad) {
    g.input = Tensor(x.shape());
    scatter(grad_out.data().data(), d.batch, filters, out_len, kernels.data().data(), d.channels,
            k, g.input.data().data(), d.length);
  }
  return g;
}

Tensor deconv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  const auto d = series_dims(x, "deconv1d");
  check_kernels(kernels, "deconv1d");
  const std::size_t channels = kernels.shape()[1];
  const std::size_t k = kernels.shape()[2];
  require_dim(kernels.shape()[0] == d.channels, "deconv1d",
              "filter dim: input has " + std::to_string(d.channels) + ", kernels expect " +
                  std::to_string(kernels.shape()[0]));
  require_dim(bias.rank() == 1 && bias.size() == channels, "deconv1d",
              "bias dim: expected " + std::to_string(channels) + ", got " +
                  shape_string(bias.shape()));
  const std::size_t out_len = d.length + k - 1;
  Tensor out(series_shape(d, channels, out_len));
  add_channel_bias(out.data().data(), d.batch, channels, out_len, bias.data().data());
  scatter(x.data().data(), d.batch, d.channels, d.length, kernels.data().data(), channels, k,
          out.data().data(), out_len);
  return out;
}

ConvGrads deconv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& grad_out,
                            bool need_input_grad) {
  const auto d = series_dims(x, "deconv1d_backward");
  const std::size_t channels = kernels.shape()[1];
  const std::size_t k = kernels.shape()[2];
  const std::size_t out_len = d.length + k - 1;
  require_dim(grad_out.shape() == series_shape(d, channels, out_len), "deconv1d_backward",
              "grad_out shape " + shape_string(grad_out.shape()));
  ConvGrads g;
  g.kernels = Tensor(kernels.shape());
  kernel_grad(x.data().data(), d.channels, d.length, grad_out.data().data(), channels, out_len,
              d.batch, k, g.kernels.data().data());
  g.bias = channel_sums(grad_out.data().data(), d.batch, channels, out_len);
  if (need_input_grad) {
    g.input = Tensor(x.shape());
    correlate(grad_out.data().data(), d.batch, channels, out_len, kernels.data().data(),
              d.channels, k, g.input.data().data(), d.length);
  }
  return g;
}

PoolResult maxpool1d(const Tensor& x, std::size_t window) {
  const auto d = series_dims(x, "maxpool1d");
  require_dim(window >= 1, "maxpool1d", "window must be >= 1");
  require_dim(window <= d.length, "maxpool1d",
              "time dim: window " + std::to_string(window) + " exceeds input length " +
                  std::to_string(d.length));
  const std::size_t out_len = d.length / window;
  PoolResult r{Tensor(series_shape(d, d.channels, out_len)), {}};
  r.indices.resize(r.output.size());
  const double* in = x.data().data();
  for (std::size_t row = 0; row < d.batch * d.channels; ++row) {
    const double* xr = in + row * d.length;
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = t * window;
      for (std::size_t j = best + 1; j < (t + 1) * window; ++j) {
        if (xr[j] > xr[best]) best = j;
      }
      r.output[row * out_len + t] = xr[best];
      r.indices[row * out_len + t] = best;
    }
  }
  return r;
}

Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& indices,
                          const Shape& input_shape) {
  require_dim(grad_out.size() == indices.size(), "maxpool1d_backward",
              "grad_out does not match pooling indices");
  Tensor g(input_shape);
  const std::size_t in_len = input_shape.back();
  const std::size_t out_len = grad_out.shape().back();
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const std::size_t row = i / out_len;
    g[row * in_len + indices[i]] += grad_out[i];
  }
  return g;
}

Tensor upsample1d(const Tensor& x, std::size_t factor) {
  const auto d = series_dims(x, "upsample1d");
  require_dim(factor >= 1, "upsample1d", "factor must be >= 1");
  Tensor out(series_shape(d, d.channels, d.length * factor));
  for (std::size_t i = 0; i < x.size(); ++i) {
    double* o = out.data().data() + i * factor;
    std::fill(o, o + factor, x[i]);
  }
  return out;
}

Tensor upsample1d_backward(const Tensor& grad_out, std::size_t factor) {
  const auto d = series_dims(grad_out, "upsample1d_backward");
  require_dim(factor >= 1 && d.length % factor == 0, "upsample1d_backward",
              "time dim not a multiple of factor");
  Tensor g(series_shape(d, d.channels, d.length / factor));
  for (std::size_t i = 0; i < g.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < factor; ++j) acc += grad_out[i * factor + j];
    g[i] = acc;
  }
  return g;
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_dim(weights.rank() == 2, "dense", "weights must be rank 2, got " +
                                                shape_string(weights.shape()));
  const std::size_t m = weights.shape()[0];
  const std::size_t n = weights.shape()[1];
  require_dim(x.rank() == 1 || x.rank() == 2, "dense", "input must be rank 1 or 2");
  const std::size_t batch = x.rank() == 2 ? x.shape()[0] : 1;
  const std::size_t in = x.shape().back();
  require_dim(in == n, "dense",
              "input dim: got " + std::to_string(in) + ", weights expect " + std::to_string(n));
  require_dim(bias.rank() == 1 && bias.size() == m, "dense",
              "bias dim: expected " + std::to_string(m) + ", got " + shape_string(bias.shape()));
  Tensor out(x.rank() == 2 ? Shape{batch, m} : Shape{m});
  const double* w = weights.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data().data() + b * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double* wi = w + i * n;
      double acc = bias[i];
      for (std::size_t j = 0; j < n; ++j) acc += wi[j] * xb[j];
      out[b * m + i] = acc;
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out,
                          bool need_input_grad) {
  const std::size_t m = weights.shape()[0];
  const std::size_t n = weights.shape()[1];
  const std::size_t batch = x.rank() == 2 ? x.shape()[0] : 1;
  require_dim(grad_out.size() == batch * m, "dense_backward",
              "grad_out shape " + shape_string(grad_out.shape()));
  DenseGrads g{Tensor(), Tensor(weights.shape()), Tensor({m})};
  if (need_input_grad) g.input = Tensor(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data().data() + b * n;
    const double* gb = grad_out.data().data() + b * m;
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = gb[i];
      g.bias[i] += gi;
      if (gi == 0.0) continue;
      double* gw = g.weights.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) gw[j] += gi * xb[j];
      if (need_input_grad) {
        const double* wi = weights.data().data() + i * n;
        double* gx = g.input.data().data() + b * n;
        for (std::size_t j = 0; j < n; ++j) gx[j] += gi * wi[j];
      }
    }
  }
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) {
    // branch keeps exp() from overflowing for large |v|
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return out;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "sigmoid_backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
  return g;
}

Tensor softmax(const Tensor& logits) {
  require_dim(logits.rank() >= 1 && logits.shape().back() >= 2, "softmax",
              "class dim must be >= 2, got shape " + shape_string(logits.shape()));
  const std::size_t m = logits.shape().back();
  Tensor out = logits;
  for (std::size_t r = 0; r < out.size() / m; ++r) {
    double* row = out.data().data() + r * m;
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      row[i] = std::exp(row[i] - mx);
      z += row[i];
    }
    for (std::size_t i = 0; i < m; ++i) row[i] /= z;
  }
  return out;
}

Tensor softmax_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "softmax_backward");
  const std::size_t m = y.shape().back();
  Tensor g(y.shape());
  for (std::size_t r = 0; r < y.size() / m; ++r) {
    const double* yr = y.data().data() + r * m;
    const double* gr = grad_out.data().data() + r * m;
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += yr[i] * gr[i];
    for (std::size_t i = 0; i < m; ++i) g[r * m + i] = yr[i] * (gr[i] - s);
  }
  return g;
}

BatchNormState BatchNormState::identity(std::size_t features) {
  return {Tensor({features}, 0.0), Tensor({features}, 1.0)};
}

namespace {

struct BnDims {
  std::size_t batch;
  std::size_t features;
  std::size_t length;
};

BnDims bn_dims(const Tensor& x) {
  if (x.rank() == 2) return {x.shape()[0], x.shape()[1], 1};
  if (x.rank() == 3) return {x.shape()[0], x.shape()[1], x.shape()[2]};
  throw ShapeError("batchnorm: input must be [B,F] or [B,F,L], got " + shape_string(x.shape()));
}

}  // namespace

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 Mode mode, BatchNormCache* cache, bool update_running) {
  const auto d = bn_dims(x);
  require_dim(gamma.size() == d.features && beta.size() == d.features, "batchnorm",
              "feature dim: input has " + std::to_string(d.features) + ", gamma/beta have " +
                  std::to_string(gamma.size()) + "/" + std::to_string(beta.size()));
  require_dim(state.running_mean.size() == d.features && state.running_var.size() == d.features,
              "batchnorm", "running stats do not match feature dim");
  const std::size_t n = d.batch * d.length;
  std::vector<double> mean(d.features, 0.0);
  std::vector<double> var(d.features, 0.0);

  if (mode == Mode::train) {
    if (d.batch < 2) throw ShapeError("batchnorm: train mode needs batch >= 2, got " +
                                      std::to_string(d.batch));
    for (std::size_t b = 0; b < d.batch; ++b) {
      for (std::size_t f = 0; f < d.features; ++f) {
        const double* xr = x.data().data() + (b * d.features + f) * d.length;
        for (std::size_t t = 0; t < d.length; ++t) mean[f] += xr[t];
      }
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t b = 0; b < d.batch; ++b) {
      for (std::size_t f = 0; f < d.features; ++f) {
        const double* xr = x.data().data() + (b * d.features + f) * d.length;
        for (std::size_t t = 0; t < d.length; ++t) {
          const double c = xr[t] - mean[f];
          var[f] += c * c;
        }
      }
    }
    for (auto& v : var) v /= static_cast<double>(n);
    if (update_running) {
      const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
      for (std::size_t f = 0; f < d.features; ++f) {
        state.running_mean[f] =
            state.momentum * state.running_mean[f] + (1.0 - state.momentum) * mean[f];
        state.running_var[f] =
            state.momentum * state.running_var[f] + (1.0 - state.momentum) * var[f] * unbias;
      }
    }
  } else {
    for (std::size_t f = 0; f < d.features; ++f) {
      mean[f] = state.running_mean[f];
      var[f] = state.running_var[f];
    }
  }

  std::vector<double> inv_std(d.features);
  for (std::size_t f = 0; f < d.features; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + state.eps);

  Tensor out(x.shape());
  Tensor normalized(x.shape());
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t f = 0; f < d.features; ++f) {
      const std::size_t off = (b * d.features + f) * d.length;
      for (std::size_t t = 0; t < d.length; ++t) {
        const double xh = (x[off + t] - mean[f]) * inv_std[f];
        normalized[off + t] = xh;
        out[off + t] = gamma[f] * xh + beta[f];
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma,
                                  const BatchNormCache& cache) {
  require_same_shape(grad_out, cache.normalized, "batchnorm_backward");
  const auto d = bn_dims(grad_out);
  const double n = static_cast<double>(d.batch * d.length);
  BatchNormGrads g{Tensor(grad_out.shape()), Tensor({d.features}), Tensor({d.features})};
  std::vector<double> sum_dxh(d.features, 0.0);
  std::vector<double> sum_dxh_xh(d.features, 0.0);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t f = 0; f < d.features; ++f) {
      const std::size_t off = (b * d.features + f) * d.length;
      for (std::size_t t = 0; t < d.length; ++t) {
        const double go = grad_out[off + t];
        const double xh = cache.normalized[off + t];
        g.beta[f] += go;
        g.gamma[f] += go * xh;
        sum_dxh[f] += go * gamma[f];
        sum_dxh_xh[f] += go * gamma[f] * xh;
      }
    }
  }
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t f = 0; f < d.features; ++f) {
      const std::size_t off = (b * d.features + f) * d.length;
      for (std::size_t t = 0; t < d.length; ++t) {
        const double dxh = grad_out[off + t] * gamma[f];
        if (cache.mode == Mode::train) {
          g.input[off + t] = cache.inv_std[f] / n *
                             (n * dxh - sum_dxh[f] - cache.normalized[off + t] * sum_dxh_xh[f]);
        } else {
          g.input[off + t] = dxh * cache.inv_std[f];
        }
      }
    }
  }
  return g;
}

DropoutResult dropout(const Tensor& x, double keep_prob, Rng& rng, Mode mode) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw ConfigError("dropout: keep_prob must be in (0, 1], got " + std::to_string(keep_prob));
  }
  if (mode == Mode::eval || keep_prob == 1.0) return {x, Tensor()};
  DropoutResult r{Tensor(x.shape()), Tensor(x.shape())};
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng.uniform() < keep_prob ? scale : 0.0;
    r.mask[i] = m;
    r.output[i] = x[i] * m;
  }
  return r;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
  if (mask.empty()) return grad_out;
  require_same_shape(grad_out, mask, "dropout_backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

}  // namespace drssl::nn
