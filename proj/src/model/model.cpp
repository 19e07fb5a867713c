#include "drssl/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "drssl/binary_io.hpp"
#include "drssl/error.hpp"

namespace drssl::model {

using nn::Shape;

const char* to_string(Part part) {
  switch (part) {
    case Part::encoder: return "encoder";
    case Part::predictor: return "predictor";
    case Part::discriminator: return "discriminator";
    case Part::decoder_l: return "decoder_l";
    case Part::decoder_u: return "decoder_u";
  }
  return "?";
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (channels == 0 || window_len == 0 || conv_filters == 0 || kernel_len == 0 || pool_w == 0 ||
      latent_dim == 0 || disc_hidden == 0) {
    fail("all sizes must be positive");
  }
  if (kernel_len > window_len) fail("kernel_len exceeds window_len");
  if (conv_len() < pool_w) fail("pool_w exceeds the convolution output length");
  if (n_classes < 2) fail("n_classes must be >= 2");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) fail("keep_prob must be in (0, 1]");
}

namespace {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, nn::Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

Decoder make_decoder(const ModelConfig& c, const std::string& prefix, nn::Rng& rng) {
  const std::size_t flat = c.flat_dim();
  const std::size_t k = c.kernel_len;
  return Decoder{
      Param(prefix + ".fc.w", glorot({flat, c.latent_dim}, c.latent_dim, flat, rng)),
      Param(prefix + ".fc.b", Tensor({flat})),
      Param(prefix + ".deconv.w",
            glorot({c.conv_filters, c.channels, k}, c.conv_filters * k, c.channels * k, rng)),
      Param(prefix + ".deconv.b", Tensor({c.channels})),
  };
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite input");
}

}  // namespace

ModelParams init_params(const ModelConfig& c, nn::Rng& rng) {
  c.validate();
  const std::size_t F = c.conv_filters;
  const std::size_t C = c.channels;
  const std::size_t k = c.kernel_len;
  const std::size_t d = c.latent_dim;
  ModelParams p;
  p.config = c;
  p.enc.conv_w = Param("enc.conv.w", glorot({F, C, k}, C * k, F * k, rng));
  p.enc.conv_b = Param("enc.conv.b", Tensor({F}));
  p.enc.bn_gamma = Param("enc.bn.gamma", Tensor({F}, 1.0));
  p.enc.bn_beta = Param("enc.bn.beta", Tensor({F}));
  p.enc.fc_w = Param("enc.fc.w", glorot({d, c.flat_dim()}, c.flat_dim(), d, rng));
  p.enc.fc_b = Param("enc.fc.b", Tensor({d}));
  p.enc.bn = nn::BatchNormState::identity(F);

  p.pred.w = Param("pred.w", glorot({c.n_classes, d}, d, c.n_classes, rng));
  p.pred.b = Param("pred.b", Tensor({c.n_classes}));

  p.disc.w1 = Param("disc.w1", glorot({c.disc_hidden, d}, d, c.disc_hidden, rng));
  p.disc.b1 = Param("disc.b1", Tensor({c.disc_hidden}));
  p.disc.w2 = Param("disc.w2", glorot({1, c.disc_hidden}, c.disc_hidden, 1, rng));
  p.disc.b2 = Param("disc.b2", Tensor({1}));

  p.dec_l = make_decoder(c, "dec_l", rng);
  p.dec_u = make_decoder(c, "dec_u", rng);
  return p;
}

ModelParams init_params(const ModelConfig& config) {
  nn::Rng rng = nn::Rng(config.seed).derive("init");
  return init_params(config, rng);
}

std::vector<Param*> ModelParams::part(Part which) {
  switch (which) {
    case Part::encoder:
      return {&enc.conv_w, &enc.conv_b, &enc.bn_gamma, &enc.bn_beta, &enc.fc_w, &enc.fc_b};
    case Part::predictor: return {&pred.w, &pred.b};
    case Part::discriminator: return {&disc.w1, &disc.b1, &disc.w2, &disc.b2};
    case Part::decoder_l: return {&dec_l.fc_w, &dec_l.fc_b, &dec_l.deconv_w, &dec_l.deconv_b};
    case Part::decoder_u: return {&dec_u.fc_w, &dec_u.fc_b, &dec_u.deconv_w, &dec_u.deconv_b};
  }
  return {};
}

std::vector<const Param*> ModelParams::part(Part which) const {
  auto mut = const_cast<ModelParams*>(this)->part(which);
  return {mut.begin(), mut.end()};
}

std::vector<Param*> ModelParams::all() {
  std::vector<Param*> out;
  for (Part p : kAllParts) {
    auto ps = part(p);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<const Param*> ModelParams::all() const {
  auto mut = const_cast<ModelParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

std::uint64_t fingerprint(const ModelParams& params, Part which) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Param* p : params.part(which)) {
    h = binio::fnv1a(p->name.data(), p->name.size(), h);
    h = binio::fnv1a(p->value.data().data(), p->value.size() * sizeof(double), h);
  }
  return h;
}

namespace {

Tensor encode_impl(const Tensor& x, const ModelConfig& c, const Encoder& enc,
                   nn::BatchNormState& bn, const ForwardOptions& options, EncoderTrace* trace) {
  if (x.rank() != 3 || x.shape()[1] != c.channels || x.shape()[2] != c.window_len) {
    throw ShapeError("encode: expected [B," + std::to_string(c.channels) + "," +
                     std::to_string(c.window_len) + "], got " + nn::shape_string(x.shape()));
  }
  require_finite(x, "encode");
  const std::size_t batch = x.shape()[0];

  Tensor conv = nn::conv1d(x, enc.conv_w.value, enc.conv_b.value);
  nn::BatchNormCache bn_cache;
  Tensor normalized = nn::batchnorm(conv, enc.bn_gamma.value, enc.bn_beta.value, bn,
                                    options.mode, &bn_cache, options.update_running_stats);
  Tensor activated = nn::relu(normalized);
  nn::PoolResult pooled = nn::maxpool1d(activated, c.pool_w);
  Tensor flat = pooled.output.reshaped({batch, c.flat_dim()});
  nn::DropoutResult dropped{flat, Tensor()};
  if (options.mode == Mode::train && options.dropout_rng) {
    dropped = nn::dropout(flat, c.keep_prob, *options.dropout_rng, Mode::train);
  }
  Tensor z = nn::dense(dropped.output, enc.fc_w.value, enc.fc_b.value);

  if (trace) {
    trace->input = x;
    trace->conv = std::move(conv);
    trace->bn = std::move(bn_cache);
    trace->normalized = std::move(normalized);
    trace->activated = std::move(activated);
    trace->pooled = std::move(pooled);
    trace->flat = std::move(flat);
    trace->dropout_mask = std::move(dropped.mask);
    trace->flat_dropped = std::move(dropped.output);
  }
  return z;
}

}  // namespace

Tensor encode(const Tensor& x, ModelParams& params, const ForwardOptions& options,
              EncoderTrace* trace) {
  return encode_impl(x, params.config, params.enc, params.enc.bn, options, trace);
}

Tensor encode(const Tensor& x, const ModelParams& params) {
  nn::BatchNormState bn = params.enc.bn;
  return encode_impl(x, params.config, params.enc, bn, ForwardOptions{Mode::eval, nullptr, false},
                     nullptr);
}

Tensor encode_backward(const EncoderTrace& t, const Tensor& grad_z, Encoder& enc,
                       bool need_input_grad) {
  auto fc = nn::dense_backward(t.flat_dropped, enc.fc_w.value, grad_z, true);
  enc.fc_w.accumulate(fc.weights);
  enc.fc_b.accumulate(fc.bias);
  Tensor grad_flat = nn::dropout_backward(fc.input, t.dropout_mask);
  grad_flat.reshape(t.pooled.output.shape());
  Tensor grad_act = nn::maxpool1d_backward(grad_flat, t.pooled.indices, t.activated.shape());
  Tensor grad_norm = nn::relu_backward(t.normalized, grad_act);
  auto bn = nn::batchnorm_backward(grad_norm, enc.bn_gamma.value, t.bn);
  enc.bn_gamma.accumulate(bn.gamma);
  enc.bn_beta.accumulate(bn.beta);
  auto conv = nn::conv1d_backward(t.input, enc.conv_w.value, bn.input, need_input_grad);
  enc.conv_w.accumulate(conv.kernels);
  enc.conv_b.accumulate(conv.bias);
  return conv.input;
}

Tensor decode(const Tensor& z, Domain which, const ModelParams& params, DecoderTrace* trace) {
  const auto& c = params.config;
  if (z.rank() != 2 || z.shape()[1] != c.latent_dim) {
    throw ShapeError("decode: expected [B," + std::to_string(c.latent_dim) + "], got " +
                     nn::shape_string(z.shape()));
  }
  require_finite(z, "decode");
  const auto& dec = params.decoder(which);
  const std::size_t batch = z.shape()[0];
  Tensor hidden_pre = nn::dense(z, dec.fc_w.value, dec.fc_b.value);
  Tensor hidden = nn::relu(hidden_pre);
  hidden.reshape({batch, c.conv_filters, c.pooled_len()});
  Tensor up = nn::upsample1d(hidden, c.pool_w);
  Tensor mirrored = nn::deconv1d(up, dec.deconv_w.value, dec.deconv_b.value);

  const std::size_t mlen = c.mirrored_len();
  Tensor out;
  if (mlen == c.window_len) {
    out = std::move(mirrored);
  } else {
    out = Tensor({batch, c.channels, c.window_len});
    const std::size_t n = std::min(mlen, c.window_len);
    for (std::size_t r = 0; r < batch * c.channels; ++r) {
      for (std::size_t t = 0; t < n; ++t) out[r * c.window_len + t] = mirrored[r * mlen + t];
    }
  }
  if (trace) {
    trace->latent = z;
    trace->hidden_pre = std::move(hidden_pre);
    trace->upsampled = std::move(up);
    trace->pool_w = c.pool_w;
    trace->mirrored_len = mlen;
  }
  return out;
}

Tensor decode_backward(const DecoderTrace& t, const Tensor& grad_x, Decoder& dec,
                       bool need_input_grad) {
  const std::size_t batch = grad_x.shape()[0];
  const std::size_t channels = grad_x.shape()[1];
  const std::size_t window = grad_x.shape()[2];
  const std::size_t mlen = t.mirrored_len;
  Tensor grad_m;
  if (mlen == window) {
    grad_m = grad_x;
  } else {
    grad_m = Tensor({batch, channels, mlen});
    const std::size_t n = std::min(mlen, window);
    for (std::size_t r = 0; r < batch * channels; ++r) {
      for (std::size_t i = 0; i < n; ++i) grad_m[r * mlen + i] = grad_x[r * window + i];
    }
  }
  auto deconv = nn::deconv1d_backward(t.upsampled, dec.deconv_w.value, grad_m, true);
  dec.deconv_w.accumulate(deconv.kernels);
  dec.deconv_b.accumulate(deconv.bias);
  Tensor grad_hidden = nn::upsample1d_backward(deconv.input, t.pool_w);
  grad_hidden.reshape(t.hidden_pre.shape());
  grad_hidden = nn::relu_backward(t.hidden_pre, grad_hidden);
  auto fc = nn::dense_backward(t.latent, dec.fc_w.value, grad_hidden, need_input_grad);
  dec.fc_w.accumulate(fc.weights);
  dec.fc_b.accumulate(fc.bias);
  return fc.input;
}

Tensor predict_logits(const Tensor& z, const ModelParams& params) {
  if (z.rank() != 2 || z.shape()[1] != params.config.latent_dim) {
    throw ShapeError("predict: expected [B," + std::to_string(params.config.latent_dim) +
                     "], got " + nn::shape_string(z.shape()));
  }
  return nn::dense(z, params.pred.w.value, params.pred.b.value);
}

Tensor predict_label(const Tensor& z, const ModelParams& params) {
  return nn::softmax(predict_logits(z, params));
}

Tensor predict_backward(const Tensor& z, const Tensor& grad_logits, Predictor& pred,
                        bool need_input_grad) {
  auto g = nn::dense_backward(z, pred.w.value, grad_logits, need_input_grad);
  pred.w.accumulate(g.weights);
  pred.b.accumulate(g.bias);
  return g.input;
}

std::vector<int> classify(const ModelParams& params, const Tensor& x) {
  const Tensor logits = predict_logits(encode(x, params), params);
  const std::size_t m = params.config.n_classes;
  std::vector<int> out(logits.shape()[0]);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = logits.data().data() + r * m;
    out[r] = static_cast<int>(std::max_element(row, row + m) - row);
  }
  return out;
}

Tensor discriminate(const Tensor& z, const ModelParams& params, DiscriminatorTrace* trace) {
  if (z.rank() != 2 || z.shape()[1] != params.config.latent_dim) {
    throw ShapeError("discriminate: expected [B," + std::to_string(params.config.latent_dim) +
                     "], got " + nn::shape_string(z.shape()));
  }
  const auto& disc = params.disc;
  Tensor hidden_pre = nn::dense(z, disc.w1.value, disc.b1.value);
  Tensor hidden = nn::relu(hidden_pre);
  Tensor logit = nn::dense(hidden, disc.w2.value, disc.b2.value);
  Tensor prob = nn::sigmoid(logit);
  prob.reshape({z.shape()[0]});
  if (trace) {
    trace->latent = z;
    trace->hidden_pre = std::move(hidden_pre);
    trace->hidden = std::move(hidden);
    trace->prob = prob;
  }
  return prob;
}

Tensor discriminate_backward(const DiscriminatorTrace& t, const Tensor& grad_prob,
                             Discriminator& disc, bool need_input_grad) {
  const std::size_t batch = t.prob.size();
  Tensor grad_logit = nn::sigmoid_backward(t.prob, grad_prob.reshaped({batch}));
  grad_logit.reshape({batch, 1});
  auto head = nn::dense_backward(t.hidden, disc.w2.value, grad_logit, true);
  disc.w2.accumulate(head.weights);
  disc.b2.accumulate(head.bias);
  Tensor grad_hidden = nn::relu_backward(t.hidden_pre, head.input);
  auto first = nn::dense_backward(t.latent, disc.w1.value, grad_hidden, need_input_grad);
  disc.w1.accumulate(first.weights);
  disc.b1.accumulate(first.bias);
  return first.input;
}

}  // namespace drssl::model
