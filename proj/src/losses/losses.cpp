#include "drssl/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drssl/error.hpp"

namespace drssl::losses {
namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool in_clamp_range(double p) { return p > kProbClamp && p < 1.0 - kProbClamp; }

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw ShapeError(std::string(what) + ": empty batch");
}

void require_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw ShapeError("prediction loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConfigError("prediction loss: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

// Adds `src` scaled into rows [offset, offset + src rows) of dst.
void add_rows(Tensor& dst, std::size_t offset, const Tensor& src, double scale) {
  const std::size_t width = dst.shape()[1];
  for (std::size_t i = 0; i < src.size(); ++i) dst[offset * width + i] += scale * src[i];
}

}  // namespace

double adversarial_from_probs(const Tensor& prob_l, const Tensor& prob_u) {
  require_nonempty(prob_l.size(), "adversarial loss (labeled)");
  require_nonempty(prob_u.size(), "adversarial loss (unlabeled)");
  double a = 0.0;
  for (double p : prob_l.data()) a += std::log(clamp_prob(p));
  double b = 0.0;
  for (double p : prob_u.data()) b += std::log(1.0 - clamp_prob(p));
  return a / static_cast<double>(prob_l.size()) + b / static_cast<double>(prob_u.size());
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t rows = logits.shape()[0];
  const std::size_t m = logits.shape()[1];
  require_nonempty(rows, "prediction loss");
  require_labels(labels, rows, m);
  const Tensor probs = nn::softmax(logits);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    total -= std::log(std::max(probs[r * m + static_cast<std::size_t>(labels[r])], kProbClamp));
  }
  return total / static_cast<double>(rows);
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels) {
  const std::size_t rows = logits.shape()[0];
  const std::size_t m = logits.shape()[1];
  require_labels(labels, rows, m);
  Tensor g = nn::softmax(logits);
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t y = static_cast<std::size_t>(labels[r]);
    double* row = g.data().data() + r * m;
    if (row[y] <= kProbClamp) {
      // clamped: the loss is locally constant
      std::fill(row, row + m, 0.0);
      continue;
    }
    row[y] -= 1.0;
    for (std::size_t i = 0; i < m; ++i) row[i] *= inv;
  }
  return g;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  nn::require_same_shape(a, b, "mean_squared_error");
  require_nonempty(a.size(), "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double adversarial_loss(const Tensor& z_l, const Tensor& z_u, const ModelParams& params) {
  return adversarial_from_probs(model::discriminate(z_l, params), model::discriminate(z_u, params));
}

double reconstruction_loss(const Tensor& x_l, const Tensor& x_u, const ModelParams& params) {
  const Tensor rec_l = model::decode(model::encode(x_l, params), model::Domain::labeled, params);
  const Tensor rec_u = model::decode(model::encode(x_u, params), model::Domain::unlabeled, params);
  return mean_squared_error(x_l, rec_l) + mean_squared_error(x_u, rec_u);
}

double consistency_loss(const Tensor& x_l, const Tensor& x_u, const ModelParams& params) {
  const Tensor z_l = model::encode(x_l, params);
  const Tensor z_u = model::encode(x_u, params);
  const Tensor gen_u = model::decode(z_l, model::Domain::unlabeled, params);
  const Tensor gen_l = model::decode(z_u, model::Domain::labeled, params);
  return mean_squared_error(z_l, model::encode(gen_u, params)) +
         mean_squared_error(z_u, model::encode(gen_l, params));
}

double prediction_loss(const Tensor& x_l, std::span<const int> labels, const ModelParams& params) {
  return cross_entropy(model::predict_logits(model::encode(x_l, params), params), labels);
}

Encoded encode_batches(const Tensor& x_l, const Tensor* x_u, ModelParams& params,
                       const model::ForwardOptions& options) {
  Encoded e;
  e.n_l = x_l.shape().empty() ? 0 : x_l.shape()[0];
  e.n_u = x_u ? x_u->shape()[0] : 0;
  require_nonempty(e.n_l, "encode_batches (labeled)");
  if (x_u) {
    require_nonempty(e.n_u, "encode_batches (unlabeled)");
    e.z = model::encode(nn::concat_rows(x_l, *x_u), params, options, &e.trace);
  } else {
    e.z = model::encode(x_l, params, options, &e.trace);
  }
  return e;
}

double adversarial_term(const Encoded& enc, ModelParams& params, double seed, Tensor* grad_z) {
  if (enc.n_u == 0) throw ShapeError("adversarial loss: pass has no unlabeled rows");
  model::DiscriminatorTrace trace;
  const Tensor prob = model::discriminate(enc.z, params, &trace);
  const Tensor prob_l = prob.slice_rows(0, enc.n_l);
  const Tensor prob_u = prob.slice_rows(enc.n_l, enc.n_l + enc.n_u);
  const double value = adversarial_from_probs(prob_l, prob_u);
  if (seed == 0.0) return value;

  Tensor grad_prob(prob.shape());
  const double wl = seed / static_cast<double>(enc.n_l);
  const double wu = seed / static_cast<double>(enc.n_u);
  for (std::size_t i = 0; i < enc.n_l; ++i) {
    const double p = prob[i];
    if (in_clamp_range(p)) grad_prob[i] = wl / p;
  }
  for (std::size_t i = enc.n_l; i < enc.n_l + enc.n_u; ++i) {
    const double p = prob[i];
    if (in_clamp_range(p)) grad_prob[i] = -wu / (1.0 - p);
  }
  const Tensor gz = model::discriminate_backward(trace, grad_prob, params.disc, grad_z != nullptr);
  if (grad_z) add_rows(*grad_z, 0, gz, 1.0);
  return value;
}

double reconstruction_term(const Tensor& x_l, const Tensor& x_u, const Encoded& enc,
                           ModelParams& params, double seed, Tensor* grad_z) {
  model::DecoderTrace tl;
  model::DecoderTrace tu;
  const Tensor rec_l = model::decode(enc.z_l(), model::Domain::labeled, params, &tl);
  const Tensor rec_u = model::decode(enc.z_u(), model::Domain::unlabeled, params, &tu);
  const double value = mean_squared_error(x_l, rec_l) + mean_squared_error(x_u, rec_u);
  if (seed == 0.0) return value;

  auto mse_grad = [seed](const Tensor& x, const Tensor& rec) {
    Tensor g(rec.shape());
    const double s = 2.0 * seed / static_cast<double>(rec.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = s * (rec[i] - x[i]);
    return g;
  };
  const bool want_z = grad_z != nullptr;
  const Tensor gl = model::decode_backward(tl, mse_grad(x_l, rec_l), params.dec_l, want_z);
  const Tensor gu = model::decode_backward(tu, mse_grad(x_u, rec_u), params.dec_u, want_z);
  if (grad_z) {
    add_rows(*grad_z, 0, gl, 1.0);
    add_rows(*grad_z, enc.n_l, gu, 1.0);
  }
  return value;
}

double consistency_term(const Encoded& enc, ModelParams& params,
                        const model::ForwardOptions& options, double seed, Tensor* grad_z) {
  if (enc.n_u == 0) throw ShapeError("consistency loss: pass has no unlabeled rows");
  const Tensor z_l = enc.z_l();
  const Tensor z_u = enc.z_u();
  model::DecoderTrace t_gen_u;
  model::DecoderTrace t_gen_l;
  // x-hat^U from labeled latents, x-hat^L from unlabeled latents
  const Tensor gen_u = model::decode(z_l, model::Domain::unlabeled, params, &t_gen_u);
  const Tensor gen_l = model::decode(z_u, model::Domain::labeled, params, &t_gen_l);

  model::ForwardOptions regen = options;
  regen.update_running_stats = false;
  const Tensor gen = nn::concat_rows(gen_u, gen_l);
  model::EncoderTrace t_re;
  const Tensor z_re = model::encode(gen, params, regen, &t_re);

  const Tensor re_l = z_re.slice_rows(0, enc.n_l);
  const Tensor re_u = z_re.slice_rows(enc.n_l, enc.n_l + enc.n_u);
  const double value = mean_squared_error(z_l, re_l) + mean_squared_error(z_u, re_u);
  if (seed == 0.0) return value;

  // d/dz of (z - z_re)^2 means; z_re gets the negated gradient.
  Tensor g_direct(enc.z.shape());
  const double sl = 2.0 * seed / static_cast<double>(z_l.size());
  const double su = 2.0 * seed / static_cast<double>(z_u.size());
  for (std::size_t i = 0; i < z_l.size(); ++i) g_direct[i] = sl * (z_l[i] - re_l[i]);
  for (std::size_t i = 0; i < z_u.size(); ++i) g_direct[z_l.size() + i] = su * (z_u[i] - re_u[i]);
  Tensor g_re = g_direct;
  for (auto& v : g_re.data()) v = -v;

  const Tensor g_gen = model::encode_backward(t_re, g_re, params.enc, true);
  const Tensor g_gen_u = g_gen.slice_rows(0, enc.n_l);
  const Tensor g_gen_l = g_gen.slice_rows(enc.n_l, enc.n_l + enc.n_u);
  const Tensor gz_l = model::decode_backward(t_gen_u, g_gen_u, params.dec_u, true);
  const Tensor gz_u = model::decode_backward(t_gen_l, g_gen_l, params.dec_l, true);
  if (grad_z) {
    add_rows(*grad_z, 0, g_direct, 1.0);
    add_rows(*grad_z, 0, gz_l, 1.0);
    add_rows(*grad_z, enc.n_l, gz_u, 1.0);
  }
  return value;
}

double prediction_term(const Encoded& enc, std::span<const int> labels, ModelParams& params,
                       double seed, Tensor* grad_z) {
  const Tensor z_l = enc.z_l();
  const Tensor logits = model::predict_logits(z_l, params);
  const double value = cross_entropy(logits, labels);
  if (seed == 0.0) return value;
  Tensor g = cross_entropy_grad(logits, labels);
  for (auto& v : g.data()) v *= seed;
  const Tensor gz = model::predict_backward(z_l, g, params.pred, grad_z != nullptr);
  if (grad_z) add_rows(*grad_z, 0, gz, 1.0);
  return value;
}

void backprop_encoder(const Encoded& enc, const Tensor& grad_z, ModelParams& params) {
  nn::require_same_shape(grad_z, enc.z, "backprop_encoder");
  model::encode_backward(enc.trace, grad_z, params.enc, false);
}

}  // namespace drssl::losses
