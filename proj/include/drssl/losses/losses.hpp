#pragma once

#include <cstddef>
#include <span>

#include "drssl/model/model.hpp"

namespace drssl::losses {

using model::ModelParams;
using nn::Tensor;

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

struct LossReport {
  double l_a = 0.0;
  double l_rec = 0.0;
  double l_con = 0.0;
  double l_y = 0.0;
  double l_total = 0.0;

  // Sets l_total to the sum of the four components.
  void finalize() { l_total = l_a + l_rec + l_con + l_y; }
};

// ---------------------------------------------------------------------------
// Head-level formulas.

// mean_L log p_L + mean_U log(1 - p_U), both clamped.
double adversarial_from_probs(const Tensor& prob_l, const Tensor& prob_u);

// mean over rows of -log(clamped softmax(logits)[label]).
double cross_entropy(const Tensor& logits, std::span<const int> labels);
// d cross_entropy / d logits.
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels);

// Mean of squared differences over every element, which equals the batch mean
// of per-sample per-element MSE when all samples have the same size.
double mean_squared_error(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// Model-level losses on raw batches, evaluated in eval mode (no dropout,
// running batchnorm statistics). These are the plain definitions.

double adversarial_loss(const Tensor& z_l, const Tensor& z_u, const ModelParams& params);
double reconstruction_loss(const Tensor& x_l, const Tensor& x_u, const ModelParams& params);
double consistency_loss(const Tensor& x_l, const Tensor& x_u, const ModelParams& params);
double prediction_loss(const Tensor& x_l, std::span<const int> labels, const ModelParams& params);

// ---------------------------------------------------------------------------
// Differentiable terms over one shared encoder pass.
//
// A joint pass encodes [x_l; x_u] as a single batch (batchnorm statistics
// span both pools). Each *_term returns its loss value; when `seed` is
// nonzero it accumulates seed * dL/dtheta into every Param that the term
// touches, and when `grad_z` is non-null it also adds seed * dL/dz into it.
// Callers zero the grads beforehand and step only the sets they own.

struct Encoded {
  model::EncoderTrace trace;
  Tensor z;  // [n_l + n_u, d]
  std::size_t n_l = 0;
  std::size_t n_u = 0;

  Tensor z_l() const { return z.slice_rows(0, n_l); }
  Tensor z_u() const { return z.slice_rows(n_l, n_l + n_u); }
};

// x_u may be null for a labeled-only pass.
Encoded encode_batches(const Tensor& x_l, const Tensor* x_u, ModelParams& params,
                       const model::ForwardOptions& options);

double adversarial_term(const Encoded& enc, ModelParams& params, double seed, Tensor* grad_z);
double reconstruction_term(const Tensor& x_l, const Tensor& x_u, const Encoded& enc,
                           ModelParams& params, double seed, Tensor* grad_z);
// Re-encodes the cross-domain generations f_dU(z_l) and f_dL(z_u) with
// `options` (running stats are never updated for generated inputs).
double consistency_term(const Encoded& enc, ModelParams& params,
                        const model::ForwardOptions& options, double seed, Tensor* grad_z);
double prediction_term(const Encoded& enc, std::span<const int> labels, ModelParams& params,
                       double seed, Tensor* grad_z);

// Pushes an accumulated latent gradient through the encoder pass.
void backprop_encoder(const Encoded& enc, const Tensor& grad_z, ModelParams& params);

}  // namespace drssl::losses
