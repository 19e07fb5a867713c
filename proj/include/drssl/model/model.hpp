#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "drssl/nn/layers.hpp"
#include "drssl/nn/param.hpp"
#include "drssl/nn/rng.hpp"

namespace drssl::model {

using nn::Mode;
using nn::Param;
using nn::Tensor;

struct ModelConfig {
  std::size_t channels = 4;
  std::size_t window_len = 128;
  std::size_t conv_filters = 8;
  std::size_t kernel_len = 9;
  std::size_t pool_w = 4;
  std::size_t latent_dim = 32;
  std::size_t n_classes = 3;
  std::size_t disc_hidden = 64;
  double keep_prob = 1.0;
  std::uint64_t seed = 0;

  // Throws ConfigError on an invalid combination.
  void validate() const;

  std::size_t conv_len() const { return window_len - kernel_len + 1; }
  std::size_t pooled_len() const { return conv_len() / pool_w; }
  std::size_t flat_dim() const { return conv_filters * pooled_len(); }
  // Length produced by the mirrored decoder before padding/cropping to window_len.
  std::size_t mirrored_len() const { return pooled_len() * pool_w + kernel_len - 1; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// The five parameter sets.
enum class Part { encoder, predictor, discriminator, decoder_l, decoder_u };

inline constexpr Part kAllParts[] = {Part::encoder, Part::predictor, Part::discriminator,
                                     Part::decoder_l, Part::decoder_u};

const char* to_string(Part part);

// Which decoder: reconstructs labeled-pool or unlabeled-pool inputs.
enum class Domain { labeled, unlabeled };

struct Encoder {
  Param conv_w;  // [F,C,k]
  Param conv_b;  // [F]
  Param bn_gamma;
  Param bn_beta;
  Param fc_w;  // [d, F*pooled]
  Param fc_b;
  nn::BatchNormState bn;
};

struct Decoder {
  Param fc_w;  // [F*pooled, d]
  Param fc_b;
  Param deconv_w;  // [F,C,k]
  Param deconv_b;  // [C]
};

struct Predictor {
  Param w;  // [M,d]
  Param b;
};

struct Discriminator {
  Param w1;  // [H,d]
  Param b1;
  Param w2;  // [1,H]
  Param b2;
};

struct ModelParams {
  ModelConfig config;
  Encoder enc;
  Predictor pred;
  Discriminator disc;
  Decoder dec_l;
  Decoder dec_u;

  Decoder& decoder(Domain which) { return which == Domain::labeled ? dec_l : dec_u; }
  const Decoder& decoder(Domain which) const {
    return which == Domain::labeled ? dec_l : dec_u;
  }

  std::vector<Param*> part(Part which);
  std::vector<const Param*> part(Part which) const;
  std::vector<Param*> all();
  std::vector<const Param*> all() const;
};

// Glorot-uniform weights, zero biases, batchnorm gamma=1/beta=0.
ModelParams init_params(const ModelConfig& config, nn::Rng& rng);
ModelParams init_params(const ModelConfig& config);

// Hash of the values of every Param in one set.
std::uint64_t fingerprint(const ModelParams& params, Part which);

struct ForwardOptions {
  Mode mode = Mode::eval;
  // Dropout is applied in train mode only when a stream is given.
  nn::Rng* dropout_rng = nullptr;
  bool update_running_stats = true;
};

struct EncoderTrace {
  Tensor input;
  Tensor conv;
  nn::BatchNormCache bn;
  Tensor normalized;
  Tensor activated;
  nn::PoolResult pooled;
  Tensor flat;
  Tensor dropout_mask;
  Tensor flat_dropped;
};

struct DecoderTrace {
  Tensor latent;
  Tensor hidden_pre;
  Tensor upsampled;
  std::size_t pool_w = 1;
  std::size_t mirrored_len = 0;
};

struct DiscriminatorTrace {
  Tensor latent;
  Tensor hidden_pre;
  Tensor hidden;
  Tensor prob;  // [B]
};

// x: [B,C,T] -> z: [B,d]. conv -> batchnorm -> relu -> maxpool -> flatten ->
// dropout -> dense; the latent is linear.
Tensor encode(const Tensor& x, ModelParams& params, const ForwardOptions& options,
              EncoderTrace* trace = nullptr);
// Eval-mode encode that leaves params untouched.
Tensor encode(const Tensor& x, const ModelParams& params);

// Accumulates encoder param grads; returns d/dx when requested (else empty).
Tensor encode_backward(const EncoderTrace& trace, const Tensor& grad_z, Encoder& enc,
                       bool need_input_grad);

// z: [B,d] -> x-hat: [B,C,T]. dense -> relu -> reshape -> upsample -> deconv,
// zero-padded or cropped to window_len.
Tensor decode(const Tensor& z, Domain which, const ModelParams& params,
              DecoderTrace* trace = nullptr);
Tensor decode_backward(const DecoderTrace& trace, const Tensor& grad_x, Decoder& dec,
                       bool need_input_grad);

// Logits [B,M]; predict_label applies softmax.
Tensor predict_logits(const Tensor& z, const ModelParams& params);
Tensor predict_label(const Tensor& z, const ModelParams& params);
Tensor predict_backward(const Tensor& z, const Tensor& grad_logits, Predictor& pred,
                        bool need_input_grad);

// Eval-mode argmax class for each window of x: [B,C,T].
std::vector<int> classify(const ModelParams& params, const Tensor& x);

// Probability that each latent came from the labeled pool, [B], unclamped.
Tensor discriminate(const Tensor& z, const ModelParams& params,
                    DiscriminatorTrace* trace = nullptr);
// grad_prob is d(loss)/d(prob) per row.
Tensor discriminate_backward(const DiscriminatorTrace& trace, const Tensor& grad_prob,
                             Discriminator& disc, bool need_input_grad);

}  // namespace drssl::model
