#pragma once

#include <cstddef>
#include <vector>

#include "drssl/nn/rng.hpp"
#include "drssl/nn/tensor.hpp"

// Forward/backward kernels for the fixed layer set of the model. Every
// time-series kernel accepts either a single sample [channels x time] or a
// batch [batch x channels x time]; outputs keep the input's rank.
namespace drssl::nn {

enum class Mode { train, eval };

// Valid cross-correlation over time summed over channels.
// x: [C,T] | [B,C,T], kernels: [F,C,k], bias: [F] -> [F,T-k+1] | [B,F,T-k+1]
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias);

struct ConvGrads {
  Tensor input;  // empty when not requested
  Tensor kernels;
  Tensor bias;
};

ConvGrads conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& grad_out,
                          bool need_input_grad = true);

// Transposed convolution, the exact adjoint of conv1d (before bias).
// x: [F,T'] | [B,F,T'], kernels: [F,C,k], bias: [C] -> [C,T'+k-1] | [B,C,T'+k-1]
Tensor deconv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias);

ConvGrads deconv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& grad_out,
                            bool need_input_grad = true);

struct PoolResult {
  Tensor output;
  // Absolute time position of each window's maximum, first occurrence on ties.
  std::vector<std::size_t> indices;
};

// Non-overlapping max pooling; a trailing remainder shorter than `window` is dropped.
PoolResult maxpool1d(const Tensor& x, std::size_t window);
Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& indices,
                          const Shape& input_shape);

// Repeat each time step `factor` times.
Tensor upsample1d(const Tensor& x, std::size_t factor);
Tensor upsample1d_backward(const Tensor& grad_out, std::size_t factor);

// W x + b. x: [n] | [B,n], weights: [m,n], bias: [m].
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out,
                          bool need_input_grad = true);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor sigmoid(const Tensor& x);
// Takes the sigmoid output, not its input.
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

// Row-wise softmax over the last axis with max subtraction; last dim must be >= 2.
Tensor softmax(const Tensor& logits);
Tensor softmax_backward(const Tensor& y, const Tensor& grad_out);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  static BatchNormState identity(std::size_t features);
};

struct BatchNormCache {
  Mode mode = Mode::eval;
  Tensor normalized;  // x-hat, same shape as the input
  std::vector<double> inv_std;
};

// Per-feature normalization over batch (and time, for rank-3 input).
// x: [B,F] | [B,F,L]. Train mode needs at least two values per feature and a
// batch of at least two; running stats move by EMA only when `update_running`.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 Mode mode, BatchNormCache* cache = nullptr, bool update_running = true);

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma,
                                  const BatchNormCache& cache);

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 0 or 1/keep_prob per element; empty in eval mode
};

// Inverted dropout: kept elements are scaled by 1/keep_prob, eval is identity.
DropoutResult dropout(const Tensor& x, double keep_prob, Rng& rng, Mode mode);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

}  // namespace drssl::nn
