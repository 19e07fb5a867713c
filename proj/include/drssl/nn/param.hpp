#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "drssl/nn/tensor.hpp"

namespace drssl::nn {

// Learnable tensor with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  std::uint64_t step_count = 0;

  Param() = default;
  Param(std::string name, Tensor initial);

  void zero_grad() { grad.zero(); }
  // grad += g (shapes must match).
  void accumulate(const Tensor& g);
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam descent step on param.grad; zeroes grad afterwards.
// Throws NumericError naming the parameter if the gradient is not finite.
void adam_step(Param& param, const AdamOptions& options);

void zero_grads(std::span<Param* const> params);

}  // namespace drssl::nn
