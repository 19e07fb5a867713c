#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "drssl/nn/param.hpp"

namespace drssl::nn {

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates checked per call; when the parameters hold more, a random
  // subsample of this size is drawn (never fewer than 200).
  std::size_t max_coords = 400;
  // Denominator floor for the relative error, so two near-zero gradients
  // do not register as a 100% mismatch.
  double abs_floor = 1e-5;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares backprop gradients with central finite differences.
// `loss` evaluates the scalar loss at the current parameter values; `backprop`
// must leave d(loss)/d(param) in each param.grad (it is called once, after the
// grads have been zeroed). Throws NumericError if any loss evaluation is not finite.
GradCheckResult grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backprop, std::span<Param* const> params,
                           const GradCheckOptions& options = {});

}  // namespace drssl::nn
