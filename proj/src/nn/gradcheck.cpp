#include "drssl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "drssl/error.hpp"
#include "drssl/nn/rng.hpp"

namespace drssl::nn {
namespace {

double finite_loss(const std::function<double()>& loss) {
  const double v = loss();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss evaluated to a non-finite value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<double()>& loss,
                           const std::function<void()>& backprop, std::span<Param* const> params,
                           const GradCheckOptions& options) {
  zero_grads(params);
  finite_loss(loss);
  backprop();

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) coords.emplace_back(p, i);
  }
  const std::size_t budget = std::max<std::size_t>(options.max_coords, 200);
  if (coords.size() > budget) {
    Rng rng(options.seed);
    rng.shuffle(coords);
    coords.resize(budget);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  for (auto [p, i] : coords) {
    Param& param = *params[p];
    const double saved = param.value[i];
    param.value[i] = saved + options.h;
    const double up = finite_loss(loss);
    param.value[i] = saved - options.h;
    const double down = finite_loss(loss);
    param.value[i] = saved;

    const double numeric = (up - down) / (2.0 * options.h);
    const double analytic = param.grad[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), options.abs_floor});
    const double rel = std::abs(numeric - analytic) / denom;
    ++result.coords_checked;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = param.name;
      result.worst_index = i;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace drssl::nn
