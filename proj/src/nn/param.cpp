#include "drssl/nn/param.hpp"

#include <cmath>

#include "drssl/error.hpp"

namespace drssl::nn {

Param::Param(std::string name_, Tensor initial)
    : name(std::move(name_)),
      value(std::move(initial)),
      grad(value.shape()),
      m(value.shape()),
      v(value.shape()) {}

void Param::accumulate(const Tensor& g) {
  if (g.size() != grad.size()) {
    throw ShapeError("gradient for " + name + " has shape " + shape_string(g.shape()) +
                     ", expected " + shape_string(grad.shape()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

void adam_step(Param& p, const AdamOptions& o) {
  if (!p.grad.all_finite()) throw NumericError("non-finite gradient for parameter " + p.name);
  p.step_count += 1;
  const double t = static_cast<double>(p.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    p.m[i] = o.beta1 * p.m[i] + (1.0 - o.beta1) * g;
    p.v[i] = o.beta2 * p.v[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = p.m[i] / c1;
    const double v_hat = p.v[i] / c2;
    p.value[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
  }
  p.grad.zero();
}

void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace drssl::nn
