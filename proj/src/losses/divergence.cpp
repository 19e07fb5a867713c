#include "drssl/losses/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drssl/error.hpp"
#include "drssl/losses/losses.hpp"
#include "drssl/nn/param.hpp"

namespace drssl::losses {
namespace {

void require_same_support(const DiscreteDist& p, const DiscreteDist& q, const char* what) {
  if (p.size() != q.size()) {
    throw ShapeError(std::string(what) + ": support sizes differ (" + std::to_string(p.size()) +
                     " vs " + std::to_string(q.size()) + ")");
  }
}

double kl(std::span<const double> p, std::span<const double> m) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / m[i]);
  }
  return s;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

DiscreteDist::DiscreteDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ConfigError("DiscreteDist: empty support");
  for (double v : probs_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("DiscreteDist: negative or non-finite mass");
  }
  const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("DiscreteDist: masses sum to " + std::to_string(total));
  }
}

double jsd(const DiscreteDist& p, const DiscreteDist& q) {
  require_same_support(p, q, "jsd");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl(p.probs(), m) + 0.5 * kl(q.probs(), m);
}

double expected_adversarial(const DiscreteDist& p, const DiscreteDist& q,
                            std::span<const double> disc) {
  require_same_support(p, q, "expected_adversarial");
  if (disc.size() != p.size()) throw ShapeError("expected_adversarial: discriminator size");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::clamp(disc[i], kProbClamp, 1.0 - kProbClamp);
    if (p[i] > 0.0) s += p[i] * std::log(d);
    if (q[i] > 0.0) s += q[i] * std::log(1.0 - d);
  }
  return s;
}

double adversarial_max_oracle(const DiscreteDist& p, const DiscreteDist& q) {
  require_same_support(p, q, "adversarial_max_oracle");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double total = p[i] + q[i];
    if (total == 0.0) continue;
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / total);
    if (q[i] > 0.0) s += q[i] * std::log(q[i] / total);
  }
  return s;
}

TabularResult train_tabular_discriminator(const DiscreteDist& p, const DiscreteDist& q,
                                          const TabularOptions& options) {
  require_same_support(p, q, "train_tabular_discriminator");
  const std::size_t k = p.size();
  nn::Param logits("tabular.logits", nn::Tensor({k}));
  const double decay =
      options.steps > 1 ? std::log(options.lr_end / options.lr_start) / static_cast<double>(options.steps - 1) : 0.0;
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (std::size_t i = 0; i < k; ++i) {
      const double d = sigmoid(logits.value[i]);
      if (d <= kProbClamp || d >= 1.0 - kProbClamp) continue;
      // d/dlogit of p log D + q log(1-D), negated for an ascent step
      logits.grad[i] = -(p[i] * (1.0 - d) - q[i] * d);
    }
    nn::AdamOptions adam;
    adam.lr = options.lr_start * std::exp(decay * static_cast<double>(step));
    nn::adam_step(logits, adam);
  }
  TabularResult r;
  r.disc.resize(k);
  for (std::size_t i = 0; i < k; ++i) r.disc[i] = sigmoid(logits.value[i]);
  r.l_a = expected_adversarial(p, q, r.disc);
  return r;
}

}  // namespace drssl::losses
