#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace drssl::losses {

// Probability vector over a finite support. Construction validates
// nonnegativity and normalization (within 1e-12).
class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<double> probs);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

// Jensen-Shannon divergence in nats, 0 log 0 := 0.
double jsd(const DiscreteDist& p, const DiscreteDist& q);

// Expected adversarial loss E_p[log D] + E_q[log(1 - D)] for a per-atom
// discriminator output `disc` (clamped like the training loss).
double expected_adversarial(const DiscreteDist& p, const DiscreteDist& q,
                            std::span<const double> disc);

// Expected adversarial loss under the optimal discriminator D*(z) = p/(p+q),
// evaluated without clamping and with 0 log 0 := 0.
double adversarial_max_oracle(const DiscreteDist& p, const DiscreteDist& q);

struct TabularOptions {
  std::size_t steps = 20000;
  double lr_start = 0.1;
  double lr_end = 1e-4;
};

struct TabularResult {
  std::vector<double> disc;  // trained D per atom
  double l_a = 0.0;          // expected_adversarial at the trained D
};

// Gradient-ascent training (Adam on one logit per atom) of a discriminator
// that can take any value on each support point.
TabularResult train_tabular_discriminator(const DiscreteDist& p, const DiscreteDist& q,
                                          const TabularOptions& options = {});

}  // namespace drssl::losses
