#pragma once

// Finite-difference sweeps shared by the unit suites and the acceptance runner.

#include <algorithm>
#include <array>
#include <functional>
#include <vector>

#include "drssl/losses/losses.hpp"
#include "drssl/nn/gradcheck.hpp"
#include "drssl/nn/layers.hpp"
#include "helpers.hpp"

namespace testutil {

namespace gc_detail {

using namespace drssl::nn;

inline double check(std::vector<Param*> params, const std::function<double()>& loss,
                    const std::function<void()>& backprop, std::uint64_t seed) {
  GradCheckOptions o;
  o.seed = seed;
  return grad_check(loss, backprop, params, o).max_rel_error;
}

}  // namespace gc_detail

// Worst relative error over every layer kernel on `trials` random shapes.
// Each layer output is contracted with a random tensor R, so the checked loss
// is dot(layer(x), R) and the backward pass is fed R.
inline double worst_layer_error(std::uint64_t seed, int trials) {
  using namespace drssl::nn;
  using gc_detail::check;
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t ts = static_cast<std::uint64_t>(trial);
    const std::size_t C = 1 + rng.index(3), F = 1 + rng.index(3), k = 1 + rng.index(4);
    const std::size_t T = k + 2 + rng.index(6), B = 2 + rng.index(2);

    {  // conv1d
      Param x("x", random_tensor({B, C, T}, rng)), w("w", random_tensor({F, C, k}, rng)),
          b("b", random_tensor({F}, rng));
      const Tensor R = random_tensor({B, F, T - k + 1}, rng);
      worst = std::max(worst, check({&x, &w, &b}, [&] { return dot(conv1d(x.value, w.value, b.value), R); },
                                    [&] {
                                      auto g = conv1d_backward(x.value, w.value, R);
                                      x.accumulate(g.input);
                                      w.accumulate(g.kernels);
                                      b.accumulate(g.bias);
                                    },
                                    ts));
    }
    {  // deconv1d
      Param x("x", random_tensor({B, F, T}, rng)), w("w", random_tensor({F, C, k}, rng)),
          b("b", random_tensor({C}, rng));
      const Tensor R = random_tensor({B, C, T + k - 1}, rng);
      worst = std::max(worst, check({&x, &w, &b}, [&] { return dot(deconv1d(x.value, w.value, b.value), R); },
                                    [&] {
                                      auto g = deconv1d_backward(x.value, w.value, R);
                                      x.accumulate(g.input);
                                      w.accumulate(g.kernels);
                                      b.accumulate(g.bias);
                                    },
                                    ts));
    }
    {  // maxpool1d
      const std::size_t pw = 1 + rng.index(3);
      Param x("x", random_tensor({B, F, T + pw}, rng));
      const Tensor R = random_tensor(maxpool1d(x.value, pw).output.shape(), rng);
      worst = std::max(worst, check({&x}, [&] { return dot(maxpool1d(x.value, pw).output, R); },
                                    [&] {
                                      auto r = maxpool1d(x.value, pw);
                                      x.accumulate(maxpool1d_backward(R, r.indices, x.value.shape()));
                                    },
                                    ts));
    }
    {  // upsample1d
      const std::size_t f = 1 + rng.index(3);
      Param x("x", random_tensor({B, F, T}, rng));
      const Tensor R = random_tensor({B, F, T * f}, rng);
      worst = std::max(worst, check({&x}, [&] { return dot(upsample1d(x.value, f), R); },
                                    [&] { x.accumulate(upsample1d_backward(R, f)); }, ts));
    }
    {  // dense
      const std::size_t n = 1 + rng.index(6), m = 1 + rng.index(6);
      Param x("x", random_tensor({B, n}, rng)), w("w", random_tensor({m, n}, rng)), b("b", random_tensor({m}, rng));
      const Tensor R = random_tensor({B, m}, rng);
      worst = std::max(worst, check({&x, &w, &b}, [&] { return dot(dense(x.value, w.value, b.value), R); },
                                    [&] {
                                      auto g = dense_backward(x.value, w.value, R);
                                      x.accumulate(g.input);
                                      w.accumulate(g.weights);
                                      b.accumulate(g.bias);
                                    },
                                    ts));
    }
    {  // relu, sigmoid, softmax
      Param x("x", random_tensor({B, F + 1}, rng));
      const Tensor R = random_tensor({B, F + 1}, rng);
      worst = std::max(worst, check({&x}, [&] { return dot(relu(x.value), R); },
                                    [&] { x.accumulate(relu_backward(x.value, R)); }, ts));
      worst = std::max(worst, check({&x}, [&] { return dot(sigmoid(x.value), R); },
                                    [&] { x.accumulate(sigmoid_backward(sigmoid(x.value), R)); }, ts));
      worst = std::max(worst, check({&x}, [&] { return dot(softmax(x.value), R); },
                                    [&] { x.accumulate(softmax_backward(softmax(x.value), R)); }, ts));
    }
    {  // batchnorm, rank 3 and rank 2, train mode without running updates
      Param x("x", random_tensor({B + 1, F, T}, rng, 2.0)), g("g", random_tensor({F}, rng)),
          be("be", random_tensor({F}, rng));
      const Tensor R = random_tensor({B + 1, F, T}, rng);
      auto state = BatchNormState::identity(F);
      auto bn_check = [&](Param& in, const Tensor& r) {
        return check({&in, &g, &be},
                     [&] { return dot(batchnorm(in.value, g.value, be.value, state, Mode::train, nullptr, false), r); },
                     [&] {
                       BatchNormCache cache;
                       batchnorm(in.value, g.value, be.value, state, Mode::train, &cache, false);
                       auto gr = batchnorm_backward(r, g.value, cache);
                       in.accumulate(gr.input);
                       g.accumulate(gr.gamma);
                       be.accumulate(gr.beta);
                     },
                     ts);
      };
      worst = std::max(worst, bn_check(x, R));
      Param x2("x2", random_tensor({B + 2, F}, rng));
      const Tensor R2 = random_tensor({B + 2, F}, rng);
      worst = std::max(worst, bn_check(x2, R2));
    }
    {  // dropout with a replayed mask
      Param x("x", random_tensor({B, F, T}, rng));
      const Tensor R = random_tensor({B, F, T}, rng);
      const Rng mask_rng = rng.derive(ts);
      worst = std::max(worst, check({&x},
                                    [&] {
                                      Rng r = mask_rng;
                                      return dot(dropout(x.value, 0.6, r, Mode::train).output, R);
                                    },
                                    [&] {
                                      Rng r = mask_rng;
                                      auto d = dropout(x.value, 0.6, r, Mode::train);
                                      x.accumulate(dropout_backward(R, d.mask));
                                    },
                                    ts));
    }
  }
  return worst;
}

// Tiny model with one labeled and one unlabeled batch of 4.
struct LossFixture {
  drssl::model::ModelParams params;
  drssl::nn::Tensor x_l, x_u;
  std::vector<int> labels;
  // train-mode statistics without touching the running averages, no dropout
  drssl::model::ForwardOptions opts{drssl::model::Mode::train, nullptr, false};

  explicit LossFixture(std::uint64_t seed) {
    auto c = tiny_config();
    c.seed = seed;
    params = drssl::model::init_params(c);
    drssl::nn::Rng rng(seed + 100);
    x_l = random_tensor({4, 2, 16}, rng);
    x_u = random_tensor({4, 2, 16}, rng, 1.5);
    for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.index(2)));
    // random biases so no relu sits exactly on its kink
    for (drssl::nn::Param* p : params.all())
      if (p->value.rank() == 1 && p->name.find("bn") == std::string::npos)
        for (auto& v : p->value.data()) v = rng.normal(0.0, 0.1);
  }

  using Term = std::function<double(const drssl::losses::Encoded&, double, drssl::nn::Tensor*)>;

  // Checks every parameter coordinate of the model against the term.
  double check(const Term& term) {
    using namespace drssl::losses;
    std::vector<drssl::nn::Param*> all = params.all();
    auto loss = [&] {
      const Encoded e = encode_batches(x_l, &x_u, params, opts);
      return term(e, 0.0, nullptr);
    };
    auto backprop = [&] {
      const Encoded e = encode_batches(x_l, &x_u, params, opts);
      drssl::nn::Tensor gz(e.z.shape());
      term(e, 1.0, &gz);
      backprop_encoder(e, gz, params);
    };
    drssl::nn::GradCheckOptions o;
    o.max_coords = 100000;
    return drssl::nn::grad_check(loss, backprop, all, o).max_rel_error;
  }

  // Adversarial, reconstruction, consistency, prediction.
  std::array<double, 4> composite_errors() {
    using namespace drssl::losses;
    return {check([&](const Encoded& e, double s, drssl::nn::Tensor* gz) { return adversarial_term(e, params, s, gz); }),
            check([&](const Encoded& e, double s, drssl::nn::Tensor* gz) {
              return reconstruction_term(x_l, x_u, e, params, s, gz);
            }),
            check([&](const Encoded& e, double s, drssl::nn::Tensor* gz) {
              return consistency_term(e, params, opts, s, gz);
            }),
            check([&](const Encoded& e, double s, drssl::nn::Tensor* gz) {
              return prediction_term(e, labels, params, s, gz);
            })};
  }
};

}  // namespace testutil
