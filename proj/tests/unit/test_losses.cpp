#include <doctest.h>

#include <cmath>
#include <functional>

#include "drssl/error.hpp"
#include "drssl/losses/divergence.hpp"
#include "drssl/losses/losses.hpp"
#include "drssl/nn/gradcheck.hpp"
#include "gradchecks.hpp"
#include "helpers.hpp"

using namespace drssl;
using namespace drssl::losses;
using model::ForwardOptions;
using model::Mode;
using testutil::random_tensor;
using testutil::tiny_config;

namespace {

using Fixture = testutil::LossFixture;

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("head formulas") {
    CHECK(adversarial_from_probs(Tensor::vector({0.5, 0.5}), Tensor::vector({0.5})) ==
          doctest::Approx(-std::log(4.0)).epsilon(1e-15));
    CHECK(adversarial_from_probs(Tensor::vector({0.0}), Tensor::vector({1.0})) ==
          doctest::Approx(2.0 * std::log(1e-7)).epsilon(1e-8));
    CHECK(adversarial_from_probs(Tensor::vector({1.0}), Tensor::vector({0.0})) ==
          doctest::Approx(2.0 * std::log1p(-1e-7)).epsilon(1e-9));

    const std::vector<int> y{0};
    CHECK(cross_entropy(Tensor::from_rows({{0.0, std::log(3.0)}}), y) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
    const std::vector<int> y3{2, 0};
    CHECK(cross_entropy(Tensor::from_rows({{1, 1, 1}, {5, 5, 5}}), y3) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-14));
    const Tensor g = cross_entropy_grad(Tensor::from_rows({{1, 1, 1}, {5, 5, 5}}), y3);
    CHECK(g.at(0, 2) == doctest::Approx((1.0 / 3 - 1) / 2));
    CHECK(g.at(0, 0) == doctest::Approx(1.0 / 6));

    CHECK(mean_squared_error(Tensor::vector({1, 2}), Tensor::vector({1, 4})) == 2.0);
    CHECK(mean_squared_error(Tensor({3, 2}), Tensor({3, 2})) == 0.0);
  }

  TEST_CASE("input contracts") {
    auto p = model::init_params(tiny_config());
    nn::Rng rng(1);
    const Tensor x = random_tensor({3, 2, 16}, rng);
    const std::vector<int> two{0, 1};
    CHECK_THROWS_AS(prediction_loss(x, two, p), ShapeError);
    const std::vector<int> out_of_range{0, 1, 2};
    CHECK_THROWS_AS(prediction_loss(x, out_of_range, p), ConfigError);
  }

  TEST_CASE("eval-mode terms equal the plain definitions") {
    Fixture f(3);
    const ForwardOptions eval{Mode::eval, nullptr, false};
    const Encoded e = encode_batches(f.x_l, &f.x_u, f.params, eval);
    const Tensor zl = model::encode(f.x_l, f.params), zu = model::encode(f.x_u, f.params);
    CHECK(e.z_l() == zl);
    CHECK(e.z_u() == zu);
    CHECK(adversarial_term(e, f.params, 0.0, nullptr) == doctest::Approx(adversarial_loss(zl, zu, f.params)).epsilon(1e-14));
    CHECK(reconstruction_term(f.x_l, f.x_u, e, f.params, 0.0, nullptr) ==
          doctest::Approx(reconstruction_loss(f.x_l, f.x_u, f.params)).epsilon(1e-14));
    CHECK(consistency_term(e, f.params, eval, 0.0, nullptr) ==
          doctest::Approx(consistency_loss(f.x_l, f.x_u, f.params)).epsilon(1e-14));
    CHECK(prediction_term(e, f.labels, f.params, 0.0, nullptr) ==
          doctest::Approx(prediction_loss(f.x_l, f.labels, f.params)).epsilon(1e-14));
  }

  TEST_CASE("reconstruction loss by hand") {
    Fixture f(4);
    const Tensor xl_hat = model::decode(model::encode(f.x_l, f.params), model::Domain::labeled, f.params);
    const Tensor xu_hat = model::decode(model::encode(f.x_u, f.params), model::Domain::unlabeled, f.params);
    double sl = 0.0, su = 0.0;
    for (std::size_t i = 0; i < f.x_l.size(); ++i) sl += (f.x_l[i] - xl_hat[i]) * (f.x_l[i] - xl_hat[i]);
    for (std::size_t i = 0; i < f.x_u.size(); ++i) su += (f.x_u[i] - xu_hat[i]) * (f.x_u[i] - xu_hat[i]);
    const double expected = sl / static_cast<double>(f.x_l.size()) + su / static_cast<double>(f.x_u.size());
    CHECK(reconstruction_loss(f.x_l, f.x_u, f.params) == doctest::Approx(expected).epsilon(1e-13));
  }

  TEST_CASE("composite losses pass finite-difference checks on the tiny config") {
    for (std::uint64_t seed : {1, 2, 3}) {
      Fixture f(seed);
      CAPTURE(seed);
      for (double err : f.composite_errors()) CHECK(err < 1e-4);
    }
  }

  TEST_CASE("terms touch only their own heads") {
    Fixture f(5);
    const Encoded e = encode_batches(f.x_l, &f.x_u, f.params, f.opts);
    auto touched = [&](model::Part part) {
      for (const nn::Param* p : f.params.part(part))
        for (double g : p->grad.data())
          if (g != 0.0) return true;
      return false;
    };
    auto reset = [&] { nn::zero_grads(f.params.all()); };

    reset();
    adversarial_term(e, f.params, 1.0, nullptr);
    CHECK(touched(model::Part::discriminator));
    CHECK_FALSE(touched(model::Part::predictor));
    CHECK_FALSE(touched(model::Part::decoder_l));
    CHECK_FALSE(touched(model::Part::encoder));

    reset();
    prediction_term(e, f.labels, f.params, 1.0, nullptr);
    CHECK(touched(model::Part::predictor));
    CHECK_FALSE(touched(model::Part::discriminator));
    CHECK_FALSE(touched(model::Part::encoder));

    reset();
    reconstruction_term(f.x_l, f.x_u, e, f.params, 1.0, nullptr);
    CHECK(touched(model::Part::decoder_l));
    CHECK(touched(model::Part::decoder_u));
    CHECK_FALSE(touched(model::Part::predictor));
    CHECK_FALSE(touched(model::Part::encoder));
  }

  TEST_CASE("a seed of -1 accumulates the negated gradient") {
    Fixture f(6);
    const Encoded e = encode_batches(f.x_l, &f.x_u, f.params, f.opts);
    nn::zero_grads(f.params.all());
    adversarial_term(e, f.params, 1.0, nullptr);
    const Tensor pos = f.params.disc.w1.grad;
    nn::zero_grads(f.params.all());
    adversarial_term(e, f.params, -1.0, nullptr);
    for (std::size_t i = 0; i < pos.size(); ++i) CHECK(f.params.disc.w1.grad[i] == -pos[i]);
  }

  TEST_CASE("loss invariants over random draws") {
    nn::Rng rng(99);
    const double floor_a = -2.0 * std::log(1e7);
    for (int draw = 0; draw < 200; ++draw) {
      auto c = tiny_config();
      c.seed = rng.index(1u << 30);
      auto p = model::init_params(c);
      const double scale = std::exp(rng.uniform(-3.0, 3.0));
      for (nn::Param* q : p.all())
        for (auto& v : q->value.data()) v *= scale;
      const Tensor xl = random_tensor({4, 2, 16}, rng, 3.0), xu = random_tensor({4, 2, 16}, rng, 3.0);
      std::vector<int> y(4);
      for (auto& v : y) v = static_cast<int>(rng.index(2));
      LossReport r;
      const Encoded e = encode_batches(xl, &xu, p, ForwardOptions{Mode::train, nullptr, false});
      r.l_a = adversarial_term(e, p, 0.0, nullptr);
      r.l_rec = reconstruction_term(xl, xu, e, p, 0.0, nullptr);
      r.l_con = consistency_term(e, p, ForwardOptions{Mode::train, nullptr, false}, 0.0, nullptr);
      r.l_y = prediction_term(e, y, p, 0.0, nullptr);
      r.finalize();
      CHECK(r.l_rec >= 0.0);
      CHECK(r.l_con >= 0.0);
      CHECK(r.l_y >= 0.0);
      CHECK(r.l_a >= floor_a);
      CHECK(r.l_a <= 1e-6);
      CHECK(r.l_total == r.l_a + r.l_rec + r.l_con + r.l_y);
    }
  }
}

TEST_SUITE("divergence") {
  TEST_CASE("jsd examples") {
    const DiscreteDist p({0.5, 0.5}), q({1.0, 0.0});
    CHECK(jsd(p, p) == 0.0);
    CHECK(jsd(p, q) == doctest::Approx(0.75 * std::log(4.0 / 3.0)).epsilon(1e-14));
    CHECK(jsd(p, q) == doctest::Approx(jsd(q, p)).epsilon(1e-15));
    CHECK(jsd(DiscreteDist({1, 0}), DiscreteDist({0, 1})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(adversarial_max_oracle(p, p) == doctest::Approx(-std::log(4.0)).epsilon(1e-15));
    CHECK(adversarial_max_oracle(DiscreteDist({1, 0}), DiscreteDist({0, 1})) == doctest::Approx(0.0));
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(DiscreteDist({}), ConfigError);
    CHECK_THROWS_AS(DiscreteDist({0.5, 0.6}), ConfigError);
    CHECK_THROWS_AS(DiscreteDist({1.5, -0.5}), ConfigError);
    CHECK_THROWS_AS(jsd(DiscreteDist({1}), DiscreteDist({0.5, 0.5})), ShapeError);
  }

  TEST_CASE("oracle identity and tabular discriminator") {
    nn::Rng rng(7);
    auto random_dist = [&](std::size_t n) {
      std::vector<double> v(n);
      double total = 0.0;
      for (auto& x : v) {
        x = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
        total += x;
      }
      if (total == 0.0) {
        v[0] = 1.0;
        total = 1.0;
      }
      for (auto& x : v) x /= total;
      return DiscreteDist(v);
    };
    for (int i = 0; i < 100; ++i) {
      const std::size_t n = 1 + rng.index(8);
      const DiscreteDist p = random_dist(n), q = random_dist(n);
      const double oracle = adversarial_max_oracle(p, q);
      CHECK(std::abs(oracle - (-std::log(4.0) + 2.0 * jsd(p, q))) < 1e-12);
      CHECK(jsd(p, q) >= 0.0);
      CHECK(jsd(p, q) <= std::log(2.0) + 1e-15);
      if (i % 10 == 0) {
        const auto t = train_tabular_discriminator(p, q);
        CHECK(t.l_a <= oracle + 1e-9);
        CHECK(oracle - t.l_a < 1e-3);
      }
      std::vector<double> half(n, 0.5);
      CHECK(expected_adversarial(p, q, half) <= oracle + 1e-12);
    }
  }
}
