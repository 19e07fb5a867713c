#include <doctest.h>

#include <cmath>
#include <set>

#include "drssl/error.hpp"
#include "drssl/model/checkpoint.hpp"
#include "drssl/model/model.hpp"
#include "helpers.hpp"

using namespace drssl;
using namespace drssl::model;
using testutil::random_tensor;
using testutil::tiny_config;

TEST_SUITE("model") {
  TEST_CASE("init is a pure function of the seed") {
    ModelConfig c = tiny_config();
    c.seed = 5;
    const ModelParams a = init_params(c), b = init_params(c);
    for (Part p : kAllParts) CHECK(fingerprint(a, p) == fingerprint(b, p));
    c.seed = 6;
    const ModelParams other = init_params(c);
    CHECK(fingerprint(a, Part::encoder) != fingerprint(other, Part::encoder));
  }

  TEST_CASE("init: zero biases, unit gamma, glorot range and centred weights") {
    ModelConfig c;
    const ModelParams p = init_params(c);
    CHECK(p.enc.conv_b.value == Tensor({c.conv_filters}));
    CHECK(p.enc.fc_b.value == Tensor({c.latent_dim}));
    CHECK(p.pred.b.value == Tensor({c.n_classes}));
    CHECK(p.disc.b1.value == Tensor({c.disc_hidden}));
    CHECK(p.dec_u.deconv_b.value == Tensor({c.channels}));
    CHECK(p.enc.bn_gamma.value == Tensor({c.conv_filters}, 1.0));
    CHECK(p.enc.bn_beta.value == Tensor({c.conv_filters}));

    auto check_glorot = [](const nn::Param& w, double fan_in, double fan_out) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      double mean = 0.0;
      for (double v : w.value.data()) {
        CHECK(std::abs(v) <= limit);
        mean += v;
      }
      const double n = static_cast<double>(w.value.size());
      mean /= n;
      const double sigma = limit / std::sqrt(3.0);
      CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(n));
    };
    check_glorot(p.enc.fc_w, static_cast<double>(c.flat_dim()), static_cast<double>(c.latent_dim));
    check_glorot(p.dec_l.fc_w, static_cast<double>(c.latent_dim), static_cast<double>(c.flat_dim()));
    check_glorot(p.disc.w1, static_cast<double>(c.latent_dim), static_cast<double>(c.disc_hidden));
    check_glorot(p.enc.conv_w, static_cast<double>(c.channels * c.kernel_len),
                 static_cast<double>(c.conv_filters * c.kernel_len));
  }

  TEST_CASE("parameter sets partition the model") {
    ModelParams p = init_params(tiny_config());
    std::set<std::string> names;
    std::size_t total = 0;
    for (Part part : kAllParts) {
      for (const nn::Param* q : p.part(part)) names.insert(q->name);
      total += p.part(part).size();
    }
    CHECK(total == p.all().size());
    CHECK(names.size() == total);
  }

  TEST_CASE("shape laws") {
    for (const auto& [T, k, pw] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
             {16, 3, 2}, {17, 4, 3}, {32, 9, 4}, {20, 1, 1}, {12, 5, 8}}) {
      ModelConfig c = tiny_config();
      c.window_len = T;
      c.kernel_len = k;
      c.pool_w = pw;
      ModelParams p = init_params(c);
      nn::Rng rng(T * 31 + k);
      const Tensor x = random_tensor({3, c.channels, T}, rng);
      const Tensor z = encode(x, p);
      CHECK(z.shape() == nn::Shape{3, c.latent_dim});
      CHECK(decode(z, Domain::labeled, p).shape() == x.shape());
      CHECK(decode(z, Domain::unlabeled, p).shape() == x.shape());
      CHECK(predict_logits(z, p).shape() == nn::Shape{3, c.n_classes});
      CHECK(discriminate(z, p).shape() == nn::Shape{3});
    }
  }

  TEST_CASE("heads") {
    ModelParams p = init_params(tiny_config());
    nn::Rng rng(1);
    const Tensor z = random_tensor({5, 4}, rng, 3.0);
    const Tensor probs = predict_label(z, p);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(probs.at(i, 0) + probs.at(i, 1) - 1.0) < 1e-12);
    const Tensor d = discriminate(z, p);
    for (double v : d.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    for (nn::Param* q : p.part(Part::discriminator)) q->value.zero();
    const Tensor half = discriminate(z, p);
    for (double v : half.data()) CHECK(v == 0.5);

    const Tensor xl = decode(z, Domain::labeled, p), xu = decode(z, Domain::unlabeled, p);
    CHECK(max_abs_diff(xl, xu) > 1e-6);
  }

  TEST_CASE("classify is the argmax of the predictor") {
    ModelParams p = init_params(tiny_config());
    nn::Rng rng(2);
    const Tensor x = random_tensor({6, 2, 16}, rng);
    const auto labels = classify(p, x);
    const Tensor probs = predict_label(encode(x, p), p);
    for (std::size_t i = 0; i < 6; ++i) CHECK(labels[i] == (probs.at(i, 1) > probs.at(i, 0) ? 1 : 0));
  }

  TEST_CASE("encode modes") {
    ModelConfig c = tiny_config();
    c.keep_prob = 0.5;
    ModelParams p = init_params(c);
    nn::Rng rng(3);
    const Tensor x = random_tensor({4, 2, 16}, rng);
    const Tensor e1 = encode(x, p), e2 = encode(x, p);
    CHECK(e1 == e2);

    const Tensor before = p.enc.bn.running_mean;
    nn::Rng drop(9);
    ForwardOptions train{Mode::train, &drop, false};
    encode(x, p, train);
    CHECK(p.enc.bn.running_mean == before);
    train.update_running_stats = true;
    const Tensor t1 = encode(x, p, train);
    CHECK(p.enc.bn.running_mean != before);
    const Tensor t2 = encode(x, p, train);
    CHECK(t1 != t2);  // fresh dropout mask
  }

  TEST_CASE("encode input contract") {
    ModelParams p = init_params(tiny_config());
    CHECK_THROWS_AS(encode(Tensor({4, 3, 16}), p), ShapeError);
    CHECK_THROWS_AS(encode(Tensor({4, 2, 15}), p), ShapeError);
    Tensor bad({2, 2, 16});
    bad[5] = std::nan("");
    CHECK_THROWS_AS(encode(bad, p), NumericError);
    CHECK_THROWS_AS(decode(Tensor({2, 3}), Domain::labeled, p), ShapeError);
  }

  TEST_CASE("config validation") {
    ModelConfig c = tiny_config();
    CHECK_NOTHROW(c.validate());
    c.kernel_len = 17;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.pool_w = 15;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.keep_prob = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.n_classes = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.latent_dim = 0;
    CHECK_THROWS_AS(init_params(c), ConfigError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bitwise, running stats and extras included") {
    ModelConfig c = tiny_config();
    c.seed = 17;
    ModelParams p = init_params(c);
    nn::Rng rng(4);
    nn::Rng drop(5);
    encode(random_tensor({4, 2, 16}, rng), p, ForwardOptions{Mode::train, &drop, true});
    const std::map<std::string, Tensor> extras{{"input.mean", Tensor::vector({0.25, -1})}};

    const auto bytes = serialize_checkpoint(p, extras);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.params.config == c);
    CHECK(back.extras == extras);
    CHECK(back.params.enc.bn.running_mean == p.enc.bn.running_mean);
    for (Part part : kAllParts) CHECK(fingerprint(back.params, part) == fingerprint(p, part));
    CHECK(serialize_checkpoint(back.params, back.extras) == bytes);

    const auto dir = testutil::temp_dir("ckpt");
    const std::string path = (dir / "m.bin").string();
    save_checkpoint(path, p, extras);
    const Checkpoint loaded = load_checkpoint(path);
    const Tensor x = random_tensor({3, 2, 16}, rng);
    CHECK(encode(x, loaded.params) == encode(x, p));
  }

  TEST_CASE("corrupt inputs fail closed") {
    const auto bytes = serialize_checkpoint(init_params(tiny_config()));
    auto code_of = [](std::vector<char> b) {
      try {
        deserialize_checkpoint(std::move(b));
      } catch (const DataError& e) {
        return e.code();
      }
      FAIL("accepted a corrupt checkpoint");
      return DataErrorCode::io_error;
    };
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(code_of(bad_magic) == DataErrorCode::corrupt_header);
    auto bad_version = bytes;
    bad_version[8] = 9;
    CHECK(code_of(bad_version) == DataErrorCode::corrupt_header);
    CHECK(code_of(std::vector<char>(bytes.begin(), bytes.begin() + 5)) == DataErrorCode::corrupt_header);
    CHECK(code_of(std::vector<char>(bytes.begin(), bytes.end() - 3)) == DataErrorCode::truncated_payload);
    auto huge = bytes;
    huge[12 + 7] = 0x40;  // channels u64 high byte
    CHECK(code_of(huge) == DataErrorCode::dimension_overflow);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/m.bin"), DataError);
  }
}
