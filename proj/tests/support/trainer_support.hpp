#pragma once

// Toy pools and an independent restatement of the gated training step,
// shared by the trainer suite and the acceptance runner.

#include <map>
#include <set>

#include "drssl/losses/losses.hpp"
#include "drssl/train/trainer.hpp"
#include "helpers.hpp"

namespace testutil {

namespace data = drssl::data;
namespace model = drssl::model;
namespace nn = drssl::nn;
namespace losses = drssl::losses;
using drssl::model::Part;
using drssl::nn::Tensor;
using drssl::train::StepRecord;
using drssl::train::TrainConfig;

// Two-channel windows; class m sits at level m - 1 on channel 0 (linearly separable).
inline data::Dataset toy_pool(std::size_t per_class, std::size_t classes, std::int32_t subject, double shift,
                       data::Pool pool, nn::Rng& rng) {
  data::Dataset ds{2, 16, classes, {}};
  for (std::size_t m = 0; m < classes; ++m) {
    for (std::size_t i = 0; i < per_class; ++i) {
      data::SensorWindow w;
      w.subject_id = subject;
      w.s = pool;
      w.x = random_tensor({2, 16}, rng, 0.5);
      for (std::size_t t = 0; t < 16; ++t) {
        w.x.at(0, t) += static_cast<double>(m) - 1.0 + shift;
        w.x.at(1, t) += shift;
      }
      if (pool == data::Pool::labeled) w.label = static_cast<std::int32_t>(m);
      ds.windows.push_back(std::move(w));
    }
  }
  return ds;
}

struct Toy {
  data::Dataset labeled, unlabeled;
  explicit Toy(std::uint64_t seed = 1) {
    nn::Rng rng(seed);
    labeled = toy_pool(12, 2, 0, 0.0, data::Pool::labeled, rng);
    unlabeled = toy_pool(12, 2, 1, 0.7, data::Pool::unlabeled, rng);
  }
};

inline TrainConfig tiny_train(std::size_t steps) {
  TrainConfig c;
  c.batch_l = 4;
  c.batch_u = 4;
  c.steps = steps;
  c.adam.lr = 1e-3;
  c.seed = 3;
  return c;
}

using Prints = std::map<Part, std::uint64_t>;

inline Prints prints(const model::ModelParams& p) {
  Prints out;
  for (Part part : model::kAllParts) out[part] = model::fingerprint(p, part);
  return out;
}

inline std::set<Part> changed(const Prints& a, const Prints& b) {
  std::set<Part> out;
  for (auto [part, h] : a)
    if (b.at(part) != h) out.insert(part);
  return out;
}

// Independent re-statement of the gated update, built from the loss terms.
struct Reference {
  model::ModelParams params;
  TrainConfig cfg;
  nn::Rng dropout;
  std::size_t gate_s = 0, gate_e = 0;

  Reference(model::ModelParams p, TrainConfig c)
      : params(std::move(p)), cfg(c), dropout(nn::Rng(c.seed).derive("dropout")) {}

  void adam(Part part) {
    for (nn::Param* q : params.part(part)) nn::adam_step(*q, cfg.adam);
  }
  void zero() { nn::zero_grads(params.all()); }

  StepRecord step(const Tensor& xl, std::span<const int> y, const Tensor& xu) {
    const model::ForwardOptions o{model::Mode::train, &dropout, true};
    StepRecord r;
    zero();
    const auto e = losses::encode_batches(xl, &xu, params, o);
    r.losses.l_a = losses::adversarial_term(e, params, 0.0, nullptr);
    if (r.losses.l_a < cfg.thre_a) {
      zero();
      losses::adversarial_term(e, params, -1.0, nullptr);
      adam(Part::discriminator);
      r.gate_s = true;
      ++gate_s;
    }
    zero();
    r.losses.l_rec = losses::reconstruction_term(xl, xu, e, params, 1.0, nullptr);
    adam(Part::decoder_l);
    adam(Part::decoder_u);
    if (r.losses.l_rec < cfg.thre_rec) {
      zero();
      const auto e2 = losses::encode_batches(xl, &xu, params, o);
      Tensor gz(e2.z.shape());
      losses::adversarial_term(e2, params, 1.0, &gz);
      r.losses.l_con = losses::consistency_term(e2, params, o, 1.0, &gz);
      r.losses.l_y = losses::prediction_term(e2, y, params, 1.0, &gz);
      losses::backprop_encoder(e2, gz, params);
      adam(Part::encoder);
      adam(Part::predictor);
      r.gate_e = true;
      ++gate_e;
    } else {
      r.losses.l_con = losses::consistency_term(e, params, o, 0.0, nullptr);
      r.losses.l_y = losses::prediction_term(e, y, params, 0.0, nullptr);
    }
    r.losses.finalize();
    return r;
  }
};

}  // namespace testutil
