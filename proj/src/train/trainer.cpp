#include "drssl/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "drssl/error.hpp"

namespace drssl::train {

using model::Part;

const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::y_only: return "y";
    case Variant::y_a: return "y+a";
    case Variant::y_rec_con: return "y+rec+con";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::full, Variant::y_only, Variant::y_a, Variant::y_rec_con}) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError("unknown variant '" + name + "' (expected full, y, y+a, y+rec+con)");
}

void TrainConfig::validate() const {
  if (batch_l < 2 || batch_u < 2) throw ConfigError("train config: batch sizes must be >= 2");
  if (!(adam.lr > 0.0)) throw ConfigError("train config: lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train config: betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train config: eps must be > 0");
  if (epochs == 0 && steps == 0) throw ConfigError("train config: epochs or steps must be >= 1");
  if (std::isnan(thre_a) || std::isnan(thre_rec)) throw ConfigError("train config: NaN threshold");
}

void TrainHistory::record(const StepRecord& r) {
  steps.push_back(r);
  if (r.gate_s) ++gate_s_count;
  if (r.gate_e) ++gate_e_count;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch, nn::Rng rng)
    : batch_(batch), rng_(std::move(rng)), order_(n) {
  if (batch == 0 || n < batch) {
    throw DataError(DataErrorCode::invalid_argument,
                    "dataset of " + std::to_string(n) + " windows is smaller than batch size " +
                        std::to_string(batch));
  }
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  rng_.shuffle(order_);
}

void BatchSampler::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rng_.shuffle(order_);
  pos_ = 0;
  ++epoch_;
}

std::vector<std::size_t> BatchSampler::next() {
  if (order_.size() - pos_ < batch_) reshuffle();
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                               order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
  pos_ += batch_;
  return out;
}

PairSampler::PairSampler(const data::Dataset& labeled, const data::UnlabeledView& unlabeled,
                         const TrainConfig& config)
    : labeled_(labeled),
      unlabeled_(unlabeled),
      sample_l_(labeled.size(), config.batch_l, nn::Rng(config.seed).derive("sample-labeled")),
      sample_u_(unlabeled.size(), config.batch_u, nn::Rng(config.seed).derive("sample-unlabeled")),
      steps_per_epoch_(std::min(labeled.size() / config.batch_l, unlabeled.size() / config.batch_u)) {}

LabeledBatch PairSampler::next_labeled() {
  const auto idx = sample_l_.next();
  return {labeled_.stack(idx), labeled_.labels(idx)};
}

Tensor PairSampler::next_unlabeled() { return unlabeled_.stack(sample_u_.next()); }

Trainer::Trainer(ModelParams params, TrainConfig config)
    : params_(std::move(params)),
      config_(config),
      dropout_rng_(nn::Rng(config.seed).derive("dropout")) {
  config_.validate();
}

void Trainer::zero_all() {
  for (auto* p : params_.all()) p->zero_grad();
}

void Trainer::apply(Part part) {
  for (auto* p : params_.part(part)) nn::adam_step(*p, config_.adam);
}

namespace {

void require_finite(double v, const char* name, std::size_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("loss ") + name + " is not finite at step " + std::to_string(step));
  }
}

}  // namespace

StepRecord Trainer::step(const Tensor& x_l, std::span<const int> labels, const Tensor& x_u) {
  const Variant v = config_.variant;
  const bool use_a = v == Variant::full || v == Variant::y_a;
  const bool use_rec = v == Variant::full || v == Variant::y_rec_con;
  const model::ForwardOptions opts{nn::Mode::train, &dropout_rng_, true};

  StepRecord rec;
  rec.step = step_index_++;
  zero_all();

  std::optional<losses::Encoded> first;
  if (use_a || use_rec) first = losses::encode_batches(x_l, &x_u, params_, opts);

  // discriminator ascent while it is still weak
  if (use_a) {
    rec.losses.l_a = losses::adversarial_term(*first, params_, 0.0, nullptr);
    require_finite(rec.losses.l_a, "L_a", rec.step);
    if (rec.losses.l_a < config_.thre_a) {
      rec.gate_s = true;
      losses::adversarial_term(*first, params_, -1.0, nullptr);
      apply(Part::discriminator);
      zero_all();
    }
  }

  // decoders always descend on the reconstruction loss
  bool encoder_open = true;
  if (use_rec) {
    rec.losses.l_rec = losses::reconstruction_term(x_l, x_u, *first, params_, 1.0, nullptr);
    require_finite(rec.losses.l_rec, "L_rec", rec.step);
    apply(Part::decoder_l);
    apply(Part::decoder_u);
    zero_all();
    encoder_open = rec.losses.l_rec < config_.thre_rec;
  }

  if (encoder_open) {
    rec.gate_e = true;
    const losses::Encoded enc =
        losses::encode_batches(x_l, v == Variant::y_only ? nullptr : &x_u, params_, opts);
    Tensor grad_z(enc.z.shape());
    double l_a = 0.0;
    if (use_a) {
      l_a = losses::adversarial_term(enc, params_, 1.0, &grad_z);
      require_finite(l_a, "L_a", rec.step);
    }
    if (use_rec) {
      rec.losses.l_con = losses::consistency_term(enc, params_, opts, 1.0, &grad_z);
      require_finite(rec.losses.l_con, "L_con", rec.step);
    }
    rec.losses.l_y = losses::prediction_term(enc, labels, params_, 1.0, &grad_z);
    require_finite(rec.losses.l_y, "L_y", rec.step);
    losses::backprop_encoder(enc, grad_z, params_);
    // L_a and L_con also fed the discriminator and decoder grads; only the
    // encoder and the predictor move here.
    apply(Part::encoder);
    apply(Part::predictor);
  } else {
    rec.losses.l_con = losses::consistency_term(*first, params_, opts, 0.0, nullptr);
    rec.losses.l_y = losses::prediction_term(*first, labels, params_, 0.0, nullptr);
    require_finite(rec.losses.l_con, "L_con", rec.step);
    require_finite(rec.losses.l_y, "L_y", rec.step);
  }
  zero_all();
  rec.losses.finalize();
  return rec;
}

double accuracy(const ModelParams& params, const data::Dataset& labeled) {
  if (labeled.empty()) throw DataError(DataErrorCode::invalid_argument, "accuracy: empty dataset");
  std::vector<std::size_t> idx(labeled.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto truth = labeled.labels(idx);
  const auto pred = model::classify(params, labeled.stack(idx));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

void check_shapes(const data::Dataset& ds, const ModelConfig& mc, const char* what) {
  if (ds.channels != mc.channels || ds.window_len != mc.window_len) {
    throw DataError(DataErrorCode::invalid_argument,
                    std::string(what) + " windows are " + std::to_string(ds.channels) + "x" +
                        std::to_string(ds.window_len) + ", model expects " +
                        std::to_string(mc.channels) + "x" + std::to_string(mc.window_len));
  }
}

ModelConfig seeded(ModelConfig mc, std::uint64_t seed) {
  mc.seed = seed;
  return mc;
}

}  // namespace

TrainResult train(const data::Dataset& labeled, const data::Dataset& unlabeled,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const data::Dataset* holdout) {
  config.validate();
  check_shapes(labeled, model_config, "labeled");
  check_shapes(unlabeled, model_config, "unlabeled");
  if (labeled.n_classes != 0 && labeled.n_classes != model_config.n_classes) {
    throw DataError(DataErrorCode::invalid_argument, "labeled pool class count differs from the model");
  }
  const data::UnlabeledView unlabeled_view = data::UnlabeledView::from(unlabeled);
  PairSampler sampler(labeled, unlabeled_view, config);
  Trainer trainer(model::init_params(seeded(model_config, config.seed)), config);

  TrainHistory history;
  const std::size_t total = config.steps ? config.steps : config.epochs * sampler.steps_per_epoch();
  for (std::size_t s = 0; s < total; ++s) {
    const LabeledBatch lb = sampler.next_labeled();
    const Tensor xu = sampler.next_unlabeled();
    history.record(trainer.step(lb.x, lb.labels, xu));
    if (holdout && config.eval_every && (s + 1) % config.eval_every == 0) {
      history.evals.push_back({s + 1, accuracy(trainer.params(), *holdout)});
    }
  }
  return {std::move(trainer.params()), std::move(history)};
}

TrainResult train_supervised(const data::Dataset& labeled, const ModelConfig& model_config,
                             const TrainConfig& config, std::size_t steps) {
  config.validate();
  check_shapes(labeled, model_config, "labeled");
  ModelParams params = model::init_params(seeded(model_config, config.seed));
  BatchSampler sampler(labeled.size(), config.batch_l,
                       nn::Rng(config.seed).derive("sample-labeled"));
  nn::Rng dropout_rng = nn::Rng(config.seed).derive("dropout");
  const model::ForwardOptions opts{nn::Mode::train, &dropout_rng, true};

  TrainHistory history;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto idx = sampler.next();
    const Tensor x = labeled.stack(idx);
    const auto y = labeled.labels(idx);

    model::EncoderTrace trace;
    const Tensor z = model::encode(x, params, opts, &trace);
    const Tensor logits = model::predict_logits(z, params);
    StepRecord rec;
    rec.step = s;
    rec.gate_e = true;
    rec.losses.l_y = losses::cross_entropy(logits, y);
    rec.losses.finalize();
    const Tensor grad_z =
        model::predict_backward(z, losses::cross_entropy_grad(logits, y), params.pred, true);
    model::encode_backward(trace, grad_z, params.enc, false);
    for (auto* p : params.part(Part::encoder)) nn::adam_step(*p, config.adam);
    for (auto* p : params.part(Part::predictor)) nn::adam_step(*p, config.adam);
    history.record(rec);
  }
  return {std::move(params), std::move(history)};
}

void write_history_jsonl(std::ostream& out, const TrainHistory& history) {
  for (const auto& r : history.steps) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["l_a"] = r.losses.l_a;
    j["l_rec"] = r.losses.l_rec;
    j["l_con"] = r.losses.l_con;
    j["l_y"] = r.losses.l_y;
    j["gate_s"] = r.gate_s;
    j["gate_e"] = r.gate_e;
    out << j.dump() << '\n';
  }
}

void write_history_jsonl(const std::string& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorCode::io_error, "cannot write " + path);
  write_history_jsonl(out, history);
}

}  // namespace drssl::train
