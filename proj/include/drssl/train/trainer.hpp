#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drssl/data/dataset.hpp"
#include "drssl/losses/losses.hpp"
#include "drssl/model/model.hpp"
#include "drssl/nn/param.hpp"
#include "drssl/nn/rng.hpp"

namespace drssl::train {

using losses::LossReport;
using model::ModelConfig;
using model::ModelParams;
using nn::Tensor;

// Which losses take part in training. Excluded losses contribute neither
// gradients nor gates.
enum class Variant {
  full,       // L_a + L_rec + L_con + L_y
  y_only,     // L_y: supervised CNN on the labeled pool
  y_a,        // L_y + L_a
  y_rec_con,  // L_y + L_rec + L_con
};

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

inline constexpr Variant kAblationVariants[] = {Variant::y_only, Variant::y_a, Variant::y_rec_con,
                                                Variant::full};

struct TrainConfig {
  // Discriminator gate: theta_s ascends only while L_a < thre_a.
  double thre_a = -0.3;
  // Encoder/predictor gate: updated only while L_rec < thre_rec. The default
  // leaves it open; on the synthetic task any tighter value only slows training.
  double thre_rec = 1e9;
  nn::AdamOptions adam{};
  std::size_t batch_l = 16;
  std::size_t batch_u = 16;
  std::size_t epochs = 10;
  // When nonzero, run exactly this many steps instead of whole epochs.
  std::size_t steps = 1800;
  std::uint64_t seed = 0;
  // Accuracy snapshot on the holdout set every this many steps (0 = off).
  std::size_t eval_every = 0;
  Variant variant = Variant::full;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  LossReport losses;
  bool gate_s = false;  // discriminator updated
  bool gate_e = false;  // encoder and predictor updated
};

struct EvalSnapshot {
  std::size_t step = 0;
  double accuracy = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalSnapshot> evals;
  std::size_t gate_s_count = 0;
  std::size_t gate_e_count = 0;

  void record(const StepRecord& r);
};

// Draws fixed-size batches without replacement; once fewer than a batch of
// unseen indices remain, the short tail is dropped and the order reshuffled.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, nn::Rng rng);

  std::vector<std::size_t> next();
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  void reshuffle();

  std::size_t batch_;
  nn::Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

struct LabeledBatch {
  Tensor x;
  std::vector<int> labels;
};

// Independent per-pool sampling streams derived from the training seed.
class PairSampler {
 public:
  PairSampler(const data::Dataset& labeled, const data::UnlabeledView& unlabeled,
              const TrainConfig& config);

  LabeledBatch next_labeled();
  Tensor next_unlabeled();
  // Steps per training epoch: floor(min(|L|,|U|) / batch).
  std::size_t steps_per_epoch() const noexcept { return steps_per_epoch_; }

 private:
  const data::Dataset& labeled_;
  const data::UnlabeledView& unlabeled_;
  BatchSampler sample_l_;
  BatchSampler sample_u_;
  std::size_t steps_per_epoch_;
};

// Owns the model, its optimizer state (inside each Param) and the dropout stream.
class Trainer {
 public:
  Trainer(ModelParams params, TrainConfig config);

  // One pass of the gated alternating update on a batch pair.
  StepRecord step(const Tensor& x_l, std::span<const int> labels, const Tensor& x_u);

  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  void apply(model::Part part);
  void zero_all();

  ModelParams params_;
  TrainConfig config_;
  nn::Rng dropout_rng_;
  std::size_t step_index_ = 0;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Initializes from the training seed and runs epochs of Trainer::step.
// Unlabeled windows are read through an UnlabeledView (inputs only).
TrainResult train(const data::Dataset& labeled, const data::Dataset& unlabeled,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const data::Dataset* holdout = nullptr);

// Plain supervised CNN (encoder + predictor on L_y) run for `steps` updates
// with the same seeding scheme as train(); the L_y-only variant must match it.
TrainResult train_supervised(const data::Dataset& labeled, const ModelConfig& model_config,
                             const TrainConfig& config, std::size_t steps);

double accuracy(const ModelParams& params, const data::Dataset& labeled);

// One JSON object per line: {step, l_a, l_rec, l_con, l_y, gate_s, gate_e}.
void write_history_jsonl(std::ostream& out, const TrainHistory& history);
void write_history_jsonl(const std::string& path, const TrainHistory& history);

}  // namespace drssl::train
