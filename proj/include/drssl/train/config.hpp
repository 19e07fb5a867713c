#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drssl/data/synthetic.hpp"
#include "drssl/model/model.hpp"
#include "drssl/train/trainer.hpp"

namespace drssl::train {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` text. Blank lines and `#` comments are skipped; a key
// given twice is an error. Throws ConfigError with the line number.
KeyValues parse_key_values(const std::string& text);

// Everything one run needs: model shape, optimizer/gates, synthetic task and
// the subject split. Keys are dotted (`model.latent_dim`, `train.thre_rec`).
struct RunConfig {
  model::ModelConfig model;
  TrainConfig train;
  data::TaskConfig task;  // shape fields are ignored; see resolved_task()
  std::vector<std::int32_t> labeled_subjects{0};
  std::vector<std::int32_t> unlabeled_subjects{1};
  std::uint64_t split_seed = 0;
  bool stratified = true;

  // Throws ConfigError on an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& kv);

  // Every key with its resolved value, each exactly once, in a fixed order.
  KeyValues echo() const;
  std::string to_text() const;

  // Cross-field checks (model vs task shapes, train invariants).
  void validate() const;

  // The task with its window shape and class count taken from the model.
  data::TaskConfig resolved_task() const;
  data::SplitSpec split() const;
};

RunConfig load_run_config(const std::string& path);

}  // namespace drssl::train
