#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "drssl/data/dataset.hpp"
#include "drssl/model/model.hpp"

namespace drssl::eval {

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  // confusion[truth][pred]
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::size_t> class_counts;  // truth counts per class
  std::size_t n_samples = 0;
};

// Macro means run over classes present in `truth`; a class whose precision
// or recall is 0/0 contributes 0. Throws DataError on empty input.
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              std::size_t n_classes);

// Argmax predictions of the model in eval mode on a labeled test set.
MetricsReport evaluate(const model::ModelParams& params, const data::Dataset& test);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // unbiased (n - 1); 0 for a single value
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

// Spearman rank correlation with average ranks for ties. Returns 0 when either
// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace drssl::eval
