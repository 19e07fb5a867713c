#include "drssl/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drssl/error.hpp"

namespace drssl::eval {

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              std::size_t n_classes) {
  if (truth.empty()) throw DataError(DataErrorCode::invalid_argument, "metrics: empty test set");
  if (truth.size() != predicted.size()) {
    throw DataError(DataErrorCode::invalid_argument, "metrics: truth and prediction lengths differ");
  }
  MetricsReport r;
  r.n_samples = truth.size();
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  r.class_counts.assign(n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes ||
        static_cast<std::size_t>(p) >= n_classes) {
      throw DataError(DataErrorCode::invalid_argument, "metrics: class index out of range");
    }
    ++r.confusion[t][p];
    ++r.class_counts[t];
  }

  std::size_t correct = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    correct += r.confusion[c][c];
    if (r.class_counts[c] == 0) continue;
    ++present;
    std::size_t predicted_c = 0;
    for (std::size_t t = 0; t < n_classes; ++t) predicted_c += r.confusion[t][c];
    const double tp = static_cast<double>(r.confusion[c][c]);
    if (predicted_c) precision += tp / static_cast<double>(predicted_c);
    recall += tp / static_cast<double>(r.class_counts[c]);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
  r.macro_precision = precision / static_cast<double>(present);
  r.macro_recall = recall / static_cast<double>(present);
  return r;
}

MetricsReport evaluate(const model::ModelParams& params, const data::Dataset& test) {
  if (test.empty()) throw DataError(DataErrorCode::invalid_argument, "evaluate: empty test set");
  std::vector<std::size_t> idx(test.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto truth = test.labels(idx);
  const auto pred = model::classify(params, test.stack(idx));
  return compute_metrics(truth, pred, params.config.n_classes);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(out.n - 1));
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace drssl::eval
