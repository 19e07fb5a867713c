#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drssl/eval/metrics.hpp"
#include "drssl/train/config.hpp"

namespace drssl::eval {

using train::RunConfig;
using train::Variant;

// Standardized pools for one run (statistics fitted on L only).
struct PreparedData {
  data::Dataset labeled;
  data::Dataset unlabeled;
  data::Dataset test;
  data::Standardizer standardizer;

  std::uint64_t digest() const;
};

// Generates the synthetic task and applies the configured split.
PreparedData prepare_data(const RunConfig& config);

// Same config with task, split and training seeds all set to `seed`.
RunConfig reseeded(RunConfig config, std::uint64_t seed);

struct RunOutcome {
  MetricsReport metrics;
  train::TrainHistory history;
  std::uint64_t data_digest = 0;
  std::uint64_t init_digest = 0;  // hash of the initial parameters
};

// Prepare, train, evaluate on the test pool.
RunOutcome run_once(const RunConfig& config);

using Progress = std::function<void(const std::string&)>;

struct ExperimentOptions {
  std::size_t jobs = 1;  // worker threads for independent runs
  Progress progress;     // optional, called from the merging thread only
};

struct AblationGrid {
  std::vector<Variant> variants{std::begin(train::kAblationVariants),
                                std::end(train::kAblationVariants)};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct AblationRow {
  Variant variant = Variant::full;
  MeanStd accuracy;
  MeanStd macro_precision;
  MeanStd macro_recall;
  std::vector<MetricsReport> per_seed;  // in grid seed order
  std::vector<std::uint64_t> data_digests;
  std::vector<std::uint64_t> init_digests;
};

// Each variant is trained on identical data and initial parameters per seed.
// Throws ConfigError with fewer than 2 seeds.
std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationGrid& grid,
                                      const ExperimentOptions& options = {});

struct CellResult {
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
  bool skipped = false;  // n + m exceeds the subject count
  MeanStd accuracy;
  std::vector<double> per_seed;
};

struct MultiSubjectResult {
  std::size_t n_max = 0;
  std::size_t m_max = 0;
  std::size_t total_subjects = 0;
  std::vector<CellResult> cells;  // row-major over n = 1..n_max, m = 1..m_max

  const CellResult& cell(std::size_t n, std::size_t m) const;
};

// Labeled subjects are 0..n-1, unlabeled are the last m subjects; cells with
// n + m > task.n_subjects are skipped.
MultiSubjectResult sweep_multisubject(const RunConfig& base, std::size_t n_max, std::size_t m_max,
                                      const std::vector<std::uint64_t>& seeds,
                                      const ExperimentOptions& options = {});

struct ThresholdPoint {
  double threshold = 0.0;
  MeanStd accuracy;
  std::vector<double> per_seed;
};

struct ThresholdCurves {
  std::vector<ThresholdPoint> thre_a;
  std::vector<ThresholdPoint> thre_rec;
};

// One-dimensional sweeps: each grid varies its threshold with everything else
// held at `base`. Throws ConfigError with fewer than 3 seeds.
ThresholdCurves sweep_thresholds(const RunConfig& base, const std::vector<double>& thre_a_grid,
                                 const std::vector<double>& thre_rec_grid,
                                 const std::vector<std::uint64_t>& seeds,
                                 const ExperimentOptions& options = {});

// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace drssl::eval
