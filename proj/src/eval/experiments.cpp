#include "drssl/eval/experiments.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "drssl/binary_io.hpp"
#include "drssl/error.hpp"

namespace drssl::eval {

std::uint64_t PreparedData::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const data::Dataset* ds : {&labeled, &unlabeled, &test}) {
    const auto bytes = data::serialize_dataset(*ds);
    h = binio::fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  const auto pools = data::generate_task(config.resolved_task());
  const auto split = data::make_ssl_split(pools, config.split());
  PreparedData out;
  out.standardizer = data::Standardizer::fit(split.labeled);
  out.labeled = out.standardizer.apply(split.labeled);
  out.unlabeled = out.standardizer.apply(split.unlabeled);
  out.test = out.standardizer.apply(split.test);
  return out;
}

RunConfig reseeded(RunConfig config, std::uint64_t seed) {
  config.task.seed = seed;
  config.split_seed = seed;
  config.train.seed = seed;
  return config;
}

namespace {

std::uint64_t init_digest(const RunConfig& config) {
  model::ModelConfig mc = config.model;
  mc.seed = config.train.seed;
  const auto params = model::init_params(mc);
  std::uint64_t h = 0;
  for (auto part : model::kAllParts) h = h * 1099511628211ULL ^ model::fingerprint(params, part);
  return h;
}

RunOutcome train_and_score(const RunConfig& config, const PreparedData& d) {
  RunOutcome out;
  out.data_digest = d.digest();
  out.init_digest = init_digest(config);
  auto result = train::train(d.labeled, d.unlabeled, config.model, config.train, &d.test);
  out.metrics = evaluate(result.params, d.test);
  out.history = std::move(result.history);
  return out;
}

void report(const ExperimentOptions& options, const std::string& line) {
  if (options.progress) options.progress(line);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

RunOutcome run_once(const RunConfig& config) { return train_and_score(config, prepare_data(config)); }

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationGrid& grid,
                                      const ExperimentOptions& options) {
  if (grid.seeds.size() < 2) throw ConfigError("ablation: need at least 2 seeds for mean/std");
  if (grid.variants.empty()) throw ConfigError("ablation: empty variant list");
  const std::size_t n_seeds = grid.seeds.size();

  std::vector<PreparedData> data(n_seeds);
  parallel_for(n_seeds, options.jobs,
               [&](std::size_t s) { data[s] = prepare_data(reseeded(base, grid.seeds[s])); });

  const std::size_t n_runs = grid.variants.size() * n_seeds;
  std::vector<RunOutcome> outcomes(n_runs);
  parallel_for(n_runs, options.jobs, [&](std::size_t i) {
    RunConfig c = reseeded(base, grid.seeds[i % n_seeds]);
    c.train.variant = grid.variants[i / n_seeds];
    outcomes[i] = train_and_score(c, data[i % n_seeds]);
  });

  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    AblationRow row;
    row.variant = grid.variants[v];
    std::vector<double> acc, prec, rec;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const RunOutcome& o = outcomes[v * n_seeds + s];
      row.per_seed.push_back(o.metrics);
      row.data_digests.push_back(o.data_digest);
      row.init_digests.push_back(o.init_digest);
      acc.push_back(o.metrics.accuracy);
      prec.push_back(o.metrics.macro_precision);
      rec.push_back(o.metrics.macro_recall);
    }
    row.accuracy = mean_std(acc);
    row.macro_precision = mean_std(prec);
    row.macro_recall = mean_std(rec);
    report(options, std::string("ablation ") + train::to_string(row.variant) + ": accuracy " +
                        fmt(row.accuracy.mean) + " +- " + fmt(row.accuracy.std));
    rows.push_back(std::move(row));
  }
  for (const auto& row : rows) {
    if (row.data_digests != rows.front().data_digests ||
        row.init_digests != rows.front().init_digests) {
      throw Error("ablation: variants did not see identical data and initial parameters");
    }
  }
  return rows;
}

const CellResult& MultiSubjectResult::cell(std::size_t n, std::size_t m) const {
  if (n < 1 || n > n_max || m < 1 || m > m_max) throw ConfigError("multisubject: cell out of range");
  return cells[(n - 1) * m_max + (m - 1)];
}

MultiSubjectResult sweep_multisubject(const RunConfig& base, std::size_t n_max, std::size_t m_max,
                                      const std::vector<std::uint64_t>& seeds,
                                      const ExperimentOptions& options) {
  if (n_max == 0 || m_max == 0) throw ConfigError("multisubject: n_max and m_max must be >= 1");
  if (seeds.empty()) throw ConfigError("multisubject: no seeds");
  MultiSubjectResult out;
  out.n_max = n_max;
  out.m_max = m_max;
  out.total_subjects = base.task.n_subjects;
  for (std::size_t n = 1; n <= n_max; ++n) {
    for (std::size_t m = 1; m <= m_max; ++m) {
      CellResult c;
      c.n_labeled = n;
      c.n_unlabeled = m;
      c.skipped = n + m > out.total_subjects;
      out.cells.push_back(c);
    }
  }

  struct Job {
    std::size_t cell;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    if (out.cells[i].skipped) continue;
    for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({i, s});
  }
  std::vector<double> acc(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t j) {
    const CellResult& cell = out.cells[jobs[j].cell];
    RunConfig c = reseeded(base, seeds[jobs[j].seed]);
    c.labeled_subjects.clear();
    c.unlabeled_subjects.clear();
    const auto total = static_cast<std::int32_t>(out.total_subjects);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(cell.n_labeled); ++i) {
      c.labeled_subjects.push_back(i);
    }
    for (std::int32_t i = total - static_cast<std::int32_t>(cell.n_unlabeled); i < total; ++i) {
      c.unlabeled_subjects.push_back(i);
    }
    acc[j] = run_once(c).metrics.accuracy;
  });

  for (std::size_t j = 0; j < jobs.size(); ++j) out.cells[jobs[j].cell].per_seed.push_back(acc[j]);
  for (auto& c : out.cells) {
    if (c.skipped) continue;
    c.accuracy = mean_std(c.per_seed);
    report(options, "multisubject n=" + std::to_string(c.n_labeled) + " m=" +
                        std::to_string(c.n_unlabeled) + ": accuracy " + fmt(c.accuracy.mean));
  }
  return out;
}

ThresholdCurves sweep_thresholds(const RunConfig& base, const std::vector<double>& thre_a_grid,
                                 const std::vector<double>& thre_rec_grid,
                                 const std::vector<std::uint64_t>& seeds,
                                 const ExperimentOptions& options) {
  if (seeds.size() < 3) throw ConfigError("threshold sweep: need at least 3 seeds per point");
  if (thre_a_grid.empty() && thre_rec_grid.empty()) throw ConfigError("threshold sweep: empty grids");

  std::vector<PreparedData> data(seeds.size());
  parallel_for(seeds.size(), options.jobs,
               [&](std::size_t s) { data[s] = prepare_data(reseeded(base, seeds[s])); });

  const std::size_t n_points = thre_a_grid.size() + thre_rec_grid.size();
  std::vector<double> acc(n_points * seeds.size());
  parallel_for(acc.size(), options.jobs, [&](std::size_t i) {
    const std::size_t p = i / seeds.size();
    const std::size_t s = i % seeds.size();
    RunConfig c = reseeded(base, seeds[s]);
    if (p < thre_a_grid.size()) {
      c.train.thre_a = thre_a_grid[p];
    } else {
      c.train.thre_rec = thre_rec_grid[p - thre_a_grid.size()];
    }
    acc[i] = train_and_score(c, data[s]).metrics.accuracy;
  });

  ThresholdCurves out;
  for (std::size_t p = 0; p < n_points; ++p) {
    ThresholdPoint point;
    const bool is_a = p < thre_a_grid.size();
    point.threshold = is_a ? thre_a_grid[p] : thre_rec_grid[p - thre_a_grid.size()];
    point.per_seed.assign(acc.begin() + static_cast<std::ptrdiff_t>(p * seeds.size()),
                          acc.begin() + static_cast<std::ptrdiff_t>((p + 1) * seeds.size()));
    point.accuracy = mean_std(point.per_seed);
    report(options, std::string(is_a ? "thre_a" : "thre_rec") + " = " + fmt(point.threshold) +
                        ": accuracy " + fmt(point.accuracy.mean) + " +- " + fmt(point.accuracy.std));
    (is_a ? out.thre_a : out.thre_rec).push_back(std::move(point));
  }
  return out;
}

}  // namespace drssl::eval
