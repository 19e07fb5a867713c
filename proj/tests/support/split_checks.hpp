#pragma once

// U/T split invariants on randomly drawn pools, shared by the dataset suite
// and the acceptance runner.

#include <algorithm>
#include <cstdlib>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "drssl/data/synthetic.hpp"
#include "drssl/nn/rng.hpp"

namespace testutil {

struct SplitTrial {
  drssl::data::TaskConfig task;
  drssl::data::SplitSpec spec;
};

inline SplitTrial random_split_trial(drssl::nn::Rng& rng) {
  SplitTrial t;
  t.task.n_subjects = 2 + rng.index(4);
  t.task.n_per_class = 1 + rng.index(7);
  t.task.n_classes = 2 + rng.index(3);
  t.task.channels = 2;
  t.task.window_len = 8;
  t.task.seed = rng.index(1000);
  std::vector<std::int32_t> ids(t.task.n_subjects);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int32_t>(i);
  rng.shuffle(ids);
  const std::size_t n_l = 1 + rng.index(t.task.n_subjects - 1);
  const std::size_t n_u = 1 + rng.index(t.task.n_subjects - n_l);
  t.spec.labeled_subjects.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_l));
  t.spec.unlabeled_subjects.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_l),
                                   ids.begin() + static_cast<std::ptrdiff_t>(n_l + n_u));
  t.spec.seed = rng.index(1000);
  t.spec.stratified = rng.bernoulli(0.7);
  return t;
}

// Empty when the split is a valid L/U/T split of `pools`; otherwise the first
// broken invariant.
inline std::string split_violation(const drssl::data::SubjectPools& pools, const drssl::data::SplitSpec& spec,
                                   const drssl::data::SslSplit& s) {
  using namespace drssl::data;
  std::size_t n_l = 0;
  for (auto id : spec.labeled_subjects) n_l += pools.by_subject.at(id).size();
  if (s.labeled.size() != n_l) return "labeled pool size";
  for (const auto& w : s.labeled.windows)
    if (w.s != Pool::labeled || !w.label) return "labeled window without s=1 and a label";

  std::vector<SensorWindow> expected;
  for (auto id : spec.unlabeled_subjects)
    for (auto w : pools.by_subject.at(id)) {
      w.s = Pool::unlabeled;
      w.label.reset();
      expected.push_back(w);
    }
  if (s.unlabeled.size() + s.test.size() != expected.size()) return "U + T does not cover the unlabeled subjects";
  if (std::max(s.unlabeled.size(), s.test.size()) - std::min(s.unlabeled.size(), s.test.size()) > 1)
    return "U and T sizes differ by more than one";
  for (const auto& w : s.unlabeled.windows)
    if (w.s != Pool::unlabeled || w.label) return "unlabeled window carries a label";
  for (const auto& w : s.test.windows)
    if (!w.label) return "test window without a label";

  // partition: every unlabeled-subject window lands in exactly one of U, T
  std::vector<SensorWindow> got = s.unlabeled.windows;
  for (auto w : s.test.windows) {
    w.label.reset();
    got.push_back(w);
  }
  auto key = [](const SensorWindow& a, const SensorWindow& b) {
    return std::tie(a.subject_id, a.x.values()) < std::tie(b.subject_id, b.x.values());
  };
  std::sort(expected.begin(), expected.end(), key);
  std::sort(got.begin(), got.end(), key);
  if (got != expected) return "U and T are not a partition of the unlabeled subjects";

  if (spec.stratified) {
    // U carries no labels, so count T per class against the pool
    std::map<int, int> pool_counts, test_counts;
    for (auto id : spec.unlabeled_subjects)
      for (const auto& w : pools.by_subject.at(id)) ++pool_counts[*w.label];
    for (const auto& w : s.test.windows) ++test_counts[*w.label];
    for (auto [cls, n] : pool_counts) {
      const int in_t = test_counts[cls], in_u = n - in_t;
      if (std::abs(in_u - in_t) > 1) return "class " + std::to_string(cls) + " unevenly split";
    }
  }
  return {};
}

}  // namespace testutil
