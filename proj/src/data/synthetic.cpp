#include "drssl/data/synthetic.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "drssl/error.hpp"

namespace drssl::data {
namespace {

constexpr double kMaxCondition = 20.0;

Eigen::MatrixXd to_eigen(const Tensor& m) {
  const auto n = static_cast<Eigen::Index>(m.shape()[0]);
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = m.at(i, j);
  }
  return out;
}

}  // namespace

SubjectSpec SubjectSpec::identity(std::int32_t id, std::size_t channels, double noise_std) {
  SubjectSpec s;
  s.subject_id = id;
  s.amplitude.assign(channels, 1.0);
  s.mixing = Tensor({channels, channels});
  for (std::size_t c = 0; c < channels; ++c) s.mixing.at(c, c) = 1.0;
  s.offset.assign(channels, 0.0);
  s.noise_std = noise_std;
  return s;
}

SubjectSpec SubjectSpec::scaled(double magnitude) const {
  SubjectSpec s = *this;
  const std::size_t channels = amplitude.size();
  for (std::size_t c = 0; c < channels; ++c) {
    s.amplitude[c] = std::pow(amplitude[c], magnitude);
    s.offset[c] = offset[c] * magnitude;
    for (std::size_t j = 0; j < channels; ++j) {
      const double eye = c == j ? 1.0 : 0.0;
      s.mixing.at(c, j) = eye + magnitude * (mixing.at(c, j) - eye);
    }
  }
  s.phase_shift = phase_shift * magnitude;
  return s;
}

double SubjectSpec::mixing_condition() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(mixing));
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

void SubjectSpec::validate() const {
  const std::size_t channels = amplitude.size();
  if (channels == 0 || offset.size() != channels ||
      mixing.shape() != nn::Shape{channels, channels}) {
    throw ConfigError("subject " + std::to_string(subject_id) + ": inconsistent channel counts");
  }
  if (!(noise_std >= 0.0)) {
    throw ConfigError("subject " + std::to_string(subject_id) + ": noise_std must be >= 0");
  }
  const double cond = mixing_condition();
  if (!(cond <= kMaxCondition)) {
    throw ConfigError("subject " + std::to_string(subject_id) + ": mixing condition number " +
                      std::to_string(cond) + " exceeds 20");
  }
}

std::vector<SensorWindow> generate_subject(const SubjectSpec& spec, std::size_t n_per_class,
                                           std::size_t n_classes, std::size_t channels,
                                           std::size_t window_len, nn::Rng& rng,
                                           const SignalOptions& signal) {
  spec.validate();
  if (spec.amplitude.size() != channels) {
    throw ConfigError("generate_subject: spec has " + std::to_string(spec.amplitude.size()) +
                      " channels, expected " + std::to_string(channels));
  }
  if (n_per_class == 0) throw ConfigError("generate_subject: n_per_class must be >= 1");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double T = static_cast<double>(window_len);

  std::vector<SensorWindow> out;
  out.reserve(n_per_class * n_classes);
  std::vector<double> base(channels * window_len);
  for (std::size_t m = 0; m < n_classes; ++m) {
    const double freq = signal.base_freq + static_cast<double>(m) * signal.freq_step;
    for (std::size_t n = 0; n < n_per_class; ++n) {
      const double phase = signal.phase_jitter > 0.0 ? rng.uniform(0.0, two_pi * signal.phase_jitter) : 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        const double harmonic = 1.0 + static_cast<double>(c % 2);
        const double channel_phase = std::numbers::pi * static_cast<double>(c) / static_cast<double>(channels);
        for (std::size_t t = 0; t < window_len; ++t) {
          base[c * window_len + t] = std::sin(two_pi * freq * harmonic * static_cast<double>(t) / T +
                                              phase + spec.phase_shift + channel_phase);
        }
      }
      Tensor x({channels, window_len});
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < window_len; ++t) {
          double v = 0.0;
          for (std::size_t j = 0; j < channels; ++j) v += spec.mixing.at(c, j) * base[j * window_len + t];
          v = spec.amplitude[c] * v + spec.offset[c];
          if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
          x[c * window_len + t] = v;
        }
      }
      out.push_back(SensorWindow{spec.subject_id, Pool::labeled, std::move(x),
                                 static_cast<std::int32_t>(m)});
    }
  }
  return out;
}

SubjectSpec random_subject_spec(std::int32_t id, std::size_t channels, double shift,
                                double noise_std, nn::Rng& rng, const ShiftScales& scales) {
  SubjectSpec s = SubjectSpec::identity(id, channels, noise_std);
  for (std::size_t c = 0; c < channels; ++c) {
    s.amplitude[c] = std::exp(scales.amplitude_std * rng.normal());
    s.offset[c] = scales.offset_std * rng.normal();
  }
  s.phase_shift = rng.uniform(0.0, std::numbers::pi);
  // redraw the mixing perturbation until it is well conditioned at this shift
  for (int attempt = 0;; ++attempt) {
    Tensor m({channels, channels});
    for (std::size_t i = 0; i < channels; ++i) {
      for (std::size_t j = 0; j < channels; ++j) m.at(i, j) = (i == j ? 1.0 : 0.0) + scales.mixing_std * rng.normal();
    }
    s.mixing = m;
    SubjectSpec candidate = s.scaled(shift);
    if (candidate.mixing_condition() <= kMaxCondition || attempt > 1000) {
      candidate.validate();
      return candidate;
    }
  }
}

SubjectPools generate_task(const TaskConfig& task) {
  if (task.n_subjects == 0) throw ConfigError("task: n_subjects must be >= 1");
  nn::Rng root(task.seed);
  SubjectPools pools{task.channels, task.window_len, task.n_classes, {}};
  for (std::size_t i = 0; i < task.n_subjects; ++i) {
    const auto id = static_cast<std::int32_t>(i);
    nn::Rng spec_rng = root.derive("subject-spec").derive(i);
    nn::Rng data_rng = root.derive("subject-data").derive(i);
    const SubjectSpec spec = random_subject_spec(id, task.channels, task.shift, task.noise_std, spec_rng, task.scales);
    pools.by_subject[id] = generate_subject(spec, task.n_per_class, task.n_classes, task.channels,
                                            task.window_len, data_rng, task.signal);
  }
  return pools;
}

SslSplit make_ssl_split(const SubjectPools& pools, const SplitSpec& split) {
  std::set<std::int32_t> labeled(split.labeled_subjects.begin(), split.labeled_subjects.end());
  for (auto id : split.unlabeled_subjects) {
    if (labeled.count(id)) {
      throw ConfigError("split: subject " + std::to_string(id) +
                        " appears in both labeled and unlabeled lists");
    }
  }
  if (split.labeled_subjects.empty() || split.unlabeled_subjects.empty()) {
    throw ConfigError("split: both subject lists must be nonempty");
  }
  auto subject = [&](std::int32_t id) -> const std::vector<SensorWindow>& {
    auto it = pools.by_subject.find(id);
    if (it == pools.by_subject.end()) throw ConfigError("split: unknown subject " + std::to_string(id));
    return it->second;
  };

  SslSplit out;
  for (Dataset* ds : {&out.labeled, &out.unlabeled, &out.test}) {
    ds->channels = pools.channels;
    ds->window_len = pools.window_len;
    ds->n_classes = pools.n_classes;
  }
  for (auto id : split.labeled_subjects) {
    for (auto w : subject(id)) {
      w.s = Pool::labeled;
      out.labeled.windows.push_back(std::move(w));
    }
  }

  std::vector<SensorWindow> pool;
  for (auto id : split.unlabeled_subjects) {
    const auto& ws = subject(id);
    pool.insert(pool.end(), ws.begin(), ws.end());
  }
  nn::Rng rng = nn::Rng(split.seed).derive("ssl-split");
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  // to_unlabeled[i] says where pool[order[i]] goes
  std::vector<bool> to_unlabeled(order.size());
  if (split.stratified) {
    std::map<std::int32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& w = pool[order[i]];
      if (!w.label) throw ConfigError("split: stratified mode needs labels on unlabeled subjects");
      by_class[*w.label].push_back(i);
    }
    // alternate within each class, carrying the turn across classes so the
    // totals also differ by at most one
    bool next_unlabeled = true;
    for (auto& [cls, members] : by_class) {
      for (auto i : members) {
        to_unlabeled[i] = next_unlabeled;
        next_unlabeled = !next_unlabeled;
      }
    }
  } else {
    for (std::size_t i = 0; i < order.size(); ++i) to_unlabeled[i] = i < (order.size() + 1) / 2;
  }

  for (std::size_t i = 0; i < order.size(); ++i) {
    SensorWindow w = pool[order[i]];
    w.s = Pool::unlabeled;
    if (to_unlabeled[i]) {
      w.label.reset();
      out.unlabeled.windows.push_back(std::move(w));
    } else {
      out.test.windows.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace drssl::data
