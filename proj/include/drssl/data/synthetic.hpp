#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "drssl/data/dataset.hpp"
#include "drssl/nn/rng.hpp"

namespace drssl::data {

// Person-specific transform applied to the class templates:
//   x'(t) = diag(amplitude) * mixing * x(t + phase_shift) + offset + noise
struct SubjectSpec {
  std::int32_t subject_id = 0;
  std::vector<double> amplitude;  // [C]
  double phase_shift = 0.0;       // radians
  Tensor mixing;                  // [C,C]
  std::vector<double> offset;     // [C]
  double noise_std = 0.0;

  static SubjectSpec identity(std::int32_t id, std::size_t channels, double noise_std = 0.0);

  // Interpolates every component toward the identity transform: 0 gives the
  // identity, 1 gives this spec, larger values extrapolate.
  SubjectSpec scaled(double magnitude) const;

  // 2-norm condition number of the mixing matrix.
  double mixing_condition() const;

  // Throws ConfigError unless the mixing matrix has condition number <= 20
  // and noise_std >= 0.
  void validate() const;
};

// Class templates: class m oscillates at base_freq + m * freq_step cycles per
// window; channel c carries harmonic 1 + (c mod 2) with a fixed per-channel
// phase. Each window draws a phase uniformly in [0, 2*pi*phase_jitter).
struct SignalOptions {
  double base_freq = 6.0;
  double freq_step = 5.0;
  double phase_jitter = 1.0;
};

std::vector<SensorWindow> generate_subject(const SubjectSpec& spec, std::size_t n_per_class,
                                           std::size_t n_classes, std::size_t channels,
                                           std::size_t window_len, nn::Rng& rng,
                                           const SignalOptions& signal = {});

// Spread of each transform component at shift 1: offsets ~ N(0, offset_std),
// log-amplitudes ~ N(0, amplitude_std), mixing = I + N(0, mixing_std).
struct ShiftScales {
  double offset_std = 1.5;
  double amplitude_std = 0.0;
  double mixing_std = 0.0;
};

// Synthetic benchmark task: a set of subjects with random transforms of a
// given magnitude.
struct TaskConfig {
  std::size_t n_subjects = 2;
  std::size_t n_per_class = 60;
  std::size_t n_classes = 3;
  std::size_t channels = 4;
  std::size_t window_len = 128;
  double noise_std = 0.5;
  double shift = 1.0;
  ShiftScales scales;
  SignalOptions signal;
  std::uint64_t seed = 0;
};

// Random subject spec; `shift` scales how far it sits from the identity.
SubjectSpec random_subject_spec(std::int32_t id, std::size_t channels, double shift,
                                double noise_std, nn::Rng& rng, const ShiftScales& scales = {});

struct SubjectPools {
  std::size_t channels = 0;
  std::size_t window_len = 0;
  std::size_t n_classes = 0;
  std::map<std::int32_t, std::vector<SensorWindow>> by_subject;
};

// Subjects 0..n_subjects-1, each with its own random transform.
SubjectPools generate_task(const TaskConfig& task);

struct SplitSpec {
  std::vector<std::int32_t> labeled_subjects;
  std::vector<std::int32_t> unlabeled_subjects;
  std::uint64_t seed = 0;
  // Balance classes across U and T (requires labels on the unlabeled subjects).
  bool stratified = true;
};

struct SslSplit {
  Dataset labeled;    // s = 1, labels present
  Dataset unlabeled;  // s = 0, labels removed
  Dataset test;       // s = 0, labels kept for scoring
};

// Labeled subjects -> L; unlabeled subjects' windows are shuffled and split
// evenly into U (labels stripped) and T. Throws ConfigError when the subject
// lists overlap or name an unknown subject.
SslSplit make_ssl_split(const SubjectPools& pools, const SplitSpec& split);

}  // namespace drssl::data
