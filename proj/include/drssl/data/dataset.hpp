#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drssl/nn/tensor.hpp"

namespace drssl::data {

using nn::Tensor;

// Domain indicator: 1 for the labeled pool, 0 for the unlabeled pool.
enum class Pool : std::uint8_t { unlabeled = 0, labeled = 1 };

struct SensorWindow {
  std::int32_t subject_id = 0;
  Pool s = Pool::labeled;
  Tensor x;  // [C,T]
  std::optional<std::int32_t> label;

  friend bool operator==(const SensorWindow&, const SensorWindow&) = default;
};

struct Dataset {
  std::size_t channels = 0;
  std::size_t window_len = 0;
  std::size_t n_classes = 0;
  std::vector<SensorWindow> windows;

  std::size_t size() const noexcept { return windows.size(); }
  bool empty() const noexcept { return windows.empty(); }

  // Throws DataError(invalid_record) when a window breaks the dataset contract
  // (shape, label range, labeled-pool window without a label).
  void validate() const;

  // Stack windows [begin indices] into [B,C,T].
  Tensor stack(const std::vector<std::size_t>& indices) const;
  Tensor stack_all() const;
  std::vector<int> labels(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Windows of the unlabeled pool as the trainer sees them: inputs only. There
// is no label field, so no code path from here can read one.
struct UnlabeledView {
  std::size_t channels = 0;
  std::size_t window_len = 0;
  std::vector<Tensor> x;

  static UnlabeledView from(const Dataset& ds);
  std::size_t size() const noexcept { return x.size(); }
  Tensor stack(const std::vector<std::size_t>& indices) const;
};

// Per-channel z-scoring with statistics fit on the labeled pool only.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::string> warnings;

  static constexpr double kMinStd = 1e-8;

  static Standardizer fit(const Dataset& labeled);
  Dataset apply(const Dataset& ds) const;
  Tensor apply(const Tensor& window) const;
};

// Per-channel mean over every window and time step, [C].
std::vector<double> channel_means(const Dataset& ds);

// File format ("SSLD"), little-endian:
//   magic "SSLD", version u16 = 1, channels u32, window_len u32, n_classes u32, count u64
//   per window: subject_id i32, s u8, has_label u8, label i32 (-1 if absent),
//               channels * window_len f64 values in row-major [C,T] order
inline constexpr std::uint16_t kDatasetVersion = 1;

std::vector<char> serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(std::vector<char> bytes);
void save_dataset(const std::string& path, const Dataset& ds);
// Fails closed: either the whole dataset or a DataError, never a partial read.
Dataset load_dataset(const std::string& path);

}  // namespace drssl::data
