#include "drssl/data/dataset.hpp"

#include <cmath>
#include <limits>

#include "drssl/binary_io.hpp"
#include "drssl/error.hpp"

namespace drssl::data {
namespace {

constexpr char kMagic[4] = {'S', 'S', 'L', 'D'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4 + 4 + 8;
constexpr std::size_t kRecordHeaderBytes = 4 + 1 + 1 + 4;
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 24;

Tensor stack_windows(const std::vector<const Tensor*>& xs, std::size_t channels,
                     std::size_t window_len) {
  const std::size_t per = channels * window_len;
  std::vector<double> data;
  data.reserve(xs.size() * per);
  for (const Tensor* x : xs) data.insert(data.end(), x->data().begin(), x->data().end());
  return Tensor({xs.size(), channels, window_len}, std::move(data));
}

}  // namespace

void Dataset::validate() const {
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    auto bad = [i](const std::string& m) {
      throw DataError(DataErrorCode::invalid_record, "window " + std::to_string(i) + ": " + m);
    };
    if (w.x.shape() != nn::Shape{channels, window_len}) {
      bad("shape " + nn::shape_string(w.x.shape()) + " does not match dataset [" +
          std::to_string(channels) + "x" + std::to_string(window_len) + "]");
    }
    if (w.s == Pool::labeled && !w.label) bad("labeled-pool window has no label");
    if (w.label && (*w.label < 0 || static_cast<std::size_t>(*w.label) >= n_classes)) {
      bad("label " + std::to_string(*w.label) + " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
}

Tensor Dataset::stack(const std::vector<std::size_t>& indices) const {
  std::vector<const Tensor*> xs;
  xs.reserve(indices.size());
  for (auto i : indices) xs.push_back(&windows.at(i).x);
  return stack_windows(xs, channels, window_len);
}

Tensor Dataset::stack_all() const {
  std::vector<std::size_t> idx(windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stack(idx);
}

std::vector<int> Dataset::labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto& w = windows.at(i);
    if (!w.label) {
      throw DataError(DataErrorCode::invalid_record, "window " + std::to_string(i) + " has no label");
    }
    out.push_back(*w.label);
  }
  return out;
}

UnlabeledView UnlabeledView::from(const Dataset& ds) {
  UnlabeledView v{ds.channels, ds.window_len, {}};
  v.x.reserve(ds.size());
  for (const auto& w : ds.windows) v.x.push_back(w.x);
  return v;
}

Tensor UnlabeledView::stack(const std::vector<std::size_t>& indices) const {
  std::vector<const Tensor*> xs;
  xs.reserve(indices.size());
  for (auto i : indices) xs.push_back(&x.at(i));
  return stack_windows(xs, channels, window_len);
}

std::vector<double> channel_means(const Dataset& ds) {
  std::vector<double> mean(ds.channels, 0.0);
  for (const auto& w : ds.windows) {
    for (std::size_t c = 0; c < ds.channels; ++c) {
      for (std::size_t t = 0; t < ds.window_len; ++t) mean[c] += w.x[c * ds.window_len + t];
    }
  }
  const double n = static_cast<double>(ds.size() * ds.window_len);
  for (auto& m : mean) m /= n;
  return mean;
}

Standardizer Standardizer::fit(const Dataset& labeled) {
  if (labeled.empty()) {
    throw DataError(DataErrorCode::invalid_argument, "standardize: labeled pool is empty");
  }
  Standardizer s;
  s.mean = channel_means(labeled);
  s.stddev.assign(labeled.channels, 0.0);
  for (const auto& w : labeled.windows) {
    for (std::size_t c = 0; c < labeled.channels; ++c) {
      for (std::size_t t = 0; t < labeled.window_len; ++t) {
        const double d = w.x[c * labeled.window_len + t] - s.mean[c];
        s.stddev[c] += d * d;
      }
    }
  }
  const double n = static_cast<double>(labeled.size() * labeled.window_len);
  for (std::size_t c = 0; c < labeled.channels; ++c) {
    s.stddev[c] = std::sqrt(s.stddev[c] / n);
    if (s.stddev[c] < kMinStd) {
      s.warnings.push_back("channel " + std::to_string(c) + " has zero variance; std clamped to 1e-8");
      s.stddev[c] = kMinStd;
    }
  }
  return s;
}

Tensor Standardizer::apply(const Tensor& window) const {
  Tensor out = window;
  const std::size_t len = window.shape()[1];
  for (std::size_t c = 0; c < mean.size(); ++c) {
    for (std::size_t t = 0; t < len; ++t) {
      double& v = out[c * len + t];
      v = (v - mean[c]) / stddev[c];
    }
  }
  return out;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  if (ds.channels != mean.size()) {
    throw DataError(DataErrorCode::invalid_argument, "standardize: channel count mismatch");
  }
  Dataset out = ds;
  for (auto& w : out.windows) w.x = apply(w.x);
  return out;
}

std::vector<char> serialize_dataset(const Dataset& ds) {
  ds.validate();
  binio::Writer w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put(kDatasetVersion);
  w.put(static_cast<std::uint32_t>(ds.channels));
  w.put(static_cast<std::uint32_t>(ds.window_len));
  w.put(static_cast<std::uint32_t>(ds.n_classes));
  w.put(static_cast<std::uint64_t>(ds.size()));
  for (const auto& win : ds.windows) {
    w.put(win.subject_id);
    w.put(static_cast<std::uint8_t>(win.s));
    w.put(static_cast<std::uint8_t>(win.label ? 1 : 0));
    w.put(static_cast<std::int32_t>(win.label.value_or(-1)));
    for (double v : win.x.data()) w.put(v);
  }
  return w.bytes();
}

Dataset deserialize_dataset(std::vector<char> bytes) {
  binio::Reader r(std::move(bytes));
  if (r.remaining() < kHeaderBytes) {
    throw DataError(DataErrorCode::corrupt_header, "file shorter than the header");
  }
  if (r.get_bytes(4) != std::string_view(kMagic, 4)) {
    throw DataError(DataErrorCode::corrupt_header, "bad magic (expected SSLD)");
  }
  const auto version = r.get<std::uint16_t>();
  if (version != kDatasetVersion) {
    throw DataError(DataErrorCode::corrupt_header, "unsupported version " + std::to_string(version));
  }
  const auto channels = r.get<std::uint32_t>();
  const auto window_len = r.get<std::uint32_t>();
  const auto n_classes = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (channels == 0 || window_len == 0) {
    throw DataError(DataErrorCode::corrupt_header, "zero channel or time dimension");
  }
  if (channels > kMaxDim || window_len > kMaxDim ||
      std::uint64_t{channels} * window_len > kMaxDim) {
    throw DataError(DataErrorCode::dimension_overflow,
                    "window of " + std::to_string(channels) + "x" + std::to_string(window_len));
  }
  const std::uint64_t record = kRecordHeaderBytes + std::uint64_t{channels} * window_len * 8;
  if (count > std::numeric_limits<std::uint64_t>::max() / record) {
    throw DataError(DataErrorCode::dimension_overflow, "window count " + std::to_string(count));
  }
  if (r.remaining() < count * record) {
    throw DataError(DataErrorCode::truncated_payload,
                    "expected " + std::to_string(count * record) + " payload bytes, found " +
                        std::to_string(r.remaining()));
  }
  if (r.remaining() > count * record) {
    throw DataError(DataErrorCode::invalid_record, "trailing bytes after the last window");
  }

  Dataset ds;
  ds.channels = channels;
  ds.window_len = window_len;
  ds.n_classes = n_classes;
  ds.windows.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    SensorWindow w;
    w.subject_id = r.get<std::int32_t>();
    const auto s = r.get<std::uint8_t>();
    const auto has_label = r.get<std::uint8_t>();
    const auto label = r.get<std::int32_t>();
    if (s > 1 || has_label > 1 || (!has_label && label != -1)) {
      throw DataError(DataErrorCode::invalid_record, "window " + std::to_string(i) + " flags");
    }
    w.s = static_cast<Pool>(s);
    if (has_label) w.label = label;
    std::vector<double> x(std::size_t{channels} * window_len);
    for (auto& v : x) v = r.get<double>();
    w.x = Tensor({channels, window_len}, std::move(x));
    ds.windows.push_back(std::move(w));
  }
  ds.validate();
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  binio::write_file(path, serialize_dataset(ds));
}

Dataset load_dataset(const std::string& path) { return deserialize_dataset(binio::read_file(path)); }

}  // namespace drssl::data
