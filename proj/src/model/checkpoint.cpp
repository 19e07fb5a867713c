#include "drssl/model/checkpoint.hpp"

#include <cstring>
#include <limits>

#include "drssl/binary_io.hpp"
#include "drssl/error.hpp"

namespace drssl::model {
namespace {

constexpr std::size_t kMagicLen = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void put_tensor(binio::Writer& w, const std::string& name, const Tensor& t) {
  w.put(static_cast<std::uint32_t>(name.size()));
  w.put_bytes(name);
  w.put(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.put(static_cast<std::uint64_t>(d));
  for (double v : t.data()) w.put(v);
}

std::pair<std::string, Tensor> get_tensor(binio::Reader& r) {
  const auto name_len = r.get<std::uint32_t>();
  if (name_len > 4096) throw DataError(DataErrorCode::corrupt_header, "tensor name too long");
  std::string name = r.get_bytes(name_len);
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) throw DataError(DataErrorCode::corrupt_header, "tensor rank " + std::to_string(rank));
  nn::Shape shape;
  std::uint64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = r.get<std::uint64_t>();
    if (d == 0 || d > kMaxElements || n > kMaxElements / d) {
      throw DataError(DataErrorCode::dimension_overflow, "tensor " + name + " dims overflow");
    }
    n *= d;
    shape.push_back(static_cast<std::size_t>(d));
  }
  if (r.remaining() / sizeof(double) < n) {
    throw DataError(DataErrorCode::truncated_payload, "tensor " + name + " payload");
  }
  std::vector<double> data(static_cast<std::size_t>(n));
  for (auto& v : data) v = r.get<double>();
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

}  // namespace

std::vector<char> serialize_checkpoint(const ModelParams& params,
                                       const std::map<std::string, Tensor>& extras) {
  binio::Writer w;
  w.put_bytes(std::string_view(kCheckpointMagic, kMagicLen));
  w.put(kCheckpointVersion);
  const auto& c = params.config;
  for (std::size_t v : {c.channels, c.window_len, c.conv_filters, c.kernel_len, c.pool_w,
                        c.latent_dim, c.n_classes, c.disc_hidden}) {
    w.put(static_cast<std::uint64_t>(v));
  }
  w.put(c.keep_prob);
  w.put(c.seed);

  const auto all = params.all();
  w.put(static_cast<std::uint32_t>(all.size() + 2 + extras.size()));
  for (const Param* p : all) put_tensor(w, p->name, p->value);
  put_tensor(w, "enc.bn.running_mean", params.enc.bn.running_mean);
  put_tensor(w, "enc.bn.running_var", params.enc.bn.running_var);
  for (const auto& [name, t] : extras) put_tensor(w, name, t);
  return w.bytes();
}

Checkpoint deserialize_checkpoint(std::vector<char> bytes) {
  binio::Reader r(std::move(bytes));
  if (r.remaining() < kMagicLen + 4) throw DataError(DataErrorCode::corrupt_header, "file too short");
  if (r.get_bytes(kMagicLen) != std::string_view(kCheckpointMagic, kMagicLen)) {
    throw DataError(DataErrorCode::corrupt_header, "bad checkpoint magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError(DataErrorCode::corrupt_header,
                    "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  for (std::size_t* field : {&c.channels, &c.window_len, &c.conv_filters, &c.kernel_len, &c.pool_w,
                             &c.latent_dim, &c.n_classes, &c.disc_hidden}) {
    const auto v = r.get<std::uint64_t>();
    if (v > kMaxElements) throw DataError(DataErrorCode::dimension_overflow, "config dimension");
    *field = static_cast<std::size_t>(v);
  }
  c.keep_prob = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(DataErrorCode::corrupt_header, e.what());
  }

  Checkpoint ck{init_params(c), {}};
  std::map<std::string, Tensor> tensors;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = get_tensor(r);
    tensors[name] = std::move(t);
  }

  auto take = [&](const std::string& name, Tensor& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError(DataErrorCode::invalid_record, "missing tensor " + name);
    if (it->second.shape() != dst.shape()) {
      throw DataError(DataErrorCode::invalid_record,
                      "tensor " + name + " has shape " + nn::shape_string(it->second.shape()) +
                          ", expected " + nn::shape_string(dst.shape()));
    }
    dst = std::move(it->second);
    tensors.erase(it);
  };
  for (Param* p : ck.params.all()) take(p->name, p->value);
  take("enc.bn.running_mean", ck.params.enc.bn.running_mean);
  take("enc.bn.running_var", ck.params.enc.bn.running_var);
  ck.extras = std::move(tensors);
  return ck;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::map<std::string, Tensor>& extras) {
  binio::write_file(path, serialize_checkpoint(params, extras));
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(binio::read_file(path));
}

}  // namespace drssl::model
