#pragma once

#include <map>
#include <string>
#include <vector>

#include "drssl/model/model.hpp"

namespace drssl::model {

// Byte layout (all integers/reals little-endian):
//   magic "DRSSLCKP" (8 bytes), version u32 = 1
//   config: channels, window_len, conv_filters, kernel_len, pool_w,
//           latent_dim, n_classes, disc_hidden (u64 each), keep_prob f64, seed u64
//   tensor count u32, then per tensor:
//     name length u32, name bytes, rank u32, dims u64 x rank, values f64 x prod(dims)
// Tensors: every Param value by name, "enc.bn.running_mean", "enc.bn.running_var",
// then any extras (for example the input standardization statistics).
struct Checkpoint {
  ModelParams params;
  std::map<std::string, Tensor> extras;
};

inline constexpr char kCheckpointMagic[] = "DRSSLCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> serialize_checkpoint(const ModelParams& params,
                                       const std::map<std::string, Tensor>& extras = {});
Checkpoint deserialize_checkpoint(std::vector<char> bytes);

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::map<std::string, Tensor>& extras = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace drssl::model
