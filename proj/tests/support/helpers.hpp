#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "drssl/model/model.hpp"
#include "drssl/nn/rng.hpp"
#include "drssl/nn/tensor.hpp"

namespace testutil {

inline drssl::nn::Tensor random_tensor(drssl::nn::Shape shape, drssl::nn::Rng& rng, double scale = 1.0) {
  drssl::nn::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// C=2, T=16, F=2, k=3, d=4, M=2.
inline drssl::model::ModelConfig tiny_config() {
  drssl::model::ModelConfig c;
  c.channels = 2;
  c.window_len = 16;
  c.conv_filters = 2;
  c.kernel_len = 3;
  c.pool_w = 2;
  c.latent_dim = 4;
  c.n_classes = 2;
  c.disc_hidden = 6;
  c.keep_prob = 1.0;
  return c;
}

// Fresh directory under the build tree's temp area.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("drssl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
