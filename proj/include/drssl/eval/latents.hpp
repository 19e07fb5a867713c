#pragma once

#include <string>
#include <vector>

#include "drssl/data/dataset.hpp"
#include "drssl/model/model.hpp"

namespace drssl::eval {

struct Pca {
  std::vector<double> mean;                     // [d]
  std::vector<std::vector<double>> components;  // k unit vectors of length d
  std::vector<double> eigenvalues;              // all d, descending
  double explained = 0.0;                       // fraction of variance in the first k

  // Rows of `z` projected onto the components.
  nn::Tensor project(const nn::Tensor& z) const;
  // Back to latent space from projected coordinates.
  nn::Tensor reconstruct(const nn::Tensor& projected) const;
};

// Exact eigendecomposition of the d x d sample covariance of z: [N,d].
Pca fit_pca(const nn::Tensor& z, std::size_t k = 2);

struct LatentExport {
  std::size_t rows = 0;
  Pca pca;
};

// Writes `features_path` (subject_id,s,label,z0..z{d-1}) for L, U and T in that
// order and `pca_path` (subject_id,s,label,pc1,pc2). Unknown labels are empty.
LatentExport export_latents(const model::ModelParams& params,
                            const std::vector<const data::Dataset*>& pools,
                            const std::string& features_path, const std::string& pca_path);

}  // namespace drssl::eval
