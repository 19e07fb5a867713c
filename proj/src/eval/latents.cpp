#include "drssl/eval/latents.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>
#include <numeric>

#include "drssl/error.hpp"

namespace drssl::eval {

nn::Tensor Pca::project(const nn::Tensor& z) const {
  const std::size_t n = z.shape()[0];
  const std::size_t d = mean.size();
  if (z.rank() != 2 || z.shape()[1] != d) throw ShapeError("pca project: expected [N x " + std::to_string(d) + "]");
  nn::Tensor out({n, components.size()});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < components.size(); ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += (z.at(i, j) - mean[j]) * components[k][j];
      out.at(i, k) = acc;
    }
  }
  return out;
}

nn::Tensor Pca::reconstruct(const nn::Tensor& projected) const {
  const std::size_t n = projected.shape()[0];
  const std::size_t d = mean.size();
  nn::Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = mean[j];
      for (std::size_t k = 0; k < components.size(); ++k) v += projected.at(i, k) * components[k][j];
      out.at(i, j) = v;
    }
  }
  return out;
}

Pca fit_pca(const nn::Tensor& z, std::size_t k) {
  if (z.rank() != 2 || z.shape()[0] < 2) throw ShapeError("pca: need an [N x d] matrix with N >= 2");
  const auto n = static_cast<Eigen::Index>(z.shape()[0]);
  const auto d = static_cast<Eigen::Index>(z.shape()[1]);
  if (k == 0 || k > static_cast<std::size_t>(d)) throw ConfigError("pca: k must be in [1, d]");

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      z.data().data(), n, d);
  const Eigen::RowVectorXd mu = m.colwise().mean();
  const Eigen::MatrixXd centered = m.rowwise() - mu;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");

  Pca p;
  p.mean.assign(mu.data(), mu.data() + d);
  // Eigen sorts ascending
  for (Eigen::Index i = d - 1; i >= 0; --i) p.eigenvalues.push_back(std::max(0.0, eig.eigenvalues()(i)));
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(c));
    p.components.emplace_back(v.data(), v.data() + d);
  }
  const double total = std::accumulate(p.eigenvalues.begin(), p.eigenvalues.end(), 0.0);
  const double top = std::accumulate(p.eigenvalues.begin(), p.eigenvalues.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
  p.explained = total > 0.0 ? top / total : 0.0;
  return p;
}

namespace {

void write_prefix(std::ostream& out, const data::SensorWindow& w) {
  out << w.subject_id << ',' << static_cast<int>(w.s) << ',';
  if (w.label) out << *w.label;
}

}  // namespace

LatentExport export_latents(const model::ModelParams& params,
                            const std::vector<const data::Dataset*>& pools,
                            const std::string& features_path, const std::string& pca_path) {
  std::vector<const data::SensorWindow*> windows;
  std::vector<double> all;
  for (const data::Dataset* ds : pools) {
    if (ds->empty()) continue;
    const nn::Tensor z = model::encode(ds->stack_all(), params);
    all.insert(all.end(), z.data().begin(), z.data().end());
    for (const auto& w : ds->windows) windows.push_back(&w);
  }
  const std::size_t d = params.config.latent_dim;
  const nn::Tensor z({windows.size(), d}, std::move(all));

  LatentExport out;
  out.rows = windows.size();
  out.pca = fit_pca(z, 2);
  const nn::Tensor proj = out.pca.project(z);

  std::ofstream f(features_path);
  if (!f) throw DataError(DataErrorCode::io_error, "cannot write " + features_path);
  f.precision(17);
  f << "subject_id,s,label";
  for (std::size_t j = 0; j < d; ++j) f << ",z" << j;
  f << '\n';
  std::ofstream g(pca_path);
  if (!g) throw DataError(DataErrorCode::io_error, "cannot write " + pca_path);
  g.precision(17);
  g << "subject_id,s,label,pc1,pc2\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    write_prefix(f, *windows[i]);
    for (std::size_t j = 0; j < d; ++j) f << ',' << z.at(i, j);
    f << '\n';
    write_prefix(g, *windows[i]);
    g << ',' << proj.at(i, 0) << ',' << proj.at(i, 1) << '\n';
  }
  if (!f || !g) throw DataError(DataErrorCode::io_error, "write failed for latent export");
  return out;
}

}  // namespace drssl::eval
