#pragma once

#include "coegan/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coegan {

class NotPsdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct GaussianStats {
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  VectorType mean;
  MatrixType cov;

  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

/// Sample mean and unbiased (N-1) covariance of the rows of an N×d matrix.
template <typename Derived>
GaussianStats<typename Derived::Scalar> estimate_gaussian(const Eigen::MatrixBase<Derived>& features) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = features.rows();
  if (n < 2) throw std::invalid_argument("estimate_gaussian: need at least 2 samples");
  GaussianStats<Scalar> out;
  out.mean = features.colwise().mean().transpose();
  const auto centered = (features.rowwise() - out.mean.transpose()).eval();
  out.cov = (centered.adjoint() * centered) / Scalar(n - 1);
  return out;
}

namespace detail {

/// Eigenvalue floor for numerically PSD input, scaled by the spectral radius
/// so large-magnitude matrices tolerate proportional roundoff.
template <typename Scalar>
Scalar psd_fail_bound(Scalar lambda_max_abs) {
  return Scalar(-1e-6) * std::max(Scalar(1), lambda_max_abs);
}

template <typename MatrixType>
auto checked_eigen(const MatrixType& a) {
  using Scalar = typename MatrixType::Scalar;
  const MatrixType sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixType> es(sym);
  if (es.info() != Eigen::Success) throw NotPsdError("eigendecomposition failed");
  auto values = es.eigenvalues().eval();
  const Scalar radius = values.size() ? values.cwiseAbs().maxCoeff() : Scalar(0);
  if (values.size() && values.minCoeff() < psd_fail_bound(radius))
    throw NotPsdError("matrix is not positive semi-definite (min eigenvalue " +
                      std::to_string(static_cast<double>(values.minCoeff())) + ")");
  values = values.cwiseMax(Scalar(0));
  return std::make_pair(values, es.eigenvectors().eval());
}

}  // namespace detail

/// Principal square root of a symmetric PSD matrix. The input is symmetrized
/// first; slightly negative eigenvalues (roundoff) are clamped to zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix_sqrt_psd(
    const Eigen::MatrixBase<Derived>& a) {
  using MatrixType = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.rows() != a.cols()) throw std::invalid_argument("matrix_sqrt_psd: matrix not square");
  const auto [values, vectors] = detail::checked_eigen(MatrixType(a));
  return vectors * values.cwiseSqrt().asDiagonal() * vectors.transpose();
}

/// Tr(A^{1/2}) for symmetric PSD A.
template <typename Derived>
typename Derived::Scalar trace_sqrt_psd(const Eigen::MatrixBase<Derived>& a) {
  using MatrixType = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto [values, vectors] = detail::checked_eigen(MatrixType(a));
  return values.cwiseSqrt().sum();
}

/// Fréchet distance between two Gaussians:
///   |mu_x - mu_g|^2 + Tr(S_x + S_g - 2 (S_x S_g)^{1/2}).
/// The cross term uses Tr((S_x^{1/2} S_g S_x^{1/2})^{1/2}), which has the same
/// eigenvalues as (S_x S_g)^{1/2} but stays symmetric.
template <typename Scalar>
Scalar fid(const GaussianStats<Scalar>& real, const GaussianStats<Scalar>& fake) {
  if (real.dim() != fake.dim() || real.cov.rows() != fake.cov.rows())
    throw std::invalid_argument("fid: feature widths differ");
  using MatrixType = typename GaussianStats<Scalar>::MatrixType;
  const Scalar mean_term = (real.mean - fake.mean).squaredNorm();
  const MatrixType root_real = matrix_sqrt_psd(real.cov);
  const MatrixType inner = root_real * fake.cov * root_real;
  const Scalar cross = trace_sqrt_psd(inner);
  const Scalar total = mean_term + real.cov.trace() + fake.cov.trace() - Scalar(2) * cross;
  if (total < 0) {
    const Scalar scale = std::max(Scalar(1), real.cov.trace() + fake.cov.trace() + mean_term);
    if (total < Scalar(-1e-6) * scale)
      throw std::logic_error("fid: negative distance " + std::to_string(double(total)));
    return Scalar(0);
  }
  return total;
}

using Stats = GaussianStats<double>;

/// Deterministic map from sample batches (feature-major, one column per
/// sample) to fixed-width feature vectors (same layout).
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual nn::Matrix extract(const nn::Matrix& samples) const = 0;
  virtual std::string id() const = 0;
};

class IdentityExtractor final : public FeatureExtractor {
 public:
  nn::Matrix extract(const nn::Matrix& samples) const override { return samples; }
  std::string id() const override { return "identity"; }
};

/// Raw pixels, flattened. Samples are already stored flat, so this differs
/// from identity only in its cache key.
class FlattenExtractor final : public FeatureExtractor {
 public:
  nn::Matrix extract(const nn::Matrix& samples) const override { return samples; }
  std::string id() const override { return "flatten"; }
};

struct ClassifierConfig {
  int feature_width = 64;
  int classes = 10;
  int epochs = 1;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1234;
};

/// Small convnet trained once on labelled real data; features are the
/// penultimate (post-activation) layer. Stands in for an Inception network.
class ConvClassifierExtractor final : public FeatureExtractor {
 public:
  ConvClassifierExtractor(nn::TensorShape sample_shape, nn::Network features, nn::Network head);

  static ConvClassifierExtractor train(const nn::Matrix& samples, const std::vector<int>& labels,
                                       nn::TensorShape sample_shape, const ClassifierConfig& cfg);

  nn::Matrix extract(const nn::Matrix& samples) const override;
  std::string id() const override { return "convnet"; }
  double accuracy(const nn::Matrix& samples, const std::vector<int>& labels) const;

  void save(const std::filesystem::path& path) const;
  static std::optional<ConvClassifierExtractor> load(const std::filesystem::path& path,
                                                     nn::TensorShape sample_shape,
                                                     const ClassifierConfig& cfg);

 private:
  nn::TensorShape shape_;
  nn::Network features_;
  nn::Network head_;
};

/// Real-data statistics, computed in chunks to bound memory.
Stats feature_stats(const FeatureExtractor& extractor, const nn::Matrix& samples,
                    int chunk = 500);

/// Worst-case fitness assigned to individuals whose evaluation failed.
inline constexpr double kFitnessSentinel = 1e9;

/// Draws `n_samples` standard-normal latents, generates, extracts features,
/// and returns the FID against `real_stats`. Non-finite output yields the
/// sentinel.
double generator_fitness(const nn::Network& generator, int latent_dim,
                         const FeatureExtractor& extractor, const Stats& real_stats,
                         int n_samples, nn::Rng& rng);

/// Binary cache record: (extractor id, dataset id) -> {mean, cov}.
void save_stats(const std::filesystem::path& path, const std::string& extractor_id,
                const std::string& dataset_id, const Stats& stats);
/// Returns nullopt when missing or keyed differently.
std::optional<Stats> load_stats(const std::filesystem::path& path,
                                const std::string& extractor_id, const std::string& dataset_id);

}  // namespace coegan
