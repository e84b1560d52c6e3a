#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace coegan::nn {

/// Activations are stored feature-major: one column per sample, rows hold the
/// sample's C×H×W values flattened channel-major (c*H*W + y*W + x).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

struct TensorShape {
  int channels = 0;
  int height = 1;
  int width = 1;

  [[nodiscard]] int size() const { return channels * height * width; }
  [[nodiscard]] bool positive() const { return channels > 0 && height > 0 && width > 0; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::string to_string(const TensorShape& s);

enum class Activation { ReLU, LeakyReLU, ELU, Sigmoid, Tanh };

inline constexpr Activation kAllActivations[] = {Activation::ReLU, Activation::LeakyReLU,
                                                 Activation::ELU, Activation::Sigmoid,
                                                 Activation::Tanh};

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// Output spatial size of the stride-2, kernel-3, padding-1 convolution: ceil(n/2).
constexpr int conv_out_size(int n) { return (n - 1) / 2 + 1; }
/// Transposed counterpart (output padding 1): exact doubling.
constexpr int deconv_out_size(int n) { return 2 * n; }

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Matrix forward(const Matrix& x) const = 0;
  /// `x`/`y` are the cached input/output of the forward pass. When `grads`
  /// is non-null it must hold one buffer per parameter; gradients are added.
  virtual Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                          std::vector<Matrix>* grads) const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string name() const = 0;

  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }

 protected:
  std::vector<Matrix> params_;
};

class Dense final : public Layer {
 public:
  Dense(int in_features, int out_features, Rng& rng);
  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                  std::vector<Matrix>* grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  std::string name() const override { return "Dense"; }
};

/// Stride-2 kernel-3 padding-1 convolution.
class Conv final : public Layer {
 public:
  Conv(TensorShape in, int out_channels, Rng& rng);
  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                  std::vector<Matrix>* grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv>(*this); }
  std::string name() const override { return "Conv"; }
  TensorShape output_shape() const { return out_; }

 private:
  TensorShape in_, out_;
};

/// Stride-2 kernel-3 padding-1 transposed convolution with output padding 1,
/// so the spatial dims exactly double.
class Deconv final : public Layer {
 public:
  Deconv(TensorShape in, int out_channels, Rng& rng);
  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                  std::vector<Matrix>* grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Deconv>(*this); }
  std::string name() const override { return "Deconv"; }
  TensorShape output_shape() const { return out_; }

 private:
  TensorShape in_, out_;
};

/// 1×1 convolution: a per-pixel linear map across channels.
class Pointwise final : public Layer {
 public:
  Pointwise(TensorShape in, int out_channels, Rng& rng);
  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                  std::vector<Matrix>* grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Pointwise>(*this); }
  std::string name() const override { return "Pointwise"; }

 private:
  TensorShape in_;
  int out_channels_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(Activation kind) : kind_(kind) {}
  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                  std::vector<Matrix>* grads) const override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ActivationLayer>(*this);
  }
  std::string name() const override { return std::string(to_string(kind_)); }
  Activation kind() const { return kind_; }

 private:
  Activation kind_;
};

class CenterCrop final : public Layer {
 public:
  CenterCrop(TensorShape in, int out_height, int out_width);
  Matrix forward(const Matrix& x) const override;
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                  std::vector<Matrix>* grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<CenterCrop>(*this); }
  std::string name() const override { return "CenterCrop"; }

 private:
  TensorShape in_;
  int out_h_, out_w_, top_, left_;
};

/// Per-layer cache of a forward pass: inputs[i] fed layer i, output is the
/// final result (inputs[i+1] is layer i's output).
struct Tape {
  std::vector<Matrix> inputs;
  Matrix output;
};

using Gradients = std::vector<std::vector<Matrix>>;

/// Sequential network with value semantics (layers are deep-copied).
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  int add(std::unique_ptr<Layer> layer);
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Tape& tape) const;
  /// Returns d(loss)/d(input). Parameter gradients are accumulated into
  /// `grads` when non-null (see zero_gradients).
  Matrix backward(const Tape& tape, const Matrix& dy, Gradients* grads) const;

  Gradients zero_gradients() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double alpha = 0.99;
  double eps = 1e-8;
};

class RmsProp {
 public:
  RmsProp(const Network& net, RmsPropConfig cfg);
  /// Resumes from a saved running average of squared gradients.
  RmsProp(RmsPropConfig cfg, Gradients square_avg);
  void step(Network& net, const Gradients& grads);
  const Gradients& square_avg() const { return square_avg_; }

 private:
  RmsPropConfig cfg_;
  Gradients square_avg_;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

/// Binary cross-entropy style terms over a 1×B row of probabilities.
/// `grad` (if non-null) receives d(loss)/d(prob), using the clamped value in
/// the denominator.
double mean_neg_log(const Matrix& p, Matrix* grad);
double mean_neg_log_one_minus(const Matrix& p, Matrix* grad);

/// Softmax cross-entropy over logits (classes × B) and integer labels.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels, Matrix* grad);

Matrix standard_normal(int rows, int cols, Rng& rng);

}  // namespace coegan::nn
