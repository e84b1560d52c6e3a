#include "coegan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coegan::nn {

namespace {

constexpr double kLeakySlope = 0.01;

// Top 53 bits of each draw give a uniform double in [0, 1); much cheaper
// than uniform_real_distribution, which goes through long double here.
Matrix uniform(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i)
    p[i] = (std::ldexp(static_cast<double>(rng() >> 11), -53) * 2.0 - 1.0) * bound;
  return m;
}

// Patch extraction shared by Conv (forward) and Deconv (backward). The "big"
// grid (C×Hb×Wb) relates to the "small" grid (Hs×Ws) through
// big = 2*small - 1 + k, k ∈ {0,1,2}. Result: (Hs*Ws) × (C*9).
Matrix gather(const double* big, int channels, int hb, int wb, int hs, int ws) {
  Matrix pt = Matrix::Zero(static_cast<Eigen::Index>(hs) * ws, channels * 9);
  for (int c = 0; c < channels; ++c) {
    const double* plane = big + static_cast<std::ptrdiff_t>(c) * hb * wb;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* col = pt.col(c * 9 + ky * 3 + kx).data();
        for (int sy = 0; sy < hs; ++sy) {
          const int by = 2 * sy - 1 + ky;
          if (by < 0 || by >= hb) continue;
          for (int sx = 0; sx < ws; ++sx) {
            const int bx = 2 * sx - 1 + kx;
            if (bx < 0 || bx >= wb) continue;
            col[sy * ws + sx] = plane[by * wb + bx];
          }
        }
      }
    }
  }
  return pt;
}

// Adjoint of gather: accumulates patch values back into the big grid.
void scatter(const Matrix& pt, double* big, int channels, int hb, int wb, int hs, int ws) {
  for (int c = 0; c < channels; ++c) {
    double* plane = big + static_cast<std::ptrdiff_t>(c) * hb * wb;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* col = pt.col(c * 9 + ky * 3 + kx).data();
        for (int sy = 0; sy < hs; ++sy) {
          const int by = 2 * sy - 1 + ky;
          if (by < 0 || by >= hb) continue;
          for (int sx = 0; sx < ws; ++sx) {
            const int bx = 2 * sx - 1 + kx;
            if (bx < 0 || bx >= wb) continue;
            plane[by * wb + bx] += col[sy * ws + sx];
          }
        }
      }
    }
  }
}

using MapMatrix = Eigen::Map<Matrix>;
using ConstMapMatrix = Eigen::Map<const Matrix>;

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

std::string to_string(const TensorShape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "ReLU";
    case Activation::LeakyReLU: return "LeakyReLU";
    case Activation::ELU: return "ELU";
    case Activation::Sigmoid: return "Sigmoid";
    case Activation::Tanh: return "Tanh";
  }
  return "?";
}

Activation activation_from_string(std::string_view s) {
  for (Activation a : kAllActivations)
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown activation: " + std::string(s));
}

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  params_.push_back(uniform(out_features, in_features, bound, rng));
  params_.push_back(uniform(out_features, 1, bound, rng));
}

Matrix Dense::forward(const Matrix& x) const {
  Matrix y = params_[0] * x;
  y.colwise() += params_[1].col(0);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix&, const Matrix& dy,
                       std::vector<Matrix>* grads) const {
  if (grads) {
    (*grads)[0].noalias() += dy * x.transpose();
    (*grads)[1] += dy.rowwise().sum();
  }
  return params_[0].transpose() * dy;
}

// ---------------------------------------------------------------- Conv

Conv::Conv(TensorShape in, int out_channels, Rng& rng)
    : in_(in), out_{out_channels, conv_out_size(in.height), conv_out_size(in.width)} {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in.channels * 9));
  params_.push_back(uniform(out_channels, in.channels * 9, bound, rng));
  params_.push_back(uniform(out_channels, 1, bound, rng));
}

Matrix Conv::forward(const Matrix& x) const {
  const int hw = out_.height * out_.width;
  Matrix y(out_.size(), x.cols());
  const Matrix wt = params_[0].transpose();
  const Eigen::RowVectorXd bias = params_[1].col(0).transpose();
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    const Matrix pt = gather(x.col(n).data(), in_.channels, in_.height, in_.width, out_.height,
                             out_.width);
    MapMatrix ymap(y.col(n).data(), hw, out_.channels);
    ymap.noalias() = pt * wt;
    ymap.rowwise() += bias;
  }
  return y;
}

Matrix Conv::backward(const Matrix& x, const Matrix&, const Matrix& dy,
                      std::vector<Matrix>* grads) const {
  const int hw = out_.height * out_.width;
  Matrix dx = Matrix::Zero(in_.size(), x.cols());
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    ConstMapMatrix dmap(dy.col(n).data(), hw, out_.channels);
    if (grads) {
      const Matrix pt = gather(x.col(n).data(), in_.channels, in_.height, in_.width,
                               out_.height, out_.width);
      (*grads)[0].noalias() += dmap.transpose() * pt;
      (*grads)[1] += dmap.colwise().sum().transpose();
    }
    const Matrix dpt = dmap * params_[0];
    scatter(dpt, dx.col(n).data(), in_.channels, in_.height, in_.width, out_.height,
            out_.width);
  }
  return dx;
}

// ---------------------------------------------------------------- Deconv

Deconv::Deconv(TensorShape in, int out_channels, Rng& rng)
    : in_(in), out_{out_channels, deconv_out_size(in.height), deconv_out_size(in.width)} {
  const double bound = 1.0 / std::sqrt(static_cast<double>(out_channels * 9));
  params_.push_back(uniform(out_channels * 9, in.channels, bound, rng));
  params_.push_back(uniform(out_channels, 1, bound, rng));
}

Matrix Deconv::forward(const Matrix& x) const {
  const int hw_in = in_.height * in_.width;
  const int hw_out = out_.height * out_.width;
  Matrix y = Matrix::Zero(out_.size(), x.cols());
  const Matrix wt = params_[0].transpose();
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    ConstMapMatrix xmap(x.col(n).data(), hw_in, in_.channels);
    const Matrix cols = xmap * wt;
    scatter(cols, y.col(n).data(), out_.channels, out_.height, out_.width, in_.height,
            in_.width);
    MapMatrix ymap(y.col(n).data(), hw_out, out_.channels);
    ymap.rowwise() += params_[1].col(0).transpose();
  }
  return y;
}

Matrix Deconv::backward(const Matrix& x, const Matrix&, const Matrix& dy,
                        std::vector<Matrix>* grads) const {
  const int hw_in = in_.height * in_.width;
  const int hw_out = out_.height * out_.width;
  Matrix dx(in_.size(), x.cols());
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    const Matrix dcols = gather(dy.col(n).data(), out_.channels, out_.height, out_.width,
                                in_.height, in_.width);
    if (grads) {
      ConstMapMatrix xmap(x.col(n).data(), hw_in, in_.channels);
      ConstMapMatrix dmap(dy.col(n).data(), hw_out, out_.channels);
      (*grads)[0].noalias() += dcols.transpose() * xmap;
      (*grads)[1] += dmap.colwise().sum().transpose();
    }
    MapMatrix dxmap(dx.col(n).data(), hw_in, in_.channels);
    dxmap.noalias() = dcols * params_[0];
  }
  return dx;
}

// ---------------------------------------------------------------- Pointwise

Pointwise::Pointwise(TensorShape in, int out_channels, Rng& rng)
    : in_(in), out_channels_(out_channels) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in.channels));
  params_.push_back(uniform(out_channels, in.channels, bound, rng));
  params_.push_back(uniform(out_channels, 1, bound, rng));
}

Matrix Pointwise::forward(const Matrix& x) const {
  const int hw = in_.height * in_.width;
  Matrix y(static_cast<Eigen::Index>(hw) * out_channels_, x.cols());
  const Matrix wt = params_[0].transpose();
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    ConstMapMatrix xmap(x.col(n).data(), hw, in_.channels);
    MapMatrix ymap(y.col(n).data(), hw, out_channels_);
    ymap.noalias() = xmap * wt;
    ymap.rowwise() += params_[1].col(0).transpose();
  }
  return y;
}

Matrix Pointwise::backward(const Matrix& x, const Matrix&, const Matrix& dy,
                           std::vector<Matrix>* grads) const {
  const int hw = in_.height * in_.width;
  Matrix dx(in_.size(), x.cols());
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    ConstMapMatrix dmap(dy.col(n).data(), hw, out_channels_);
    if (grads) {
      ConstMapMatrix xmap(x.col(n).data(), hw, in_.channels);
      (*grads)[0].noalias() += dmap.transpose() * xmap;
      (*grads)[1] += dmap.colwise().sum().transpose();
    }
    MapMatrix dxmap(dx.col(n).data(), hw, in_.channels);
    dxmap.noalias() = dmap * params_[0];
  }
  return dx;
}

// ---------------------------------------------------------------- activations

Matrix ActivationLayer::forward(const Matrix& x) const {
  switch (kind_) {
    case Activation::ReLU: return x.cwiseMax(0.0);
    case Activation::LeakyReLU:
      return x.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
    case Activation::ELU:
      return x.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
    case Activation::Sigmoid: return x.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::Tanh: return x.array().tanh().matrix();
  }
  return x;
}

Matrix ActivationLayer::backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                                 std::vector<Matrix>*) const {
  switch (kind_) {
    case Activation::ReLU:
      return (x.array() > 0).select(dy.array(), 0.0).matrix();
    case Activation::LeakyReLU:
      return (x.array() > 0).select(dy.array(), kLeakySlope * dy.array()).matrix();
    case Activation::ELU:
      return (x.array() > 0).select(dy.array(), dy.array() * (y.array() + 1.0)).matrix();
    case Activation::Sigmoid: return (dy.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::Tanh: return (dy.array() * (1.0 - y.array().square())).matrix();
  }
  return dy;
}

// ---------------------------------------------------------------- crop

CenterCrop::CenterCrop(TensorShape in, int out_height, int out_width)
    : in_(in),
      out_h_(out_height),
      out_w_(out_width),
      top_((in.height - out_height) / 2),
      left_((in.width - out_width) / 2) {
  if (out_height > in.height || out_width > in.width)
    throw std::invalid_argument("CenterCrop: target larger than input");
}

Matrix CenterCrop::forward(const Matrix& x) const {
  Matrix y(static_cast<Eigen::Index>(in_.channels) * out_h_ * out_w_, x.cols());
  for (Eigen::Index n = 0; n < x.cols(); ++n)
    for (int c = 0; c < in_.channels; ++c)
      for (int r = 0; r < out_h_; ++r)
        y.col(n).segment((c * out_h_ + r) * out_w_, out_w_) =
            x.col(n).segment((c * in_.height + r + top_) * in_.width + left_, out_w_);
  return y;
}

Matrix CenterCrop::backward(const Matrix& x, const Matrix&, const Matrix& dy,
                            std::vector<Matrix>*) const {
  Matrix dx = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index n = 0; n < x.cols(); ++n)
    for (int c = 0; c < in_.channels; ++c)
      for (int r = 0; r < out_h_; ++r)
        dx.col(n).segment((c * in_.height + r + top_) * in_.width + left_, out_w_) =
            dy.col(n).segment((c * out_h_ + r) * out_w_, out_w_);
  return dx;
}

// ---------------------------------------------------------------- network

Network::Network(const Network& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

int Network::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

Matrix Network::forward(const Matrix& x) const {
  Matrix h = x;
  for (const auto& l : layers_) h = l->forward(h);
  return h;
}

Matrix Network::forward(const Matrix& x, Tape& tape) const {
  tape.inputs.clear();
  tape.inputs.reserve(layers_.size());
  Matrix h = x;
  for (const auto& l : layers_) {
    tape.inputs.push_back(h);
    h = l->forward(h);
  }
  tape.output = h;
  return h;
}

Matrix Network::backward(const Tape& tape, const Matrix& dy, Gradients* grads) const {
  Matrix d = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Matrix& out = (i + 1 < layers_.size()) ? tape.inputs[i + 1] : tape.output;
    d = layers_[i]->backward(tape.inputs[i], out, d, grads ? &(*grads)[i] : nullptr);
  }
  return d;
}

Gradients Network::zero_gradients() const {
  Gradients g(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (const Matrix& p : layers_[i]->parameters())
      g[i].push_back(Matrix::Zero(p.rows(), p.cols()));
  return g;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    for (const Matrix& p : l->parameters()) n += static_cast<std::size_t>(p.size());
  return n;
}

bool Network::all_finite() const {
  for (const auto& l : layers_)
    for (const Matrix& p : l->parameters())
      if (!p.allFinite()) return false;
  return true;
}

// ---------------------------------------------------------------- optimizer

RmsProp::RmsProp(const Network& net, RmsPropConfig cfg)
    : cfg_(cfg), square_avg_(net.zero_gradients()) {}

RmsProp::RmsProp(RmsPropConfig cfg, Gradients square_avg)
    : cfg_(cfg), square_avg_(std::move(square_avg)) {}

void RmsProp::step(Network& net, const Gradients& grads) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& params = net.layer(i).parameters();
    for (std::size_t j = 0; j < params.size(); ++j) {
      Matrix& sq = square_avg_[i][j];
      const Matrix& g = grads[i][j];
      sq = cfg_.alpha * sq + (1.0 - cfg_.alpha) * g.cwiseProduct(g);
      params[j].array() -= cfg_.learning_rate * g.array() / (sq.array().sqrt() + cfg_.eps);
    }
  }
}

// ---------------------------------------------------------------- losses

double mean_neg_log(const Matrix& p, Matrix* grad) {
  const Eigen::ArrayXXd c = p.array().max(kProbClamp).min(1.0 - kProbClamp);
  const double n = static_cast<double>(p.size());
  if (grad) *grad = (-1.0 / (n * c)).matrix();
  return -c.log().sum() / n;
}

double mean_neg_log_one_minus(const Matrix& p, Matrix* grad) {
  const Eigen::ArrayXXd c = p.array().max(kProbClamp).min(1.0 - kProbClamp);
  const double n = static_cast<double>(p.size());
  if (grad) *grad = (1.0 / (n * (1.0 - c))).matrix();
  return -(1.0 - c).log().sum() / n;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                             Matrix* grad) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols())
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  const double n = static_cast<double>(logits.cols());
  Matrix prob(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    prob.col(j) = (logits.col(j).array() - m).exp().matrix();
    const double z = prob.col(j).sum();
    prob.col(j) /= z;
    loss -= (logits(labels[j], j) - m) - std::log(z);
  }
  if (grad) {
    *grad = prob;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) (*grad)(labels[j], j) -= 1.0;
    *grad /= n;
  }
  return loss / n;
}

Matrix standard_normal(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace coegan::nn
