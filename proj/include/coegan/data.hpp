#pragma once

#include "coegan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coegan {

struct Dataset {
  std::string id;
  nn::TensorShape sample_shape;
  nn::Matrix samples;  // sample_shape.size() × N
  std::vector<int> labels;  // empty for unlabelled data

  [[nodiscard]] Eigen::Index size() const { return samples.cols(); }
};

class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;

inline double scale_pixel(std::uint8_t p) { return p / 127.5 - 1.0; }
inline std::uint8_t unscale_pixel(double v) {
  const double p = (v + 1.0) * 127.5;
  return static_cast<std::uint8_t>(std::clamp(std::lround(p), 0L, 255L));
}

/// Reads an IDX3 image file (big-endian header), scaling pixels to [-1, 1].
Dataset load_idx_images(const std::filesystem::path& images);
/// Reads an IDX1 label file.
std::vector<int> load_idx_labels(const std::filesystem::path& labels);

/// Loads `train-images-idx3-ubyte` (and, when present, the matching label
/// file, which must agree on the sample count) from `dir`.
Dataset load_mnist(const std::filesystem::path& dir);

struct RingConfig {
  int modes = 8;
  double radius = 0.8;
  double sigma = 0.05;
};

std::vector<Eigen::Vector2d> ring_centers(int modes, double radius);

/// Equal-weight mixture of isotropic Gaussians on a circle; 2×1×1 samples.
Dataset synthetic_ring(const RingConfig& cfg, int n, nn::Rng& rng);

/// Shuffled, non-overlapping batches; a new permutation every epoch. The
/// permutation of epoch e depends only on (seed, e), so the iterator state is
/// just (epoch, position).
struct BatchState {
  std::uint64_t epoch = 0;
  std::uint64_t position = 0;
};

class BatchIterator {
 public:
  using State = BatchState;

  BatchIterator(const Dataset& data, int batch_size, std::uint64_t seed, State state = {});

  nn::Matrix next();
  [[nodiscard]] State state() const { return state_; }
  [[nodiscard]] int batches_per_epoch() const;

 private:
  void reshuffle();

  const Dataset* data_;
  int batch_size_;
  std::uint64_t seed_;
  State state_;
  std::vector<Eigen::Index> order_;
};

}  // namespace coegan
