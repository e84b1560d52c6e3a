#include "coegan/data.hpp"

#include "coegan/random.hpp"

#include <fstream>
#include <numbers>
#include <numeric>

namespace coegan {

namespace {

std::uint32_t read_be32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataFormatError(path.string() + ": truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open " + path.string());
  return is;
}

}  // namespace

Dataset load_idx_images(const std::filesystem::path& images) {
  std::ifstream is = open(images);
  const std::uint32_t magic = read_be32(is, images);
  if (magic != kIdxImagesMagic)
    throw DataFormatError(images.string() + ": bad magic " + std::to_string(magic) +
                          " (expected 2051)");
  const std::uint32_t n = read_be32(is, images);
  const std::uint32_t rows = read_be32(is, images);
  const std::uint32_t cols = read_be32(is, images);
  if (rows == 0 || cols == 0) throw DataFormatError(images.string() + ": empty image dims");

  Dataset d;
  d.id = "idx:" + images.filename().string();
  d.sample_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  const std::size_t per = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> raw(per * n);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw DataFormatError(images.string() + ": truncated payload (expected " +
                          std::to_string(n) + " images)");
  d.samples.resize(static_cast<Eigen::Index>(per), n);
  for (std::uint32_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < per; ++i)
      d.samples(static_cast<Eigen::Index>(i), j) = scale_pixel(raw[j * per + i]);
  return d;
}

std::vector<int> load_idx_labels(const std::filesystem::path& labels) {
  std::ifstream is = open(labels);
  const std::uint32_t magic = read_be32(is, labels);
  if (magic != kIdxLabelsMagic)
    throw DataFormatError(labels.string() + ": bad magic " + std::to_string(magic) +
                          " (expected 2049)");
  const std::uint32_t n = read_be32(is, labels);
  std::vector<unsigned char> raw(n);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n)))
    throw DataFormatError(labels.string() + ": truncated payload");
  return {raw.begin(), raw.end()};
}

Dataset load_mnist(const std::filesystem::path& dir) {
  Dataset d = load_idx_images(dir / "train-images-idx3-ubyte");
  d.id = "mnist";
  const auto label_path = dir / "train-labels-idx1-ubyte";
  if (std::filesystem::exists(label_path)) {
    d.labels = load_idx_labels(label_path);
    if (static_cast<Eigen::Index>(d.labels.size()) != d.size())
      throw DataFormatError("MNIST image/label count mismatch");
  }
  return d;
}

std::vector<Eigen::Vector2d> ring_centers(int modes, double radius) {
  std::vector<Eigen::Vector2d> c;
  for (int m = 0; m < modes; ++m) {
    const double angle = 2.0 * std::numbers::pi * m / modes;
    c.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
  }
  return c;
}

Dataset synthetic_ring(const RingConfig& cfg, int n, nn::Rng& rng) {
  if (cfg.modes < 1 || cfg.sigma <= 0) throw std::invalid_argument("synthetic_ring: bad config");
  const auto centers = ring_centers(cfg.modes, cfg.radius);
  Dataset d;
  d.id = "ring" + std::to_string(cfg.modes);
  d.sample_shape = {2, 1, 1};
  d.samples.resize(2, n);
  std::uniform_int_distribution<int> mode(0, cfg.modes - 1);
  std::normal_distribution<double> noise(0.0, cfg.sigma);
  for (int j = 0; j < n; ++j) {
    const auto& c = centers[static_cast<std::size_t>(mode(rng))];
    d.samples(0, j) = c.x() + noise(rng);
    d.samples(1, j) = c.y() + noise(rng);
  }
  return d;
}

BatchIterator::BatchIterator(const Dataset& data, int batch_size, std::uint64_t seed, State state)
    : data_(&data), batch_size_(batch_size), seed_(seed), state_(state) {
  if (batch_size < 1 || batch_size > data.size())
    throw std::invalid_argument("BatchIterator: batch size must be in [1, dataset size]");
  reshuffle();
}

int BatchIterator::batches_per_epoch() const {
  return static_cast<int>(data_->size() / batch_size_);
}

void BatchIterator::reshuffle() {
  order_.resize(static_cast<std::size_t>(data_->size()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  nn::Rng rng(derive_seed({seed_, state_.epoch}));
  std::shuffle(order_.begin(), order_.end(), rng);
}

nn::Matrix BatchIterator::next() {
  if (state_.position + static_cast<std::uint64_t>(batch_size_) > order_.size()) {
    ++state_.epoch;
    state_.position = 0;
    reshuffle();
  }
  nn::Matrix batch(data_->samples.rows(), batch_size_);
  for (int j = 0; j < batch_size_; ++j)
    batch.col(j) = data_->samples.col(order_[state_.position + static_cast<std::uint64_t>(j)]);
  state_.position += static_cast<std::uint64_t>(batch_size_);
  return batch;
}

}  // namespace coegan
