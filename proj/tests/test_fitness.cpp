#include "coegan/data.hpp"
#include "coegan/fitness.hpp"

#include "doctest.h"
#include "fid_oracle.hpp"

#include <filesystem>

using namespace coegan;
using nn::Matrix;

namespace {

// Ignores its latent input and emits the next block of a stored sample set.
class Replay final : public nn::Layer {
 public:
  explicit Replay(Matrix data) : data_(std::move(data)) {}
  Matrix forward(const Matrix& z) const override {
    Matrix out(data_.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.cols(); ++i) out.col(i) = data_.col((offset_ + i) % data_.cols());
    offset_ += z.cols();
    return out;
  }
  Matrix backward(const Matrix&, const Matrix&, const Matrix&, std::vector<Matrix>*) const override {
    return {};
  }
  std::unique_ptr<nn::Layer> clone() const override { return std::make_unique<Replay>(*this); }
  std::string name() const override { return "Replay"; }

 private:
  Matrix data_;
  mutable Eigen::Index offset_ = 0;
};

class Constant final : public nn::Layer {
 public:
  explicit Constant(Eigen::Vector2d v) : v_(v) {}
  Matrix forward(const Matrix& z) const override { return v_.replicate(1, z.cols()); }
  Matrix backward(const Matrix&, const Matrix&, const Matrix&, std::vector<Matrix>*) const override {
    return {};
  }
  std::unique_ptr<nn::Layer> clone() const override { return std::make_unique<Constant>(*this); }
  std::string name() const override { return "Constant"; }

 private:
  Eigen::Vector2d v_;
};

}  // namespace

TEST_CASE("gaussian estimation") {
  Matrix x(2, 2);
  x << 0, 0, 2, 2;
  const Stats s = estimate_gaussian(x);
  CHECK(s.mean.isApprox(Eigen::Vector2d(1, 1)));
  Matrix want(2, 2);
  want << 2, 2, 2, 2;
  CHECK(s.cov.isApprox(want));

  CHECK(estimate_gaussian(Matrix::Ones(5, 3)).cov.isZero());
  CHECK_THROWS_AS(estimate_gaussian(Matrix::Ones(1, 3)), std::invalid_argument);
}

TEST_CASE("gaussian estimation converges on a known distribution") {
  nn::Rng rng(1);
  const int n = 100000;
  Eigen::Matrix2d l;
  l << 1.0, 0.0, 0.5, 2.0;
  const Eigen::Vector2d mu(0.3, -1.0);
  const Matrix x = ((l * nn::standard_normal(2, n, rng)).colwise() + mu).transpose();
  const Stats s = estimate_gaussian(x);
  const Eigen::Matrix2d sigma = l * l.transpose();
  for (int i = 0; i < 2; ++i) CHECK(std::abs(s.mean(i) - mu(i)) < 3 * std::sqrt(sigma(i, i) / n));
  // Var of a sample covariance entry: (σᵢⱼ² + σᵢᵢσⱼⱼ)/n.
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(s.cov(i, j) - sigma(i, j)) <
            3 * std::sqrt((sigma(i, j) * sigma(i, j) + sigma(i, i) * sigma(j, j)) / n));
}

TEST_CASE("float statistics use the same templates") {
  Eigen::MatrixXf x(3, 1);
  x << 1.f, 2.f, 3.f;
  const auto s = estimate_gaussian(x);
  CHECK(s.mean(0) == doctest::Approx(2.0));
  CHECK(s.cov(0, 0) == doctest::Approx(1.0));
  CHECK(fid(s, s) == doctest::Approx(0.0));
}

TEST_CASE("matrix square root") {
  CHECK(matrix_sqrt_psd(Eigen::Matrix3d::Identity()).isApprox(Eigen::Matrix3d::Identity()));
  CHECK(matrix_sqrt_psd(Eigen::Vector2d(4, 9).asDiagonal().toDenseMatrix())
            .isApprox(Eigen::Vector2d(2, 3).asDiagonal().toDenseMatrix()));
  nn::Rng rng(2);
  for (int d : {1, 5, 16, 40}) {
    const Matrix a = testutil::random_psd(d, rng);
    const Matrix s = matrix_sqrt_psd(a);
    CHECK((s * s - a).norm() / a.norm() < 1e-6);
  }
  // Rank deficient input: roundoff negatives are clamped.
  const Matrix b = nn::standard_normal(6, 2, rng);
  const Matrix low = b * b.transpose();
  const Matrix s = matrix_sqrt_psd(low);
  CHECK((s * s - low).norm() / low.norm() < 1e-6);
  // Genuinely indefinite input is rejected.
  CHECK_THROWS_AS(matrix_sqrt_psd(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()), NotPsdError);
}

TEST_CASE("fid examples") {
  Stats a{Eigen::VectorXd::Zero(1), Matrix::Ones(1, 1)};
  Stats b{Eigen::VectorXd::Ones(1), Matrix::Ones(1, 1)};
  CHECK(std::abs(fid(a, b) - 1.0) < 1e-9);
  CHECK(fid(a, a) == 0.0);

  Stats c{Eigen::VectorXd::Zero(2), Matrix::Identity(2, 2)};
  Stats d{Eigen::VectorXd::Ones(2), 4 * Matrix::Identity(2, 2)};
  CHECK(fid(c, d) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS(fid(a, c));
}

TEST_CASE("fid matches the commuting closed form and is symmetric") {
  nn::Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + t % 8;
    const auto p = testutil::commuting_pair(d, rng);
    CHECK(std::abs(fid(p.real, p.fake) - testutil::closed_form_fid(p)) < 1e-6);
    CHECK(std::abs(fid(p.real, p.fake) - fid(p.fake, p.real)) < 1e-6);
    CHECK(std::abs(fid(p.real, p.real)) < 1e-9);
  }
  // General (non-commuting) PSD pairs stay non-negative and symmetric.
  for (int t = 0; t < 50; ++t) {
    Stats x{nn::standard_normal(6, 1, rng), testutil::random_psd(6, rng)};
    Stats y{nn::standard_normal(6, 1, rng), testutil::random_psd(6, rng)};
    CHECK(fid(x, y) >= 0.0);
    CHECK(fid(x, y) == doctest::Approx(fid(y, x)).epsilon(1e-8));
  }
}

TEST_CASE("generator fitness: replay beats a constant point") {
  nn::Rng rng(4);
  const Dataset ring = synthetic_ring({}, 4000, rng);
  IdentityExtractor ex;
  const Stats real = feature_stats(ex, ring.samples.leftCols(2000));

  nn::Network replay;
  replay.add(std::make_unique<Replay>(ring.samples.rightCols(2000)));
  const double self_fid = generator_fitness(replay, 100, ex, real, 1000, rng);
  CHECK(self_fid < 0.05);

  nn::Network point;
  point.add(std::make_unique<Constant>(Eigen::Vector2d(0.8, 0.0)));
  CHECK(generator_fitness(point, 100, ex, real, 1000, rng) > self_fid);

  nn::Network broken;
  broken.add(std::make_unique<Constant>(Eigen::Vector2d(std::nan(""), 0.0)));
  CHECK(generator_fitness(broken, 100, ex, real, 1000, rng) == kFitnessSentinel);
}

TEST_CASE("self-fid shrinks with sample size") {
  IdentityExtractor ex;
  double prev = 1e9;
  for (int n : {100, 1000, 10000}) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      nn::Rng rng(seed);
      const Dataset ring = synthetic_ring({}, 2 * n, rng);
      mean += fid(feature_stats(ex, ring.samples.leftCols(n)), feature_stats(ex, ring.samples.rightCols(n)));
    }
    mean /= 5;
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("stats cache round trip and keying") {
  const auto path = std::filesystem::temp_directory_path() / "coegan_stats.bin";
  nn::Rng rng(5);
  const Stats s{nn::standard_normal(3, 1, rng), testutil::random_psd(3, rng)};
  save_stats(path, "identity", "ring8", s);
  const auto back = load_stats(path, "identity", "ring8");
  REQUIRE(back);
  CHECK(back->mean == s.mean);
  CHECK(back->cov == s.cov);
  CHECK_FALSE(load_stats(path, "convnet", "ring8"));
  CHECK_FALSE(load_stats(path, "identity", "mnist"));
  std::filesystem::remove(path);
  CHECK_FALSE(load_stats(path, "identity", "ring8"));
}

TEST_CASE("convnet extractor learns and round-trips") {
  // Two classes of 8×8 images: bright left half vs bright right half.
  nn::Rng rng(6);
  const int n = 600;
  Matrix x = nn::standard_normal(64, n, rng) * 0.3;
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    for (int y = 0; y < 8; ++y)
      for (int c = 0; c < 4; ++c) x(y * 8 + c + 4 * (i % 2), i) += 1.0;
  }
  ClassifierConfig cfg;
  cfg.classes = 2;
  cfg.epochs = 3;
  const auto net = ConvClassifierExtractor::train(x, labels, {1, 8, 8}, cfg);
  CHECK(net.accuracy(x, labels) > 0.9);
  const Matrix f = net.extract(x.leftCols(10));
  CHECK(f.rows() == cfg.feature_width);
  CHECK((net.extract(x.leftCols(10)) - f).norm() == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "coegan_convnet.bin";
  net.save(path);
  const auto back = ConvClassifierExtractor::load(path, {1, 8, 8}, cfg);
  REQUIRE(back);
  CHECK((back->extract(x.leftCols(10)) - f).norm() == 0.0);
  CHECK_FALSE(ConvClassifierExtractor::load(path, {1, 28, 28}, cfg));
  std::filesystem::remove(path);
}
