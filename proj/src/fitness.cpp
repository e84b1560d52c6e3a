#include "coegan/fitness.hpp"

#include "binary_io.hpp"

#include <fstream>
#include <numeric>

namespace coegan {

namespace {
constexpr std::uint32_t kStatsMagic = 0x53524743;  // "CGRS"
constexpr std::uint32_t kClassifierMagic = 0x43434743;  // "CGCC"

nn::Network classifier_features(nn::TensorShape in, int width, nn::Rng& rng) {
  nn::Network net;
  auto c1 = std::make_unique<nn::Conv>(in, 16, rng);
  const nn::TensorShape s1 = c1->output_shape();
  net.add(std::move(c1));
  net.add(std::make_unique<nn::ActivationLayer>(nn::Activation::ReLU));
  auto c2 = std::make_unique<nn::Conv>(s1, 32, rng);
  const nn::TensorShape s2 = c2->output_shape();
  net.add(std::move(c2));
  net.add(std::make_unique<nn::ActivationLayer>(nn::Activation::ReLU));
  net.add(std::make_unique<nn::Dense>(s2.size(), width, rng));
  net.add(std::make_unique<nn::ActivationLayer>(nn::Activation::ReLU));
  return net;
}
}  // namespace

ConvClassifierExtractor::ConvClassifierExtractor(nn::TensorShape sample_shape,
                                                 nn::Network features, nn::Network head)
    : shape_(sample_shape), features_(std::move(features)), head_(std::move(head)) {}

ConvClassifierExtractor ConvClassifierExtractor::train(const nn::Matrix& samples,
                                                       const std::vector<int>& labels,
                                                       nn::TensorShape sample_shape,
                                                       const ClassifierConfig& cfg) {
  if (static_cast<Eigen::Index>(labels.size()) != samples.cols())
    throw std::invalid_argument("classifier: labels do not match samples");
  nn::Rng rng(cfg.seed);
  nn::Network features = classifier_features(sample_shape, cfg.feature_width, rng);
  nn::Network head;
  head.add(std::make_unique<nn::Dense>(cfg.feature_width, cfg.classes, rng));

  nn::RmsProp opt_f(features, {cfg.learning_rate});
  nn::RmsProp opt_h(head, {cfg.learning_rate});
  std::vector<int> order(static_cast<std::size_t>(samples.cols()));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + cfg.batch_size <= order.size(); start += cfg.batch_size) {
      nn::Matrix x(samples.rows(), cfg.batch_size);
      std::vector<int> y(static_cast<std::size_t>(cfg.batch_size));
      for (int j = 0; j < cfg.batch_size; ++j) {
        x.col(j) = samples.col(order[start + j]);
        y[j] = labels[order[start + j]];
      }
      nn::Tape tf, th;
      const nn::Matrix feats = features.forward(x, tf);
      const nn::Matrix logits = head.forward(feats, th);
      nn::Matrix dlogits;
      nn::softmax_cross_entropy(logits, y, &dlogits);
      auto gh = head.zero_gradients();
      auto gf = features.zero_gradients();
      const nn::Matrix dfeats = head.backward(th, dlogits, &gh);
      features.backward(tf, dfeats, &gf);
      opt_h.step(head, gh);
      opt_f.step(features, gf);
    }
  }
  return ConvClassifierExtractor(sample_shape, std::move(features), std::move(head));
}

nn::Matrix ConvClassifierExtractor::extract(const nn::Matrix& samples) const {
  return features_.forward(samples);
}

double ConvClassifierExtractor::accuracy(const nn::Matrix& samples,
                                         const std::vector<int>& labels) const {
  const nn::Matrix logits = head_.forward(features_.forward(samples));
  int correct = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index arg = 0;
    logits.col(j).maxCoeff(&arg);
    if (arg == labels[j]) ++correct;
  }
  return logits.cols() ? double(correct) / double(logits.cols()) : 0.0;
}

void ConvClassifierExtractor::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  bin::write_u32(os, kClassifierMagic);
  for (const nn::Network* net : {&features_, &head_})
    for (std::size_t i = 0; i < net->size(); ++i)
      for (const nn::Matrix& p : net->layer(i).parameters()) bin::write_matrix(os, p);
  if (!os) throw std::runtime_error("failed to write " + path.string());
}

std::optional<ConvClassifierExtractor> ConvClassifierExtractor::load(
    const std::filesystem::path& path, nn::TensorShape sample_shape,
    const ClassifierConfig& cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  try {
    if (bin::read_u32(is) != kClassifierMagic) return std::nullopt;
    nn::Rng rng(cfg.seed);
    nn::Network features = classifier_features(sample_shape, cfg.feature_width, rng);
    nn::Network head;
    head.add(std::make_unique<nn::Dense>(cfg.feature_width, cfg.classes, rng));
    for (nn::Network* net : {&features, &head})
      for (std::size_t i = 0; i < net->size(); ++i)
        for (nn::Matrix& p : net->layer(i).parameters()) {
          nn::Matrix m = bin::read_matrix(is);
          if (m.rows() != p.rows() || m.cols() != p.cols()) return std::nullopt;
          p = std::move(m);
        }
    return ConvClassifierExtractor(sample_shape, std::move(features), std::move(head));
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

Stats feature_stats(const FeatureExtractor& extractor, const nn::Matrix& samples, int chunk) {
  std::vector<nn::Matrix> parts;
  Eigen::Index width = 0;
  for (Eigen::Index start = 0; start < samples.cols(); start += chunk) {
    const Eigen::Index n = std::min<Eigen::Index>(chunk, samples.cols() - start);
    parts.push_back(extractor.extract(samples.middleCols(start, n)));
    width = parts.back().rows();
  }
  nn::Matrix all(width, samples.cols());
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    all.middleCols(offset, p.cols()) = p;
    offset += p.cols();
  }
  return estimate_gaussian(all.transpose());
}

double generator_fitness(const nn::Network& generator, int latent_dim,
                         const FeatureExtractor& extractor, const Stats& real_stats,
                         int n_samples, nn::Rng& rng) {
  constexpr int kChunk = 500;
  nn::Matrix features(real_stats.dim(), n_samples);
  for (int start = 0; start < n_samples; start += kChunk) {
    const int n = std::min(kChunk, n_samples - start);
    const nn::Matrix out = generator.forward(nn::standard_normal(latent_dim, n, rng));
    if (!out.allFinite()) return kFitnessSentinel;
    const nn::Matrix f = extractor.extract(out);
    if (f.rows() != real_stats.dim())
      throw std::invalid_argument("generator_fitness: feature width mismatch");
    features.middleCols(start, n) = f;
  }
  try {
    const double value = fid(real_stats, estimate_gaussian(features.transpose()));
    return std::isfinite(value) ? value : kFitnessSentinel;
  } catch (const NotPsdError&) {
    return kFitnessSentinel;
  }
}

void save_stats(const std::filesystem::path& path, const std::string& extractor_id,
                const std::string& dataset_id, const Stats& stats) {
  std::ofstream os(path, std::ios::binary);
  bin::write_u32(os, kStatsMagic);
  bin::write_string(os, extractor_id);
  bin::write_string(os, dataset_id);
  bin::write_matrix(os, stats.mean);
  bin::write_matrix(os, stats.cov);
  if (!os) throw std::runtime_error("failed to write " + path.string());
}

std::optional<Stats> load_stats(const std::filesystem::path& path,
                                const std::string& extractor_id,
                                const std::string& dataset_id) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  try {
    if (bin::read_u32(is) != kStatsMagic) return std::nullopt;
    if (bin::read_string(is) != extractor_id) return std::nullopt;
    if (bin::read_string(is) != dataset_id) return std::nullopt;
    Stats s;
    s.mean = bin::read_matrix(is);
    s.cov = bin::read_matrix(is);
    if (s.cov.rows() != s.mean.size() || s.cov.cols() != s.mean.size()) return std::nullopt;
    return s;
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

}  // namespace coegan
