#pragma once

#include "coegan/data.hpp"
#include "coegan/evaluation.hpp"
#include "coegan/genome.hpp"
#include "coegan/variation.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace coegan {

/// Defaults reproduce the reference experimental setup (MNIST, 100
/// generations, 20+20 individuals).
struct RunConfig {
  int generations = 100;
  int pop_gen = 20;
  int pop_disc = 20;
  MutationRates rates;
  double crossover_rate = 0.0;
  GeneRanges ranges;
  int k = 3;
  int k_t = 2;
  int fid_samples = 1000;
  int genome_limit = 4;
  int species = 4;
  int batch_size = 64;
  int batches_per_gen = 20;
  std::string optimizer = "rmsprop";
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::string dataset = "mnist";
  std::string extractor = "convnet";
  PairingStrategy strategy = PairingStrategy::AllVsBest;
  int latent_dim = 100;
  int base_channels = 32;
  bool elitism = true;
  double initial_threshold = 1.0;
  double threshold_step = 0.5;
  RingConfig ring;
  int ring_samples = 10000;
  std::string data_root;  // empty: $COEGAN_DATA_ROOT
  int keep_checkpoints = 0;  // 0 keeps every generation
  int grid_rows = 10;
  int grid_cols = 10;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Field-level problems; empty when valid.
std::vector<std::string> validate_config(const RunConfig& cfg);

nlohmann::json config_to_json(const RunConfig& cfg);
/// Starts from `base` and applies the keys present in `j`. Unknown keys,
/// wrong types and out-of-range values throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = {});

/// Stable hash of every setting that affects per-generation dynamics.
/// `generations`, paths and output settings are excluded so a run can be
/// extended or moved and still resume.
std::string config_hash(const RunConfig& cfg);

}  // namespace coegan
