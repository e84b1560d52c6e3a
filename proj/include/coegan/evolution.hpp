#pragma once

#include "coegan/config.hpp"
#include "coegan/data.hpp"
#include "coegan/evaluation.hpp"
#include "coegan/fitness.hpp"
#include "coegan/report.hpp"
#include "coegan/speciation.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace coegan {

/// Dataset, feature extractor and reference statistics for a run.
struct Environment {
  Dataset dataset;
  std::unique_ptr<FeatureExtractor> extractor;
  Stats real_stats;
  std::vector<Eigen::Vector2d> ring_centers;  // ring dataset only
};

/// Builds the environment for `cfg`. When `cache_dir` is non-empty the
/// trained classifier and the real statistics are cached there.
Environment make_environment(const RunConfig& cfg, const std::filesystem::path& cache_dir = {});

struct EvolutionState {
  int generation = 0;  // completed generations
  std::vector<Genome> generators;
  std::vector<Genome> discriminators;
  SpeciationState generator_species;
  SpeciationState discriminator_species;
  PreviousBest previous_best;
  IdSource ids;
  nn::Rng rng;
  BatchIterator::State data_state;
};

EvolutionState initialize(const RunConfig& cfg);

/// Strategy in effect for a generation: all-vs-best needs a previous
/// generation, so generation 0 pairs at random.
PairingStrategy strategy_for_generation(const RunConfig& cfg, int generation);

/// One generation: pair, evaluate, speciate, allocate, breed, keep the top-k
/// for the next pairing, report.
GenerationReport step_generation(EvolutionState& state, const RunConfig& cfg,
                                 const Environment& env);

struct RunOptions {
  std::filesystem::path run_dir;  // empty: no files written
  int stop_after = -1;            // stop once this many generations are done
  std::function<void(const GenerationReport&, const EvolutionState&)> on_generation;
};

struct RunResult {
  EvolutionState state;
  std::vector<GenerationReport> reports;
};

RunResult run(const RunConfig& cfg, const Environment& env, const RunOptions& opts = {});

class ResumeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Continues from the newest checkpoint in `opts.run_dir`. Refuses when the
/// checkpoint was written under a different config hash.
RunResult resume(const RunConfig& cfg, const Environment& env, const RunOptions& opts);

void save_checkpoint(const std::filesystem::path& run_dir, const EvolutionState& state,
                     const RunConfig& cfg, std::span<const GenerationReport> reports);
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& run_dir);
std::pair<EvolutionState, std::vector<GenerationReport>> load_checkpoint(
    const std::filesystem::path& checkpoint_dir, const RunConfig& cfg);

}  // namespace coegan
