#pragma once

#include "coegan/data.hpp"
#include "coegan/fitness.hpp"
#include "coegan/genome.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace coegan {

/// -mean(log D(x)) - mean(log(1 - D(G(z)))), probabilities clamped.
double discriminator_loss(const nn::Matrix& d_real, const nn::Matrix& d_fake);
/// Non-saturating generator loss -mean(log D(G(z))), probabilities clamped.
double generator_loss(const nn::Matrix& d_fake);

/// Discriminator loss on one real and one fake batch; parameter gradients
/// are accumulated into `grads` (shaped by d.zero_gradients()).
double discriminator_step_loss(const nn::Network& d, const nn::Matrix& real, const nn::Matrix& fake,
                               nn::Gradients* grads);
/// Generator loss through a frozen discriminator for latents `z`; only the
/// generator's parameter gradients are produced.
double generator_step_loss(const nn::Network& g, const nn::Network& d, const nn::Matrix& z,
                           nn::Gradients* grads);

enum class PairingStrategy { AllVsBest, Random, AllVsAll };

std::string_view to_string(PairingStrategy s);
PairingStrategy strategy_from_string(std::string_view s);

struct Match {
  int trainee = 0;
  int adversary = 0;
  Role trainee_role = Role::Generator;
};

struct PairingPlan {
  PairingStrategy strategy = PairingStrategy::Random;
  int k = 3;
  /// AllVsBest: adversary indices refer to the previous generation's best
  /// lists. Otherwise they refer to the current populations.
  std::vector<Match> matches;

  [[nodiscard]] bool uses_previous_best() const { return strategy == PairingStrategy::AllVsBest; }
  [[nodiscard]] std::vector<Match> matches_for(Role role, int trainee) const;
};

/// Evaluated top-k of each role, best first, with trained params.
struct PreviousBest {
  std::vector<Genome> generators;
  std::vector<Genome> discriminators;
};

PairingPlan plan_pairings(int n_generators, int n_discriminators, const PreviousBest& previous_best,
                          PairingStrategy strategy, int k, nn::Rng& rng);

/// Splits a per-individual batch budget over its pairings: floor(total/n)
/// each, plus one for the first (total mod n).
std::vector<int> budget_split(int total_batches, int pairings);

struct TrainConfig {
  int batch_size = 64;
  int batches_per_generation = 20;
  int latent_dim = 100;
  nn::RmsPropConfig optimizer;
};

struct TrainingStats {
  std::vector<double> losses;
  bool failed = false;
};

/// Runs `batches` GAN steps updating only the trainee. A discriminator
/// trainee minimizes the discriminator loss on real batches from `data` vs
/// fresh samples of the frozen generator; a generator trainee minimizes the
/// non-saturating loss through the frozen discriminator (`data` unused).
TrainingStats train_pairing(Role trainee_role, nn::Network& trainee, nn::RmsProp& optimizer,
                            const nn::Network& adversary, BatchIterator* data, int batches,
                            const TrainConfig& cfg, nn::Rng& rng);

struct EvaluationContext {
  nn::TensorShape sample_shape;
  ShapeConfig shape;
  TrainConfig train;
  BatchIterator* data = nullptr;
  const FeatureExtractor* extractor = nullptr;
  const Stats* real_stats = nullptr;
  int fid_samples = 1000;
  std::uint64_t seed = 0;
  int generation = 0;
};

/// Trains every individual against its planned adversaries and assigns
/// fitness: discriminators get their mean per-batch loss, generators their
/// FID after training. Trained params are written back into the genomes.
void evaluate_generation(std::vector<Genome>& generators, std::vector<Genome>& discriminators,
                         const PairingPlan& plan, const PreviousBest& previous_best,
                         const EvaluationContext& ctx);

}  // namespace coegan
