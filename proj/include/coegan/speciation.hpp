#pragma once

#include "coegan/genome.hpp"

#include <map>
#include <span>
#include <vector>

namespace coegan {

/// Number of genes present in only one of the two genomes, comparing gene
/// multisets under the key (layer_type, activation).
int genome_distance(const Genome& a, const Genome& b);

struct Species {
  int id = 0;
  Genome representative;     // structure only; params are not needed
  std::vector<int> members;  // indices into the population
};

struct SpeciationConfig {
  int target_species = 4;
  double initial_threshold = 1.0;
  double threshold_step = 0.5;
};

struct SpeciationState {
  std::vector<Species> species;
  double threshold = 1.0;
  int target_species = 4;
  int next_species_id = 1;

  static SpeciationState initial(const SpeciationConfig& cfg) {
    return {{}, cfg.initial_threshold, cfg.target_species, 1};
  }
};

/// Greedy assignment: each individual joins the first species whose
/// representative lies within the threshold (distance <= threshold), or founds
/// a new one. Representatives are then re-drawn from the new members and
/// empty species dropped.
SpeciationState assign_species(std::span<const Genome> population, const SpeciationState& state,
                               nn::Rng& rng);

/// Incremental threshold controller toward the target species count.
double adjust_threshold(const SpeciationState& state, int observed_count, double step = 0.5);

inline constexpr double kAllocationEpsilon = 1e-6;

/// Offspring slots per species (parallel to state.species), proportional to
/// 1/(mean fitness + eps), largest-remainder rounding, at least one slot each.
std::vector<int> allocate_offspring(const SpeciationState& state,
                                    std::span<const Genome> population, int population_size);

/// Same rule applied directly to per-species mean fitness values.
std::vector<int> allocate_by_mean_fitness(std::span<const double> mean_fitness,
                                          int population_size);

/// Draws min(k, |members|) distinct members uniformly and returns the index
/// (into `population`) of the lowest-fitness one.
int tournament_select(std::span<const int> members, std::span<const Genome> population, int k,
                      nn::Rng& rng);

}  // namespace coegan
