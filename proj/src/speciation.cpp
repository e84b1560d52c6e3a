#include "coegan/speciation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace coegan {

int genome_distance(const Genome& a, const Genome& b) {
  std::map<std::pair<LayerType, nn::Activation>, int> balance;
  for (const Gene& g : a.genes) ++balance[{g.layer_type, g.activation}];
  for (const Gene& g : b.genes) --balance[{g.layer_type, g.activation}];
  int d = 0;
  for (const auto& [key, count] : balance) d += std::abs(count);
  return d;
}

SpeciationState assign_species(std::span<const Genome> population, const SpeciationState& state,
                               nn::Rng& rng) {
  SpeciationState next;
  next.threshold = state.threshold;
  next.target_species = state.target_species;
  next.next_species_id = state.next_species_id;
  for (const Species& s : state.species) next.species.push_back({s.id, s.representative, {}});

  for (int i = 0; i < static_cast<int>(population.size()); ++i) {
    const Genome& g = population[static_cast<std::size_t>(i)];
    auto it = std::find_if(next.species.begin(), next.species.end(), [&](const Species& s) {
      return genome_distance(g, s.representative) <= next.threshold;
    });
    if (it == next.species.end()) {
      next.species.push_back({next.next_species_id++, g, {}});
      it = std::prev(next.species.end());
    }
    it->members.push_back(i);
  }

  std::erase_if(next.species, [](const Species& s) { return s.members.empty(); });
  for (Species& s : next.species) {
    const int pick = s.members[static_cast<std::size_t>(
        std::uniform_int_distribution<std::size_t>(0, s.members.size() - 1)(rng))];
    const Genome& chosen = population[static_cast<std::size_t>(pick)];
    s.representative = Genome{};
    s.representative.role = chosen.role;
    for (const Gene& gene : chosen.genes) {
      Gene bare = gene;
      bare.params.reset();
      s.representative.genes.push_back(bare);
    }
  }
  return next;
}

double adjust_threshold(const SpeciationState& state, int observed_count, double step) {
  if (observed_count < 1) throw std::invalid_argument("adjust_threshold: observed_count < 1");
  if (observed_count > state.target_species) return state.threshold + step;
  if (observed_count < state.target_species) return std::max(0.0, state.threshold - step);
  return state.threshold;
}

std::vector<int> allocate_by_mean_fitness(std::span<const double> mean_fitness,
                                          int population_size) {
  const std::size_t n = mean_fitness.size();
  if (n == 0) throw std::invalid_argument("allocate_offspring: no species");
  if (population_size < static_cast<int>(n))
    throw std::invalid_argument("allocate_offspring: fewer slots than species");
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = mean_fitness[i];
    if (std::isnan(f) || f == -std::numeric_limits<double>::infinity() || f < 0.0)
      throw std::invalid_argument("allocate_offspring: undefined or negative fitness");
    weight[i] = 1.0 / (f + kAllocationEpsilon);
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);

  std::vector<double> quota(n);
  std::vector<int> slots(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    quota[i] = population_size * weight[i] / total;
    slots[i] = static_cast<int>(std::floor(quota[i]));
    assigned += slots[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - slots[a] > quota[b] - slots[b];
  });
  for (std::size_t j = 0; assigned < population_size; ++j, ++assigned) ++slots[order[j % n]];

  // One-slot floor: take from the largest allocation, preferring the weakest
  // species among ties so ordering by fitness is preserved.
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i] > 0) continue;
    std::size_t donor = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (slots[j] > slots[donor] || (slots[j] == slots[donor] && quota[j] < quota[donor]))
        donor = j;
    --slots[donor];
    ++slots[i];
  }
  return slots;
}

std::vector<int> allocate_offspring(const SpeciationState& state,
                                    std::span<const Genome> population, int population_size) {
  std::vector<double> means;
  for (const Species& s : state.species) {
    double sum = 0.0;
    for (int m : s.members) sum += population[static_cast<std::size_t>(m)].fitness;
    means.push_back(sum / static_cast<double>(s.members.size()));
  }
  return allocate_by_mean_fitness(means, population_size);
}

int tournament_select(std::span<const int> members, std::span<const Genome> population, int k,
                      nn::Rng& rng) {
  if (members.empty()) throw std::invalid_argument("tournament_select: no members");
  std::vector<int> pool(members.begin(), members.end());
  const std::size_t draws = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), pool.size());
  int best = -1;
  for (std::size_t d = 0; d < draws; ++d) {
    // Partial Fisher-Yates: draw without replacement.
    const std::size_t j = std::uniform_int_distribution<std::size_t>(d, pool.size() - 1)(rng);
    std::swap(pool[d], pool[j]);
    const int cand = pool[d];
    if (best < 0 || population[static_cast<std::size_t>(cand)].fitness <
                        population[static_cast<std::size_t>(best)].fitness)
      best = cand;
  }
  return best;
}

}  // namespace coegan
