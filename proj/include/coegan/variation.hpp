#pragma once

#include "coegan/genome.hpp"

#include <span>

namespace coegan {

struct MutationRates {
  double add = 0.30;
  double remove = 0.10;
  double change = 0.10;
};

struct VariationConfig {
  MutationRates rates;
  int genome_limit = 4;
  GeneRanges ranges;
};

/// Applies add/remove/change independently, each with its own probability.
/// Infeasible sub-mutations are skipped. The child keeps the parent's params
/// except on genes whose size attribute changed.
Genome mutate(const Genome& genome, const VariationConfig& cfg, nn::Rng& rng, IdSource& ids);

/// Spatial section of one parent joined with the linear section of the other,
/// cut at the section boundary (orientation chosen at random), truncated from
/// the tail to the genome limit.
Genome crossover(const Genome& parent_a, const Genome& parent_b, int genome_limit, nn::Rng& rng);

/// Re-attaches parent params to child genes that share a lineage id and whose
/// realized parameter shapes match exactly; everything else starts
/// untrained. Implicit-layer params come from the first parent. Sets
/// reused_gene_count to the number of genes copied.
Genome transfer_parameters(std::span<const Genome* const> parents, const Genome& child,
                           const ShapePlan& child_plan);

inline Genome transfer_parameters(const Genome& parent, const Genome& child,
                                  const ShapePlan& child_plan) {
  const Genome* parents[] = {&parent};
  return transfer_parameters(parents, child, child_plan);
}

}  // namespace coegan
