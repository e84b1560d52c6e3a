#include "coegan/variation.hpp"

#include <algorithm>

namespace coegan {

namespace {

bool chance(double p, nn::Rng& rng) { return std::bernoulli_distribution(p)(rng); }

int uniform_index(int n, nn::Rng& rng) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

// Index of the first gene of the second section (Linear for discriminators,
// Deconv for generators).
std::size_t section_boundary(const Genome& g) {
  const bool disc = g.role == Role::Discriminator;
  const auto it = std::find_if(g.genes.begin(), g.genes.end(), [&](const Gene& x) {
    return disc ? x.layer_type == LayerType::Linear : x.is_spatial();
  });
  return static_cast<std::size_t>(it - g.genes.begin());
}

void add_layer(Genome& g, const VariationConfig& cfg, nn::Rng& rng, IdSource& ids) {
  if (static_cast<int>(g.genes.size()) >= cfg.genome_limit) return;
  const auto [linear, spatial] = legal_layer_types(g.role);
  const LayerType type = chance(0.5, rng) ? spatial : linear;
  const std::size_t boundary = section_boundary(g);
  const bool first_section = g.role == Role::Discriminator ? type == LayerType::Conv
                                                           : type == LayerType::Linear;
  // Section-order-preserving slots: [0, boundary] or [boundary, size].
  const std::size_t lo = first_section ? 0 : boundary;
  const std::size_t hi = first_section ? boundary : g.genes.size();
  const std::size_t pos = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  g.genes.insert(g.genes.begin() + static_cast<std::ptrdiff_t>(pos),
                 random_gene(type, cfg.ranges, rng, ids));
}

void remove_layer(Genome& g, nn::Rng& rng) {
  if (g.genes.size() <= 1) return;
  g.genes.erase(g.genes.begin() + uniform_index(static_cast<int>(g.genes.size()), rng));
}

void change_layer(Genome& g, const VariationConfig& cfg, nn::Rng& rng, IdSource& ids) {
  if (g.genes.empty()) return;
  Gene& gene = g.genes[static_cast<std::size_t>(uniform_index(static_cast<int>(g.genes.size()), rng))];
  if (chance(0.5, rng)) {
    gene.activation =
        nn::kAllActivations[uniform_index(static_cast<int>(std::size(nn::kAllActivations)), rng)];
  }
  if (chance(0.5, rng)) {
    if (gene.layer_type == LayerType::Linear) {
      gene.out_features = std::uniform_int_distribution<int>(cfg.ranges.min_features,
                                                             cfg.ranges.max_features)(rng);
    } else {
      gene.out_channels = std::uniform_int_distribution<int>(cfg.ranges.min_channels,
                                                             cfg.ranges.max_channels)(rng);
    }
    gene.params.reset();
    gene.lineage_id = ids();
  }
}

}  // namespace

Genome mutate(const Genome& genome, const VariationConfig& cfg, nn::Rng& rng, IdSource& ids) {
  Genome child = genome;
  child.evaluated = false;
  child.fitness = 0.0;
  child.reused_gene_count = 0;
  // Draw all three events up front so each operator's rate is independent of
  // the others' outcomes.
  const bool do_add = chance(cfg.rates.add, rng);
  const bool do_remove = chance(cfg.rates.remove, rng);
  const bool do_change = chance(cfg.rates.change, rng);
  if (do_add) add_layer(child, cfg, rng, ids);
  if (do_remove) remove_layer(child, rng);
  if (do_change) change_layer(child, cfg, rng, ids);
  return child;
}

Genome crossover(const Genome& parent_a, const Genome& parent_b, int genome_limit, nn::Rng& rng) {
  if (parent_a.role != parent_b.role)
    throw std::invalid_argument("crossover: parents have different roles");
  const bool disc = parent_a.role == Role::Discriminator;
  auto join = [&](const Genome& spatial_src, const Genome& linear_src) {
    Genome child;
    child.role = parent_a.role;
    const std::size_t bs = section_boundary(spatial_src);
    const std::size_t bl = section_boundary(linear_src);
    std::vector<Gene> spatial, linear;
    if (disc) {
      spatial.assign(spatial_src.genes.begin(), spatial_src.genes.begin() + static_cast<std::ptrdiff_t>(bs));
      linear.assign(linear_src.genes.begin() + static_cast<std::ptrdiff_t>(bl), linear_src.genes.end());
      child.genes = spatial;
      child.genes.insert(child.genes.end(), linear.begin(), linear.end());
    } else {
      linear.assign(linear_src.genes.begin(), linear_src.genes.begin() + static_cast<std::ptrdiff_t>(bl));
      spatial.assign(spatial_src.genes.begin() + static_cast<std::ptrdiff_t>(bs), spatial_src.genes.end());
      child.genes = linear;
      child.genes.insert(child.genes.end(), spatial.begin(), spatial.end());
    }
    // Implicit layers follow the parent that supplies the output side.
    const Genome& head_src = disc ? linear_src : spatial_src;
    child.head_params = head_src.head_params;
    child.adapter_params = head_src.adapter_params;
    return child;
  };
  const bool a_spatial = chance(0.5, rng);
  Genome child = a_spatial ? join(parent_a, parent_b) : join(parent_b, parent_a);
  if (child.genes.empty()) child = a_spatial ? join(parent_b, parent_a) : join(parent_a, parent_b);
  if (static_cast<int>(child.genes.size()) > genome_limit)
    child.genes.resize(static_cast<std::size_t>(genome_limit));
  return child;
}

Genome transfer_parameters(std::span<const Genome* const> parents, const Genome& child,
                           const ShapePlan& child_plan) {
  Genome out = child;
  out.reused_gene_count = 0;
  for (std::size_t i = 0; i < out.genes.size(); ++i) {
    Gene& gene = out.genes[i];
    gene.params.reset();
    const auto expected = expected_param_shapes(gene, child_plan.genes[i]);
    for (const Genome* parent : parents) {
      const auto it = std::find_if(parent->genes.begin(), parent->genes.end(), [&](const Gene& p) {
        return p.lineage_id == gene.lineage_id && p.params;
      });
      if (it != parent->genes.end() && it->params->shapes() == expected) {
        gene.params = it->params;
        ++out.reused_gene_count;
        break;
      }
    }
  }
  const Genome* primary = parents.empty() ? nullptr : parents.front();
  auto carry = [](const ParamRef& src, const ParamBlob::ShapeList& expected) -> ParamRef {
    return src && !expected.empty() && src->shapes() == expected ? src : nullptr;
  };
  out.adapter_params =
      carry(child.adapter_params ? child.adapter_params : primary ? primary->adapter_params : nullptr,
            adapter_param_shapes(child_plan));
  out.head_params =
      carry(child.head_params ? child.head_params : primary ? primary->head_params : nullptr,
            head_param_shapes(child_plan));
  return out;
}

}  // namespace coegan
