#include "coegan/genome.hpp"

#include <algorithm>

namespace coegan {

std::string_view to_string(Role r) {
  return r == Role::Generator ? "generator" : "discriminator";
}

std::string_view to_string(LayerType t) {
  switch (t) {
    case LayerType::Linear: return "Linear";
    case LayerType::Conv: return "Conv";
    case LayerType::Deconv: return "Deconv";
  }
  return "?";
}

Role role_from_string(std::string_view s) {
  if (s == "generator") return Role::Generator;
  if (s == "discriminator") return Role::Discriminator;
  throw std::invalid_argument("unknown role: " + std::string(s));
}

LayerType layer_type_from_string(std::string_view s) {
  for (LayerType t : {LayerType::Linear, LayerType::Conv, LayerType::Deconv})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown layer type: " + std::string(s));
}

ParamBlob::ShapeList ParamBlob::shapes() const {
  ShapeList out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.emplace_back(t.rows(), t.cols());
  return out;
}

std::string shape_signature(const ParamBlob::ShapeList& shapes) {
  std::string s;
  for (const auto& [r, c] : shapes) {
    if (!s.empty()) s += ';';
    s += std::to_string(r) + "x" + std::to_string(c);
  }
  return s;
}

std::string ParamBlob::signature() const { return shape_signature(shapes()); }

bool same_structure(const Gene& a, const Gene& b) {
  return a.layer_type == b.layer_type && a.activation == b.activation &&
         a.out_features == b.out_features && a.out_channels == b.out_channels;
}

bool same_structure(const Genome& a, const Genome& b) {
  return a.role == b.role &&
         std::equal(a.genes.begin(), a.genes.end(), b.genes.begin(), b.genes.end(),
                    [](const Gene& x, const Gene& y) { return same_structure(x, y); });
}

std::pair<LayerType, LayerType> legal_layer_types(Role role) {
  return role == Role::Discriminator ? std::pair{LayerType::Linear, LayerType::Conv}
                                     : std::pair{LayerType::Linear, LayerType::Deconv};
}

Gene random_gene(LayerType type, const GeneRanges& ranges, nn::Rng& rng, IdSource& ids) {
  Gene g;
  g.layer_type = type;
  std::uniform_int_distribution<int> act(0, static_cast<int>(std::size(nn::kAllActivations)) - 1);
  g.activation = nn::kAllActivations[act(rng)];
  if (type == LayerType::Linear) {
    g.out_features = std::uniform_int_distribution<int>(ranges.min_features, ranges.max_features)(rng);
  } else {
    g.out_channels = std::uniform_int_distribution<int>(ranges.min_channels, ranges.max_channels)(rng);
  }
  g.lineage_id = ids();
  return g;
}

Genome new_random_genome(Role role, nn::Rng& rng, int genome_limit, IdSource& ids,
                         const GeneRanges& ranges) {
  if (genome_limit < 1) throw std::invalid_argument("genome_limit must be >= 1");
  const auto [linear, spatial] = legal_layer_types(role);
  const LayerType type = std::bernoulli_distribution(0.5)(rng) ? spatial : linear;
  Genome g;
  g.role = role;
  g.genes.push_back(random_gene(type, ranges, rng, ids));
  return g;
}

std::vector<Violation> validate(const Genome& genome, int genome_limit, const GeneRanges& ranges) {
  std::vector<Violation> out;
  const int n = static_cast<int>(genome.genes.size());
  if (n < 1 || n > genome_limit)
    out.push_back({"length", -1,
                   "genome has " + std::to_string(n) + " genes, limit " +
                       std::to_string(genome_limit)});

  const bool disc = genome.role == Role::Discriminator;
  const LayerType forbidden = disc ? LayerType::Deconv : LayerType::Conv;
  bool second_section = false;
  for (int i = 0; i < n; ++i) {
    const Gene& g = genome.genes[i];
    if (g.layer_type == forbidden) {
      out.push_back({"role-layer", i,
                     std::string(to_string(g.layer_type)) + " not allowed in a " +
                         std::string(to_string(genome.role))});
      continue;
    }
    // Discriminator: Conv* Linear*. Generator: Linear* Deconv*.
    const bool in_second = disc ? g.layer_type == LayerType::Linear : g.is_spatial();
    if (in_second) {
      second_section = true;
    } else if (second_section) {
      out.push_back({"section-order", i,
                     std::string(to_string(g.layer_type)) + " after the " +
                         (disc ? "linear" : "deconvolution") + " section"});
    }
    if (g.layer_type == LayerType::Linear) {
      if (g.out_channels != 0 || g.out_features < ranges.min_features ||
          g.out_features > ranges.max_features)
        out.push_back({"gene-attribute", i, "out_features out of range or channels set"});
    } else {
      if (g.out_features != 0 || g.out_channels < ranges.min_channels ||
          g.out_channels > ranges.max_channels)
        out.push_back({"gene-attribute", i, "out_channels out of range or features set"});
    }
  }
  return out;
}

namespace {

void require_positive(const nn::TensorShape& s, const char* what) {
  if (!s.positive()) throw ShapeError(std::string(what) + " has non-positive shape " + nn::to_string(s));
}

int ceil_div_pow2(int n, int d) {
  const int p = 1 << d;
  return (n + p - 1) / p;
}

nn::TensorShape flat(int n) { return {n, 1, 1}; }

}  // namespace

ShapePlan infer_shapes(const Genome& genome, nn::TensorShape input_shape, const ShapeConfig& cfg) {
  require_positive(input_shape, "input");
  ShapePlan plan;
  plan.role = genome.role;
  plan.input = input_shape;

  if (genome.role == Role::Discriminator) {
    nn::TensorShape cur = input_shape;
    for (const Gene& g : genome.genes) {
      LayerShape ls;
      if (g.layer_type == LayerType::Conv) {
        ls.in = cur;
        ls.out = {g.out_channels, nn::conv_out_size(cur.height), nn::conv_out_size(cur.width)};
      } else if (g.layer_type == LayerType::Linear) {
        ls.in = flat(cur.size());
        ls.out = flat(g.out_features);
      } else {
        throw ShapeError("Deconv gene in a discriminator");
      }
      require_positive(ls.out, "gene output");
      plan.genes.push_back(ls);
      cur = ls.out;
    }
    plan.head = {flat(cur.size()), flat(1)};
    plan.output = flat(1);
    return plan;
  }

  if (cfg.latent_dim <= 0 || cfg.base_channels <= 0) throw ShapeError("latent_dim/base_channels must be positive");
  nn::TensorShape cur = flat(cfg.latent_dim);
  const int deconvs = static_cast<int>(std::count_if(
      genome.genes.begin(), genome.genes.end(),
      [](const Gene& g) { return g.layer_type == LayerType::Deconv; }));
  bool adapted = false;
  auto adapt = [&] {
    LayerShape ls{flat(cur.size()),
                  {cfg.base_channels, ceil_div_pow2(input_shape.height, deconvs),
                   ceil_div_pow2(input_shape.width, deconvs)}};
    require_positive(ls.out, "adapter output");
    plan.adapter = ls;
    cur = ls.out;
    adapted = true;
  };
  for (const Gene& g : genome.genes) {
    LayerShape ls;
    if (g.layer_type == LayerType::Linear) {
      if (adapted) throw ShapeError("Linear gene after the deconvolution section");
      ls.in = flat(cur.size());
      ls.out = flat(g.out_features);
    } else if (g.layer_type == LayerType::Deconv) {
      if (!adapted) adapt();
      ls.in = cur;
      ls.out = {g.out_channels, nn::deconv_out_size(cur.height), nn::deconv_out_size(cur.width)};
    } else {
      throw ShapeError("Conv gene in a generator");
    }
    require_positive(ls.out, "gene output");
    plan.genes.push_back(ls);
    cur = ls.out;
  }
  if (!adapted) adapt();
  if (cur.height != input_shape.height || cur.width != input_shape.width) {
    if (cur.height < input_shape.height || cur.width < input_shape.width)
      throw ShapeError("generator output smaller than target");
    plan.crop = LayerShape{cur, {cur.channels, input_shape.height, input_shape.width}};
    cur = plan.crop->out;
  }
  plan.head = {cur, input_shape};
  plan.output = input_shape;
  return plan;
}

ParamBlob::ShapeList expected_param_shapes(const Gene& gene, const LayerShape& shape) {
  switch (gene.layer_type) {
    case LayerType::Linear:
      return {{shape.out.size(), shape.in.size()}, {shape.out.size(), 1}};
    case LayerType::Conv:
      return {{shape.out.channels, shape.in.channels * 9}, {shape.out.channels, 1}};
    case LayerType::Deconv:
      return {{shape.out.channels * 9, shape.in.channels}, {shape.out.channels, 1}};
  }
  return {};
}

ParamBlob::ShapeList adapter_param_shapes(const ShapePlan& plan) {
  if (!plan.adapter) return {};
  return {{plan.adapter->out.size(), plan.adapter->in.size()}, {plan.adapter->out.size(), 1}};
}

ParamBlob::ShapeList head_param_shapes(const ShapePlan& plan) {
  if (plan.role == Role::Discriminator) return {{1, plan.head.in.size()}, {1, 1}};
  return {{plan.head.out.channels, plan.head.in.channels}, {plan.head.out.channels, 1}};
}

namespace {

// Returns true when loaded.
bool load_into(nn::Layer& layer, std::vector<nn::Matrix>& square_avg, const ParamRef& blob) {
  if (!blob) return false;
  auto& params = layer.parameters();
  if (blob->tensors.size() != params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (blob->tensors[i].rows() != params[i].rows() || blob->tensors[i].cols() != params[i].cols())
      return false;
  params = blob->tensors;
  if (blob->square_avg.size() == params.size()) square_avg = blob->square_avg;
  return true;
}

// Zero optimizer state for layers added since the last call.
void grow(Phenotype& p) {
  nn::Gradients zero = p.network.zero_gradients();
  for (std::size_t i = p.square_avg.size(); i < zero.size(); ++i) p.square_avg.push_back(std::move(zero[i]));
}

}  // namespace

Phenotype build_phenotype(const Genome& genome, const ShapePlan& plan, nn::Rng& rng) {
  if (plan.genes.size() != genome.genes.size())
    throw std::invalid_argument("build_phenotype: plan does not match genome");
  Phenotype p;
  p.input = plan.input;
  p.output = plan.output;
  auto add_gene = [&](std::size_t i) {
    const Gene& g = genome.genes[i];
    const LayerShape& ls = plan.genes[i];
    int idx = -1;
    switch (g.layer_type) {
      case LayerType::Linear:
        idx = p.network.add(std::make_unique<nn::Dense>(ls.in.size(), ls.out.size(), rng));
        break;
      case LayerType::Conv:
        idx = p.network.add(std::make_unique<nn::Conv>(ls.in, ls.out.channels, rng));
        break;
      case LayerType::Deconv:
        idx = p.network.add(std::make_unique<nn::Deconv>(ls.in, ls.out.channels, rng));
        break;
    }
    p.network.add(std::make_unique<nn::ActivationLayer>(g.activation));
    grow(p);
    p.gene_layer.push_back(idx);
    if (load_into(p.network.layer(idx), p.square_avg[static_cast<std::size_t>(idx)], g.params)) {
      ++p.reused_gene_count;
    } else if (g.params) {
      ++p.discarded_params;
    }
  };

  if (genome.role == Role::Discriminator) {
    for (std::size_t i = 0; i < genome.genes.size(); ++i) add_gene(i);
    p.head_layer = p.network.add(std::make_unique<nn::Dense>(plan.head.in.size(), 1, rng));
    p.network.add(std::make_unique<nn::ActivationLayer>(nn::Activation::Sigmoid));
    grow(p);
  } else {
    std::size_t i = 0;
    for (; i < genome.genes.size() && genome.genes[i].layer_type == LayerType::Linear; ++i)
      add_gene(i);
    p.adapter_layer = p.network.add(
        std::make_unique<nn::Dense>(plan.adapter->in.size(), plan.adapter->out.size(), rng));
    for (; i < genome.genes.size(); ++i) add_gene(i);
    if (plan.crop)
      p.network.add(std::make_unique<nn::CenterCrop>(plan.crop->in, plan.crop->out.height,
                                                     plan.crop->out.width));
    p.head_layer =
        p.network.add(std::make_unique<nn::Pointwise>(plan.head.in, plan.head.out.channels, rng));
    p.network.add(std::make_unique<nn::ActivationLayer>(nn::Activation::Tanh));
    grow(p);
    if (!load_into(p.network.layer(p.adapter_layer),
                   p.square_avg[static_cast<std::size_t>(p.adapter_layer)], genome.adapter_params) &&
        genome.adapter_params)
      ++p.discarded_params;
  }
  if (!load_into(p.network.layer(p.head_layer), p.square_avg[static_cast<std::size_t>(p.head_layer)],
                 genome.head_params) &&
      genome.head_params)
    ++p.discarded_params;
  return p;
}

void absorb_parameters(Genome& genome, const Phenotype& phenotype, const nn::Gradients* square_avg) {
  auto snapshot = [&](int layer) {
    const auto l = static_cast<std::size_t>(layer);
    ParamBlob blob{phenotype.network.layer(l).parameters(), {}};
    if (square_avg) blob.square_avg = (*square_avg)[l];
    return std::make_shared<const ParamBlob>(std::move(blob));
  };
  for (std::size_t i = 0; i < genome.genes.size(); ++i)
    genome.genes[i].params = snapshot(phenotype.gene_layer[i]);
  if (phenotype.adapter_layer >= 0) genome.adapter_params = snapshot(phenotype.adapter_layer);
  genome.head_params = snapshot(phenotype.head_layer);
}

}  // namespace coegan
