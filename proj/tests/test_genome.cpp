#include "coegan/genome.hpp"
#include "coegan/genome_io.hpp"

#include "doctest.h"
#include "genome_factory.hpp"

#include <filesystem>

using namespace coegan;
using nn::TensorShape;

namespace {

Gene gene(LayerType t, int size, nn::Activation a = nn::Activation::ReLU, std::int64_t id = 0) {
  Gene g;
  g.layer_type = t;
  g.activation = a;
  (t == LayerType::Linear ? g.out_features : g.out_channels) = size;
  g.lineage_id = id;
  return g;
}

Genome genome(Role r, std::vector<Gene> genes) {
  Genome g;
  g.role = r;
  g.genes = std::move(genes);
  return g;
}

const TensorShape kMnist{1, 28, 28};

}  // namespace

TEST_CASE("new random genomes start minimal and role-legal") {
  nn::Rng rng(0);
  IdSource ids;
  for (int i = 0; i < 1000; ++i) {
    const Genome d = new_random_genome(Role::Discriminator, rng, 4, ids);
    REQUIRE(d.genes.size() == 1);
    CHECK(d.genes[0].layer_type != LayerType::Deconv);
    const Genome g = new_random_genome(Role::Generator, rng, 4, ids);
    REQUIRE(g.genes.size() == 1);
    CHECK(g.genes[0].layer_type != LayerType::Conv);
    for (const Genome* x : {&d, &g}) {
      const Gene& gn = x->genes[0];
      if (gn.is_spatial()) {
        CHECK(gn.out_channels >= 16);
        CHECK(gn.out_channels <= 128);
      } else {
        CHECK(gn.out_features >= 32);
        CHECK(gn.out_features <= 1024);
      }
      CHECK(validate(*x, 4).empty());
      CHECK_FALSE(gn.params);
    }
  }
  CHECK(ids.peek() == 2001);
}

TEST_CASE("validate names the broken invariant") {
  CHECK(validate(genome(Role::Discriminator, {gene(LayerType::Conv, 16), gene(LayerType::Linear, 64)}), 4)
            .empty());

  const auto order = validate(genome(Role::Discriminator, {gene(LayerType::Linear, 64), gene(LayerType::Conv, 16)}), 4);
  REQUIRE(order.size() == 1);
  CHECK(order[0].invariant == "section-order");
  CHECK(order[0].gene_index == 1);

  std::vector<Gene> five(5, gene(LayerType::Linear, 64));
  const auto length = validate(genome(Role::Generator, five), 4);
  REQUIRE_FALSE(length.empty());
  CHECK(length[0].invariant == "length");

  const auto role = validate(genome(Role::Generator, {gene(LayerType::Conv, 16)}), 4);
  REQUIRE_FALSE(role.empty());
  CHECK(role[0].invariant == "role-layer");
  CHECK(role[0].gene_index == 0);

  const auto attr = validate(genome(Role::Generator, {gene(LayerType::Linear, 2000)}), 4);
  REQUIRE_FALSE(attr.empty());
  CHECK(attr[0].invariant == "gene-attribute");

  CHECK_FALSE(validate(genome(Role::Generator, {}), 4).empty());
}

TEST_CASE("discriminator shape chain") {
  const auto plan = infer_shapes(
      genome(Role::Discriminator, {gene(LayerType::Conv, 16), gene(LayerType::Conv, 32)}), kMnist);
  REQUIRE(plan.genes.size() == 2);
  CHECK(plan.genes[0].out == TensorShape{16, 14, 14});
  CHECK(plan.genes[1].out == TensorShape{32, 7, 7});
  CHECK(plan.head.in.size() == 1568);
  CHECK(plan.head.out.size() == 1);
  CHECK(plan.output == TensorShape{1, 1, 1});
}

TEST_CASE("generator shape chain") {
  const auto plan = infer_shapes(
      genome(Role::Generator, {gene(LayerType::Linear, 128), gene(LayerType::Deconv, 32)}), kMnist);
  CHECK(plan.genes[0].in.size() == 100);
  CHECK(plan.genes[0].out.size() == 128);
  REQUIRE(plan.adapter);
  CHECK(plan.adapter->in.size() == 128);
  CHECK(plan.adapter->out == TensorShape{32, 14, 14});
  CHECK(plan.genes[1].out == TensorShape{32, 28, 28});
  CHECK_FALSE(plan.crop);
  CHECK(plan.output == kMnist);

  const auto deep = infer_shapes(genome(Role::Generator, {gene(LayerType::Deconv, 16), gene(LayerType::Deconv, 16),
                                                          gene(LayerType::Deconv, 16)}),
                                 kMnist);
  CHECK(deep.adapter->out == TensorShape{32, 4, 4});
  CHECK(deep.genes[2].out == TensorShape{16, 32, 32});
  REQUIRE(deep.crop);
  CHECK(deep.crop->out == TensorShape{16, 28, 28});
  CHECK(deep.output == kMnist);
}

TEST_CASE("shape inference rejects non-positive input") {
  CHECK_THROWS_AS(infer_shapes(genome(Role::Discriminator, {gene(LayerType::Conv, 16)}), TensorShape{1, 0, 28}),
                  ShapeError);
}

TEST_CASE("random genomes build and forward with declared shapes") {
  nn::Rng rng(7);
  IdSource ids;
  const auto ranges = testutil::small_ranges();
  for (int i = 0; i < 60; ++i) {
    for (Role role : {Role::Discriminator, Role::Generator}) {
      const Genome g = testutil::random_valid_genome(role, 4, rng, ids, ranges);
      REQUIRE(validate(g, 4, ranges).empty());
      const ShapePlan plan = infer_shapes(g, kMnist);
      const Phenotype ph = build_phenotype(g, plan, rng);
      CHECK(ph.reused_gene_count == 0);
      const nn::Matrix in = role == Role::Discriminator ? nn::standard_normal(kMnist.size(), 8, rng)
                                                        : nn::standard_normal(100, 8, rng);
      const nn::Matrix out = ph.network.forward(in);
      CHECK(out.rows() == plan.output.size());
      CHECK(out.cols() == 8);
      if (role == Role::Discriminator) {
        CHECK(out.minCoeff() > 0.0);
        CHECK(out.maxCoeff() < 1.0);
      } else {
        CHECK(out.minCoeff() >= -1.0);
        CHECK(out.maxCoeff() <= 1.0);
      }
    }
  }
}

TEST_CASE("rebuilt genome reuses every gene") {
  nn::Rng rng(3);
  IdSource ids;
  Genome g = genome(Role::Generator, {gene(LayerType::Linear, 40, nn::Activation::ReLU, ids()),
                                      gene(LayerType::Deconv, 16, nn::Activation::Tanh, ids())});
  const ShapePlan plan = infer_shapes(g, kMnist);
  Phenotype first = build_phenotype(g, plan, rng);
  absorb_parameters(g, first);
  const Phenotype second = build_phenotype(g, plan, rng);
  CHECK(second.reused_gene_count == 2);
  CHECK(second.discarded_params == 0);
  const nn::Matrix z = nn::standard_normal(100, 4, rng);
  CHECK((first.network.forward(z) - second.network.forward(z)).norm() == 0.0);
}

TEST_CASE("mismatched params are discarded, not loaded") {
  nn::Rng rng(4);
  Genome g = genome(Role::Discriminator, {gene(LayerType::Linear, 40, nn::Activation::ReLU, 1)});
  absorb_parameters(g, build_phenotype(g, infer_shapes(g, {2, 1, 1}), rng));
  const Phenotype other = build_phenotype(g, infer_shapes(g, {3, 1, 1}), rng);
  CHECK(other.reused_gene_count == 0);
  CHECK(other.discarded_params == 1);
}

TEST_CASE("genome json and params round trip") {
  nn::Rng rng(5);
  IdSource ids;
  Genome g = genome(Role::Discriminator, {gene(LayerType::Conv, 16, nn::Activation::ELU, ids()),
                                          gene(LayerType::Linear, 33, nn::Activation::Sigmoid, ids())});
  g.fitness = 0.25;
  g.evaluated = true;
  absorb_parameters(g, build_phenotype(g, infer_shapes(g, {1, 8, 8}), rng));

  const auto dir = std::filesystem::temp_directory_path() / "coegan_genome_io";
  std::filesystem::remove_all(dir);
  save_genome(dir, "g", g);
  const Genome back = load_genome(dir, "g");
  CHECK(same_structure(g, back));
  CHECK(back.fitness == 0.25);
  CHECK(back.genes[1].lineage_id == g.genes[1].lineage_id);
  for (std::size_t i = 0; i < g.genes.size(); ++i)
    for (std::size_t t = 0; t < g.genes[i].params->tensors.size(); ++t)
      CHECK(back.genes[i].params->tensors[t] == g.genes[i].params->tensors[t]);
  CHECK(back.head_params->tensors[0] == g.head_params->tensors[0]);

  const auto j = genome_to_json(g);
  CHECK(j.at("genes").at(0).at("layer_type") == "Conv");
  CHECK(j.at("genes").at(0).contains("out_channels"));
  CHECK(j.at("genes").at(1).contains("out_features"));
  std::filesystem::remove_all(dir);
}
