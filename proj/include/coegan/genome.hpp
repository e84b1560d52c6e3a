#pragma once

#include "coegan/nn.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coegan {

enum class Role { Generator, Discriminator };
enum class LayerType { Linear, Conv, Deconv };

std::string_view to_string(Role r);
std::string_view to_string(LayerType t);
Role role_from_string(std::string_view s);
LayerType layer_type_from_string(std::string_view s);

/// Trained parameters of one layer (weight, bias). Immutable once attached to
/// a gene; shared between genome copies.
struct ParamBlob {
  std::vector<nn::Matrix> tensors;
  /// RMSProp running average of squared gradients, one per tensor; empty
  /// until the layer has been trained.
  std::vector<nn::Matrix> square_avg;

  using ShapeList = std::vector<std::pair<Eigen::Index, Eigen::Index>>;
  [[nodiscard]] ShapeList shapes() const;
  /// Compact signature such as "64x1568;64x1".
  [[nodiscard]] std::string signature() const;
};

using ParamRef = std::shared_ptr<const ParamBlob>;

std::string shape_signature(const ParamBlob::ShapeList& shapes);

struct Gene {
  LayerType layer_type = LayerType::Linear;
  nn::Activation activation = nn::Activation::ReLU;
  int out_features = 0;  // Linear only
  int out_channels = 0;  // Conv/Deconv only
  std::int64_t lineage_id = 0;
  ParamRef params;

  [[nodiscard]] bool is_spatial() const { return layer_type != LayerType::Linear; }
  [[nodiscard]] int size_attribute() const { return is_spatial() ? out_channels : out_features; }
};

/// Structural identity (everything but lineage and params).
bool same_structure(const Gene& a, const Gene& b);

struct Genome {
  Role role = Role::Discriminator;
  std::vector<Gene> genes;
  double fitness = 0.0;
  bool evaluated = false;
  int reused_gene_count = 0;
  /// Trained parameters of the implicit (non-evolvable) layers.
  ParamRef adapter_params;
  ParamRef head_params;
};

bool same_structure(const Genome& a, const Genome& b);

struct GeneRanges {
  int min_features = 32;
  int max_features = 1024;
  int min_channels = 16;
  int max_channels = 128;
};

/// Monotonic lineage id source. Held in run state so ids survive resume.
class IdSource {
 public:
  explicit IdSource(std::int64_t next = 1) : next_(next) {}
  std::int64_t operator()() { return next_++; }
  [[nodiscard]] std::int64_t peek() const { return next_; }

 private:
  std::int64_t next_;
};

/// {Linear, Conv} for discriminators, {Linear, Deconv} for generators.
std::pair<LayerType, LayerType> legal_layer_types(Role role);

Gene random_gene(LayerType type, const GeneRanges& ranges, nn::Rng& rng, IdSource& ids);

Genome new_random_genome(Role role, nn::Rng& rng, int genome_limit, IdSource& ids,
                         const GeneRanges& ranges = {});

struct Violation {
  std::string invariant;
  int gene_index = -1;  // -1 for genome-level violations
  std::string message;
};

std::vector<Violation> validate(const Genome& genome, int genome_limit,
                                const GeneRanges& ranges = {});

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LayerShape {
  nn::TensorShape in;
  nn::TensorShape out;
};

struct ShapePlan {
  Role role = Role::Discriminator;
  nn::TensorShape input;
  std::vector<LayerShape> genes;
  /// Generator only: latent/linear output -> base_channels × s0 × s0.
  std::optional<LayerShape> adapter;
  /// Discriminator: Linear -> 1 (Sigmoid). Generator: 1×1 conv -> data
  /// channels (Tanh).
  LayerShape head;
  /// Generator only: center crop applied before the head when oversized.
  std::optional<LayerShape> crop;
  nn::TensorShape output;
};

struct ShapeConfig {
  int latent_dim = 100;
  int base_channels = 32;
};

/// `input_shape` is the dataset sample shape (both roles need it: the
/// discriminator reads it, the generator must reproduce it).
ShapePlan infer_shapes(const Genome& genome, nn::TensorShape input_shape,
                       const ShapeConfig& cfg = {});

/// Parameter shapes the realized layer of gene `i` expects.
ParamBlob::ShapeList expected_param_shapes(const Gene& gene, const LayerShape& shape);
ParamBlob::ShapeList adapter_param_shapes(const ShapePlan& plan);
ParamBlob::ShapeList head_param_shapes(const ShapePlan& plan);

struct Phenotype {
  nn::Network network;
  std::vector<int> gene_layer;  // network layer holding gene i's params
  int adapter_layer = -1;
  int head_layer = -1;
  int reused_gene_count = 0;
  int discarded_params = 0;
  nn::Gradients square_avg;  // optimizer state, zero where nothing was loaded
  nn::TensorShape input;
  nn::TensorShape output;
};

/// Builds the trainable network. Params whose shapes match the plan are
/// loaded, the rest are freshly initialised from `rng` and counted as
/// discarded.
Phenotype build_phenotype(const Genome& genome, const ShapePlan& plan, nn::Rng& rng);

/// Copies trained layer parameters (and the optimizer state, when given)
/// back into the genome's genes.
void absorb_parameters(Genome& genome, const Phenotype& phenotype,
                       const nn::Gradients* square_avg = nullptr);

}  // namespace coegan
