#pragma once

#include "coegan/nn.hpp"

#include <memory>

namespace testutil {

// Two-layer generator (latent -> hidden -> 2) and discriminator
// (2 -> hidden -> 1 probability) with smooth activations.
struct ToyPair {
  coegan::nn::Network g, d;
};

inline ToyPair toy_pair(int latent, int hidden, coegan::nn::Rng& rng) {
  using namespace coegan::nn;
  ToyPair p;
  p.g.add(std::make_unique<Dense>(latent, hidden, rng));
  p.g.add(std::make_unique<ActivationLayer>(Activation::ELU));
  p.g.add(std::make_unique<Dense>(hidden, 2, rng));
  p.g.add(std::make_unique<ActivationLayer>(Activation::Tanh));
  p.d.add(std::make_unique<Dense>(2, hidden, rng));
  p.d.add(std::make_unique<ActivationLayer>(Activation::Tanh));
  p.d.add(std::make_unique<Dense>(hidden, 1, rng));
  p.d.add(std::make_unique<ActivationLayer>(Activation::Sigmoid));
  return p;
}

}  // namespace testutil
