#include "coegan/evaluation.hpp"

#include "coegan/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coegan {

namespace {

std::uint64_t role_code(Role r) { return r == Role::Generator ? 1 : 2; }

// Stream tags so derived seeds for different purposes never collide.
enum : std::uint64_t { kTagBuild = 11, kTagPairing = 12, kTagFid = 13, kTagSnapshot = 14 };

std::vector<int> sample_without_replacement(int n, int k, nn::Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = std::uniform_int_distribution<int>(i, n - 1)(rng);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

double discriminator_loss(const nn::Matrix& d_real, const nn::Matrix& d_fake) {
  return nn::mean_neg_log(d_real, nullptr) + nn::mean_neg_log_one_minus(d_fake, nullptr);
}

double generator_loss(const nn::Matrix& d_fake) { return nn::mean_neg_log(d_fake, nullptr); }

double discriminator_step_loss(const nn::Network& d, const nn::Matrix& real, const nn::Matrix& fake,
                               nn::Gradients* grads) {
  nn::Tape tape_real, tape_fake;
  const nn::Matrix p_real = d.forward(real, tape_real);
  const nn::Matrix p_fake = d.forward(fake, tape_fake);
  nn::Matrix g_real, g_fake;
  const double loss = nn::mean_neg_log(p_real, &g_real) + nn::mean_neg_log_one_minus(p_fake, &g_fake);
  if (grads && std::isfinite(loss)) {
    d.backward(tape_real, g_real, grads);
    d.backward(tape_fake, g_fake, grads);
  }
  return loss;
}

double generator_step_loss(const nn::Network& g, const nn::Network& d, const nn::Matrix& z,
                           nn::Gradients* grads) {
  nn::Tape tape_g, tape_d;
  const nn::Matrix fake = g.forward(z, tape_g);
  const nn::Matrix p_fake = d.forward(fake, tape_d);
  nn::Matrix g_fake;
  const double loss = nn::mean_neg_log(p_fake, &g_fake);
  if (grads && std::isfinite(loss)) {
    // Input gradient only: the discriminator is not updated.
    const nn::Matrix d_sample = d.backward(tape_d, g_fake, nullptr);
    g.backward(tape_g, d_sample, grads);
  }
  return loss;
}

std::string_view to_string(PairingStrategy s) {
  switch (s) {
    case PairingStrategy::AllVsBest: return "all_vs_best";
    case PairingStrategy::Random: return "random";
    case PairingStrategy::AllVsAll: return "all_vs_all";
  }
  return "?";
}

PairingStrategy strategy_from_string(std::string_view s) {
  for (auto v : {PairingStrategy::AllVsBest, PairingStrategy::Random, PairingStrategy::AllVsAll})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown pairing strategy: " + std::string(s));
}

std::vector<Match> PairingPlan::matches_for(Role role, int trainee) const {
  std::vector<Match> out;
  for (const Match& m : matches)
    if (m.trainee_role == role && m.trainee == trainee) out.push_back(m);
  return out;
}

PairingPlan plan_pairings(int n_generators, int n_discriminators, const PreviousBest& previous_best,
                          PairingStrategy strategy, int k, nn::Rng& rng) {
  if (k < 1) throw std::invalid_argument("plan_pairings: k must be >= 1");
  PairingPlan plan;
  plan.strategy = strategy;
  plan.k = k;
  auto side = [&](Role role, int n_trainees, int n_adversaries) {
    for (int t = 0; t < n_trainees; ++t) {
      switch (strategy) {
        case PairingStrategy::AllVsBest:
          for (int a = 0; a < std::min(k, n_adversaries); ++a) plan.matches.push_back({t, a, role});
          break;
        case PairingStrategy::Random:
          for (int a : sample_without_replacement(n_adversaries, std::min(k, n_adversaries), rng))
            plan.matches.push_back({t, a, role});
          break;
        case PairingStrategy::AllVsAll:
          for (int a = 0; a < n_adversaries; ++a) plan.matches.push_back({t, a, role});
          break;
      }
    }
  };
  if (strategy == PairingStrategy::AllVsBest) {
    if (previous_best.generators.empty() || previous_best.discriminators.empty())
      throw std::invalid_argument("plan_pairings: all-vs-best needs a previous generation");
    side(Role::Generator, n_generators, static_cast<int>(previous_best.discriminators.size()));
    side(Role::Discriminator, n_discriminators, static_cast<int>(previous_best.generators.size()));
  } else {
    side(Role::Generator, n_generators, n_discriminators);
    side(Role::Discriminator, n_discriminators, n_generators);
  }
  return plan;
}

std::vector<int> budget_split(int total_batches, int pairings) {
  if (pairings < 1) return {};
  std::vector<int> out(static_cast<std::size_t>(pairings), total_batches / pairings);
  for (int i = 0; i < total_batches % pairings; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

TrainingStats train_pairing(Role trainee_role, nn::Network& trainee, nn::RmsProp& optimizer,
                            const nn::Network& adversary, BatchIterator* data, int batches,
                            const TrainConfig& cfg, nn::Rng& rng) {
  TrainingStats stats;
  for (int b = 0; b < batches; ++b) {
    auto grads = trainee.zero_gradients();
    double loss = 0.0;
    if (trainee_role == Role::Discriminator) {
      if (!data) throw std::invalid_argument("train_pairing: discriminator needs real data");
      const nn::Matrix real = data->next();
      const nn::Matrix fake =
          adversary.forward(nn::standard_normal(cfg.latent_dim, static_cast<int>(real.cols()), rng));
      loss = discriminator_step_loss(trainee, real, fake, &grads);
    } else {
      loss = generator_step_loss(trainee, adversary,
                                 nn::standard_normal(cfg.latent_dim, cfg.batch_size, rng), &grads);
    }
    if (!std::isfinite(loss)) {
      stats.failed = true;
      return stats;
    }
    optimizer.step(trainee, grads);
    stats.losses.push_back(loss);
    if (!trainee.all_finite()) {
      stats.failed = true;
      return stats;
    }
  }
  return stats;
}

void evaluate_generation(std::vector<Genome>& generators, std::vector<Genome>& discriminators,
                         const PairingPlan& plan, const PreviousBest& previous_best,
                         const EvaluationContext& ctx) {
  if (!ctx.extractor || !ctx.real_stats || !ctx.data)
    throw std::invalid_argument("evaluate_generation: incomplete context");
  const auto seed_for = [&](std::uint64_t tag, Role role, std::uint64_t a, std::uint64_t b = 0) {
    return derive_seed({ctx.seed, static_cast<std::uint64_t>(ctx.generation), tag, role_code(role), a, b});
  };

  auto build_all = [&](const std::vector<Genome>& pop, Role role, std::uint64_t tag) {
    std::vector<Phenotype> out;
    out.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
      nn::Rng rng(seed_for(tag, role, i));
      out.push_back(build_phenotype(pop[i], infer_shapes(pop[i], ctx.sample_shape, ctx.shape), rng));
    }
    return out;
  };

  std::vector<Phenotype> gen_ph = build_all(generators, Role::Generator, kTagBuild);
  std::vector<Phenotype> disc_ph = build_all(discriminators, Role::Discriminator, kTagBuild);
  for (std::size_t i = 0; i < generators.size(); ++i)
    generators[i].reused_gene_count = gen_ph[i].reused_gene_count;
  for (std::size_t i = 0; i < discriminators.size(); ++i)
    discriminators[i].reused_gene_count = disc_ph[i].reused_gene_count;

  // Adversaries are immutable snapshots taken before any training.
  std::vector<nn::Network> gen_adv, disc_adv;
  if (plan.uses_previous_best()) {
    for (const auto& p : build_all(previous_best.generators, Role::Generator, kTagSnapshot))
      gen_adv.push_back(p.network);
    for (const auto& p : build_all(previous_best.discriminators, Role::Discriminator, kTagSnapshot))
      disc_adv.push_back(p.network);
  } else {
    for (const auto& p : gen_ph) gen_adv.push_back(p.network);
    for (const auto& p : disc_ph) disc_adv.push_back(p.network);
  }

  const int total = ctx.train.batches_per_generation;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const auto matches = plan.matches_for(Role::Generator, static_cast<int>(i));
    const auto budget = budget_split(total, static_cast<int>(matches.size()));
    nn::RmsProp opt(ctx.train.optimizer, gen_ph[i].square_avg);
    bool failed = false;
    for (std::size_t m = 0; m < matches.size() && !failed; ++m) {
      nn::Rng rng(seed_for(kTagPairing, Role::Generator, i, static_cast<std::uint64_t>(matches[m].adversary)));
      const auto stats = train_pairing(Role::Generator, gen_ph[i].network, opt,
                                       disc_adv.at(static_cast<std::size_t>(matches[m].adversary)),
                                       nullptr, budget[m], ctx.train, rng);
      failed = stats.failed;
    }
    Genome& g = generators[i];
    if (failed) {
      g.fitness = kFitnessSentinel;
    } else {
      nn::Rng rng(seed_for(kTagFid, Role::Generator, i));
      g.fitness = generator_fitness(gen_ph[i].network, ctx.shape.latent_dim, *ctx.extractor,
                                    *ctx.real_stats, ctx.fid_samples, rng);
    }
    g.evaluated = true;
    absorb_parameters(g, gen_ph[i], &opt.square_avg());
  }

  for (std::size_t i = 0; i < discriminators.size(); ++i) {
    const auto matches = plan.matches_for(Role::Discriminator, static_cast<int>(i));
    const auto budget = budget_split(total, static_cast<int>(matches.size()));
    nn::RmsProp opt(ctx.train.optimizer, disc_ph[i].square_avg);
    bool failed = false;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < matches.size() && !failed; ++m) {
      nn::Rng rng(seed_for(kTagPairing, Role::Discriminator, i, static_cast<std::uint64_t>(matches[m].adversary)));
      const auto stats = train_pairing(Role::Discriminator, disc_ph[i].network, opt,
                                       gen_adv.at(static_cast<std::size_t>(matches[m].adversary)),
                                       ctx.data, budget[m], ctx.train, rng);
      failed = stats.failed;
      for (double l : stats.losses) sum += l;
      count += stats.losses.size();
    }
    Genome& d = discriminators[i];
    d.fitness = (failed || count == 0) ? kFitnessSentinel : sum / static_cast<double>(count);
    d.evaluated = true;
    absorb_parameters(d, disc_ph[i], &opt.square_avg());
  }
}

}  // namespace coegan
