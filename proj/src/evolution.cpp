#include "coegan/evolution.hpp"

#include "coegan/genome_io.hpp"
#include "coegan/random.hpp"
#include "coegan/variation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace coegan {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum : std::uint64_t { kTagData = 101, kTagRing = 102 };

std::unique_ptr<FeatureExtractor> make_extractor(const RunConfig& cfg, const Dataset& data,
                                                 const fs::path& cache_dir) {
  if (cfg.extractor == "identity") return std::make_unique<IdentityExtractor>();
  if (cfg.extractor == "flatten") return std::make_unique<FlattenExtractor>();
  ClassifierConfig cc;
  const fs::path cache = cache_dir.empty() ? fs::path() : cache_dir / ("convnet_" + data.id + ".bin");
  if (!cache.empty())
    if (auto loaded = ConvClassifierExtractor::load(cache, data.sample_shape, cc))
      return std::make_unique<ConvClassifierExtractor>(std::move(*loaded));
  if (data.labels.empty())
    throw std::runtime_error("convnet extractor needs labelled data (label file missing)");
  auto trained = ConvClassifierExtractor::train(data.samples, data.labels, data.sample_shape, cc);
  if (!cache.empty()) trained.save(cache);
  return std::make_unique<ConvClassifierExtractor>(std::move(trained));
}

std::vector<Genome> top_k(const std::vector<Genome>& pop, int k) {
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
  std::vector<Genome> out;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < k; ++i) out.push_back(pop[order[i]]);
  return out;
}

double mean_layers(const std::vector<Genome>& pop) {
  double s = 0.0;
  for (const auto& g : pop) s += static_cast<double>(g.genes.size());
  return pop.empty() ? 0.0 : s / static_cast<double>(pop.size());
}

// Speciate, allocate and breed one role. Fills the role's report fields.
std::vector<Genome> breed(const std::vector<Genome>& pop, SpeciationState& species, int pop_size,
                          const RunConfig& cfg, const nn::TensorShape& sample_shape,
                          EvolutionState& s, RoleReport& rr) {
  SpeciationState assigned = assign_species(pop, species, s.rng);
  rr.threshold = assigned.threshold;
  assigned.threshold =
      adjust_threshold(assigned, static_cast<int>(assigned.species.size()), cfg.threshold_step);
  const std::vector<int> slots = allocate_offspring(assigned, pop, pop_size);

  const VariationConfig vcfg{cfg.rates, cfg.genome_limit, cfg.ranges};
  const ShapeConfig shape{cfg.latent_dim, cfg.base_channels};
  std::vector<Genome> next;
  next.reserve(static_cast<std::size_t>(pop_size));
  for (std::size_t si = 0; si < assigned.species.size(); ++si) {
    const Species& sp = assigned.species[si];
    double sum = 0.0;
    for (int m : sp.members) sum += pop[static_cast<std::size_t>(m)].fitness;
    rr.species.push_back({sp.id, static_cast<int>(sp.members.size()),
                          sum / static_cast<double>(sp.members.size())});

    int remaining = slots[si];
    if (cfg.elitism && remaining > 0) {
      const int best = *std::min_element(sp.members.begin(), sp.members.end(), [&](int a, int b) {
        return pop[static_cast<std::size_t>(a)].fitness < pop[static_cast<std::size_t>(b)].fitness;
      });
      Genome elite = pop[static_cast<std::size_t>(best)];
      elite.evaluated = false;
      next.push_back(std::move(elite));
      --remaining;
    }
    for (; remaining > 0; --remaining) {
      const Genome& p1 = pop[static_cast<std::size_t>(tournament_select(sp.members, pop, cfg.k_t, s.rng))];
      Genome child = mutate(p1, vcfg, s.rng, s.ids);
      std::vector<const Genome*> parents{&p1};
      if (cfg.crossover_rate > 0.0 && std::bernoulli_distribution(cfg.crossover_rate)(s.rng)) {
        const Genome& p2 =
            pop[static_cast<std::size_t>(tournament_select(sp.members, pop, cfg.k_t, s.rng))];
        child = crossover(child, p2, cfg.genome_limit, s.rng);
        parents.push_back(&p2);
      }
      const auto violations = validate(child, cfg.genome_limit, cfg.ranges);
      if (!violations.empty())
        throw std::logic_error("bred an invalid genome: " + violations.front().invariant);
      child = transfer_parameters(parents, child, infer_shapes(child, sample_shape, shape));
      next.push_back(std::move(child));
    }
  }
  species = std::move(assigned);
  return next;
}

RoleReport summarize(const std::vector<Genome>& pop) {
  RoleReport r;
  r.best_fitness = std::min_element(pop.begin(), pop.end(), [](const Genome& a, const Genome& b) {
                     return a.fitness < b.fitness;
                   })->fitness;
  double sum = 0.0;
  for (const auto& g : pop) {
    sum += g.fitness;
    r.reused_genes += g.reused_gene_count;
  }
  r.mean_fitness = sum / static_cast<double>(pop.size());
  r.mean_layers = mean_layers(pop);
  return r;
}

}  // namespace

Environment make_environment(const RunConfig& cfg, const fs::path& cache_dir) {
  Environment env;
  if (!cache_dir.empty()) fs::create_directories(cache_dir);
  if (cfg.dataset == "ring") {
    nn::Rng rng(derive_seed({cfg.seed, kTagRing}));
    env.dataset = synthetic_ring(cfg.ring, cfg.ring_samples, rng);
    env.ring_centers = ring_centers(cfg.ring.modes, cfg.ring.radius);
  } else {
    std::string root = cfg.data_root;
    if (root.empty())
      if (const char* e = std::getenv("COEGAN_DATA_ROOT")) root = e;
    if (root.empty())
      throw std::runtime_error("MNIST location unknown: set data_root or COEGAN_DATA_ROOT");
    env.dataset = load_mnist(root);
  }
  env.extractor = make_extractor(cfg, env.dataset, cache_dir);
  const fs::path stats_cache = cache_dir.empty()
                                   ? fs::path()
                                   : cache_dir / ("real_stats_" + env.extractor->id() + "_" +
                                                  env.dataset.id + ".bin");
  if (!stats_cache.empty())
    if (auto cached = load_stats(stats_cache, env.extractor->id(), env.dataset.id)) {
      env.real_stats = std::move(*cached);
      return env;
    }
  env.real_stats = feature_stats(*env.extractor, env.dataset.samples);
  if (!stats_cache.empty()) save_stats(stats_cache, env.extractor->id(), env.dataset.id, env.real_stats);
  return env;
}

EvolutionState initialize(const RunConfig& cfg) {
  if (auto problems = validate_config(cfg); !problems.empty()) throw ConfigError(std::move(problems));
  EvolutionState s;
  s.rng.seed(cfg.seed);
  for (int i = 0; i < cfg.pop_gen; ++i)
    s.generators.push_back(new_random_genome(Role::Generator, s.rng, cfg.genome_limit, s.ids, cfg.ranges));
  for (int i = 0; i < cfg.pop_disc; ++i)
    s.discriminators.push_back(
        new_random_genome(Role::Discriminator, s.rng, cfg.genome_limit, s.ids, cfg.ranges));
  const SpeciationConfig sc{cfg.species, cfg.initial_threshold, cfg.threshold_step};
  s.generator_species = SpeciationState::initial(sc);
  s.discriminator_species = SpeciationState::initial(sc);
  return s;
}

PairingStrategy strategy_for_generation(const RunConfig& cfg, int generation) {
  if (cfg.strategy == PairingStrategy::AllVsBest && generation == 0) return PairingStrategy::Random;
  return cfg.strategy;
}

GenerationReport step_generation(EvolutionState& s, const RunConfig& cfg, const Environment& env) {
  const auto t0 = std::chrono::steady_clock::now();
  const PairingPlan plan =
      plan_pairings(static_cast<int>(s.generators.size()), static_cast<int>(s.discriminators.size()),
                    s.previous_best, strategy_for_generation(cfg, s.generation), cfg.k, s.rng);

  BatchIterator data(env.dataset, cfg.batch_size, derive_seed({cfg.seed, kTagData}), s.data_state);
  EvaluationContext ctx;
  ctx.sample_shape = env.dataset.sample_shape;
  ctx.shape = {cfg.latent_dim, cfg.base_channels};
  ctx.train = {cfg.batch_size, cfg.batches_per_gen, cfg.latent_dim, {cfg.learning_rate}};
  ctx.data = &data;
  ctx.extractor = env.extractor.get();
  ctx.real_stats = &env.real_stats;
  ctx.fid_samples = cfg.fid_samples;
  ctx.seed = cfg.seed;
  ctx.generation = s.generation;
  evaluate_generation(s.generators, s.discriminators, plan, s.previous_best, ctx);
  s.data_state = data.state();

  GenerationReport rep;
  rep.generation = s.generation + 1;
  rep.generators = summarize(s.generators);
  rep.discriminators = summarize(s.discriminators);

  s.previous_best.generators = top_k(s.generators, cfg.k);
  s.previous_best.discriminators = top_k(s.discriminators, cfg.k);

  s.generators = breed(s.generators, s.generator_species, cfg.pop_gen, cfg,
                       env.dataset.sample_shape, s, rep.generators);
  s.discriminators = breed(s.discriminators, s.discriminator_species, cfg.pop_disc, cfg,
                           env.dataset.sample_shape, s, rep.discriminators);
  ++s.generation;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

namespace {

RunResult continue_run(RunResult result, const RunConfig& cfg, const Environment& env,
                       const RunOptions& opts) {
  const bool files = !opts.run_dir.empty();
  while (result.state.generation < cfg.generations &&
         (opts.stop_after < 0 || result.state.generation < opts.stop_after)) {
    EvolutionState next = result.state;
    GenerationReport rep;
    try {
      rep = step_generation(next, cfg, env);
    } catch (const std::exception& e) {
      if (files) {
        std::ofstream(opts.run_dir / "FAILED")
            << "generation " << result.state.generation + 1 << ": " << e.what() << '\n';
      }
      throw;
    }
    result.state = std::move(next);
    result.reports.push_back(rep);
    if (files) {
      emit_report_row(opts.run_dir, rep);
      save_checkpoint(opts.run_dir, result.state, cfg, result.reports);
    }
    if (opts.on_generation) opts.on_generation(rep, result.state);
  }
  return result;
}

}  // namespace

RunResult run(const RunConfig& cfg, const Environment& env, const RunOptions& opts) {
  if (!opts.run_dir.empty() && latest_checkpoint(opts.run_dir))
    throw std::runtime_error(opts.run_dir.string() + " already holds a run; resume it or pick another directory");
  RunResult result{initialize(cfg), {}};
  if (!opts.run_dir.empty()) {
    fs::create_directories(opts.run_dir);
    std::ofstream(opts.run_dir / "config.json") << config_to_json(cfg).dump(2) << '\n';
    write_report_files(opts.run_dir, {});
    save_checkpoint(opts.run_dir, result.state, cfg, result.reports);
  }
  return continue_run(std::move(result), cfg, env, opts);
}

RunResult resume(const RunConfig& cfg, const Environment& env, const RunOptions& opts) {
  const auto latest = latest_checkpoint(opts.run_dir);
  if (!latest) throw ResumeError("no checkpoint found in " + opts.run_dir.string());
  auto [state, reports] = load_checkpoint(*latest, cfg);
  fs::remove(opts.run_dir / "FAILED");
  write_report_files(opts.run_dir, reports);
  std::ofstream(opts.run_dir / "config.json") << config_to_json(cfg).dump(2) << '\n';
  return continue_run(RunResult{std::move(state), std::move(reports)}, cfg, env, opts);
}

// ---------------------------------------------------------------- checkpoints

namespace {

std::string gen_dir_name(int generation) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gen_%04d", generation);
  return buf;
}

std::string index_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

json species_to_json(const SpeciationState& s) {
  json arr = json::array();
  for (const Species& sp : s.species)
    arr.push_back({{"id", sp.id}, {"members", sp.members}, {"representative", genome_to_json(sp.representative)}});
  return {{"threshold", s.threshold},
          {"target_species", s.target_species},
          {"next_species_id", s.next_species_id},
          {"species", arr}};
}

SpeciationState species_from_json(const json& j) {
  SpeciationState s;
  s.threshold = j.at("threshold").get<double>();
  s.target_species = j.at("target_species").get<int>();
  s.next_species_id = j.at("next_species_id").get<int>();
  for (const json& sp : j.at("species"))
    s.species.push_back({sp.at("id").get<int>(), genome_from_json(sp.at("representative")),
                         sp.at("members").get<std::vector<int>>()});
  return s;
}

void save_population(const fs::path& dir, const std::vector<Genome>& pop) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < pop.size(); ++i) save_genome(dir, index_stem(i), pop[i]);
}

std::vector<Genome> load_population(const fs::path& dir, std::size_t n) {
  std::vector<Genome> pop;
  for (std::size_t i = 0; i < n; ++i) pop.push_back(load_genome(dir, index_stem(i)));
  return pop;
}

}  // namespace

void save_checkpoint(const fs::path& run_dir, const EvolutionState& s, const RunConfig& cfg,
                     std::span<const GenerationReport> reports) {
  const fs::path root = run_dir / "checkpoints";
  const fs::path final_dir = root / gen_dir_name(s.generation);
  const fs::path tmp = root / (gen_dir_name(s.generation) + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  std::ostringstream rng_state;
  rng_state << s.rng;
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(report_to_json(r));
  const json state{
      {"config_hash", config_hash(cfg)},
      {"generation", s.generation},
      {"rng", rng_state.str()},
      {"next_lineage_id", s.ids.peek()},
      {"data_state", {s.data_state.epoch, s.data_state.position}},
      {"population_sizes", {s.generators.size(), s.discriminators.size()}},
      {"previous_best_sizes", {s.previous_best.generators.size(), s.previous_best.discriminators.size()}},
      {"species", {{"generator", species_to_json(s.generator_species)},
                   {"discriminator", species_to_json(s.discriminator_species)}}},
      {"reports", reps}};
  std::ofstream(tmp / "state.json") << state.dump(1) << '\n';
  save_population(tmp / "generators", s.generators);
  save_population(tmp / "discriminators", s.discriminators);
  save_population(tmp / "best_generators", s.previous_best.generators);
  save_population(tmp / "best_discriminators", s.previous_best.discriminators);
  write_report_files(tmp, reports);

  fs::remove_all(final_dir);
  fs::rename(tmp, final_dir);

  if (cfg.keep_checkpoints > 0) {
    std::vector<fs::path> all;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && e.path().filename().string().rfind("gen_", 0) == 0 &&
          e.path().extension() != ".tmp")
        all.push_back(e.path());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i + static_cast<std::size_t>(cfg.keep_checkpoints) < all.size(); ++i)
      fs::remove_all(all[i]);
  }
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const fs::path root = run_dir / "checkpoints";
  if (!fs::exists(root)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("gen_", 0) != 0 || name.ends_with(".tmp")) continue;
    if (!fs::exists(e.path() / "state.json")) continue;
    if (!best || name > best->filename().string()) best = e.path();
  }
  return best;
}

std::pair<EvolutionState, std::vector<GenerationReport>> load_checkpoint(const fs::path& dir,
                                                                         const RunConfig& cfg) {
  std::ifstream is(dir / "state.json");
  if (!is) throw ResumeError("missing state.json in " + dir.string());
  const json j = json::parse(is);
  const std::string want = config_hash(cfg);
  const std::string have = j.at("config_hash").get<std::string>();
  if (have != want)
    throw ResumeError("checkpoint config hash " + have + " does not match current config " + want);

  EvolutionState s;
  s.generation = j.at("generation").get<int>();
  std::istringstream rng_state(j.at("rng").get<std::string>());
  rng_state >> s.rng;
  if (!rng_state) throw ResumeError("corrupt RNG state in checkpoint");
  s.ids = IdSource(j.at("next_lineage_id").get<std::int64_t>());
  s.data_state = {j.at("data_state").at(0).get<std::uint64_t>(), j.at("data_state").at(1).get<std::uint64_t>()};
  const auto sizes = j.at("population_sizes");
  const auto best_sizes = j.at("previous_best_sizes");
  s.generators = load_population(dir / "generators", sizes.at(0).get<std::size_t>());
  s.discriminators = load_population(dir / "discriminators", sizes.at(1).get<std::size_t>());
  s.previous_best.generators = load_population(dir / "best_generators", best_sizes.at(0).get<std::size_t>());
  s.previous_best.discriminators =
      load_population(dir / "best_discriminators", best_sizes.at(1).get<std::size_t>());
  s.generator_species = species_from_json(j.at("species").at("generator"));
  s.discriminator_species = species_from_json(j.at("species").at("discriminator"));
  std::vector<GenerationReport> reports;
  for (const json& r : j.at("reports")) reports.push_back(report_from_json(r));
  return {std::move(s), std::move(reports)};
}

}  // namespace coegan
