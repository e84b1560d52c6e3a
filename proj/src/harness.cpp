#include "coegan/harness.hpp"

#include "coegan/random.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

namespace coegan {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum : std::uint64_t { kTagGrid = 201 };
constexpr int kScatterSamples = 1000;
constexpr int kScatterSize = 256;

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string grid_stem(int generation) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gen_%04d", generation);
  return buf;
}

// Best evaluated generator of the last completed generation.
const Genome* best_generator(const EvolutionState& s) {
  return s.previous_best.generators.empty() ? nullptr : &s.previous_best.generators.front();
}

void finalize_run(const fs::path& run_dir, const RunConfig& cfg, const Environment& env,
                  const RunResult& result) {
  write_run_plots(run_dir, result.reports);
  if (const Genome* best = best_generator(result.state)) {
    nn::Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(result.state.generation), kTagGrid}));
    emit_sample_grid(*best, cfg, env, rng, run_dir / "samples");
  }
}

RunOptions options_for(const fs::path& run_dir, const RunConfig& cfg, const Environment& env) {
  RunOptions opts;
  opts.run_dir = run_dir;
  opts.on_generation = [&cfg, &env, run_dir](const GenerationReport& rep, const EvolutionState& s) {
    std::cerr << "generation " << rep.generation << "  best G " << rep.generators.best_fitness
              << "  best D " << rep.discriminators.best_fitness << "  (" << rep.wall_seconds << " s)\n";
    if (const Genome* best = best_generator(s)) {
      nn::Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(rep.generation), kTagGrid}));
      fs::create_directories(run_dir / "samples");
      emit_sample_grid(*best, cfg, env, rng, run_dir / "samples" / grid_stem(rep.generation));
    }
  };
  return opts;
}

RunConfig read_run_config(const fs::path& run_dir) {
  std::ifstream is(run_dir / "config.json");
  if (!is) throw ResumeError("no config.json in " + run_dir.string());
  return config_from_json(json::parse(is));
}

}  // namespace

RunConfig parse_config(const std::optional<fs::path>& file, const json& overrides) {
  RunConfig cfg;
  if (file) {
    std::ifstream is(*file);
    if (!is) throw ConfigError({"cannot open config file " + file->string()});
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::parse_error& e) {
        throw ConfigError({file->string() + ": " + e.what()});
      }
      cfg = config_from_json(j, cfg);
    }
  }
  return config_from_json(overrides, cfg);
}

nn::Matrix generate_samples(const Genome& generator, const RunConfig& cfg,
                            nn::TensorShape sample_shape, int n, nn::Rng& rng) {
  const ShapePlan plan = infer_shapes(generator, sample_shape, {cfg.latent_dim, cfg.base_channels});
  const Phenotype ph = build_phenotype(generator, plan, rng);
  return ph.network.forward(nn::standard_normal(cfg.latent_dim, n, rng));
}

fs::path emit_sample_grid(const Genome& generator, const RunConfig& cfg, const Environment& env,
                          nn::Rng& rng, fs::path path) {
  const nn::TensorShape shape = env.dataset.sample_shape;
  if (!env.ring_centers.empty()) {
    const nn::Matrix x = generate_samples(generator, cfg, shape, kScatterSamples, rng);
    path.replace_extension(".ppm");
    write_pnm(path, scatter_plot(x, env.ring_centers, kScatterSize));
    return path;
  }
  const nn::Matrix x = generate_samples(generator, cfg, shape, cfg.grid_rows * cfg.grid_cols, rng);
  path.replace_extension(".pgm");
  write_pnm(path, tile_samples(x, shape, cfg.grid_rows, cfg.grid_cols));
  return path;
}

ExperimentResult run_experiment(const RunConfig& cfg, const fs::path& out_dir, int repeat) {
  if (repeat < 1) throw ConfigError({"repeat must be >= 1"});
  ExperimentResult out;
  fs::create_directories(out_dir);
  for (int i = 0; i < repeat; ++i) {
    RunConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const fs::path dir = repeat == 1 ? out_dir : out_dir / seed_dir(c.seed);
    const Environment env = make_environment(c, out_dir / "cache");
    const RunResult result = run(c, env, options_for(dir, c, env));
    finalize_run(dir, c, env, result);
    out.run_dirs.push_back(dir);
    if (!result.reports.empty()) out.final_best.push_back(result.reports.back().generators.best_fitness);
  }
  if (repeat > 1 && out.final_best.size() >= 2) {
    out.summary = aggregate(out.final_best);
    std::ofstream os(out_dir / "aggregate.csv");
    os.precision(10);
    os << "runs,mean_final_best,stddev,ci95_low,ci95_high\n"
       << out.summary->runs << ',' << out.summary->mean << ',' << out.summary->stddev << ','
       << out.summary->ci_low << ',' << out.summary->ci_high << '\n';
    std::ofstream per(out_dir / "final_best.csv");
    per.precision(10);
    per << "seed,final_best\n";
    for (std::size_t i = 0; i < out.final_best.size(); ++i)
      per << cfg.seed + i << ',' << out.final_best[i] << '\n';
  }
  return out;
}

RunResult resume_experiment(const fs::path& run_dir) {
  const RunConfig cfg = read_run_config(run_dir);
  // Repeated runs share the cache one level up.
  const fs::path own = run_dir / "cache", shared = run_dir.parent_path() / "cache";
  const Environment env = make_environment(cfg, fs::exists(own) || !fs::exists(shared) ? own : shared);
  RunResult result = resume(cfg, env, options_for(run_dir, cfg, env));
  finalize_run(run_dir, cfg, env, result);
  return result;
}

void render_report(const fs::path& run_dir) {
  const RunConfig cfg = read_run_config(run_dir);
  const auto latest = latest_checkpoint(run_dir);
  if (!latest) throw ResumeError("no checkpoint found in " + run_dir.string());
  auto [state, reports] = load_checkpoint(*latest, cfg);
  write_report_files(run_dir, reports);
  // Repeated runs share the cache one level up.
  const fs::path own = run_dir / "cache", shared = run_dir.parent_path() / "cache";
  const Environment env = make_environment(cfg, fs::exists(own) || !fs::exists(shared) ? own : shared);
  finalize_run(run_dir, cfg, env, RunResult{std::move(state), std::move(reports)});
}

}  // namespace coegan
