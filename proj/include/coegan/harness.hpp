#pragma once

#include "coegan/evolution.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace coegan {

/// Defaults, then the config file (if any), then `overrides`. An empty file
/// yields the defaults.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const nlohmann::json& overrides = nlohmann::json::object());

/// `n` samples from a generator genome, one per column.
nn::Matrix generate_samples(const Genome& generator, const RunConfig& cfg,
                            nn::TensorShape sample_shape, int n, nn::Rng& rng);

/// Writes a rows×cols grayscale grid (PGM) for image data, or a scatter plot
/// over the mode centers (PPM) for the ring. Returns the path written, which
/// is `path` with the matching extension.
std::filesystem::path emit_sample_grid(const Genome& generator, const RunConfig& cfg,
                                       const Environment& env, nn::Rng& rng,
                                       std::filesystem::path path);

struct ExperimentResult {
  std::vector<std::filesystem::path> run_dirs;
  std::vector<double> final_best;  // best generator fitness of the last generation
  std::optional<AggregateSummary> summary;  // repeat > 1 only
};

/// One run in `out_dir`, or `repeat` runs in `out_dir/seed_<s>` with seeds
/// cfg.seed, cfg.seed+1, ... plus aggregate.csv.
ExperimentResult run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                int repeat = 1);

/// Continues a run directory from its newest checkpoint using its echoed config.
RunResult resume_experiment(const std::filesystem::path& run_dir);

/// Re-renders report CSVs, plots and the final sample grid from the newest
/// checkpoint.
void render_report(const std::filesystem::path& run_dir);

}  // namespace coegan
